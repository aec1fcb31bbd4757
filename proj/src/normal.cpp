#include "flip/normal.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace flip {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kTwoPi = 6.283185307179586;

// Gauss-Legendre nodes/weights on [-1, 1], computed once by Newton iteration
// on the Legendre polynomial.
template <int M>
struct GaussLegendre {
    std::array<double, M> node{};
    std::array<double, M> weight{};
    GaussLegendre() {
        for (int k = 0; k < M; ++k) {
            double x = std::cos(M_PI * (k + 0.75) / (M + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int j = 2; j <= M; ++j) {
                    const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = M * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            node[static_cast<std::size_t>(k)] = x;
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= M; ++j) {
                const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            const double dp = M * (x * p1 - p0) / (x * x - 1.0);
            weight[static_cast<std::size_t>(k)] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

const GaussLegendre<64>& quadrature() {
    static const GaussLegendre<64> gl;
    return gl;
}

}  // namespace

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(kTwoPi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("normal_quantile: p must lie in (0, 1)");

    // Acklam's rational approximation, then one Halley refinement.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

double binormal_cdf(double a, double b, double rho) {
    if (!(rho >= -1.0 && rho <= 1.0))
        throw std::domain_error("binormal_cdf: rho must lie in [-1, 1]");
    if (std::isinf(a) || std::isinf(b)) {
        if (a == -std::numeric_limits<double>::infinity() ||
            b == -std::numeric_limits<double>::infinity())
            return 0.0;
        if (a == std::numeric_limits<double>::infinity()) return normal_cdf(b);
        return normal_cdf(a);
    }
    if (rho >= 1.0 - 1e-12) return normal_cdf(std::min(a, b));
    if (rho <= -1.0 + 1e-12) return std::max(0.0, normal_cdf(a) + normal_cdf(b) - 1.0);

    // Plackett: Phi2 = Phi(a)Phi(b) + int_0^rho phi2(a,b;r) dr, with the
    // substitution r = sin(theta) removing the 1/sqrt(1-r^2) factor.
    const double upper = std::asin(rho);
    const auto& gl = quadrature();
    double integral = 0.0;
    for (std::size_t k = 0; k < gl.node.size(); ++k) {
        const double theta = 0.5 * upper * (gl.node[k] + 1.0);
        const double s = std::sin(theta);
        const double cc = 1.0 - s * s;
        integral += gl.weight[k] * std::exp(-(a * a + b * b - 2.0 * a * b * s) / (2.0 * cc));
    }
    integral *= 0.5 * upper / kTwoPi;
    const double v = normal_cdf(a) * normal_cdf(b) + integral;
    return std::min(1.0, std::max(0.0, v));
}

}  // namespace flip
