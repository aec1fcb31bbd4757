#include "flip/model.hpp"

#include <algorithm>
#include <bit>

namespace flip {

namespace {

constexpr double kSymTol = 1e-9;

void check_square(const Matrix& m, Index n, const char* what) {
    detail::require_shape(m.rows() == n && m.cols() == n, std::string(what) + ": matrix must be N x N");
}

void check_cap(Index n, const char* what) {
    if (n > kEnumerationCap)
        throw CapacityError(std::string(what) + ": N = " + std::to_string(n) +
                            " exceeds the enumeration cap " + std::to_string(kEnumerationCap) +
                            "; use a sampling-based estimate instead");
    detail::require(n >= 1, std::string(what) + ": N must be at least 1");
}

// Log-weights of all 2^N states visited in Gray-code order, so each step
// flips a single spin and updates the energy in O(N). Entry `bits` is the
// state with s_i = +1 where bit i is set.
template <typename LogWeightOf>
std::vector<double> enumerate_log_weights(Index n, LogWeightOf&& flip_delta,
                                          double initial_energy) {
    const std::uint64_t states = std::uint64_t{1} << n;
    std::vector<double> logw(states);
    double energy = initial_energy;
    std::uint64_t bits = 0;  // all spins "down"
    logw[0] = energy;
    for (std::uint64_t k = 1; k < states; ++k) {
        const int b = std::countr_zero(k);
        energy += flip_delta(b);
        bits ^= std::uint64_t{1} << b;
        logw[bits] = energy;
    }
    return logw;
}

double log_sum_exp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

std::vector<double> sign_model_log_weights(const CouplingSet& params) {
    const Index n = params.size();
    Vector s = Vector::Constant(n, -1.0);
    Vector cache = params.j * s;  // (J s)_i
    const double e0 = 0.5 * s.dot(cache) + params.h.dot(s);
    return enumerate_log_weights(n, [&](int b) {
        const double old = s(b);
        const double delta = -2.0 * old * (cache(b) + params.h(b));
        s(b) = -old;
        cache -= 2.0 * old * params.j.col(b);
        return delta;
    }, e0);
}

std::vector<double> reversal_model_log_weights(const ReversalCouplingSet& params) {
    const Index n = params.size();
    Vector x = Vector::Zero(n);
    Vector cache = Vector::Zero(n);  // (W x)_i
    return enumerate_log_weights(n, [&](int b) {
        // Toggling x_b changes x^T W x by +-(2 (Wx)_b + W_bb) excluding, then
        // including, the self term; track it explicitly.
        const double old = x(b);
        const double nv = 1.0 - old;
        const double delta = (nv - old) * (2.0 * (cache(b) - params.w(b, b) * old) +
                                           params.w(b, b) * (nv + old));
        x(b) = nv;
        cache += (nv - old) * params.w.col(b);
        return delta;
    }, 0.0);
}

Vector normalized_from_log_weights(std::vector<double> logw) {
    const double logz = log_sum_exp(logw);
    Vector p(static_cast<Index>(logw.size()));
    for (std::size_t k = 0; k < logw.size(); ++k)
        p(static_cast<Index>(k)) = std::exp(logw[k] - logz);
    return p;
}

}  // namespace

CouplingSet CouplingSet::zeros(Index n, Index lag_count) {
    CouplingSet c;
    c.j = Matrix::Zero(n, n);
    c.h = Vector::Zero(n);
    c.lags.assign(static_cast<std::size_t>(lag_count), Matrix::Zero(n, n));
    return c;
}

void CouplingSet::validate() const {
    const Index n = size();
    check_square(j, n, "CouplingSet.j");
    detail::require(j.allFinite() && h.allFinite(), "CouplingSet: entries must be finite");
    const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
    detail::require((j - j.transpose()).cwiseAbs().maxCoeff() <= kSymTol * scale,
                    "CouplingSet: J must be symmetric");
    detail::require(j.diagonal().cwiseAbs().maxCoeff() <= kSymTol * scale,
                    "CouplingSet: J must have a zero diagonal");
    for (const Matrix& k : lags) {
        check_square(k, n, "CouplingSet.lags");
        detail::require(k.allFinite(), "CouplingSet: lag entries must be finite");
    }
}

void CouplingSet::symmetrize() {
    j = ((j + j.transpose()) / 2.0).eval();
    j.diagonal().setZero();
}

ReversalCouplingSet ReversalCouplingSet::zeros(Index n) {
    return ReversalCouplingSet{Matrix::Zero(n, n)};
}

void ReversalCouplingSet::validate() const {
    const Index n = size();
    check_square(w, n, "ReversalCouplingSet.w");
    detail::require(w.allFinite(), "ReversalCouplingSet: entries must be finite");
    const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
    detail::require((w - w.transpose()).cwiseAbs().maxCoeff() <= kSymTol * scale,
                    "ReversalCouplingSet: W must be symmetric");
}

void ReversalCouplingSet::symmetrize() { w = ((w + w.transpose()) / 2.0).eval(); }

double log_partition_function(const CouplingSet& params) {
    check_cap(params.size(), "partition_function");
    detail::require_shape(params.lag_count() == 0,
                          "partition_function: memoryless model required");
    return log_sum_exp(sign_model_log_weights(params));
}

double partition_function(const CouplingSet& params) {
    return std::exp(log_partition_function(params));
}

Vector enumerate_distribution(const CouplingSet& params) {
    check_cap(params.size(), "enumerate_distribution");
    detail::require_shape(params.lag_count() == 0,
                          "enumerate_distribution: memoryless model required");
    return normalized_from_log_weights(sign_model_log_weights(params));
}

Vector state_from_bits(std::uint64_t bits, Index n) {
    Vector s(n);
    for (Index i = 0; i < n; ++i)
        s(i) = (bits >> i) & 1 ? 1.0 : -1.0;
    return s;
}

double reversal_log_partition(const ReversalCouplingSet& params) {
    check_cap(params.size(), "reversal_log_partition");
    return log_sum_exp(reversal_model_log_weights(params));
}

Vector enumerate_reversal_distribution(const ReversalCouplingSet& params) {
    check_cap(params.size(), "enumerate_reversal_distribution");
    return normalized_from_log_weights(reversal_model_log_weights(params));
}

}  // namespace flip
