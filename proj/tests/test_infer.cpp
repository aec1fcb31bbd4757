#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "flip/errors.hpp"
#include "flip/infer.hpp"
#include "flip/model.hpp"
#include "flip/rng.hpp"
#include "flip/sample.hpp"
#include "flip/types.hpp"

using flip::CouplingSet;
using flip::FitConfig;
using flip::Index;
using flip::Matrix;
using flip::Penalty;
using flip::ReversalPanel;
using flip::SignMatrix;
using flip::SignPanel;
using flip::Vector;

namespace {

SignPanel panel_from(const SignMatrix& signs) {
    SignPanel p;
    p.signs = signs;
    p.entities = flip::synthetic_entities(signs.rows());
    p.timestamps = flip::synthetic_timestamps(signs.cols());
    return p;
}

SignMatrix random_signs(Index n, Index t, std::uint64_t seed) {
    flip::Rng rng(seed);
    SignMatrix s(n, t);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < t; ++k) s(i, k) = rng.sign();
    return s;
}

// Entries bounded away from zero so l1 subgradients are plain signs.
double away_from_zero(flip::Rng& rng) {
    return (0.05 + 0.25 * rng.uniform()) * rng.sign();
}

CouplingSet random_params(Index n, Index lag_count, std::uint64_t seed) {
    flip::Rng rng(seed);
    CouplingSet p = CouplingSet::zeros(n, lag_count);
    for (Index i = 0; i < n; ++i) {
        p.h(i) = away_from_zero(rng);
        for (Index j = i + 1; j < n; ++j) {
            p.j(i, j) = away_from_zero(rng);
            p.j(j, i) = p.j(i, j);
        }
    }
    for (Matrix& lag : p.lags)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) lag(i, j) = away_from_zero(rng);
    return p;
}

// Central finite difference along an arbitrary parameter bump.
template <typename Bump>
double fd_slope(const SignPanel& panel, const CouplingSet& params,
                const FitConfig& config, Bump&& bump) {
    const double eps = 1e-5;
    CouplingSet plus = params;
    CouplingSet minus = params;
    bump(plus, eps);
    bump(minus, -eps);
    return (rpl_objective(panel, plus, config) - rpl_objective(panel, minus, config)) /
           (2.0 * eps);
}

double max_gradient_error(const SignPanel& panel, const CouplingSet& params,
                          const FitConfig& config) {
    const CouplingSet grad = flip::rpl_gradient(panel, params, config);
    const Index n = params.size();
    double worst = 0.0;
    auto record = [&](double analytic, double numeric) {
        const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
        worst = std::max(worst, err);
    };
    for (Index i = 0; i < n; ++i)
        record(grad.h(i), fd_slope(panel, params, config,
                                   [i](CouplingSet& p, double e) { p.h(i) += e; }));
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            record(grad.j(i, j), fd_slope(panel, params, config, [i, j](CouplingSet& p, double e) {
                       p.j(i, j) += e;
                       p.j(j, i) += e;
                   }));
    for (std::size_t tau = 0; tau < params.lags.size(); ++tau)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                record(grad.lags[tau](i, j),
                       fd_slope(panel, params, config, [tau, i, j](CouplingSet& p, double e) {
                           p.lags[tau](i, j) += e;
                       }));
    return worst;
}

ReversalPanel reversal_panel_from(const flip::BinaryMatrix& flips) {
    ReversalPanel p;
    p.flips = flips;
    p.entities = flip::synthetic_entities(flips.rows());
    p.timestamps = flip::synthetic_timestamps(flips.cols());
    return p;
}

}  // namespace

TEST_CASE("analytic pseudo-likelihood gradient matches finite differences") {
    const Index n = 4;
    const Index t = 60;
    for (Index lag_count : {Index{0}, Index{1}, Index{2}}) {
        for (Penalty penalty : {Penalty::l2, Penalty::l1}) {
            for (std::uint64_t seed = 1; seed <= 3; ++seed) {
                const SignPanel panel = panel_from(random_signs(n, t, seed));
                const CouplingSet params = random_params(n, lag_count, seed + 100);
                FitConfig config;
                config.penalty = penalty;
                CAPTURE(lag_count);
                CAPTURE(seed);
                CHECK(max_gradient_error(panel, params, config) <= 1e-6);
            }
        }
    }
}

TEST_CASE("gradient respects the tied-pair symmetry") {
    const SignPanel panel = panel_from(random_signs(5, 40, 7));
    const CouplingSet params = random_params(5, 1, 8);
    const CouplingSet grad = flip::rpl_gradient(panel, params, {});
    CHECK((grad.j - grad.j.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(grad.j.diagonal().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit_rpml reaches the same optimum from different starts") {
    const SignPanel panel = panel_from(random_signs(4, 400, 11));
    FitConfig config;
    const auto [a, ra] = flip::fit_rpml(panel, 0, config);
    const CouplingSet init = random_params(4, 0, 12);
    const auto [b, rb] = flip::fit_rpml(panel, 0, config, &init);
    CHECK(ra.converged);
    CHECK(rb.converged);
    CHECK(ra.objective == doctest::Approx(rb.objective).epsilon(1e-9));
    CHECK((a.j - b.j).cwiseAbs().maxCoeff() <= 1e-4);
    CHECK((a.h - b.h).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("fit_rpml report bookkeeping") {
    const SignPanel panel = panel_from(random_signs(3, 50, 21));

    SUBCASE("default ridge weight is one over the usable bin count") {
        const auto [p0, r0] = flip::fit_rpml(panel, 0, {});
        CHECK(r0.lambda == 1.0 / 50.0);
        CHECK(r0.method == "newton");
        const auto [p2, r2] = flip::fit_rpml(panel, 2, {});
        CHECK(r2.lambda == 1.0 / 48.0);
        (void)p0;
        (void)p2;
    }

    SUBCASE("newton trace is non-decreasing") {
        const auto [params, report] = flip::fit_rpml(panel, 1, {});
        (void)params;
        REQUIRE(!report.objective_trace.empty());
        for (std::size_t k = 1; k < report.objective_trace.size(); ++k)
            CHECK(report.objective_trace[k] >= report.objective_trace[k - 1] - 1e-12);
        // The trace sums untied per-row objectives, which count each coupling
        // pair twice in the penalty; the reported objective counts it once.
        CHECK(std::isfinite(report.objective));
        CHECK(report.objective >= report.objective_trace.back() - 1e-6);
    }

    SUBCASE("iteration starvation is reported, not thrown") {
        FitConfig config;
        config.max_iterations = 1;
        const auto [params, report] = flip::fit_rpml(panel, 0, config);
        (void)params;
        CHECK(!report.converged);
        CHECK(!report.warnings.empty());
    }

    SUBCASE("result is symmetric with a zero diagonal") {
        const auto [params, report] = flip::fit_rpml(panel, 1, {});
        (void)report;
        CHECK((params.j - params.j.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(params.j.diagonal().cwiseAbs().maxCoeff() == 0.0);
        CHECK(params.lag_count() == 1);
    }
}

TEST_CASE("fit_rpml is bitwise reproducible across thread counts") {
    const SignPanel panel = panel_from(random_signs(6, 150, 31));
    FitConfig one;
    one.threads = 1;
    FitConfig two;
    two.threads = 2;
    const auto [pa, ra] = flip::fit_rpml(panel, 1, one);
    const auto [pb, rb] = flip::fit_rpml(panel, 1, two);
    CHECK((pa.j - pb.j).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pa.h - pb.h).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pa.lags[0] - pb.lags[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(ra.objective == rb.objective);
}

TEST_CASE("large l1 weight drives every parameter to exactly zero") {
    const SignPanel panel = panel_from(random_signs(5, 200, 41));
    FitConfig config;
    config.penalty = Penalty::l1;
    config.lambda = 5.0;
    const auto [params, report] = flip::fit_rpml(panel, 1, config);
    CHECK(report.method == "fista");
    CHECK(report.converged);
    CHECK(params.j.cwiseAbs().maxCoeff() == 0.0);
    CHECK(params.h.cwiseAbs().maxCoeff() == 0.0);
    CHECK(params.lags[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("segment fitting") {
    const SignMatrix signs = random_signs(3, 80, 51);

    SUBCASE("one segment reproduces the panel fit bit for bit") {
        const auto [pa, ra] = flip::fit_rpml(panel_from(signs), 1, {});
        const auto [pb, rb] = flip::fit_rpml_segments({signs}, 1, {});
        CHECK((pa.j - pb.j).cwiseAbs().maxCoeff() == 0.0);
        CHECK((pa.h - pb.h).cwiseAbs().maxCoeff() == 0.0);
        CHECK((pa.lags[0] - pb.lags[0]).cwiseAbs().maxCoeff() == 0.0);
        CHECK(ra.objective == rb.objective);
    }

    SUBCASE("each segment reserves its own lag history") {
        const auto [params, report] =
            flip::fit_rpml_segments({random_signs(3, 30, 52), random_signs(3, 20, 53)}, 2, {});
        (void)params;
        CHECK(report.lambda == 1.0 / 46.0);  // (30 - 2) + (20 - 2) usable bins
    }

    SUBCASE("frozen couplings stay exactly zero") {
        const auto [params, report] = flip::fit_rpml_segments({signs}, 1, {}, false);
        (void)report;
        CHECK(params.j.cwiseAbs().maxCoeff() == 0.0);
        CHECK(params.h.cwiseAbs().maxCoeff() > 0.0);
    }

    SUBCASE("segments shorter than the lag order are rejected") {
        CHECK_THROWS_AS(flip::fit_rpml_segments({random_signs(3, 2, 54)}, 2, {}),
                        flip::InsufficientDataError);
    }

    SUBCASE("segments must agree on the entity count") {
        CHECK_THROWS_AS(
            flip::fit_rpml_segments({random_signs(3, 20, 55), random_signs(4, 20, 56)}, 0, {}),
            flip::ShapeError);
    }

    SUBCASE("non-sign entries are rejected") {
        SignMatrix bad = signs;
        bad(1, 3) = 0;
        CHECK_THROWS_AS(flip::fit_rpml_segments({bad}, 0, {}), flip::ValidationError);
    }
}

TEST_CASE("fit_independent maps row means through atanh") {
    SignMatrix signs(2, 4);
    signs.row(0) << 1, 1, 1, -1;  // mean 0.5
    signs.row(1) << 1, 1, 1, 1;   // mean 1, clamped
    const CouplingSet params = flip::fit_independent(panel_from(signs));
    CHECK(params.h(0) == doctest::Approx(0.5493061443340549).epsilon(1e-12));
    CHECK(std::isfinite(params.h(1)));
    CHECK(params.h(1) > 10.0);
    CHECK(params.j.cwiseAbs().maxCoeff() == 0.0);
    CHECK(params.lag_count() == 0);
}

TEST_CASE("homogenize") {
    const CouplingSet params = random_params(4, 0, 61);

    SUBCASE("replaces couplings by their off-diagonal mean and zeroes fields") {
        const CouplingSet flat = flip::homogenize(params);
        const double mean = params.j.sum() / 12.0;
        CHECK(flat.h.cwiseAbs().maxCoeff() == 0.0);
        CHECK(flat.j.diagonal().cwiseAbs().maxCoeff() == 0.0);
        for (Index i = 0; i < 4; ++i)
            for (Index j = 0; j < 4; ++j)
                if (i != j) CHECK(flat.j(i, j) == doctest::Approx(mean).epsilon(1e-12));
    }

    SUBCASE("is idempotent") {
        const CouplingSet once = flip::homogenize(params);
        const CouplingSet twice = flip::homogenize(once);
        CHECK((once.j - twice.j).cwiseAbs().maxCoeff() <= 1e-15);
    }

    SUBCASE("rejects lagged coupling sets") {
        CHECK_THROWS_AS(flip::homogenize(random_params(3, 1, 62)), flip::ValidationError);
    }
}

TEST_CASE("reversal-vector fitting") {
    SUBCASE("a single bin is not enough") {
        flip::BinaryMatrix flips = flip::BinaryMatrix::Zero(3, 1);
        CHECK_THROWS_AS(flip::fit_reversal_pairwise(reversal_panel_from(flips), {}),
                        flip::InsufficientDataError);
    }

    SUBCASE("independent reversal rates land on the diagonal") {
        const Index n = 3;
        const Index t = 4000;
        const Vector rates = (Vector(3) << 0.2, 0.35, 0.5).finished();
        flip::Rng rng(71);
        flip::BinaryMatrix flips(n, t);
        for (Index k = 0; k < t; ++k)
            for (Index i = 0; i < n; ++i) flips(i, k) = rng.uniform() < rates(i) ? 1 : 0;
        const auto [params, report] =
            flip::fit_reversal_pairwise(reversal_panel_from(flips), {});
        CHECK(report.converged);
        for (Index i = 0; i < n; ++i) {
            const double logit = std::log(rates(i) / (1.0 - rates(i)));
            CHECK(std::abs(params.w(i, i) - logit) <= 0.25);
        }
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (i != j) CHECK(std::abs(params.w(i, j)) <= 0.2);
        CHECK((params.w - params.w.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("Poisson reversal-count baseline") {
    SUBCASE("rate is the mean simultaneous-reversal count") {
        flip::BinaryMatrix flips(3, 4);
        flips << 1, 0, 1, 1,  //
            0, 0, 1, 1,       //
            0, 0, 0, 1;       // per-bin counts 1, 0, 2, 3
        const flip::PoissonModel model = flip::fit_poisson(reversal_panel_from(flips));
        CHECK(model.rate == 1.5);
    }

    SUBCASE("an empty panel is rejected") {
        ReversalPanel empty;
        empty.flips.resize(3, 0);
        empty.entities = flip::synthetic_entities(3);
        CHECK_THROWS_AS(flip::fit_poisson(empty), flip::InsufficientDataError);
    }

    SUBCASE("truncated count law is normalized and keeps Poisson ratios") {
        flip::PoissonModel model;
        model.rate = 1.3;
        const Vector pmf = flip::poisson_count_distribution(model, 6);
        CHECK(pmf.size() == 7);
        CHECK(pmf.sum() == doctest::Approx(1.0).epsilon(1e-12));
        double factorial = 1.0;
        for (Index k = 1; k <= 6; ++k) {
            factorial *= static_cast<double>(k);
            CHECK(pmf(k) / pmf(0) ==
                  doctest::Approx(std::pow(1.3, k) / factorial).epsilon(1e-10));
        }
    }

    SUBCASE("zero rate is a point mass at zero") {
        const Vector pmf = flip::poisson_count_distribution({}, 4);
        CHECK(pmf(0) == 1.0);
        CHECK(pmf.tail(4).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("invalid inputs are rejected") {
        flip::PoissonModel negative;
        negative.rate = -0.5;
        CHECK_THROWS_AS(flip::poisson_count_distribution(negative, 4), flip::ValidationError);
        CHECK_THROWS_AS(flip::poisson_count_distribution({}, -1), flip::ValidationError);
    }
}

TEST_CASE("dichotomized-Gaussian moment matching") {
    SUBCASE("balanced uncorrelated rows give zero means and identity covariance") {
        SignMatrix signs(2, 4);
        signs.col(0) << 1, 1;
        signs.col(1) << 1, -1;
        signs.col(2) << -1, 1;
        signs.col(3) << -1, -1;
        const flip::DgParams dg = flip::fit_dichotomized_gaussian(panel_from(signs));
        CHECK(dg.mu.cwiseAbs().maxCoeff() <= 1e-9);
        CHECK((dg.sigma - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-9);
    }

    SUBCASE("a 0.4 sign correlation maps to a sin(pi/5) latent correlation") {
        // 7, 3, 3, 7 columns of (+,+), (+,-), (-,+), (-,-): zero means,
        // E[s0 s1] = 8/20, so the latent correlation solves
        // 1/4 + asin(rho)/(2 pi) = 0.35.
        SignMatrix signs(2, 20);
        Index col = 0;
        auto fill = [&](int a, int b, int copies) {
            for (int c = 0; c < copies; ++c, ++col) signs.col(col) << a, b;
        };
        fill(1, 1, 7);
        fill(1, -1, 3);
        fill(-1, 1, 3);
        fill(-1, -1, 7);
        const flip::DgParams dg = flip::fit_dichotomized_gaussian(panel_from(signs));
        CHECK(dg.mu.cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(dg.sigma(0, 1) == doctest::Approx(0.5877852522924731).epsilon(1e-6));
        CHECK(dg.sigma(1, 0) == dg.sigma(0, 1));
        CHECK(dg.sigma(0, 0) == 1.0);
        CHECK(dg.sigma(1, 1) == 1.0);
    }

    SUBCASE("an indefinite pairwise solution is projected back to PSD") {
        // Pair correlations of this panel are jointly infeasible for a
        // Gaussian, so the assembled matrix has a negative eigenvalue.
        SignMatrix signs(4, 14);
        Index col = 0;
        auto fill = [&](int a, int b, int c, int d, int copies) {
            for (int k = 0; k < copies; ++k, ++col) signs.col(col) << a, b, c, d;
        };
        fill(1, 1, -1, 1, 1);
        fill(-1, -1, 1, 1, 5);
        fill(1, -1, -1, 1, 4);
        fill(-1, 1, -1, -1, 4);
        std::vector<std::string> warnings;
        const flip::DgParams dg =
            flip::fit_dichotomized_gaussian(panel_from(signs), &warnings);
        REQUIRE(!warnings.empty());
        CHECK(warnings.front().find("indefinite") != std::string::npos);
        CHECK((dg.sigma.diagonal() - Vector::Ones(4)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((dg.sigma - dg.sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        const Eigen::SelfAdjointEigenSolver<Matrix> es(dg.sigma);
        CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    }
}

TEST_CASE("exact likelihood fitting recovers parameters from exact moments") {
    const Index n = 3;
    CouplingSet truth = CouplingSet::zeros(n, 0);
    truth.h << 0.1, -0.2, 0.15;
    truth.j(0, 1) = truth.j(1, 0) = 0.3;
    truth.j(0, 2) = truth.j(2, 0) = -0.25;
    truth.j(1, 2) = truth.j(2, 1) = 0.2;

    const Vector probs = flip::enumerate_distribution(truth);
    Vector means = Vector::Zero(n);
    Matrix moments = Matrix::Identity(n, n);
    for (Index b = 0; b < probs.size(); ++b) {
        const Vector s = flip::state_from_bits(static_cast<std::uint64_t>(b), n);
        means += probs(b) * s;
        moments += probs(b) * (s * s.transpose() - Matrix::Identity(n, n));
    }

    FitConfig config;
    config.gradient_tolerance = 1e-10;
    const auto [fitted, report] = flip::fit_exact_ml(means, moments, config);
    CHECK(report.converged);
    CHECK(report.lambda == 0.0);
    CHECK((fitted.h - truth.h).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((fitted.j - truth.j).cwiseAbs().maxCoeff() <= 1e-6);

    SUBCASE("only the ridge penalty is supported") {
        FitConfig l1;
        l1.penalty = Penalty::l1;
        CHECK_THROWS_AS(flip::fit_exact_ml(means, moments, l1), flip::ValidationError);
    }

    SUBCASE("moment shapes must agree") {
        CHECK_THROWS_AS(flip::fit_exact_ml(means, Matrix::Identity(4, 4), config),
                        flip::ShapeError);
    }

    SUBCASE("enumeration is capped") {
        CHECK_THROWS_AS(
            flip::fit_exact_ml(Vector::Zero(21), Matrix::Identity(21, 21), config),
            flip::CapacityError);
    }
}

TEST_CASE("fit configuration validation") {
    FitConfig config;
    config.lambda = -1.0;
    CHECK_THROWS_AS(config.validate(), flip::ValidationError);
    config = {};
    config.max_iterations = 0;
    CHECK_THROWS_AS(config.validate(), flip::ValidationError);
    config = {};
    config.gradient_tolerance = 0.0;
    CHECK_THROWS_AS(config.validate(), flip::ValidationError);
    config = {};
    config.threads = 0;
    CHECK_THROWS_AS(config.validate(), flip::ValidationError);
}
