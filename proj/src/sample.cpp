#include "flip/sample.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "flip/errors.hpp"

namespace flip {

namespace {

std::string padded_label(const char* prefix, Index value, std::size_t width) {
    std::string digits = std::to_string(value);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return prefix + digits;
}

SignPanel make_panel(Index n, Index t) {
    SignPanel panel;
    panel.entities = synthetic_entities(n);
    panel.timestamps = synthetic_timestamps(t);
    panel.signs.resize(n, t);
    return panel;
}

void check_memoryless(const CouplingSet& params, const char* what) {
    params.validate();
    detail::require(params.lag_count() == 0,
                    std::string(what) + " targets the memoryless model");
}

void stationarity_check(const SignPanel& panel, std::vector<std::string>* warnings) {
    if (!warnings || panel.t() < 20) return;
    const Index half = panel.t() / 2;
    for (Index i = 0; i < panel.n(); ++i) {
        const auto row = panel.signs.row(i).cast<double>();
        const double m1 = row.head(half).mean();
        const double m2 = row.tail(panel.t() - half).mean();
        const double v1 = std::max(0.0, 1.0 - m1 * m1);
        const double v2 = std::max(0.0, 1.0 - m2 * m2);
        const double se = std::sqrt(v1 / static_cast<double>(half) +
                                    v2 / static_cast<double>(panel.t() - half));
        if (std::abs(m1 - m2) > 4.0 * std::max(se, 1e-12))
            warnings->push_back("entity " + panel.entities[static_cast<std::size_t>(i)] +
                                ": first/second half mean signs differ by " +
                                std::to_string(std::abs(m1 - m2)) +
                                " (> 4 standard errors); chain may not be stationary");
    }
}

}  // namespace

void GlauberConfig::validate() const {
    detail::require(sweeps_per_record >= 1, "sweeps_per_record must be positive");
    detail::require(attempts_per_sweep >= 0,
                    "attempts_per_sweep must be non-negative (0 = default 5N)");
    detail::require(burn_in_records >= 0, "burn_in_records must be non-negative");
}

void glauber_step(Eigen::Ref<Eigen::VectorXi> state, const CouplingSet& params,
                  Rng& rng) {
    const Index n = params.size();
    detail::require_shape(state.size() == n, "glauber_step: state size mismatch");
    const auto i = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    const double u = rng.uniform();
    double field = params.h(i);
    for (Index j = 0; j < n; ++j) field += params.j(i, j) * state(j);
    const double p = 0.5 * (1.0 - state(i) * std::tanh(field));
    if (p > u) state(i) = -state(i);
}

SignPanel glauber_sample(const CouplingSet& params, Index t_records,
                         const GlauberConfig& config,
                         std::vector<std::string>* warnings) {
    check_memoryless(params, "glauber_sample");
    config.validate();
    detail::require(t_records >= 1, "t_records must be positive");
    const Index n = params.size();
    const Index attempts =
        config.attempts_per_sweep > 0 ? config.attempts_per_sweep : 5 * n;

    Rng rng(config.seed);
    Eigen::VectorXi state(n);
    for (Index i = 0; i < n; ++i) state(i) = rng.sign();

    SignPanel panel = make_panel(n, t_records);
    const Index total = config.burn_in_records + t_records;
    for (Index rec = 0; rec < total; ++rec) {
        for (Index sweep = 0; sweep < config.sweeps_per_record; ++sweep)
            for (Index a = 0; a < attempts; ++a) glauber_step(state, params, rng);
        if (rec >= config.burn_in_records)
            panel.signs.col(rec - config.burn_in_records) = state;
    }
    stationarity_check(panel, warnings);
    return panel;
}

SignPanel exact_sample(const CouplingSet& params, Index t_records,
                       std::uint64_t seed) {
    check_memoryless(params, "exact_sample");
    detail::require(t_records >= 1, "t_records must be positive");
    const Index n = params.size();
    const Vector probs = enumerate_distribution(params);

    Vector cumulative(probs.size());
    double acc = 0.0;
    for (Index k = 0; k < probs.size(); ++k) {
        acc += probs(k);
        cumulative(k) = acc;
    }

    Rng rng(seed);
    SignPanel panel = make_panel(n, t_records);
    for (Index t = 0; t < t_records; ++t) {
        const double u = rng.uniform();
        Index lo = 0, hi = cumulative.size() - 1;
        while (lo < hi) {
            const Index mid = (lo + hi) / 2;
            if (cumulative(mid) > u)
                hi = mid;
            else
                lo = mid + 1;
        }
        for (Index i = 0; i < n; ++i)
            panel.signs(i, t) = (static_cast<std::uint64_t>(lo) >> i) & 1u ? 1 : -1;
    }
    return panel;
}

SignPanel sample_dg(const DgParams& params, Index t_records, std::uint64_t seed) {
    const Index n = params.mu.size();
    detail::require(n >= 1, "sample_dg: at least one entity required");
    detail::require_shape(params.sigma.rows() == n && params.sigma.cols() == n,
                          "sample_dg: sigma must be N x N");
    detail::require(t_records >= 1, "t_records must be positive");
    detail::require((params.sigma - params.sigma.transpose()).cwiseAbs().maxCoeff() <=
                        1e-8,
                    "sample_dg: sigma must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(params.sigma);
    detail::require(es.eigenvalues().minCoeff() >= -1e-8,
                    "sample_dg: sigma must be positive semidefinite");
    const Matrix factor =
        es.eigenvectors() *
        es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    Rng rng(seed);
    SignPanel panel = make_panel(n, t_records);
    Vector z(n);
    for (Index t = 0; t < t_records; ++t) {
        for (Index i = 0; i < n; ++i) z(i) = rng.normal();
        const Vector g = params.mu + factor * z;
        for (Index i = 0; i < n; ++i) panel.signs(i, t) = g(i) >= 0.0 ? 1 : -1;
    }
    return panel;
}

std::vector<std::string> synthetic_entities(Index n) {
    detail::require(n >= 1, "entity count must be positive");
    const std::size_t width = std::max<std::size_t>(2, std::to_string(n - 1).size());
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) labels.push_back(padded_label("S", i, width));
    return labels;
}

std::vector<std::string> synthetic_timestamps(Index t) {
    detail::require(t >= 1, "time bin count must be positive");
    const std::size_t width = std::max<std::size_t>(6, std::to_string(t - 1).size());
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(t));
    for (Index k = 0; k < t; ++k) labels.push_back(padded_label("t", k, width));
    return labels;
}

}  // namespace flip
