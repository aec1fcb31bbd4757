#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flip/model.hpp"
#include "flip/types.hpp"

namespace flip {

enum class Penalty { l2, l1 };

// Regularized pseudo-likelihood settings. An unset lambda resolves to 1/T'
// where T' is the number of usable time bins, so the penalty vanishes as the
// series grows.
struct FitConfig {
    std::optional<double> lambda;
    Penalty penalty = Penalty::l2;
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

struct FitReport {
    std::vector<double> objective_trace;  // summed per-row optimizer traces
    bool converged = false;
    int iterations_used = 0;   // max over per-row subproblems
    double objective = 0.0;    // joint regularized pseudo-likelihood at the result
    double lambda = 0.0;       // the value actually used
    std::string method;        // "newton" (l2) or "fista" (l1)
    std::vector<std::string> warnings;
};

// Latent-Gaussian threshold model: sign(g) with g ~ N(mu, sigma), unit
// diagonal on sigma.
struct DgParams {
    Vector mu;
    Matrix sigma;
};

struct PoissonModel {
    double rate = 0.0;
};

// Joint regularized pseudo-likelihood
//   (1/T') sum_t sum_i log(1/2)[1 + s_it tanh(f_it)] - lambda * ||theta||^2
// with f_it the conditional field of entity i at bin t and the squared norm
// counting h_i once, each unordered coupling pair once, and every lag entry
// once. For the l1 penalty the norm is the sum of absolute values under the
// same counting.
double rpl_objective(const SignPanel& panel, const CouplingSet& params,
                     const FitConfig& config = {});

// Analytic gradient of rpl_objective under the tied-pair convention: the
// coupling slot (i, j) carries the derivative with respect to the single
// symmetric parameter shared by (i, j) and (j, i). Matches central finite
// differences that perturb both slots together.
CouplingSet rpl_gradient(const SignPanel& panel, const CouplingSet& params,
                         const FitConfig& config = {});

// Pseudo-likelihood fit: independent per-entity logistic subproblems (Newton
// with backtracking for l2, FISTA with soft-thresholding for l1), couplings
// averaged as (J + J^T)/2 after convergence. Deterministic.
std::pair<CouplingSet, FitReport> fit_rpml(const SignPanel& panel, Index lags,
                                           const FitConfig& config = {},
                                           const CouplingSet* init = nullptr);

// Same fit over a disjoint union of contiguous segments (cross-validation
// training sets). Each segment supplies its own lag history; bins within the
// first `lags` columns of a segment serve as history only. When
// include_couplings is false the instantaneous couplings are frozen at zero
// and only fields plus lagged couplings are estimated.
std::pair<CouplingSet, FitReport> fit_rpml_segments(
    const std::vector<SignMatrix>& segments, Index lags,
    const FitConfig& config = {}, bool include_couplings = true,
    const CouplingSet* init = nullptr);

// Independent-entity baseline: J = 0, no lags, h_i = atanh(clamped mean sign).
CouplingSet fit_independent(const SignPanel& panel);

// Homogeneous baseline: every off-diagonal coupling replaced by the
// off-diagonal mean, fields zeroed. Requires a memoryless coupling set.
CouplingSet homogenize(const CouplingSet& params);

// Pairwise model for simultaneous-reversal vectors x in {0,1}^N, fitted by
// regularized pseudo-likelihood with active diagonal terms.
std::pair<ReversalCouplingSet, FitReport> fit_reversal_pairwise(
    const ReversalPanel& reversals, const FitConfig& config = {});

// Maximum-likelihood Poisson rate for the per-bin simultaneous-reversal count.
PoissonModel fit_poisson(const ReversalPanel& reversals);

// Poisson count law truncated and renormalized to {0..n}.
Vector poisson_count_distribution(const PoissonModel& model, Index n);

// Moment-matched dichotomized Gaussian: closed-form means, per-pair bracketed
// root finding on the latent correlation, nearest-PSD repair with a warning
// when the assembled matrix is indefinite.
DgParams fit_dichotomized_gaussian(const SignPanel& panel,
                                   std::vector<std::string>* warnings = nullptr);

// Exact maximum likelihood on enumerated moments (small N): Newton ascent of
//   sum_i h_i m_i + sum_{i<j} J_ij c_ij - log Z(h, J)
// where m, c are the supplied first and second moments. Moments are clamped
// 1e-9 inside their feasible box to keep the optimum finite.
std::pair<CouplingSet, FitReport> fit_exact_ml(const Vector& means,
                                               const Matrix& pair_moments,
                                               const FitConfig& config = {});

}  // namespace flip
