#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "flip/types.hpp"

namespace flip {

// Exact enumeration is allowed up to this many entities (~10^6 states).
inline constexpr Index kEnumerationCap = 20;

// Pairwise couplings J (symmetric, zero diagonal), fields h, and optional
// lagged couplings K^tau, tau = 1..L. L = 0 is the memoryless model.
struct CouplingSet {
    Matrix j;                  // N x N
    Vector h;                  // N
    std::vector<Matrix> lags;  // L matrices, N x N, generally asymmetric

    Index size() const { return h.size(); }
    Index lag_count() const { return static_cast<Index>(lags.size()); }

    static CouplingSet zeros(Index n, Index lag_count = 0);
    void validate() const;

    // Enforces the storage convention: J <- (J + J^T)/2 with zero diagonal.
    void symmetrize();
};

// Couplings of the simultaneous-reversal model on {0,1} variables. W is
// symmetric and its diagonal is an active parameter.
struct ReversalCouplingSet {
    Matrix w;  // N x N

    Index size() const { return w.rows(); }
    static ReversalCouplingSet zeros(Index n);
    void validate() const;
    void symmetrize();
};

namespace detail {

// h_i + sum_{j != i} J_ij * state_j with `state` a full length-N vector.
// J's zero diagonal makes the self term vanish, so no skip is needed.
template <typename Derived>
double local_field(Index i, const Eigen::MatrixBase<Derived>& state,
                   const CouplingSet& params) {
    double f = params.h(i);
    for (Index j = 0; j < params.size(); ++j)
        f += params.j(i, j) * static_cast<double>(state(j));
    return f;
}

// Same field with the N-1 entries of `context` standing in for the entities
// other than i, in index order.
template <typename Derived>
double local_field_context(Index i, const Eigen::MatrixBase<Derived>& context,
                           const CouplingSet& params) {
    double f = params.h(i);
    Index k = 0;
    for (Index j = 0; j < params.size(); ++j) {
        if (j == i) continue;
        f += params.j(i, j) * static_cast<double>(context(k++));
    }
    return f;
}

}  // namespace detail

// Unnormalized log-probability of a full +-1 configuration under the
// memoryless pairwise model: 1/2 sum_ij J_ij s_i s_j + sum_i h_i s_i.
template <typename Derived>
double log_weight(const Eigen::MatrixBase<Derived>& state, const CouplingSet& params) {
    detail::require_shape(state.size() == params.size(), "log_weight: state size mismatch");
    detail::require_shape(params.lag_count() == 0, "log_weight: memoryless model required");
    const Vector s = state.template cast<double>();
    return 0.5 * s.dot(params.j * s) + params.h.dot(s);
}

// log Z and Z of the memoryless model by exact enumeration (N <= cap).
double log_partition_function(const CouplingSet& params);
double partition_function(const CouplingSet& params);

// Probability of each of the 2^N configurations; entry `bits` is the state
// with s_i = +1 where bit i of `bits` is set.
Vector enumerate_distribution(const CouplingSet& params);

// Decodes a bit pattern into a +-1 state vector.
Vector state_from_bits(std::uint64_t bits, Index n);

template <typename Derived>
double exact_probability(const Eigen::MatrixBase<Derived>& state, const CouplingSet& params) {
    return std::exp(log_weight(state, params) - log_partition_function(params));
}

// p(s_i = state_i | rest of the configuration) = 1/2 [1 + s_i tanh(field_i)].
template <typename Derived>
double conditional_probability(Index i, const Eigen::MatrixBase<Derived>& state,
                               const CouplingSet& params) {
    detail::require_shape(state.size() == params.size(),
                          "conditional_probability: state size mismatch");
    detail::require(i >= 0 && i < params.size(), "conditional_probability: index out of range");
    const double f = detail::local_field(i, state, params);
    return 0.5 * (1.0 + static_cast<double>(state(i)) * std::tanh(f));
}

// Probability that entity i reverses its orientation given the current signs
// of the other entities: 1/2 [1 - prev_sign tanh(sum_{j!=i} J_ij s_j + h_i)].
template <typename Derived>
double flip_probability_instant(Index i, int prev_sign,
                                const Eigen::MatrixBase<Derived>& context,
                                const CouplingSet& params) {
    detail::require(i >= 0 && i < params.size(), "flip_probability_instant: index out of range");
    detail::require_shape(context.size() == params.size() - 1,
                          "flip_probability_instant: context must have N-1 entries");
    detail::require(prev_sign == 1 || prev_sign == -1,
                    "flip_probability_instant: prev_sign must be +-1");
    const double f = detail::local_field_context(i, context, params);
    return 0.5 * (1.0 - static_cast<double>(prev_sign) * std::tanh(f));
}

// Reversal probability with memory: the field gains sum_tau sum_j K^tau_ij
// s_{j,t-tau}. `history` holds one column per lag, column tau-1 = s_{t-tau},
// each a full length-N configuration. With all K = 0 this reduces to
// flip_probability_instant on the same inputs.
template <typename DerivedC, typename DerivedH>
double flip_probability_hist(Index i, int prev_sign,
                             const Eigen::MatrixBase<DerivedC>& context,
                             const Eigen::MatrixBase<DerivedH>& history,
                             const CouplingSet& params) {
    detail::require(i >= 0 && i < params.size(), "flip_probability_hist: index out of range");
    detail::require_shape(context.size() == params.size() - 1,
                          "flip_probability_hist: context must have N-1 entries");
    detail::require_shape(history.cols() == params.lag_count(),
                          "flip_probability_hist: history length must equal lag count");
    detail::require_shape(history.rows() == params.size() || params.lag_count() == 0,
                          "flip_probability_hist: history rows must equal N");
    detail::require(prev_sign == 1 || prev_sign == -1,
                    "flip_probability_hist: prev_sign must be +-1");
    double f = detail::local_field_context(i, context, params);
    for (Index tau = 0; tau < params.lag_count(); ++tau) {
        const Matrix& k = params.lags[static_cast<std::size_t>(tau)];
        for (Index j = 0; j < params.size(); ++j)
            f += k(i, j) * static_cast<double>(history(j, tau));
    }
    return 0.5 * (1.0 - static_cast<double>(prev_sign) * std::tanh(f));
}

// Unnormalized log-probability of a {0,1} reversal configuration:
// sum_ij W_ij x_i x_j with both orderings counted and the diagonal active.
template <typename Derived>
double reversal_log_weight(const Eigen::MatrixBase<Derived>& x,
                           const ReversalCouplingSet& params) {
    detail::require_shape(x.size() == params.size(), "reversal_log_weight: state size mismatch");
    const Vector xd = x.template cast<double>();
    return xd.dot(params.w * xd);
}

double reversal_log_partition(const ReversalCouplingSet& params);

// Probability of each {0,1}^N configuration, indexed by bit pattern.
Vector enumerate_reversal_distribution(const ReversalCouplingSet& params);

// p(x_i = 1 | x_{-i}) = sigmoid(W_ii + 2 sum_{j != i} W_ij x_j).
template <typename Derived>
double reversal_conditional_one(Index i, const Eigen::MatrixBase<Derived>& x,
                                const ReversalCouplingSet& params) {
    detail::require(i >= 0 && i < params.size(), "reversal_conditional_one: index out of range");
    detail::require_shape(x.size() == params.size(),
                          "reversal_conditional_one: state size mismatch");
    double u = params.w(i, i);
    for (Index j = 0; j < params.size(); ++j) {
        if (j == i) continue;
        u += 2.0 * params.w(i, j) * static_cast<double>(x(j));
    }
    return 1.0 / (1.0 + std::exp(-u));
}

}  // namespace flip
