#include "flip/infer.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <thread>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "flip/errors.hpp"
#include "flip/normal.hpp"

namespace flip {

namespace {

double log_sigmoid(double u) {
    if (u >= 0.0) return -std::log1p(std::exp(-u));
    return u - std::log1p(std::exp(u));
}

double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

double soft_threshold(double v, double k) {
    if (v > k) return v - k;
    if (v < -k) return v + k;
    return 0.0;
}

// ---------------------------------------------------------------------------
// Per-row logistic subproblem: maximize
//   (1/T') sum_t log sigmoid(y_t * theta . x_t)  -  penalty(theta)
// over theta, with x the feature matrix (one column per usable bin) and
// y in {-1, +1}. Every model fitted here reduces to this form.

struct RowFit {
    Vector theta;
    std::vector<double> trace;
    bool converged = false;
    int iterations = 0;
};

double row_objective(const Matrix& x, const Vector& y, const Vector& theta,
                     double lambda, Penalty penalty, Vector* u_out) {
    Vector u = x.transpose() * theta;
    double acc = 0.0;
    for (Index t = 0; t < u.size(); ++t) acc += log_sigmoid(y(t) * u(t));
    acc /= static_cast<double>(u.size());
    acc -= penalty == Penalty::l2 ? lambda * theta.squaredNorm()
                                  : lambda * theta.lpNorm<1>();
    if (u_out) *u_out = std::move(u);
    return acc;
}

RowFit fit_row_newton(const Matrix& x, const Vector& y, double lambda,
                      int max_iterations, double tol, const Vector* init) {
    const auto tn = static_cast<double>(x.cols());
    const Vector y01 = ((y.array() + 1.0) * 0.5).matrix();

    RowFit out;
    out.theta = init ? *init : Vector::Zero(x.rows());
    Vector u;
    double obj = row_objective(x, y, out.theta, lambda, Penalty::l2, &u);
    if (!std::isfinite(obj))
        throw DivergenceError("non-finite objective at the initial point", 0);
    out.trace.push_back(obj);

    while (true) {
        Vector prob(u.size());
        for (Index t = 0; t < u.size(); ++t) prob(t) = sigmoid(u(t));
        const Vector grad = x * (y01 - prob) / tn - 2.0 * lambda * out.theta;
        if (grad.lpNorm<Eigen::Infinity>() <= tol) {
            out.converged = true;
            break;
        }
        if (out.iterations >= max_iterations) break;

        const Vector w = (prob.array() * (1.0 - prob.array())).matrix();
        Matrix hess = x * w.asDiagonal() * x.transpose() / tn;
        hess.diagonal().array() += 2.0 * lambda + 1e-12;
        Vector dir = hess.ldlt().solve(grad);
        double slope = grad.dot(dir);
        if (!(slope > 0.0) || !dir.allFinite()) {
            dir = grad;
            slope = grad.squaredNorm();
        }

        bool improved = false;
        double step = 1.0;
        for (int bt = 0; bt < 60; ++bt) {
            const Vector cand = out.theta + step * dir;
            Vector cand_u;
            const double cand_obj = row_objective(x, y, cand, lambda, Penalty::l2, &cand_u);
            if (!std::isfinite(cand_obj))
                throw DivergenceError("non-finite objective during line search",
                                      out.iterations + 1);
            if (cand_obj >= obj + 1e-4 * step * slope) {
                out.theta = cand;
                u = std::move(cand_u);
                obj = cand_obj;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;  // numerically flat; leave convergence to the gradient test
        ++out.iterations;
        out.trace.push_back(obj);
    }
    return out;
}

RowFit fit_row_fista(const Matrix& x, const Vector& y, double lambda,
                     int max_iterations, double tol, const Vector* init) {
    const Index p = x.rows();
    const auto tn = static_cast<double>(x.cols());
    const Vector y01 = ((y.array() + 1.0) * 0.5).matrix();
    // Smooth-part Lipschitz bound: ||X||_F^2 / (4 T').
    const double lip = std::max(x.squaredNorm() / (4.0 * tn), 1e-12);
    const double step = 1.0 / lip;

    auto smooth_grad = [&](const Vector& v) {
        const Vector u = x.transpose() * v;
        Vector prob(u.size());
        for (Index t = 0; t < u.size(); ++t) prob(t) = sigmoid(u(t));
        return Vector(x * (y01 - prob) / tn);
    };

    RowFit out;
    out.theta = init ? *init : Vector::Zero(p);
    Vector momentum = out.theta;
    double tmom = 1.0;
    double obj = row_objective(x, y, out.theta, lambda, Penalty::l1, nullptr);
    out.trace.push_back(obj);

    while (true) {
        const Vector g = smooth_grad(out.theta);
        double resid = 0.0;
        for (Index k = 0; k < p; ++k) {
            const double r =
                out.theta(k) != 0.0
                    ? std::abs(g(k) - lambda * (out.theta(k) > 0.0 ? 1.0 : -1.0))
                    : std::max(0.0, std::abs(g(k)) - lambda);
            resid = std::max(resid, r);
        }
        if (resid <= tol) {
            out.converged = true;
            break;
        }
        if (out.iterations >= max_iterations) break;

        const Vector gz = smooth_grad(momentum);
        Vector next(p);
        for (Index k = 0; k < p; ++k)
            next(k) = soft_threshold(momentum(k) + step * gz(k), step * lambda);
        if ((momentum - next).dot(next - out.theta) > 0.0) {
            tmom = 1.0;  // momentum opposes progress: restart
            momentum = next;
        } else {
            const double tnew = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tmom * tmom));
            momentum = next + ((tmom - 1.0) / tnew) * (next - out.theta);
            tmom = tnew;
        }
        out.theta = next;
        obj = row_objective(x, y, out.theta, lambda, Penalty::l1, nullptr);
        if (!std::isfinite(obj))
            throw DivergenceError("non-finite objective", out.iterations + 1);
        ++out.iterations;
        out.trace.push_back(obj);
    }
    return out;
}

RowFit fit_row(const Matrix& x, const Vector& y, double lambda, const FitConfig& config,
               const Vector* init) {
    return config.penalty == Penalty::l2
               ? fit_row_newton(x, y, lambda, config.max_iterations,
                                config.gradient_tolerance, init)
               : fit_row_fista(x, y, lambda, config.max_iterations,
                               config.gradient_tolerance, init);
}

template <typename F>
void run_rows(Index n, int threads, F&& body) {
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (workers == 1) {
        for (Index i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (Index i = w; i < n; i += workers) body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Sign-model fitting over a union of contiguous segments.

struct SegmentSet {
    std::vector<const SignMatrix*> mats;
    Index n = 0;
    Index lags = 0;
    Index usable = 0;
};

SegmentSet make_segment_set(const std::vector<const SignMatrix*>& mats, Index lags) {
    detail::require(lags >= 0, "lag count must be non-negative");
    detail::require(!mats.empty(), "at least one data segment required");
    SegmentSet out;
    out.mats = mats;
    out.lags = lags;
    out.n = mats.front()->rows();
    detail::require(out.n >= 1, "panel must contain at least one entity");
    for (const SignMatrix* m : mats) {
        detail::require_shape(m->rows() == out.n, "segments must share the entity count");
        for (Index t = 0; t < m->cols(); ++t)
            for (Index i = 0; i < out.n; ++i)
                detail::require((*m)(i, t) == 1 || (*m)(i, t) == -1,
                                "sign entries must be +-1");
        out.usable += std::max<Index>(0, m->cols() - lags);
    }
    if (out.usable <= 0)
        throw InsufficientDataError("no usable time bins after reserving lag history");
    return out;
}

Index row_parameter_count(const SegmentSet& ss, bool include_couplings) {
    return 1 + (include_couplings ? ss.n - 1 : 0) + ss.lags * ss.n;
}

// Features are pre-scaled by 2 so that theta . x equals twice the conditional
// field and the row objective is exactly the summed log of
// 1/2 [1 + s tanh(field)].
void build_sign_row(const SegmentSet& ss, Index row, bool include_couplings,
                    Matrix& x, Vector& y) {
    x.resize(row_parameter_count(ss, include_couplings), ss.usable);
    y.resize(ss.usable);
    Index col = 0;
    for (const SignMatrix* m : ss.mats) {
        for (Index t = ss.lags; t < m->cols(); ++t, ++col) {
            Index k = 0;
            x(k++, col) = 2.0;
            if (include_couplings)
                for (Index j = 0; j < ss.n; ++j)
                    if (j != row) x(k++, col) = 2.0 * (*m)(j, t);
            for (Index tau = 1; tau <= ss.lags; ++tau)
                for (Index j = 0; j < ss.n; ++j)
                    x(k++, col) = 2.0 * (*m)(j, t - tau);
            y(col) = (*m)(row, t);
        }
    }
}

Vector encode_sign_row(const CouplingSet& params, Index row, bool include_couplings) {
    const Index n = params.size();
    Vector theta(1 + (include_couplings ? n - 1 : 0) + params.lag_count() * n);
    Index k = 0;
    theta(k++) = params.h(row);
    if (include_couplings)
        for (Index j = 0; j < n; ++j)
            if (j != row) theta(k++) = params.j(row, j);
    for (const Matrix& lag : params.lags)
        for (Index j = 0; j < n; ++j) theta(k++) = lag(row, j);
    return theta;
}

void decode_sign_row(const Vector& theta, Index row, bool include_couplings,
                     CouplingSet& params) {
    const Index n = params.size();
    Index k = 0;
    params.h(row) = theta(k++);
    if (include_couplings)
        for (Index j = 0; j < n; ++j)
            if (j != row) params.j(row, j) = theta(k++);
    for (Matrix& lag : params.lags)
        for (Index j = 0; j < n; ++j) lag(row, j) = theta(k++);
}

double coupling_penalty(const CouplingSet& params, double lambda, Penalty penalty) {
    // h once, each unordered coupling pair once, every lag entry once.
    double v;
    if (penalty == Penalty::l2) {
        v = params.h.squaredNorm() + 0.5 * params.j.squaredNorm();
        for (const Matrix& lag : params.lags) v += lag.squaredNorm();
    } else {
        v = params.h.lpNorm<1>() + 0.5 * params.j.lpNorm<1>();
        for (const Matrix& lag : params.lags) v += lag.lpNorm<1>();
    }
    return lambda * v;
}

double segment_objective(const std::vector<const SignMatrix*>& mats,
                         const CouplingSet& params, double lambda, Penalty penalty) {
    const Index l = params.lag_count();
    double acc = 0.0;
    Index usable = 0;
    for (const SignMatrix* m : mats) {
        const Matrix sd = m->cast<double>();
        for (Index t = l; t < sd.cols(); ++t) {
            Vector f = params.j * sd.col(t) + params.h;
            for (Index tau = 1; tau <= l; ++tau)
                f += params.lags[static_cast<std::size_t>(tau - 1)] * sd.col(t - tau);
            for (Index i = 0; i < sd.rows(); ++i)
                acc += log_sigmoid(2.0 * sd(i, t) * f(i));
            ++usable;
        }
    }
    if (usable == 0)
        throw InsufficientDataError("no usable time bins after reserving lag history");
    return acc / static_cast<double>(usable) - coupling_penalty(params, lambda, penalty);
}

FitReport merge_row_reports(const std::vector<RowFit>& rows) {
    FitReport report;
    report.converged = true;
    std::size_t longest = 0;
    for (const RowFit& r : rows) {
        report.converged = report.converged && r.converged;
        report.iterations_used = std::max(report.iterations_used, r.iterations);
        longest = std::max(longest, r.trace.size());
    }
    report.objective_trace.assign(longest, 0.0);
    for (const RowFit& r : rows)
        for (std::size_t k = 0; k < longest; ++k)
            report.objective_trace[k] += k < r.trace.size() ? r.trace[k] : r.trace.back();
    if (!report.converged)
        report.warnings.push_back(
            "stopped after " + std::to_string(report.iterations_used) +
            " iterations without reaching the gradient tolerance");
    return report;
}

std::pair<CouplingSet, FitReport> fit_rpml_impl(
    const std::vector<const SignMatrix*>& mats, Index lags, const FitConfig& config,
    bool include_couplings, const CouplingSet* init) {
    config.validate();
    const SegmentSet ss = make_segment_set(mats, lags);
    const double lambda =
        config.lambda ? *config.lambda : 1.0 / static_cast<double>(ss.usable);
    if (init)
        detail::require_shape(init->size() == ss.n && init->lag_count() == lags,
                              "initial parameters must match the requested shape");

    std::vector<RowFit> rows(static_cast<std::size_t>(ss.n));
    run_rows(ss.n, config.threads, [&](Index i) {
        Matrix x;
        Vector y;
        build_sign_row(ss, i, include_couplings, x, y);
        Vector theta0;
        const Vector* t0 = nullptr;
        if (init) {
            theta0 = encode_sign_row(*init, i, include_couplings);
            t0 = &theta0;
        }
        rows[static_cast<std::size_t>(i)] = fit_row(x, y, lambda, config, t0);
    });

    CouplingSet params = CouplingSet::zeros(ss.n, lags);
    for (Index i = 0; i < ss.n; ++i)
        decode_sign_row(rows[static_cast<std::size_t>(i)].theta, i, include_couplings,
                        params);
    params.symmetrize();

    FitReport report = merge_row_reports(rows);
    report.lambda = lambda;
    report.method = config.penalty == Penalty::l2 ? "newton" : "fista";
    report.objective = segment_objective(mats, params, lambda, config.penalty);
    const Index per_entity = row_parameter_count(ss, include_couplings);
    if (ss.usable < 10 * per_entity)
        report.warnings.push_back(
            "usable bins (" + std::to_string(ss.usable) + ") below 10x the " +
            std::to_string(per_entity) + " parameters per entity");
    return {std::move(params), std::move(report)};
}

}  // namespace

void FitConfig::validate() const {
    detail::require(!lambda || (*lambda >= 0.0 && std::isfinite(*lambda)),
                    "lambda must be finite and non-negative");
    detail::require(max_iterations >= 1, "max_iterations must be positive");
    detail::require(gradient_tolerance > 0.0, "gradient_tolerance must be positive");
    detail::require(threads >= 1, "threads must be positive");
}

double rpl_objective(const SignPanel& panel, const CouplingSet& params,
                     const FitConfig& config) {
    panel.validate();
    params.validate();
    config.validate();
    detail::require_shape(params.size() == panel.n(),
                          "parameter and panel entity counts differ");
    const Index usable = panel.t() - params.lag_count();
    if (usable <= 0)
        throw InsufficientDataError("no usable time bins after reserving lag history");
    const double lambda =
        config.lambda ? *config.lambda : 1.0 / static_cast<double>(usable);
    const std::vector<const SignMatrix*> mats{&panel.signs};
    return segment_objective(mats, params, lambda, config.penalty);
}

CouplingSet rpl_gradient(const SignPanel& panel, const CouplingSet& params,
                         const FitConfig& config) {
    panel.validate();
    params.validate();
    config.validate();
    detail::require_shape(params.size() == panel.n(),
                          "parameter and panel entity counts differ");
    const Index n = panel.n();
    const Index l = params.lag_count();
    const Index usable = panel.t() - l;
    if (usable <= 0)
        throw InsufficientDataError("no usable time bins after reserving lag history");
    const double lambda =
        config.lambda ? *config.lambda : 1.0 / static_cast<double>(usable);

    const Matrix sd = panel.signs.cast<double>();
    CouplingSet grad = CouplingSet::zeros(n, l);
    Matrix residual_outer = Matrix::Zero(n, n);  // sum_t r_t s_t^T
    for (Index t = l; t < sd.cols(); ++t) {
        Vector f = params.j * sd.col(t) + params.h;
        for (Index tau = 1; tau <= l; ++tau)
            f += params.lags[static_cast<std::size_t>(tau - 1)] * sd.col(t - tau);
        const Vector r = sd.col(t) - f.array().tanh().matrix();
        grad.h += r;
        residual_outer.noalias() += r * sd.col(t).transpose();
        for (Index tau = 1; tau <= l; ++tau)
            grad.lags[static_cast<std::size_t>(tau - 1)].noalias() +=
                r * sd.col(t - tau).transpose();
    }
    const double inv = 1.0 / static_cast<double>(usable);
    grad.h *= inv;
    // The tied pair parameter J_ij enters the conditionals of both i and j.
    grad.j = inv * (residual_outer + residual_outer.transpose());
    grad.j.diagonal().setZero();
    for (Matrix& lag : grad.lags) lag *= inv;

    if (config.penalty == Penalty::l2) {
        grad.h -= 2.0 * lambda * params.h;
        grad.j -= 2.0 * lambda * params.j;
        for (Index tau = 0; tau < l; ++tau)
            grad.lags[static_cast<std::size_t>(tau)] -=
                2.0 * lambda * params.lags[static_cast<std::size_t>(tau)];
    } else {
        grad.h -= lambda * params.h.array().sign().matrix();
        grad.j -= lambda * params.j.array().sign().matrix();
        for (Index tau = 0; tau < l; ++tau)
            grad.lags[static_cast<std::size_t>(tau)] -=
                lambda *
                params.lags[static_cast<std::size_t>(tau)].array().sign().matrix();
    }
    return grad;
}

std::pair<CouplingSet, FitReport> fit_rpml(const SignPanel& panel, Index lags,
                                           const FitConfig& config,
                                           const CouplingSet* init) {
    panel.validate();
    const std::vector<const SignMatrix*> mats{&panel.signs};
    return fit_rpml_impl(mats, lags, config, true, init);
}

std::pair<CouplingSet, FitReport> fit_rpml_segments(
    const std::vector<SignMatrix>& segments, Index lags, const FitConfig& config,
    bool include_couplings, const CouplingSet* init) {
    std::vector<const SignMatrix*> mats;
    mats.reserve(segments.size());
    for (const SignMatrix& s : segments) mats.push_back(&s);
    return fit_rpml_impl(mats, lags, config, include_couplings, init);
}

CouplingSet fit_independent(const SignPanel& panel) {
    panel.validate();
    CouplingSet params = CouplingSet::zeros(panel.n(), 0);
    const double cap = 1.0 - 1e-9;
    for (Index i = 0; i < panel.n(); ++i) {
        const double mean = panel.signs.row(i).cast<double>().mean();
        params.h(i) = std::atanh(std::clamp(mean, -cap, cap));
    }
    return params;
}

CouplingSet homogenize(const CouplingSet& params) {
    params.validate();
    detail::require(params.lag_count() == 0,
                    "homogenize requires a memoryless coupling set");
    const Index n = params.size();
    CouplingSet out = CouplingSet::zeros(n, 0);
    if (n > 1) {
        const double mean = params.j.sum() / static_cast<double>(n * (n - 1));
        out.j.setConstant(mean);
        out.j.diagonal().setZero();
    }
    return out;
}

std::pair<ReversalCouplingSet, FitReport> fit_reversal_pairwise(
    const ReversalPanel& reversals, const FitConfig& config) {
    reversals.validate();
    config.validate();
    const Index n = reversals.n();
    const Index tn = reversals.t();
    if (tn < 2) throw InsufficientDataError("need at least two reversal bins");
    const double lambda = config.lambda ? *config.lambda : 1.0 / static_cast<double>(tn);

    std::vector<RowFit> rows(static_cast<std::size_t>(n));
    run_rows(n, config.threads, [&](Index i) {
        Matrix x(n, tn);
        Vector y(tn);
        for (Index t = 0; t < tn; ++t) {
            Index k = 0;
            x(k++, t) = 1.0;
            for (Index j = 0; j < n; ++j)
                if (j != i) x(k++, t) = 2.0 * reversals.flips(j, t);
            y(t) = 2.0 * reversals.flips(i, t) - 1.0;
        }
        rows[static_cast<std::size_t>(i)] = fit_row(x, y, lambda, config, nullptr);
    });

    ReversalCouplingSet params = ReversalCouplingSet::zeros(n);
    for (Index i = 0; i < n; ++i) {
        const Vector& theta = rows[static_cast<std::size_t>(i)].theta;
        Index k = 0;
        params.w(i, i) = theta(k++);
        for (Index j = 0; j < n; ++j)
            if (j != i) params.w(i, j) = theta(k++);
    }
    params.symmetrize();

    FitReport report = merge_row_reports(rows);
    report.lambda = lambda;
    report.method = config.penalty == Penalty::l2 ? "newton" : "fista";
    double acc = 0.0;
    for (Index t = 0; t < tn; ++t) {
        const Vector xt = reversals.flips.col(t).cast<double>();
        const Vector wx = params.w * xt;
        for (Index i = 0; i < n; ++i) {
            const double u = params.w(i, i) + 2.0 * (wx(i) - params.w(i, i) * xt(i));
            acc += log_sigmoid((2.0 * xt(i) - 1.0) * u);
        }
    }
    acc /= static_cast<double>(tn);
    const double diag2 = params.w.diagonal().squaredNorm();
    const double diag1 = params.w.diagonal().lpNorm<1>();
    acc -= config.penalty == Penalty::l2
               ? lambda * 0.5 * (params.w.squaredNorm() + diag2)
               : lambda * 0.5 * (params.w.lpNorm<1>() + diag1);
    report.objective = acc;
    if (tn < 10 * n)
        report.warnings.push_back("reversal bins (" + std::to_string(tn) +
                                  ") below 10x the " + std::to_string(n) +
                                  " parameters per entity");
    return {std::move(params), std::move(report)};
}

PoissonModel fit_poisson(const ReversalPanel& reversals) {
    reversals.validate();
    if (reversals.t() < 1) throw InsufficientDataError("empty reversal panel");
    PoissonModel model;
    model.rate = reversals.flips.cast<double>().colwise().sum().mean();
    return model;
}

Vector poisson_count_distribution(const PoissonModel& model, Index n) {
    detail::require(n >= 0, "count support must be non-negative");
    detail::require(model.rate >= 0.0 && std::isfinite(model.rate),
                    "Poisson rate must be finite and non-negative");
    Vector pmf = Vector::Zero(n + 1);
    if (model.rate == 0.0) {
        pmf(0) = 1.0;
        return pmf;
    }
    const double lr = std::log(model.rate);
    for (Index k = 0; k <= n; ++k)
        pmf(k) = std::exp(-model.rate + k * lr - std::lgamma(k + 1.0));
    pmf /= pmf.sum();
    return pmf;
}

DgParams fit_dichotomized_gaussian(const SignPanel& panel,
                                   std::vector<std::string>* warnings) {
    panel.validate();
    const Index n = panel.n();
    const auto tn = static_cast<double>(panel.t());
    const Matrix sd = panel.signs.cast<double>();
    const double cap = 1.0 - 1e-9;

    DgParams out;
    out.mu.resize(n);
    Vector cdf(n);
    for (Index i = 0; i < n; ++i) {
        const double mean = std::clamp(sd.row(i).mean(), -cap, cap);
        out.mu(i) = normal_quantile(0.5 * (1.0 + mean));
        cdf(i) = normal_cdf(out.mu(i));
    }

    const Matrix moments = sd * sd.transpose() / tn;  // E[s_i s_j]
    out.sigma = Matrix::Identity(n, n);
    const double rho_cap = 1.0 - 1e-12;
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            // P(s_i = +1, s_j = +1) implied by the empirical second moment.
            const double target =
                0.25 * (moments(i, j) + 2.0 * cdf(i) + 2.0 * cdf(j) - 1.0);
            const double low = std::max(0.0, cdf(i) + cdf(j) - 1.0);
            const double high = std::min(cdf(i), cdf(j));
            if (target < low - 1e-9 || target > high + 1e-9)
                throw AttainabilityError(
                    "pair moment of (" + panel.entities[static_cast<std::size_t>(i)] +
                    ", " + panel.entities[static_cast<std::size_t>(j)] +
                    ") is not attainable by a latent Gaussian correlation");
            const double goal = std::clamp(target, low, high);
            double lo = -rho_cap, hi = rho_cap;
            if (binormal_cdf(out.mu(i), out.mu(j), lo) >= goal) {
                hi = lo;
            } else if (binormal_cdf(out.mu(i), out.mu(j), hi) <= goal) {
                lo = hi;
            } else {
                while (hi - lo > 1e-12) {
                    const double mid = 0.5 * (lo + hi);
                    if (binormal_cdf(out.mu(i), out.mu(j), mid) < goal)
                        lo = mid;
                    else
                        hi = mid;
                }
            }
            const double rho = 0.5 * (lo + hi);
            out.sigma(i, j) = rho;
            out.sigma(j, i) = rho;
        }
    }

    Eigen::SelfAdjointEigenSolver<Matrix> es(out.sigma);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -1e-8) {
        const Vector clipped = es.eigenvalues().cwiseMax(1e-10);
        out.sigma = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
        const Vector scale = out.sigma.diagonal().cwiseSqrt().cwiseInverse();
        out.sigma = scale.asDiagonal() * out.sigma * scale.asDiagonal();
        out.sigma = (0.5 * (out.sigma + out.sigma.transpose())).eval();
        out.sigma.diagonal().setOnes();
        if (warnings)
            warnings->push_back(
                "latent covariance was indefinite (min eigenvalue " +
                std::to_string(min_eig) + "); projected to the nearest PSD matrix");
    }
    return out;
}

std::pair<CouplingSet, FitReport> fit_exact_ml(const Vector& means,
                                               const Matrix& pair_moments,
                                               const FitConfig& config) {
    const Index n = means.size();
    detail::require(n >= 1, "at least one entity required");
    detail::require_shape(pair_moments.rows() == n && pair_moments.cols() == n,
                          "pair moment matrix must be N x N");
    if (n > kEnumerationCap)
        throw CapacityError("exact likelihood enumeration supports at most " +
                            std::to_string(kEnumerationCap) + " entities");
    config.validate();
    detail::require(config.penalty == Penalty::l2,
                    "exact likelihood fitting supports the l2 penalty only");
    const double lambda = config.lambda ? *config.lambda : 0.0;

    const Index d = n + n * (n - 1) / 2;
    const auto states = static_cast<Index>(std::uint64_t{1} << n);
    Matrix phi(d, states);
    for (Index b = 0; b < states; ++b) {
        Index k = n;
        for (Index i = 0; i < n; ++i)
            phi(i, b) = (static_cast<std::uint64_t>(b) >> i) & 1u ? 1.0 : -1.0;
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j) phi(k++, b) = phi(i, b) * phi(j, b);
    }

    const double cap = 1.0 - 1e-9;
    Vector emp(d);
    {
        Index k = n;
        for (Index i = 0; i < n; ++i) emp(i) = std::clamp(means(i), -cap, cap);
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j)
                emp(k++) = std::clamp(pair_moments(i, j), -cap, cap);
    }

    Vector theta = Vector::Zero(d);
    auto objective = [&](const Vector& th, Vector* prob_out) {
        const Vector u = phi.transpose() * th;
        const double mx = u.maxCoeff();
        const double log_z = mx + std::log((u.array() - mx).exp().sum());
        if (prob_out) *prob_out = (u.array() - log_z).exp().matrix();
        return th.dot(emp) - log_z - lambda * th.squaredNorm();
    };

    FitReport report;
    report.lambda = lambda;
    report.method = "newton";
    Vector prob;
    double obj = objective(theta, &prob);
    report.objective_trace.push_back(obj);
    while (true) {
        const Vector mu = phi * prob;
        const Vector grad = emp - mu - 2.0 * lambda * theta;
        if (grad.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance) {
            report.converged = true;
            break;
        }
        if (report.iterations_used >= config.max_iterations) break;

        Matrix cov = phi * prob.asDiagonal() * phi.transpose() - mu * mu.transpose();
        cov.diagonal().array() += 2.0 * lambda + 1e-12;
        Vector dir = cov.ldlt().solve(grad);
        double slope = grad.dot(dir);
        if (!(slope > 0.0) || !dir.allFinite()) {
            dir = grad;
            slope = grad.squaredNorm();
        }
        bool improved = false;
        double step = 1.0;
        for (int bt = 0; bt < 60; ++bt) {
            const Vector cand = theta + step * dir;
            Vector cand_prob;
            const double cand_obj = objective(cand, &cand_prob);
            if (!std::isfinite(cand_obj))
                throw DivergenceError("non-finite likelihood during line search",
                                      report.iterations_used + 1);
            if (cand_obj >= obj + 1e-4 * step * slope) {
                theta = cand;
                prob = std::move(cand_prob);
                obj = cand_obj;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
        ++report.iterations_used;
        report.objective_trace.push_back(obj);
    }
    report.objective = obj;
    if (!report.converged)
        throw FitError("exact likelihood fit did not reach the gradient tolerance in " +
                       std::to_string(report.iterations_used) + " iterations");

    CouplingSet params = CouplingSet::zeros(n, 0);
    params.h = theta.head(n);
    Index k = n;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
            params.j(i, j) = theta(k);
            params.j(j, i) = theta(k);
            ++k;
        }
    return {std::move(params), std::move(report)};
}

}  // namespace flip
