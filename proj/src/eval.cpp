#include "flip/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <utility>

#include "flip/errors.hpp"
#include "flip/rng.hpp"
#include "flip/sample.hpp"

namespace flip {

namespace {

Index first_usable_bin(Index lags) { return std::max<Index>(1, lags); }

void check_prediction_inputs(const SignPanel& panel, const CouplingSet& params) {
    panel.validate();
    params.validate();
    detail::require_shape(params.size() == panel.n(),
                          "parameter and panel entity counts differ");
}

PredictionRun predict_sorted_bins(const SignPanel& panel, const CouplingSet& params,
                                  const std::vector<Index>& bins,
                                  const std::string& model_id) {
    const Index l = params.lag_count();
    const Matrix sd = panel.signs.cast<double>();
    PredictionRun run;
    run.model = model_id;
    run.events.reserve(bins.size() * static_cast<std::size_t>(panel.n()));
    for (const Index t : bins) {
        detail::require_shape(t >= first_usable_bin(l) && t < panel.t(),
                              "prediction bin outside the usable range for the lag count");
        Vector field = params.j * sd.col(t) + params.h;
        for (Index tau = 1; tau <= l; ++tau)
            field += params.lags[static_cast<std::size_t>(tau - 1)] * sd.col(t - tau);
        for (Index i = 0; i < panel.n(); ++i) {
            PredictionEvent event;
            event.entity = i;
            event.time = t;
            event.probability = 0.5 * (1.0 - sd(i, t - 1) * std::tanh(field(i)));
            event.actual = panel.signs(i, t) == -panel.signs(i, t - 1) ? 1 : 0;
            run.events.push_back(event);
        }
    }
    return run;
}

// Threshold sweep shared by roc() and max_accuracy(): returns integer
// (tp, fp) counts at every distinct probability plus the endpoints,
// descending in threshold, with the flagged set defined strictly as p > alpha.
struct SweepPoint {
    double alpha;
    std::int64_t tp;
    std::int64_t fp;
};

struct ThresholdSweep {
    std::vector<SweepPoint> points;
    // Twice the area under the complete tie-group staircase, in units of
    // 1/(pos * neg): each group of equal probabilities contributes one
    // diagonal segment, which is exactly pairwise counting with half credit
    // for ties. The strict points above can skip the vertex just before a
    // zero-probability group, so the area is accumulated independently.
    std::int64_t area2 = 0;
};

ThresholdSweep threshold_sweep(const PredictionRun& run) {
    detail::require(!run.events.empty(), "prediction run is empty");
    std::vector<std::pair<double, int>> scored;
    scored.reserve(run.events.size());
    std::set<double, std::greater<double>> levels{1.0, 0.0};
    for (const PredictionEvent& e : run.events) {
        detail::require(e.probability >= 0.0 && e.probability <= 1.0,
                        "probabilities must lie in [0, 1]");
        scored.emplace_back(e.probability, e.actual);
        levels.insert(e.probability);
    }
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    ThresholdSweep out;
    out.points.reserve(levels.size());
    std::size_t idx = 0;
    std::int64_t tp = 0, fp = 0;
    for (const double alpha : levels) {
        while (idx < scored.size() && scored[idx].first > alpha) {
            (scored[idx].second ? tp : fp) += 1;
            ++idx;
        }
        out.points.push_back({alpha, tp, fp});
    }

    idx = 0;
    tp = 0;
    while (idx < scored.size()) {
        const double level = scored[idx].first;
        std::int64_t dtp = 0, dfp = 0;
        while (idx < scored.size() && scored[idx].first == level) {
            (scored[idx].second ? dtp : dfp) += 1;
            ++idx;
        }
        out.area2 += dfp * (2 * tp + dtp);
        tp += dtp;
    }
    return out;
}

std::pair<double, double> best_accuracy(const std::vector<SweepPoint>& points,
                                        std::int64_t pos, std::int64_t neg) {
    const double total = static_cast<double>(pos + neg);
    double best = -1.0, best_alpha = 1.0;
    for (const SweepPoint& pt : points) {
        const double acc = static_cast<double>(pt.tp + (neg - pt.fp)) / total;
        if (acc > best) {
            best = acc;
            best_alpha = pt.alpha;
        }
    }
    return {best, best_alpha};
}

std::pair<std::int64_t, std::int64_t> class_counts(const PredictionRun& run) {
    std::int64_t pos = 0, neg = 0;
    for (const PredictionEvent& e : run.events) (e.actual ? pos : neg) += 1;
    return {pos, neg};
}

std::vector<SignMatrix> training_segments(const SignPanel& panel,
                                          const std::vector<Index>& test_bins) {
    std::vector<SignMatrix> segments;
    Index cursor = 0;
    for (const Index b : test_bins) {
        if (b > cursor)
            segments.push_back(panel.signs.middleCols(cursor, b - cursor));
        cursor = b + 1;
    }
    if (cursor < panel.t())
        segments.push_back(panel.signs.middleCols(cursor, panel.t() - cursor));
    return segments;
}

CouplingSet fit_training_model(const std::vector<SignMatrix>& segments, Index lags,
                               const FitConfig& config, ModelKind kind) {
    switch (kind) {
        case ModelKind::pairwise:
            return fit_rpml_segments(segments, lags, config).first;
        case ModelKind::history_only:
            return fit_rpml_segments(segments, lags, config, false).first;
        case ModelKind::homogeneous:
            return homogenize(fit_rpml_segments(segments, 0, config).first);
        case ModelKind::independent: {
            const Index n = segments.front().rows();
            double count = 0.0;
            Vector sums = Vector::Zero(n);
            for (const SignMatrix& seg : segments) {
                sums += seg.cast<double>().rowwise().sum();
                count += static_cast<double>(seg.cols());
            }
            CouplingSet params = CouplingSet::zeros(n, 0);
            const double cap = 1.0 - 1e-9;
            for (Index i = 0; i < n; ++i)
                params.h(i) = std::atanh(std::clamp(sums(i) / count, -cap, cap));
            return params;
        }
    }
    throw ValidationError("unknown model kind");
}

double population_std(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double acc = 0.0;
    for (const double v : values) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / values.size());
}

double mean_of(const std::vector<double>& values) {
    return values.empty()
               ? 0.0
               : std::accumulate(values.begin(), values.end(), 0.0) / values.size();
}

PredictionRun run_prefix(const PredictionRun& run, std::size_t events) {
    PredictionRun out;
    out.model = run.model;
    out.events.assign(run.events.begin(),
                      run.events.begin() + static_cast<std::ptrdiff_t>(events));
    return out;
}

std::vector<std::vector<Index>> all_combinations(Index n, Index k) {
    std::vector<std::vector<Index>> out;
    std::vector<Index> current(static_cast<std::size_t>(k));
    std::iota(current.begin(), current.end(), Index{0});
    while (true) {
        out.push_back(current);
        Index pos = k - 1;
        while (pos >= 0 && current[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
        if (pos < 0) break;
        ++current[static_cast<std::size_t>(pos)];
        for (Index q = pos + 1; q < k; ++q)
            current[static_cast<std::size_t>(q)] =
                current[static_cast<std::size_t>(q - 1)] + 1;
    }
    return out;
}

SignPanel subset_panel(const SignPanel& panel, const std::vector<Index>& rows) {
    SignPanel out;
    out.timestamps = panel.timestamps;
    out.signs.resize(static_cast<Index>(rows.size()), panel.t());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.entities.push_back(panel.entities[static_cast<std::size_t>(rows[r])]);
        out.signs.row(static_cast<Index>(r)) = panel.signs.row(rows[r]);
    }
    return out;
}

}  // namespace

void FoldPlan::validate() const {
    detail::require(folds.size() >= 2, "fold plan must contain at least two folds");
    detail::require(t_total > first_usable, "fold plan covers no usable bins");
    std::vector<Index> all;
    std::size_t min_size = folds.front().size(), max_size = folds.front().size();
    for (const auto& fold : folds) {
        detail::require(!fold.empty(), "fold plan contains an empty fold");
        detail::require(std::is_sorted(fold.begin(), fold.end()),
                        "fold bins must be ascending");
        if (contiguous)
            detail::require(fold.back() - fold.front() + 1 ==
                                static_cast<Index>(fold.size()),
                            "fold bins must be contiguous");
        min_size = std::min(min_size, fold.size());
        max_size = std::max(max_size, fold.size());
        all.insert(all.end(), fold.begin(), fold.end());
    }
    detail::require(max_size - min_size <= 1, "fold sizes must differ by at most one");
    std::sort(all.begin(), all.end());
    detail::require(static_cast<Index>(all.size()) == t_total - first_usable &&
                        all.front() == first_usable && all.back() == t_total - 1 &&
                        std::adjacent_find(all.begin(), all.end()) == all.end(),
                    "folds must partition the usable bins exactly");
}

FoldPlan make_fold_plan(Index t_total, Index lags, int k) {
    detail::require(lags >= 0, "lag count must be non-negative");
    detail::require(k >= 2, "fold count must be at least 2");
    const Index first = first_usable_bin(lags);
    const Index usable = t_total - first;
    if (usable < k)
        throw InsufficientDataError("fewer usable bins than requested folds");
    FoldPlan plan;
    plan.first_usable = first;
    plan.t_total = t_total;
    plan.contiguous = true;
    const Index base = usable / k;
    const Index rem = usable % k;
    Index cursor = first;
    for (int f = 0; f < k; ++f) {
        const Index len = base + (f < rem ? 1 : 0);
        std::vector<Index> bins(static_cast<std::size_t>(len));
        std::iota(bins.begin(), bins.end(), cursor);
        cursor += len;
        plan.folds.push_back(std::move(bins));
    }
    return plan;
}

FoldPlan make_shuffled_fold_plan(Index t_total, Index lags, int k,
                                 std::uint64_t seed) {
    FoldPlan plan = make_fold_plan(t_total, lags, k);
    std::vector<Index> bins;
    for (const auto& fold : plan.folds) bins.insert(bins.end(), fold.begin(), fold.end());
    Rng rng(seed);
    for (std::size_t i = bins.size(); i > 1; --i)
        std::swap(bins[i - 1], bins[rng.uniform_int(i)]);
    std::size_t cursor = 0;
    for (auto& fold : plan.folds) {
        const std::size_t len = fold.size();
        fold.assign(bins.begin() + static_cast<std::ptrdiff_t>(cursor),
                    bins.begin() + static_cast<std::ptrdiff_t>(cursor + len));
        std::sort(fold.begin(), fold.end());
        cursor += len;
    }
    plan.contiguous = false;
    plan.seed = seed;
    return plan;
}

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::pairwise: return "pairwise";
        case ModelKind::independent: return "independent";
        case ModelKind::homogeneous: return "homogeneous";
        case ModelKind::history_only: return "history_only";
    }
    return "unknown";
}

PredictionRun predict_panel(const SignPanel& panel, const CouplingSet& params,
                            TimeRange range, const std::string& model_id) {
    check_prediction_inputs(panel, params);
    detail::require_shape(range.begin >= first_usable_bin(params.lag_count()) &&
                              range.end <= panel.t() && range.begin < range.end,
                          "prediction range outside the usable bins for the lag count");
    std::vector<Index> bins(static_cast<std::size_t>(range.length()));
    std::iota(bins.begin(), bins.end(), range.begin);
    return predict_sorted_bins(panel, params, bins, model_id);
}

PredictionRun predict_bins(const SignPanel& panel, const CouplingSet& params,
                           const std::vector<Index>& bins,
                           const std::string& model_id) {
    check_prediction_inputs(panel, params);
    detail::require(std::is_sorted(bins.begin(), bins.end()),
                    "prediction bins must be ascending");
    detail::require(!bins.empty(), "prediction bin list is empty");
    return predict_sorted_bins(panel, params, bins, model_id);
}

Confusion confusion_at(const PredictionRun& run, double alpha) {
    detail::require(alpha >= 0.0 && alpha <= 1.0, "detection level must lie in [0, 1]");
    Confusion c;
    for (const PredictionEvent& e : run.events) {
        const bool predicted = e.probability > alpha;
        if (predicted)
            (e.actual ? c.tp : c.fp) += 1;
        else
            (e.actual ? c.fn : c.tn) += 1;
    }
    return c;
}

RocResult roc(const PredictionRun& run) {
    const auto [pos, neg] = class_counts(run);
    if (pos == 0 || neg == 0)
        throw DegenerateRunError(
            "ROC requires at least one reversal and one non-reversal event");
    const ThresholdSweep sweep = threshold_sweep(run);
    const std::vector<SweepPoint>& points = sweep.points;

    RocResult out;
    out.thresholds.reserve(points.size());
    const double total = static_cast<double>(pos + neg);
    for (const SweepPoint& pt : points) {
        out.thresholds.push_back(pt.alpha);
        out.tpr.push_back(static_cast<double>(pt.tp) / static_cast<double>(pos));
        out.fpr.push_back(static_cast<double>(pt.fp) / static_cast<double>(neg));
        out.accuracy.push_back(static_cast<double>(pt.tp + (neg - pt.fp)) / total);
    }
    out.auc = static_cast<double>(sweep.area2) /
              (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    const auto [best, alpha] = best_accuracy(points, pos, neg);
    out.max_accuracy = best;
    out.argmax_alpha = alpha;
    return out;
}

double max_accuracy(const PredictionRun& run) {
    const auto [pos, neg] = class_counts(run);
    return best_accuracy(threshold_sweep(run).points, pos, neg).first;
}

double mann_whitney_auc(const PredictionRun& run) {
    std::vector<double> pos, neg;
    for (const PredictionEvent& e : run.events)
        (e.actual ? pos : neg).push_back(e.probability);
    if (pos.empty() || neg.empty())
        throw DegenerateRunError(
            "pairwise counting requires at least one event of each class");
    std::sort(neg.begin(), neg.end());
    std::int64_t numerator = 0;  // 2 * wins + ties
    for (const double p : pos) {
        const auto lower = std::lower_bound(neg.begin(), neg.end(), p);
        const auto upper = std::upper_bound(neg.begin(), neg.end(), p);
        numerator += 2 * (lower - neg.begin()) + (upper - lower);
    }
    return static_cast<double>(numerator) /
           (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

CrossValidationResult cross_validate(const SignPanel& panel, Index lags,
                                     const FitConfig& config, const FoldPlan& plan,
                                     ModelKind kind) {
    panel.validate();
    config.validate();
    plan.validate();
    detail::require_shape(plan.t_total == panel.t(),
                          "fold plan was built for a different panel length");
    detail::require(plan.first_usable == first_usable_bin(lags),
                    "fold plan was built for a different lag count");
    if (kind == ModelKind::homogeneous)
        detail::require(lags == 0, "the homogeneous baseline is memoryless");
    if (kind == ModelKind::history_only)
        detail::require(lags >= 1, "the history-only baseline needs at least one lag");

    CrossValidationResult out;
    out.model = model_kind_name(kind);
    out.grid_alpha.resize(101);
    for (std::size_t g = 0; g < out.grid_alpha.size(); ++g)
        out.grid_alpha[g] = static_cast<double>(g) / 100.0;
    out.mean_tpr.assign(out.grid_alpha.size(), 0.0);
    out.mean_fpr.assign(out.grid_alpha.size(), 0.0);
    out.mean_accuracy_curve.assign(out.grid_alpha.size(), 0.0);
    out.pooled.model = out.model;

    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        const std::vector<Index>& test_bins = plan.folds[f];
        CouplingSet params;
        try {
            params = fit_training_model(training_segments(panel, test_bins), lags,
                                        config, kind);
        } catch (const DivergenceError& e) {
            throw DivergenceError("fold " + std::to_string(f) + ": " + e.what(),
                                  e.iteration());
        } catch (const FitError& e) {
            throw FitError("fold " + std::to_string(f) + ": " + e.what());
        }
        const PredictionRun run = predict_sorted_bins(panel, params, test_bins, out.model);
        RocResult fold_roc = roc(run);

        std::vector<std::int64_t> correct(static_cast<std::size_t>(panel.n()), 0);
        std::vector<std::int64_t> seen(static_cast<std::size_t>(panel.n()), 0);
        for (const PredictionEvent& e : run.events) {
            const bool predicted = e.probability > fold_roc.argmax_alpha;
            correct[static_cast<std::size_t>(e.entity)] +=
                predicted == (e.actual != 0) ? 1 : 0;
            seen[static_cast<std::size_t>(e.entity)] += 1;
        }
        double entity_acc = 0.0;
        Index entities_seen = 0;
        for (std::size_t i = 0; i < correct.size(); ++i) {
            if (seen[i] == 0) continue;
            entity_acc += static_cast<double>(correct[i]) / static_cast<double>(seen[i]);
            ++entities_seen;
        }
        entity_acc /= static_cast<double>(entities_seen);

        for (std::size_t g = 0; g < out.grid_alpha.size(); ++g) {
            const Confusion c = confusion_at(run, out.grid_alpha[g]);
            out.mean_tpr[g] += c.tp + c.fn > 0
                                   ? static_cast<double>(c.tp) /
                                         static_cast<double>(c.tp + c.fn)
                                   : 0.0;
            out.mean_fpr[g] += c.fp + c.tn > 0
                                   ? static_cast<double>(c.fp) /
                                         static_cast<double>(c.fp + c.tn)
                                   : 0.0;
            out.mean_accuracy_curve[g] += c.accuracy();
        }

        out.fold_auc.push_back(fold_roc.auc);
        out.fold_max_accuracy.push_back(fold_roc.max_accuracy);
        out.fold_argmax_alpha.push_back(fold_roc.argmax_alpha);
        out.fold_entity_accuracy.push_back(entity_acc);
        out.fold_rocs.push_back(std::move(fold_roc));
        out.pooled.events.insert(out.pooled.events.end(), run.events.begin(),
                                 run.events.end());
    }

    const double k = static_cast<double>(plan.folds.size());
    for (std::size_t g = 0; g < out.grid_alpha.size(); ++g) {
        out.mean_tpr[g] /= k;
        out.mean_fpr[g] /= k;
        out.mean_accuracy_curve[g] /= k;
    }
    out.mean_auc = mean_of(out.fold_auc);
    out.std_auc = population_std(out.fold_auc);
    out.mean_max_accuracy = mean_of(out.fold_max_accuracy);
    out.std_max_accuracy = population_std(out.fold_max_accuracy);
    out.mean_entity_accuracy = mean_of(out.fold_entity_accuracy);
    return out;
}

SubsetSizeResult accuracy_vs_subset_size(const SignPanel& panel,
                                         const std::vector<Index>& subset_sizes,
                                         const FitConfig& config, const FoldPlan& plan,
                                         std::optional<Index> max_subsets,
                                         std::uint64_t seed) {
    panel.validate();
    config.validate();
    detail::require(!subset_sizes.empty(), "at least one subset size required");
    const Index n = panel.n();
    for (const Index k : subset_sizes)
        detail::require(k >= 1 && k <= n, "subset sizes must lie in [1, N]");
    if (n > 12 && !max_subsets)
        throw CapacityError(
            "subset enumeration is guarded at 12 entities; supply a subsample limit");
    if (max_subsets) detail::require(*max_subsets >= 1, "subsample limit must be positive");

    SubsetSizeResult out;
    out.seed = seed;
    Rng rng(seed);
    for (const Index k : subset_sizes) {
        std::vector<std::vector<Index>> combos = all_combinations(n, k);
        if (max_subsets && static_cast<Index>(combos.size()) > *max_subsets) {
            for (std::size_t i = combos.size(); i > 1; --i)
                std::swap(combos[i - 1], combos[rng.uniform_int(i)]);
            combos.resize(static_cast<std::size_t>(*max_subsets));
            out.subsampled = true;
        }
        std::vector<double> scores;
        scores.reserve(combos.size());
        for (const auto& rows : combos) {
            const SignPanel sub = subset_panel(panel, rows);
            scores.push_back(
                cross_validate(sub, 0, config, plan, ModelKind::pairwise)
                    .mean_max_accuracy);
        }
        out.subset_size.push_back(k);
        out.mean_max_accuracy.push_back(mean_of(scores));
        out.std_max_accuracy.push_back(population_std(scores));
        out.subsets_evaluated.push_back(static_cast<Index>(scores.size()));
    }
    return out;
}

TestLengthResult accuracy_vs_test_length(const SignPanel& panel, Index learn_length,
                                         const std::vector<Index>& lengths,
                                         const FitConfig& config, Index lags,
                                         Index blocks) {
    panel.validate();
    config.validate();
    detail::require(!lengths.empty() && std::is_sorted(lengths.begin(), lengths.end()),
                    "testing lengths must be ascending");
    detail::require(lengths.front() >= 1, "testing lengths must be positive");
    detail::require(blocks >= 1, "at least one testing block required");
    detail::require(learn_length >= first_usable_bin(lags) + 1,
                    "learning block too short for the lag count");
    const Index longest = lengths.back();
    detail::require(learn_length + blocks * longest <= panel.t(),
                    "testing blocks exceed the panel length");

    const std::vector<SignMatrix> learn{
        SignMatrix(panel.signs.middleCols(0, learn_length))};
    const CouplingSet params = fit_rpml_segments(learn, lags, config).first;

    std::vector<PredictionRun> block_runs;
    for (Index b = 0; b < blocks; ++b) {
        const Index start = learn_length + b * longest;
        block_runs.push_back(
            predict_panel(panel, params, {start, start + longest}, "pairwise"));
    }

    TestLengthResult out;
    out.blocks = blocks;
    for (const Index len : lengths) {
        std::vector<double> scores;
        for (const PredictionRun& run : block_runs)
            scores.push_back(max_accuracy(
                run_prefix(run, static_cast<std::size_t>(len * panel.n()))));
        out.lengths.push_back(len);
        out.mean_accuracy.push_back(mean_of(scores));
        out.std_accuracy.push_back(population_std(scores));
    }
    return out;
}

BlockDistanceResult accuracy_vs_block_distance(const SignPanel& panel,
                                               Index learn_length, Index block_length,
                                               const FitConfig& config, Index lags) {
    panel.validate();
    config.validate();
    detail::require(block_length >= 1, "block length must be positive");
    detail::require(learn_length >= first_usable_bin(lags) + 1,
                    "learning block too short for the lag count");
    if (learn_length + block_length > panel.t())
        throw InsufficientDataError("no full testing block after the learning region");

    const std::vector<SignMatrix> learn{
        SignMatrix(panel.signs.middleCols(0, learn_length))};
    const CouplingSet params = fit_rpml_segments(learn, lags, config).first;

    BlockDistanceResult out;
    out.block_length = block_length;
    out.yardstick = 1.0 / std::sqrt(static_cast<double>(block_length));
    for (Index start = learn_length; start + block_length <= panel.t();
         start += block_length) {
        out.block_start.push_back(start);
        out.accuracy.push_back(max_accuracy(
            predict_panel(panel, params, {start, start + block_length}, "pairwise")));
    }
    return out;
}

DailyAccuracyResult daily_accuracy_distribution(const PredictionRun& run,
                                                double alpha) {
    detail::require(!run.events.empty(), "prediction run is empty");
    detail::require(alpha >= 0.0 && alpha <= 1.0, "detection level must lie in [0, 1]");

    std::vector<std::pair<Index, std::pair<Index, Index>>> bins;  // time -> (correct, total)
    for (const PredictionEvent& e : run.events) {
        if (bins.empty() || bins.back().first != e.time)
            bins.push_back({e.time, {0, 0}});
        detail::require(bins.back().first == e.time,
                        "events must be grouped by time bin");
        const bool predicted = e.probability > alpha;
        bins.back().second.first += predicted == (e.actual != 0) ? 1 : 0;
        bins.back().second.second += 1;
    }
    const Index per_bin = bins.front().second.second;
    for (const auto& b : bins)
        detail::require(b.second.second == per_bin,
                        "every time bin must cover the same entities");

    DailyAccuracyResult out;
    out.alpha = alpha;
    out.histogram.assign(static_cast<std::size_t>(per_bin) + 1, 0);
    for (const auto& b : bins) {
        out.bin_time.push_back(b.first);
        out.bin_accuracy.push_back(static_cast<double>(b.second.first) /
                                   static_cast<double>(per_bin));
        out.histogram[static_cast<std::size_t>(b.second.first)] += 1;
    }
    out.zero_accuracy_bins = out.histogram[0];
    return out;
}

CountDistributions reversal_count_distributions(const ReversalPanel& reversals,
                                                const ReversalCouplingSet& pairwise,
                                                const PoissonModel& poisson,
                                                const DgParams& dg, std::uint64_t seed,
                                                Index sample_count) {
    reversals.validate();
    pairwise.validate();
    const Index n = reversals.n();
    detail::require_shape(pairwise.size() == n && dg.mu.size() == n,
                          "model and panel entity counts differ");
    detail::require(sample_count >= 1, "sample count must be positive");

    CountDistributions out;
    out.seed = seed;
    out.sample_count = sample_count;

    out.empirical = Vector::Zero(n + 1);
    for (Index t = 0; t < reversals.t(); ++t)
        out.empirical(reversals.flips.col(t).sum()) += 1.0;
    out.empirical /= static_cast<double>(reversals.t());

    if (n <= 12) {
        out.pairwise_exact = true;
        const Vector probs = enumerate_reversal_distribution(pairwise);
        out.pairwise = Vector::Zero(n + 1);
        for (Index bits = 0; bits < probs.size(); ++bits)
            out.pairwise(std::popcount(static_cast<std::uint64_t>(bits))) += probs(bits);
    } else {
        out.pairwise_exact = false;
        Rng rng(seed);
        Eigen::VectorXi x = Eigen::VectorXi::Zero(n);
        out.pairwise = Vector::Zero(n + 1);
        const Index burn_in = 1000;
        for (Index sweep = 0; sweep < burn_in + sample_count; ++sweep) {
            for (Index i = 0; i < n; ++i) {
                const double p1 = reversal_conditional_one(i, x, pairwise);
                x(i) = rng.uniform() < p1 ? 1 : 0;
            }
            if (sweep >= burn_in) out.pairwise(x.sum()) += 1.0;
        }
        out.pairwise /= static_cast<double>(sample_count);
    }

    out.poisson = poisson_count_distribution(poisson, n);

    const SignPanel dg_panel = sample_dg(dg, sample_count, seed + 1);
    out.dg = Vector::Zero(n + 1);
    for (Index t = 0; t < dg_panel.t(); ++t)
        out.dg((dg_panel.signs.col(t).array() == 1).count()) += 1.0;
    out.dg /= static_cast<double>(sample_count);
    return out;
}

double kl_divergence(const Vector& p, const Vector& q) {
    detail::require_shape(p.size() == q.size() && p.size() >= 1,
                          "distributions must share a non-empty support");
    for (Index k = 0; k < p.size(); ++k)
        detail::require(p(k) >= -1e-12 && q(k) >= -1e-12,
                        "distributions must be non-negative");
    detail::require(std::abs(p.sum() - 1.0) <= 1e-6 && std::abs(q.sum() - 1.0) <= 1e-6,
                    "distributions must sum to one");
    double acc = 0.0;
    for (Index k = 0; k < p.size(); ++k) {
        const double pk = std::max(p(k), 0.0);
        if (pk == 0.0) continue;
        if (q(k) <= 0.0)
            throw SupportError("model assigns zero mass at observed count " +
                               std::to_string(k));
        acc += pk * std::log(pk / q(k));
    }
    return acc;
}

Vector smooth_distribution(const Vector& q, const Vector& p, double epsilon) {
    detail::require_shape(p.size() == q.size(), "distributions must share a support");
    detail::require(epsilon > 0.0, "smoothing epsilon must be positive");
    Vector out = q;
    for (Index k = 0; k < q.size(); ++k)
        if (p(k) > 0.0 && out(k) <= 0.0) out(k) += epsilon;
    out /= out.sum();
    return out;
}

MultiInformation multi_information_fraction(const SignPanel& panel,
                                            const FitConfig& config) {
    panel.validate();
    const Index n = panel.n();
    if (n > 12)
        throw CapacityError("entropy enumeration is guarded at 12 entities");
    const Index tn = panel.t();
    detail::require(tn >= 2, "at least two time bins required");

    std::vector<double> counts(std::size_t{1} << n, 0.0);
    for (Index t = 0; t < tn; ++t) {
        std::size_t bits = 0;
        for (Index i = 0; i < n; ++i)
            if (panel.signs(i, t) == 1) bits |= std::size_t{1} << i;
        counts[bits] += 1.0;
    }

    MultiInformation out;
    for (const double c : counts) {
        if (c == 0.0) continue;
        const double p = c / static_cast<double>(tn);
        out.s_empirical -= p * std::log(p);
    }

    const Matrix sd = panel.signs.cast<double>();
    const Vector means = sd.rowwise().mean();
    for (Index i = 0; i < n; ++i) {
        const double p = 0.5 * (1.0 + means(i));
        if (p > 0.0) out.s_independent -= p * std::log(p);
        if (p < 1.0) out.s_independent -= (1.0 - p) * std::log(1.0 - p);
    }

    const Matrix moments = sd * sd.transpose() / static_cast<double>(tn);
    const CouplingSet fitted = fit_exact_ml(means, moments, config).first;
    const Vector probs = enumerate_distribution(fitted);
    for (Index k = 0; k < probs.size(); ++k)
        if (probs(k) > 0.0) out.s_pairwise -= probs(k) * std::log(probs(k));

    out.i_n = out.s_independent - out.s_empirical;
    if (out.i_n >= 1e-3)
        out.fraction = (out.s_independent - out.s_pairwise) / out.i_n;
    return out;
}

NoiseStudy noise_ratio_study(Index n, Index t, double j_mean, const FitConfig& config,
                             std::uint64_t seed, std::optional<double> sigma_j) {
    detail::require(n >= 2, "at least two entities required");
    detail::require(std::isfinite(j_mean), "mean coupling must be finite");
    if (sigma_j) detail::require(*sigma_j > 0.0, "coupling spread must be positive");

    CouplingSet generator = CouplingSet::zeros(n, 0);
    generator.j.setConstant(j_mean);
    generator.j.diagonal().setZero();

    GlauberConfig sampler;
    sampler.seed = seed;
    const SignPanel panel = glauber_sample(generator, t, sampler);
    const CouplingSet fitted = fit_rpml(panel, 0, config).first;

    NoiseStudy out;
    out.j_mean = j_mean;
    std::vector<double> offdiag;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) offdiag.push_back(fitted.j(i, j));
    out.recovered_mean = mean_of(offdiag);
    out.sigma_noise = population_std(offdiag);
    if (sigma_j) out.ratio = out.sigma_noise / *sigma_j;
    return out;
}

double reconstruction_error(const CouplingSet& true_params,
                            const CouplingSet& est_params) {
    true_params.validate();
    est_params.validate();
    detail::require_shape(true_params.size() == est_params.size(),
                          "coupling sets must share the entity count");
    const Index n = true_params.size();
    detail::require(n >= 2, "reconstruction error needs off-diagonal couplings");
    const Matrix diff = true_params.j - est_params.j;
    return std::sqrt(diff.squaredNorm() / static_cast<double>(n - 1));
}

BenchmarkResult artificial_benchmark(const CouplingSet& generator, Index t,
                                     const FitConfig& config, int folds,
                                     std::uint64_t seed) {
    generator.validate();
    detail::require(generator.lag_count() == 0,
                    "the generating model must be memoryless");
    GlauberConfig sampler;
    sampler.seed = seed;
    const SignPanel panel = glauber_sample(generator, t, sampler);
    const FoldPlan plan = make_fold_plan(t, 0, folds);

    BenchmarkResult out;
    out.cv = cross_validate(panel, 0, config, plan, ModelKind::pairwise);
    out.mean_accuracy = out.cv.mean_max_accuracy;
    out.mean_auc = out.cv.mean_auc;
    return out;
}

Vector sign_cross_correlation(const SignPanel& panel, Index i, Index j,
                              Index max_lag) {
    panel.validate();
    detail::require(i >= 0 && i < panel.n() && j >= 0 && j < panel.n(),
                    "entity index out of range");
    detail::require(max_lag >= 0, "max_lag must be non-negative");
    if (panel.t() <= max_lag + 1)
        throw InsufficientDataError("panel too short for the requested lag window");

    const Matrix sd = panel.signs.cast<double>();
    Vector out(2 * max_lag + 1);
    for (Index lag = -max_lag; lag <= max_lag; ++lag) {
        const Index t0 = std::max<Index>(0, -lag);
        const Index t1 = panel.t() - std::max<Index>(0, lag);
        const Index len = t1 - t0;
        const auto xs = sd.row(i).segment(t0, len);
        const auto ys = sd.row(j).segment(t0 + lag, len);
        const double mx = xs.mean(), my = ys.mean();
        const double vx = (xs.array() - mx).square().sum();
        const double vy = (ys.array() - my).square().sum();
        if (vx <= 0.0 || vy <= 0.0)
            throw UndefinedCorrelationError(
                "constant orientation series at lag " + std::to_string(lag));
        const double cov = ((xs.array() - mx) * (ys.array() - my)).sum();
        out(lag + max_lag) = cov / std::sqrt(vx * vy);
    }
    return out;
}

}  // namespace flip
