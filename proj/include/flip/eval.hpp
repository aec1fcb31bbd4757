#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flip/infer.hpp"
#include "flip/model.hpp"
#include "flip/types.hpp"

namespace flip {

struct PredictionEvent {
    Index entity = 0;
    Index time = 0;
    double probability = 0.0;
    int actual = 0;  // 1 = the orientation reversed at this bin
};

struct PredictionRun {
    std::string model;
    std::vector<PredictionEvent> events;
};

struct Confusion {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::int64_t total() const { return tp + fp + tn + fn; }
    double accuracy() const {
        return total() == 0 ? 0.0
                            : static_cast<double>(tp + tn) / static_cast<double>(total());
    }
};

struct RocResult {
    std::vector<double> thresholds;  // descending; all distinct probabilities plus {1, 0}
    std::vector<double> tpr;
    std::vector<double> fpr;
    std::vector<double> accuracy;    // accuracy at each threshold
    double auc = 0.0;
    double max_accuracy = 0.0;
    double argmax_alpha = 0.0;       // largest threshold attaining max_accuracy
};

// Usable prediction bins split into folds. The default construction yields
// contiguous, disjoint blocks covering [max(1, lags), T) with sizes differing
// by at most one; a shuffled variant exists for comparison.
struct FoldPlan {
    std::vector<std::vector<Index>> folds;  // ascending bin indices per fold
    Index first_usable = 0;
    Index t_total = 0;
    bool contiguous = true;
    std::uint64_t seed = 0;

    int k() const { return static_cast<int>(folds.size()); }
    void validate() const;
};

FoldPlan make_fold_plan(Index t_total, Index lags, int k = 10);
FoldPlan make_shuffled_fold_plan(Index t_total, Index lags, int k,
                                 std::uint64_t seed);

enum class ModelKind { pairwise, independent, homogeneous, history_only };

std::string model_kind_name(ModelKind kind);

// Flip probabilities and actual outcomes for every entity over a bin range.
// Context and history are the observed configurations, so bins just before
// the range may be consulted as history.
PredictionRun predict_panel(const SignPanel& panel, const CouplingSet& params,
                            TimeRange range, const std::string& model_id = "");

// Same over an explicit ascending list of bins.
PredictionRun predict_bins(const SignPanel& panel, const CouplingSet& params,
                           const std::vector<Index>& bins,
                           const std::string& model_id = "");

// Predicted positive iff probability > alpha (strict).
Confusion confusion_at(const PredictionRun& run, double alpha);

// Exact ROC: thresholds at every distinct probability plus the endpoints
// (flagged strictly when p > alpha), the accuracy curve with its maximum, and
// the trapezoidal AUC over the complete tie-group staircase, which equals
// pairwise counting with half credit for ties exactly.
RocResult roc(const PredictionRun& run);

// Maximum of the accuracy curve; unlike roc() this tolerates single-class runs.
double max_accuracy(const PredictionRun& run);

// Probability that a random positive event outscores a random negative one,
// ties credited one half, by direct pairwise counting.
double mann_whitney_auc(const PredictionRun& run);

struct CrossValidationResult {
    std::string model;
    std::vector<RocResult> fold_rocs;
    std::vector<double> fold_auc;
    std::vector<double> fold_max_accuracy;
    std::vector<double> fold_argmax_alpha;
    // Per fold: mean over entities of each entity's accuracy at the fold's
    // max-accuracy threshold (the other aggregation order).
    std::vector<double> fold_entity_accuracy;
    double mean_auc = 0.0;
    double std_auc = 0.0;
    double mean_max_accuracy = 0.0;
    double std_max_accuracy = 0.0;
    double mean_entity_accuracy = 0.0;
    // Mean ROC/accuracy curves over folds on a fixed grid of levels.
    std::vector<double> grid_alpha;
    std::vector<double> mean_tpr;
    std::vector<double> mean_fpr;
    std::vector<double> mean_accuracy_curve;
    PredictionRun pooled;  // all out-of-fold events
};

CrossValidationResult cross_validate(const SignPanel& panel, Index lags,
                                     const FitConfig& config, const FoldPlan& plan,
                                     ModelKind kind = ModelKind::pairwise);

struct SubsetSizeResult {
    std::vector<Index> subset_size;
    std::vector<double> mean_max_accuracy;
    std::vector<double> std_max_accuracy;
    std::vector<Index> subsets_evaluated;
    bool subsampled = false;
    std::uint64_t seed = 0;
};

// Mean ten-fold accuracy when only k of the N entities are visible, over all
// C(N, k) subsets (N <= 12) or a recorded-seed subsample.
SubsetSizeResult accuracy_vs_subset_size(const SignPanel& panel,
                                         const std::vector<Index>& subset_sizes,
                                         const FitConfig& config, const FoldPlan& plan,
                                         std::optional<Index> max_subsets = {},
                                         std::uint64_t seed = 0);

struct TestLengthResult {
    std::vector<Index> lengths;
    std::vector<double> mean_accuracy;
    std::vector<double> std_accuracy;
    Index blocks = 0;
};

// One fit on [0, learn_length); accuracy on prefixes of each requested length
// inside `blocks` disjoint testing blocks.
TestLengthResult accuracy_vs_test_length(const SignPanel& panel, Index learn_length,
                                         const std::vector<Index>& lengths,
                                         const FitConfig& config, Index lags = 0,
                                         Index blocks = 1);

struct BlockDistanceResult {
    std::vector<Index> block_start;
    std::vector<double> accuracy;
    Index block_length = 0;
    double yardstick = 0.0;  // 1/sqrt(block length)
};

// One fit on [0, learn_length); accuracy per successive disjoint block of
// fixed length to the end of the panel.
BlockDistanceResult accuracy_vs_block_distance(const SignPanel& panel,
                                               Index learn_length, Index block_length,
                                               const FitConfig& config, Index lags = 0);

struct DailyAccuracyResult {
    double alpha = 0.0;
    std::vector<Index> bin_time;
    std::vector<double> bin_accuracy;     // per bin: fraction of entities correct
    std::vector<Index> histogram;         // counts over {0/N, 1/N, .., N/N}
    Index zero_accuracy_bins = 0;
};

DailyAccuracyResult daily_accuracy_distribution(const PredictionRun& run, double alpha);

struct CountDistributions {
    Vector empirical;  // length N+1, index = simultaneous reversal count
    Vector pairwise;
    Vector poisson;
    Vector dg;
    bool pairwise_exact = true;
    Index sample_count = 0;  // Monte Carlo draws behind the sampled entries
    std::uint64_t seed = 0;
};

// Count laws of the empirical data and the three fitted models. The pairwise
// law is enumerated exactly for N <= 12 and Gibbs-sampled above; the latent
// Gaussian law is always Monte Carlo (its orthant masses have no closed
// form), with the seed and sample count recorded.
CountDistributions reversal_count_distributions(const ReversalPanel& reversals,
                                                const ReversalCouplingSet& pairwise,
                                                const PoissonModel& poisson,
                                                const DgParams& dg,
                                                std::uint64_t seed = 0,
                                                Index sample_count = 200000);

// Kullback-Leibler divergence sum p log(p/q) in nats; support violations
// raise unless the caller smooths q first.
double kl_divergence(const Vector& p, const Vector& q);

// Adds epsilon to q wherever q has (near-)zero mass but p does not, then
// renormalizes. The declared default epsilon is 1/(2T).
Vector smooth_distribution(const Vector& q, const Vector& p, double epsilon);

struct MultiInformation {
    double s_empirical = 0.0;
    double s_independent = 0.0;
    double s_pairwise = 0.0;
    double i_n = 0.0;  // s_independent - s_empirical
    std::optional<double> fraction;  // undefined when i_n falls below 1e-3 nats
};

MultiInformation multi_information_fraction(const SignPanel& panel,
                                            const FitConfig& config = {});

struct NoiseStudy {
    double sigma_noise = 0.0;   // std of recovered off-diagonal couplings
    double recovered_mean = 0.0;
    double j_mean = 0.0;
    std::optional<double> ratio;  // sigma_noise / supplied coupling spread
};

// Fits couplings to Glauber data generated from a homogeneous coupling matrix
// and reports the purely-noise spread of the recovered off-diagonals.
NoiseStudy noise_ratio_study(Index n, Index t, double j_mean, const FitConfig& config,
                             std::uint64_t seed,
                             std::optional<double> sigma_j = {});

// sqrt(N) times the RMS deviation between off-diagonal couplings.
double reconstruction_error(const CouplingSet& true_params,
                            const CouplingSet& est_params);

struct BenchmarkResult {
    CrossValidationResult cv;
    double mean_accuracy = 0.0;
    double mean_auc = 0.0;
};

// Full generate -> cross-validate pipeline on data truly produced by the
// supplied pairwise model; the achievable ceiling for prediction scores.
BenchmarkResult artificial_benchmark(const CouplingSet& generator, Index t,
                                     const FitConfig& config, int folds,
                                     std::uint64_t seed);

// Pearson correlation of s_{i,t} with s_{j,t+lag} for lag in
// [-max_lag, max_lag]; entry [lag + max_lag].
Vector sign_cross_correlation(const SignPanel& panel, Index i, Index j,
                              Index max_lag);

}  // namespace flip
