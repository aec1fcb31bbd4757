#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "flip/errors.hpp"
#include "flip/eval.hpp"
#include "flip/infer.hpp"
#include "flip/ingest.hpp"
#include "flip/model.hpp"
#include "flip/sample.hpp"
#include "flip/serialize.hpp"
#include "flip/types.hpp"

namespace fs = std::filesystem;
using flip::Index;
using flip::Json;

namespace {

// Every resolved option of a run, flat and serializable. The output directory
// is deliberately not part of the serialized form: re-running a persisted
// configuration into a fresh directory must reproduce every output file
// byte for byte.
struct RunConfig {
    int schema_version = 1;
    std::string subcommand;
    std::string input;
    std::string params_file;
    std::string coupling_file;
    std::string dg_file;
    std::string out = "out";
    int threads = 1;
    std::uint64_t seed = 0;
    std::string model = "pairwise";
    std::string study = "cv";
    std::string kind = "pairwise";
    std::string zero_policy = "positive";
    Index lags = 0;
    std::optional<double> lambda;
    std::string penalty = "l2";
    double tol = 1e-6;
    Index max_iter = 500;
    int folds = 10;
    double alpha = 0.5;
    Index learn = 0;  // 0 = first half of the panel
    Index block = 50;
    Index blocks = 1;
    std::vector<Index> lengths;
    std::vector<Index> sizes;
    std::optional<Index> max_subsets;
    bool shuffle_folds = false;
    Index n = 8;
    Index t = 2500;
    double j_mean = 0.1;
    std::optional<double> sigma_j;
    Index samples = 200000;
    Index max_lag = 20;
    Index pair_i = 0;
    Index pair_j = 1;
    std::optional<double> homogeneous;
    bool exact = false;
    Index burn_in = 1000;
    std::string sweep = "5N";
    Index begin = -1;
    Index end = -1;
};

template <typename T>
void put_opt(Json& j, const char* key, const std::optional<T>& v) {
    if (v)
        j[key] = *v;
    else
        j[key] = nullptr;
}

Json config_to_json(const RunConfig& c) {
    Json j;
    j["schema_version"] = c.schema_version;
    j["subcommand"] = c.subcommand;
    j["input"] = c.input;
    j["params_file"] = c.params_file;
    j["coupling_file"] = c.coupling_file;
    j["dg_file"] = c.dg_file;
    j["threads"] = c.threads;
    j["seed"] = c.seed;
    j["model"] = c.model;
    j["study"] = c.study;
    j["kind"] = c.kind;
    j["zero_policy"] = c.zero_policy;
    j["lags"] = c.lags;
    put_opt(j, "lambda", c.lambda);
    j["penalty"] = c.penalty;
    j["tol"] = c.tol;
    j["max_iter"] = c.max_iter;
    j["folds"] = c.folds;
    j["alpha"] = c.alpha;
    j["learn"] = c.learn;
    j["block"] = c.block;
    j["blocks"] = c.blocks;
    j["lengths"] = c.lengths;
    j["sizes"] = c.sizes;
    put_opt(j, "max_subsets", c.max_subsets);
    j["shuffle_folds"] = c.shuffle_folds;
    j["n"] = c.n;
    j["t"] = c.t;
    j["j_mean"] = c.j_mean;
    put_opt(j, "sigma_j", c.sigma_j);
    j["samples"] = c.samples;
    j["max_lag"] = c.max_lag;
    j["pair_i"] = c.pair_i;
    j["pair_j"] = c.pair_j;
    put_opt(j, "homogeneous", c.homogeneous);
    j["exact"] = c.exact;
    j["burn_in"] = c.burn_in;
    j["sweep"] = c.sweep;
    j["begin"] = c.begin;
    j["end"] = c.end;
    return j;
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw flip::ValidationError(std::string("bad value for config field '") + key +
                                    "'");
    }
}

template <typename T>
std::optional<T> get_opt(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw flip::ValidationError(std::string("bad value for config field '") + key +
                                    "'");
    }
}

RunConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw flip::ValidationError("run configuration must be an object");
    RunConfig c;
    c.schema_version = get_or(j, "schema_version", c.schema_version);
    if (c.schema_version != 1)
        throw flip::ValidationError("unsupported configuration schema version");
    c.subcommand = get_or(j, "subcommand", c.subcommand);
    c.input = get_or(j, "input", c.input);
    c.params_file = get_or(j, "params_file", c.params_file);
    c.coupling_file = get_or(j, "coupling_file", c.coupling_file);
    c.dg_file = get_or(j, "dg_file", c.dg_file);
    c.threads = get_or(j, "threads", c.threads);
    c.seed = get_or(j, "seed", c.seed);
    c.model = get_or(j, "model", c.model);
    c.study = get_or(j, "study", c.study);
    c.kind = get_or(j, "kind", c.kind);
    c.zero_policy = get_or(j, "zero_policy", c.zero_policy);
    c.lags = get_or(j, "lags", c.lags);
    c.lambda = get_opt<double>(j, "lambda");
    c.penalty = get_or(j, "penalty", c.penalty);
    c.tol = get_or(j, "tol", c.tol);
    c.max_iter = get_or(j, "max_iter", c.max_iter);
    c.folds = get_or(j, "folds", c.folds);
    c.alpha = get_or(j, "alpha", c.alpha);
    c.learn = get_or(j, "learn", c.learn);
    c.block = get_or(j, "block", c.block);
    c.blocks = get_or(j, "blocks", c.blocks);
    c.lengths = get_or(j, "lengths", c.lengths);
    c.sizes = get_or(j, "sizes", c.sizes);
    c.max_subsets = get_opt<Index>(j, "max_subsets");
    c.shuffle_folds = get_or(j, "shuffle_folds", c.shuffle_folds);
    c.n = get_or(j, "n", c.n);
    c.t = get_or(j, "t", c.t);
    c.j_mean = get_or(j, "j_mean", c.j_mean);
    c.sigma_j = get_opt<double>(j, "sigma_j");
    c.samples = get_or(j, "samples", c.samples);
    c.max_lag = get_or(j, "max_lag", c.max_lag);
    c.pair_i = get_or(j, "pair_i", c.pair_i);
    c.pair_j = get_or(j, "pair_j", c.pair_j);
    c.homogeneous = get_opt<double>(j, "homogeneous");
    c.exact = get_or(j, "exact", c.exact);
    c.burn_in = get_or(j, "burn_in", c.burn_in);
    c.sweep = get_or(j, "sweep", c.sweep);
    c.begin = get_or(j, "begin", c.begin);
    c.end = get_or(j, "end", c.end);
    return c;
}

flip::FitConfig make_fit_config(const RunConfig& c) {
    flip::FitConfig fc;
    fc.lambda = c.lambda;
    if (c.penalty == "l2")
        fc.penalty = flip::Penalty::l2;
    else if (c.penalty == "l1")
        fc.penalty = flip::Penalty::l1;
    else
        throw flip::ValidationError("penalty must be 'l2' or 'l1'");
    fc.gradient_tolerance = c.tol;
    fc.max_iterations = static_cast<int>(c.max_iter);
    fc.seed = c.seed;
    fc.threads = c.threads;
    return fc;
}

using HashList = std::vector<std::pair<std::string, std::string>>;

Json meta_for(const RunConfig& c, const HashList& hashes) {
    Json meta;
    meta["config"] = config_to_json(c);
    Json hj = Json::object();
    for (const auto& [path, digest] : hashes) hj[path] = digest;
    meta["input_hashes"] = hj;
    return meta;
}

void write_study(const RunConfig& c, const HashList& hashes, const std::string& name,
                 Json results) {
    Json out;
    out["meta"] = meta_for(c, hashes);
    out["results"] = std::move(results);
    flip::write_json_file(fs::path(c.out) / (name + ".json"), out);
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& rows) {
    std::string text = header + "\n";
    for (const std::string& row : rows) text += row + "\n";
    flip::write_text_file(path, text);
}

std::string num(double v) { return flip::csv_number(v); }

Json vector_json(const std::vector<double>& v) { return Json(v); }

flip::SignPanel load_panel(const RunConfig& c, HashList& hashes) {
    if (c.input.empty())
        throw flip::ValidationError("this command needs --input PANEL_JSON");
    hashes.emplace_back(c.input, flip::hash_file(c.input));
    return flip::panel_from_json(flip::read_json_file(c.input));
}

flip::CouplingSet homogeneous_generator(Index n, double j_mean) {
    flip::detail::require(n >= 2, "a homogeneous generator needs at least 2 entities");
    flip::CouplingSet gen = flip::CouplingSet::zeros(n, 0);
    gen.j.setConstant(j_mean);
    gen.j.diagonal().setZero();
    return gen;
}

flip::CouplingSet resolve_generator(const RunConfig& c, HashList& hashes) {
    if (!c.coupling_file.empty()) {
        hashes.emplace_back(c.coupling_file, flip::hash_file(c.coupling_file));
        return flip::coupling_from_json(flip::read_json_file(c.coupling_file));
    }
    if (c.homogeneous) return homogeneous_generator(c.n, *c.homogeneous);
    return homogeneous_generator(c.n, c.j_mean);
}

Index parse_sweep(const std::string& sweep) {
    if (sweep == "5N") return 0;  // resolved to 5N attempts by the sampler
    std::size_t used = 0;
    long value = 0;
    try {
        value = std::stol(sweep, &used);
    } catch (const std::exception&) {
        throw flip::ValidationError("--sweep takes '5N' or a positive attempt count");
    }
    if (used != sweep.size() || value < 1)
        throw flip::ValidationError("--sweep takes '5N' or a positive attempt count");
    return value;
}

Index resolve_learn(const RunConfig& c, Index t_total) {
    const Index learn = c.learn > 0 ? c.learn : t_total / 2;
    flip::detail::require(learn >= 1 && learn < t_total,
                          "learning region must leave room for testing bins");
    return learn;
}

Json roc_json(const flip::RocResult& r) {
    Json j;
    j["auc"] = r.auc;
    j["max_accuracy"] = r.max_accuracy;
    j["argmax_alpha"] = r.argmax_alpha;
    return j;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_ingest(const RunConfig& c) {
    if (c.input.empty()) throw flip::ValidationError("ingest needs --input PRICES_CSV");
    HashList hashes;
    hashes.emplace_back(c.input, flip::hash_file(c.input));
    flip::ZeroPolicy policy;
    if (c.zero_policy == "positive")
        policy = flip::ZeroPolicy::positive;
    else if (c.zero_policy == "carry_forward")
        policy = flip::ZeroPolicy::carry_forward;
    else
        throw flip::ValidationError("zero policy must be 'positive' or 'carry_forward'");

    flip::PricePanel prices = flip::load_price_csv(c.input);
    std::vector<std::string> dropped;
    prices = flip::synchronize(prices, &dropped);
    const flip::SignPanel panel = flip::compute_signs(prices, policy);

    Json out = flip::panel_to_json(panel);
    Json provenance = meta_for(c, hashes);
    provenance["dropped_bins"] = dropped;
    out["provenance"] = provenance;
    flip::write_json_file(fs::path(c.out) / "panel.json", out);
}

void cmd_fit(const RunConfig& c) {
    HashList hashes;
    const flip::SignPanel panel = load_panel(c, hashes);
    const flip::FitConfig fc = make_fit_config(c);
    const fs::path out_dir(c.out);

    flip::FitReport report;
    if (c.model == "pairwise" || c.model == "history" || c.model == "homogeneous") {
        flip::CouplingSet params;
        if (c.model == "homogeneous") {
            flip::detail::require(c.lags == 0, "the homogeneous baseline is memoryless");
            auto fitted = flip::fit_rpml(panel, 0, fc);
            params = flip::homogenize(fitted.first);
            report = fitted.second;
        } else if (c.model == "history") {
            flip::detail::require(c.lags >= 1,
                                  "the history-only model needs at least one lag");
            const std::vector<flip::SignMatrix> segs{panel.signs};
            auto fitted = flip::fit_rpml_segments(segs, c.lags, fc, false);
            params = std::move(fitted.first);
            report = std::move(fitted.second);
        } else {
            auto fitted = flip::fit_rpml(panel, c.lags, fc);
            params = std::move(fitted.first);
            report = std::move(fitted.second);
        }
        flip::write_json_file(out_dir / "couplings.json", flip::coupling_to_json(params));
        if (!report.converged)
            throw flip::FitError("fit stopped before reaching the gradient tolerance");
    } else if (c.model == "independent") {
        const flip::CouplingSet params = flip::fit_independent(panel);
        flip::FitConfig plain = fc;
        plain.lambda = 0.0;
        report.converged = true;
        report.iterations_used = 0;
        report.lambda = 0.0;
        report.method = "closed-form moment match";
        report.objective = flip::rpl_objective(panel, params, plain);
        flip::write_json_file(out_dir / "couplings.json", flip::coupling_to_json(params));
    } else if (c.model == "reversal") {
        const flip::ReversalPanel rev = flip::compute_reversals(panel);
        auto fitted = flip::fit_reversal_pairwise(rev, fc);
        report = std::move(fitted.second);
        flip::write_json_file(out_dir / "reversal_couplings.json",
                              flip::reversal_coupling_to_json(fitted.first));
        if (!report.converged)
            throw flip::FitError("fit stopped before reaching the gradient tolerance");
    } else if (c.model == "poisson") {
        const flip::ReversalPanel rev = flip::compute_reversals(panel);
        const flip::PoissonModel model = flip::fit_poisson(rev);
        report.converged = true;
        report.iterations_used = 0;
        report.lambda = 0.0;
        report.method = "sample mean of simultaneous reversal counts";
        report.objective = 0.0;
        flip::write_json_file(out_dir / "poisson.json", flip::poisson_to_json(model));
    } else if (c.model == "dg") {
        std::vector<std::string> warnings;
        const flip::DgParams params = flip::fit_dichotomized_gaussian(panel, &warnings);
        report.converged = true;
        report.iterations_used = 0;
        report.lambda = 0.0;
        report.method = "moment matching with latent-correlation bisection";
        report.objective = 0.0;
        report.warnings = warnings;
        flip::write_json_file(out_dir / "dg.json", flip::dg_to_json(params));
    } else {
        throw flip::ValidationError("unknown model: " + c.model);
    }

    Json rj;
    rj["meta"] = meta_for(c, hashes);
    rj["results"] = flip::report_to_json(report);
    flip::write_json_file(out_dir / "fit_report.json", rj);
}

void cmd_predict(const RunConfig& c) {
    HashList hashes;
    const flip::SignPanel panel = load_panel(c, hashes);
    if (c.params_file.empty())
        throw flip::ValidationError("predict needs --params COUPLINGS_JSON");
    hashes.emplace_back(c.params_file, flip::hash_file(c.params_file));
    const flip::CouplingSet params =
        flip::coupling_from_json(flip::read_json_file(c.params_file));

    const Index first = std::max<Index>(1, params.lag_count());
    const Index begin = c.begin >= 0 ? c.begin : first;
    const Index end = c.end >= 0 ? c.end : panel.t();
    const flip::PredictionRun run =
        flip::predict_panel(panel, params, {begin, end}, "pairwise");

    std::vector<std::string> rows;
    rows.reserve(run.events.size());
    for (const flip::PredictionEvent& e : run.events)
        rows.push_back(panel.entities[static_cast<std::size_t>(e.entity)] + "," +
                       std::to_string(e.time) + "," +
                       panel.timestamps[static_cast<std::size_t>(e.time)] + "," +
                       num(e.probability) + "," + std::to_string(e.actual));
    write_csv(fs::path(c.out) / "predictions.csv",
              "entity,time,timestamp,probability,actual", rows);

    const flip::RocResult r = flip::roc(run);
    const flip::Confusion conf = flip::confusion_at(run, c.alpha);
    Json results = roc_json(r);
    results["alpha"] = c.alpha;
    results["events"] = run.events.size();
    results["begin"] = begin;
    results["end"] = end;
    results["confusion"] = {{"tp", conf.tp}, {"fp", conf.fp}, {"tn", conf.tn},
                            {"fn", conf.fn}, {"accuracy", conf.accuracy()}};
    write_study(c, hashes, "prediction_summary", std::move(results));
}

void cmd_simulate(const RunConfig& c) {
    HashList hashes;
    flip::detail::require(c.t >= 2, "simulate needs --t of at least 2");
    flip::SignPanel panel;
    std::string generator;
    std::vector<std::string> warnings;

    if (!c.dg_file.empty()) {
        hashes.emplace_back(c.dg_file, flip::hash_file(c.dg_file));
        const flip::DgParams dg = flip::dg_from_json(flip::read_json_file(c.dg_file));
        panel = flip::sample_dg(dg, c.t, c.seed);
        generator = "dichotomized_gaussian";
    } else {
        const flip::CouplingSet gen = resolve_generator(c, hashes);
        if (c.exact) {
            panel = flip::exact_sample(gen, c.t, c.seed);
            generator = "exact_enumeration";
        } else {
            flip::GlauberConfig gc;
            gc.attempts_per_sweep = parse_sweep(c.sweep);
            gc.burn_in_records = c.burn_in;
            gc.seed = c.seed;
            panel = flip::glauber_sample(gen, c.t, gc, &warnings);
            generator = "glauber";
        }
    }

    Json out = flip::panel_to_json(panel);
    Json provenance = meta_for(c, hashes);
    provenance["generator"] = generator;
    provenance["warnings"] = warnings;
    out["provenance"] = provenance;
    flip::write_json_file(fs::path(c.out) / "panel.json", out);
}

flip::ModelKind parse_kind(const std::string& kind) {
    if (kind == "pairwise") return flip::ModelKind::pairwise;
    if (kind == "independent") return flip::ModelKind::independent;
    if (kind == "homogeneous") return flip::ModelKind::homogeneous;
    if (kind == "history") return flip::ModelKind::history_only;
    throw flip::ValidationError("unknown model kind: " + kind);
}

Json cv_results_json(const flip::CrossValidationResult& cv) {
    Json results;
    results["model"] = cv.model;
    results["mean_auc"] = cv.mean_auc;
    results["std_auc"] = cv.std_auc;
    results["mean_max_accuracy"] = cv.mean_max_accuracy;
    results["std_max_accuracy"] = cv.std_max_accuracy;
    results["mean_entity_accuracy"] = cv.mean_entity_accuracy;
    results["fold_auc"] = vector_json(cv.fold_auc);
    results["fold_max_accuracy"] = vector_json(cv.fold_max_accuracy);
    results["fold_argmax_alpha"] = vector_json(cv.fold_argmax_alpha);
    results["fold_entity_accuracy"] = vector_json(cv.fold_entity_accuracy);
    return results;
}

std::vector<std::string> cv_fold_rows(const flip::CrossValidationResult& cv) {
    std::vector<std::string> rows;
    for (std::size_t f = 0; f < cv.fold_auc.size(); ++f)
        rows.push_back(std::to_string(f) + "," + num(cv.fold_auc[f]) + "," +
                       num(cv.fold_max_accuracy[f]) + "," +
                       num(cv.fold_argmax_alpha[f]) + "," +
                       num(cv.fold_entity_accuracy[f]));
    return rows;
}

void write_cv_outputs(const RunConfig& c, const HashList& hashes,
                      const std::string& name, const flip::CrossValidationResult& cv,
                      Json extra) {
    Json results = cv_results_json(cv);
    for (auto& [key, value] : extra.items()) results[key] = value;
    write_study(c, hashes, name, std::move(results));
    write_csv(fs::path(c.out) / (name + ".csv"),
              "fold,auc,max_accuracy,argmax_alpha,entity_accuracy", cv_fold_rows(cv));
    std::vector<std::string> curve_rows;
    for (std::size_t g = 0; g < cv.grid_alpha.size(); ++g)
        curve_rows.push_back(num(cv.grid_alpha[g]) + "," + num(cv.mean_tpr[g]) + "," +
                             num(cv.mean_fpr[g]) + "," +
                             num(cv.mean_accuracy_curve[g]));
    write_csv(fs::path(c.out) / (name + "_curves.csv"),
              "alpha,mean_tpr,mean_fpr,mean_accuracy", curve_rows);
}

void study_cv(const RunConfig& c) {
    HashList hashes;
    const flip::SignPanel panel = load_panel(c, hashes);
    const flip::FitConfig fc = make_fit_config(c);
    const flip::FoldPlan plan =
        c.shuffle_folds
            ? flip::make_shuffled_fold_plan(panel.t(), c.lags, c.folds, c.seed)
            : flip::make_fold_plan(panel.t(), c.lags, c.folds);
    const flip::CrossValidationResult cv =
        flip::cross_validate(panel, c.lags, fc, plan, parse_kind(c.kind));
    Json extra;
    extra["lags"] = c.lags;
    extra["folds"] = c.folds;
    extra["shuffled_folds"] = c.shuffle_folds;
    write_cv_outputs(c, hashes, "study_cv", cv, std::move(extra));
}

void study_subset(const RunConfig& c) {
    HashList hashes;
    const flip::SignPanel panel = load_panel(c, hashes);
    const flip::FitConfig fc = make_fit_config(c);
    std::vector<Index> sizes = c.sizes;
    if (sizes.empty())
        for (Index k = 1; k <= panel.n(); ++k) sizes.push_back(k);
    const flip::FoldPlan plan = flip::make_fold_plan(panel.t(), 0, c.folds);
    const flip::SubsetSizeResult r = flip::accuracy_vs_subset_size(
        panel, sizes, fc, plan, c.max_subsets, c.seed);

    Json results;
    results["subset_size"] = r.subset_size;
    results["mean_max_accuracy"] = vector_json(r.mean_max_accuracy);
    results["std_max_accuracy"] = vector_json(r.std_max_accuracy);
    results["subsets_evaluated"] = r.subsets_evaluated;
    results["subsampled"] = r.subsampled;
    results["seed"] = r.seed;
    write_study(c, hashes, "study_subset", std::move(results));

    std::vector<std::string> rows;
    for (std::size_t k = 0; k < r.subset_size.size(); ++k)
        rows.push_back(std::to_string(r.subset_size[k]) + "," +
                       num(r.mean_max_accuracy[k]) + "," +
                       num(r.std_max_accuracy[k]) + "," +
                       std::to_string(r.subsets_evaluated[k]));
    write_csv(fs::path(c.out) / "study_subset.csv",
              "size,mean_max_accuracy,std_max_accuracy,subsets", rows);
}

void study_length(const RunConfig& c) {
    HashList hashes;
    const flip::SignPanel panel = load_panel(c, hashes);
    const flip::FitConfig fc = make_fit_config(c);
    const Index learn = resolve_learn(c, panel.t());
    std::vector<Index> lengths = c.lengths;
    if (lengths.empty()) {
        const Index span = (panel.t() - learn) / std::max<Index>(1, c.blocks);
        for (const Index div : {8, 4, 2, 1}) {
            const Index len = span / div;
            if (len >= 1 && (lengths.empty() || len > lengths.back()))
                lengths.push_back(len);
        }
    }
    const flip::TestLengthResult r =
        flip::accuracy_vs_test_length(panel, learn, lengths, fc, c.lags, c.blocks);

    Json results;
    results["learn"] = learn;
    results["blocks"] = r.blocks;
    results["lengths"] = r.lengths;
    results["mean_accuracy"] = vector_json(r.mean_accuracy);
    results["std_accuracy"] = vector_json(r.std_accuracy);
    write_study(c, hashes, "study_length", std::move(results));

    std::vector<std::string> rows;
    for (std::size_t k = 0; k < r.lengths.size(); ++k)
        rows.push_back(std::to_string(r.lengths[k]) + "," + num(r.mean_accuracy[k]) +
                       "," + num(r.std_accuracy[k]));
    write_csv(fs::path(c.out) / "study_length.csv",
              "length,mean_accuracy,std_accuracy", rows);
}

void study_distance(const RunConfig& c) {
    HashList hashes;
    const flip::SignPanel panel = load_panel(c, hashes);
    const flip::FitConfig fc = make_fit_config(c);
    const Index learn = resolve_learn(c, panel.t());
    const flip::BlockDistanceResult r =
        flip::accuracy_vs_block_distance(panel, learn, c.block, fc, c.lags);

    Json results;
    results["learn"] = learn;
    results["block_length"] = r.block_length;
    results["yardstick"] = r.yardstick;
    results["block_start"] = r.block_start;
    results["accuracy"] = vector_json(r.accuracy);
    write_study(c, hashes, "study_distance", std::move(results));

    std::vector<std::string> rows;
    for (std::size_t k = 0; k < r.block_start.size(); ++k)
        rows.push_back(std::to_string(r.block_start[k]) + "," + num(r.accuracy[k]));
    write_csv(fs::path(c.out) / "study_distance.csv", "block_start,accuracy", rows);
}

void study_daily(const RunConfig& c) {
    HashList hashes;
    const flip::SignPanel panel = load_panel(c, hashes);
    const flip::FitConfig fc = make_fit_config(c);
    const Index learn = resolve_learn(c, panel.t());
    const std::vector<flip::SignMatrix> segs{
        flip::SignMatrix(panel.signs.middleCols(0, learn))};
    const flip::CouplingSet params = flip::fit_rpml_segments(segs, c.lags, fc).first;
    const flip::PredictionRun run =
        flip::predict_panel(panel, params, {learn, panel.t()}, "pairwise");
    const flip::DailyAccuracyResult r = flip::daily_accuracy_distribution(run, c.alpha);

    Json results;
    results["alpha"] = r.alpha;
    results["learn"] = learn;
    results["histogram"] = r.histogram;
    results["zero_accuracy_bins"] = r.zero_accuracy_bins;
    write_study(c, hashes, "study_daily", std::move(results));

    std::vector<std::string> rows;
    for (std::size_t k = 0; k < r.bin_time.size(); ++k)
        rows.push_back(
            std::to_string(r.bin_time[k]) + "," +
            panel.timestamps[static_cast<std::size_t>(r.bin_time[k])] + "," +
            num(r.bin_accuracy[k]));
    write_csv(fs::path(c.out) / "study_daily.csv", "time,timestamp,accuracy", rows);
}

struct CountModels {
    flip::ReversalPanel reversals;
    flip::ReversalCouplingSet pairwise;
    flip::PoissonModel poisson;
    flip::DgParams dg;
    std::vector<std::string> dg_warnings;
};

CountModels fit_count_models(const flip::SignPanel& panel, const flip::FitConfig& fc) {
    CountModels m;
    m.reversals = flip::compute_reversals(panel);
    m.pairwise = flip::fit_reversal_pairwise(m.reversals, fc).first;
    m.poisson = flip::fit_poisson(m.reversals);
    flip::SignPanel reversal_signs;
    reversal_signs.entities = m.reversals.entities;
    reversal_signs.timestamps = m.reversals.timestamps;
    reversal_signs.signs = (2 * m.reversals.flips.array() - 1).matrix();
    m.dg = flip::fit_dichotomized_gaussian(reversal_signs, &m.dg_warnings);
    return m;
}

void study_reversals(const RunConfig& c) {
    HashList hashes;
    const flip::SignPanel panel = load_panel(c, hashes);
    const CountModels m = fit_count_models(panel, make_fit_config(c));
    const flip::CountDistributions d = flip::reversal_count_distributions(
        m.reversals, m.pairwise, m.poisson, m.dg, c.seed, c.samples);

    Json results;
    results["pairwise_exact"] = d.pairwise_exact;
    results["sample_count"] = d.sample_count;
    results["seed"] = d.seed;
    results["dg_warnings"] = m.dg_warnings;
    write_study(c, hashes, "study_reversals", std::move(results));

    std::vector<std::string> rows;
    for (Index k = 0; k < d.empirical.size(); ++k)
        rows.push_back(std::to_string(k) + "," + num(d.empirical(k)) + "," +
                       num(d.pairwise(k)) + "," + num(d.poisson(k)) + "," +
                       num(d.dg(k)));
    write_csv(fs::path(c.out) / "study_reversals.csv",
              "count,empirical,pairwise,poisson,dg", rows);
}

void study_kl(const RunConfig& c) {
    HashList hashes;
    const flip::SignPanel panel = load_panel(c, hashes);
    const CountModels m = fit_count_models(panel, make_fit_config(c));
    const flip::CountDistributions d = flip::reversal_count_distributions(
        m.reversals, m.pairwise, m.poisson, m.dg, c.seed, c.samples);
    const double epsilon = 1.0 / (2.0 * static_cast<double>(m.reversals.t()));

    Json results;
    std::vector<std::string> rows;
    const std::vector<std::pair<std::string, const flip::Vector*>> models{
        {"pairwise", &d.pairwise}, {"poisson", &d.poisson}, {"dg", &d.dg}};
    for (const auto& [name, q] : models) {
        bool smoothed = false;
        for (Index k = 0; k < d.empirical.size(); ++k)
            if (d.empirical(k) > 0.0 && (*q)(k) <= 0.0) smoothed = true;
        const flip::Vector qq =
            smoothed ? flip::smooth_distribution(*q, d.empirical, epsilon) : *q;
        const double kl = flip::kl_divergence(d.empirical, qq);
        results[name] = {{"kl", kl}, {"smoothed", smoothed}};
        rows.push_back(name + "," + num(kl) + "," + (smoothed ? "1" : "0"));
    }
    results["epsilon"] = epsilon;
    results["pairwise_exact"] = d.pairwise_exact;
    results["sample_count"] = d.sample_count;
    results["seed"] = d.seed;
    write_study(c, hashes, "study_kl", std::move(results));
    write_csv(fs::path(c.out) / "study_kl.csv", "model,kl,smoothed", rows);
}

void study_noise(const RunConfig& c) {
    const flip::NoiseStudy r = flip::noise_ratio_study(
        c.n, c.t, c.j_mean, make_fit_config(c), c.seed, c.sigma_j);

    Json results;
    results["n"] = c.n;
    results["t"] = c.t;
    results["j_mean"] = r.j_mean;
    results["recovered_mean"] = r.recovered_mean;
    results["sigma_noise"] = r.sigma_noise;
    put_opt(results, "ratio", r.ratio);
    write_study(c, {}, "study_noise", std::move(results));

    write_csv(fs::path(c.out) / "study_noise.csv",
              "j_mean,recovered_mean,sigma_noise,ratio",
              {num(r.j_mean) + "," + num(r.recovered_mean) + "," +
               num(r.sigma_noise) + "," + (r.ratio ? num(*r.ratio) : "")});
}

void study_reconstruction(const RunConfig& c) {
    HashList hashes;
    const flip::CouplingSet gen = resolve_generator(c, hashes);
    const flip::FitConfig fc = make_fit_config(c);
    std::vector<Index> lengths = c.lengths.empty() ? std::vector<Index>{c.t} : c.lengths;

    Json results;
    std::vector<std::string> rows;
    Json deltas = Json::array();
    for (std::size_t idx = 0; idx < lengths.size(); ++idx) {
        flip::GlauberConfig gc;
        gc.seed = c.seed + idx;
        const flip::SignPanel panel = flip::glauber_sample(gen, lengths[idx], gc);
        const flip::CouplingSet est = flip::fit_rpml(panel, 0, fc).first;
        const double delta = flip::reconstruction_error(gen, est);
        deltas.push_back({{"t", lengths[idx]}, {"delta", delta}});
        rows.push_back(std::to_string(lengths[idx]) + "," + num(delta));
    }
    results["n"] = gen.size();
    results["runs"] = deltas;
    write_study(c, hashes, "study_reconstruction", std::move(results));
    write_csv(fs::path(c.out) / "study_reconstruction.csv", "t,delta", rows);
}

void study_artificial(const RunConfig& c) {
    HashList hashes;
    const flip::CouplingSet gen = resolve_generator(c, hashes);
    const flip::BenchmarkResult r =
        flip::artificial_benchmark(gen, c.t, make_fit_config(c), c.folds, c.seed);
    Json extra;
    extra["n"] = gen.size();
    extra["t"] = c.t;
    extra["mean_accuracy"] = r.mean_accuracy;
    extra["mean_auc"] = r.mean_auc;
    write_cv_outputs(c, hashes, "study_artificial", r.cv, std::move(extra));
}

void study_xcorr(const RunConfig& c) {
    HashList hashes;
    const flip::SignPanel panel = load_panel(c, hashes);
    const flip::Vector xc =
        flip::sign_cross_correlation(panel, c.pair_i, c.pair_j, c.max_lag);

    Json results;
    results["entity_i"] = panel.entities[static_cast<std::size_t>(c.pair_i)];
    results["entity_j"] = panel.entities[static_cast<std::size_t>(c.pair_j)];
    results["max_lag"] = c.max_lag;
    write_study(c, hashes, "study_xcorr", std::move(results));

    std::vector<std::string> rows;
    for (Index k = 0; k < xc.size(); ++k)
        rows.push_back(std::to_string(k - c.max_lag) + "," + num(xc(k)));
    write_csv(fs::path(c.out) / "study_xcorr.csv", "lag,correlation", rows);
}

void cmd_evaluate(const RunConfig& c) {
    if (c.study == "cv")
        study_cv(c);
    else if (c.study == "subset")
        study_subset(c);
    else if (c.study == "length")
        study_length(c);
    else if (c.study == "distance")
        study_distance(c);
    else if (c.study == "daily")
        study_daily(c);
    else if (c.study == "reversals")
        study_reversals(c);
    else if (c.study == "kl")
        study_kl(c);
    else if (c.study == "noise")
        study_noise(c);
    else if (c.study == "reconstruction")
        study_reconstruction(c);
    else if (c.study == "artificial")
        study_artificial(c);
    else if (c.study == "xcorr")
        study_xcorr(c);
    else
        throw flip::ValidationError("unknown study: " + c.study);
}

int dispatch(const RunConfig& c) {
    fs::create_directories(c.out);
    flip::write_json_file(fs::path(c.out) / "run_config.json", config_to_json(c));
    if (c.subcommand == "ingest")
        cmd_ingest(c);
    else if (c.subcommand == "fit")
        cmd_fit(c);
    else if (c.subcommand == "predict")
        cmd_predict(c);
    else if (c.subcommand == "evaluate")
        cmd_evaluate(c);
    else if (c.subcommand == "simulate")
        cmd_simulate(c);
    else
        throw flip::ValidationError("unknown subcommand: " + c.subcommand);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    std::string config_path;

    CLI::App app{
        "Pairwise maximum-entropy models and trend-reversal prediction for "
        "binary market panels"};
    app.require_subcommand(0, 1);
    app.add_option("--config", config_path,
                   "JSON run configuration; overrides every flag except --out");
    app.add_option("--out", cfg.out, "output directory (default: out)");
    app.add_option("--seed", cfg.seed, "random seed");
    app.add_option("--threads", cfg.threads, "worker threads for row fits");

    const auto add_fit_flags = [&cfg](CLI::App* cmd) {
        cmd->add_option("--lags", cfg.lags, "history depth L");
        cmd->add_option("--lambda", cfg.lambda,
                        "penalty strength (default: 1/T_usable)");
        cmd->add_option("--penalty", cfg.penalty, "penalty type")
            ->check(CLI::IsMember({"l2", "l1"}));
        cmd->add_option("--tol", cfg.tol, "gradient tolerance");
        cmd->add_option("--max-iter", cfg.max_iter, "iteration cap");
    };

    CLI::App* ingest = app.add_subcommand("ingest", "prices CSV -> orientation panel");
    ingest->add_option("--input", cfg.input, "prices CSV")->required();
    ingest->add_option("--zero-policy", cfg.zero_policy, "zero-return resolution")
        ->check(CLI::IsMember({"positive", "carry_forward"}));

    CLI::App* fit = app.add_subcommand("fit", "fit a model to an orientation panel");
    fit->add_option("--input", cfg.input, "panel JSON")->required();
    fit->add_option("--model", cfg.model, "model to fit")
        ->check(CLI::IsMember({"pairwise", "independent", "homogeneous", "history",
                               "reversal", "poisson", "dg"}));
    add_fit_flags(fit);

    CLI::App* predict = app.add_subcommand("predict", "per-entity flip probabilities");
    predict->add_option("--input", cfg.input, "panel JSON")->required();
    predict->add_option("--params", cfg.params_file, "couplings JSON")->required();
    predict->add_option("--begin", cfg.begin, "first bin (default: first usable)");
    predict->add_option("--end", cfg.end, "one past the last bin (default: T)");
    predict->add_option("--alpha", cfg.alpha, "detection level for the confusion table");

    CLI::App* evaluate = app.add_subcommand("evaluate", "run one evaluation study");
    evaluate->add_option("--input", cfg.input, "panel JSON (panel-based studies)");
    evaluate->add_option("--study", cfg.study,
                         "cv|subset|length|distance|daily|reversals|kl|noise|"
                         "reconstruction|artificial|xcorr");
    evaluate->add_option("--kind", cfg.kind,
                         "cv model kind: pairwise|independent|homogeneous|history");
    evaluate->add_option("--folds", cfg.folds, "cross-validation folds");
    evaluate->add_flag("--shuffle-folds", cfg.shuffle_folds,
                       "randomized instead of contiguous folds");
    evaluate->add_option("--alpha", cfg.alpha, "detection level");
    evaluate->add_option("--learn", cfg.learn, "learning-region length (0 = T/2)");
    evaluate->add_option("--block", cfg.block, "testing-block length");
    evaluate->add_option("--blocks", cfg.blocks, "number of testing blocks");
    evaluate->add_option("--lengths", cfg.lengths, "testing lengths / panel lengths")
        ->delimiter(',');
    evaluate->add_option("--sizes", cfg.sizes, "subset sizes")->delimiter(',');
    evaluate->add_option("--max-subsets", cfg.max_subsets,
                         "subsample limit per subset size");
    evaluate->add_option("--n", cfg.n, "entities for generated studies");
    evaluate->add_option("--t", cfg.t, "records for generated studies");
    evaluate->add_option("--j-mean", cfg.j_mean, "homogeneous generator coupling");
    evaluate->add_option("--sigma-j", cfg.sigma_j,
                         "coupling spread for the noise ratio");
    evaluate->add_option("--coupling-file", cfg.coupling_file,
                         "generator couplings JSON");
    evaluate->add_option("--samples", cfg.samples, "Monte Carlo draws");
    evaluate->add_option("--max-lag", cfg.max_lag, "cross-correlation window");
    evaluate->add_option("--pair-i", cfg.pair_i, "first entity index");
    evaluate->add_option("--pair-j", cfg.pair_j, "second entity index");
    add_fit_flags(evaluate);

    CLI::App* simulate = app.add_subcommand("simulate", "draw a synthetic panel");
    simulate->add_option("--n", cfg.n, "entities");
    simulate->add_option("--t", cfg.t, "records");
    simulate->add_option("--coupling-file", cfg.coupling_file, "generator couplings");
    simulate->add_option("--homogeneous", cfg.homogeneous,
                         "uniform off-diagonal coupling");
    simulate->add_option("--dg-file", cfg.dg_file, "latent Gaussian parameters");
    simulate->add_flag("--exact", cfg.exact, "enumeration sampler instead of Glauber");
    simulate->add_option("--burn-in", cfg.burn_in, "discarded leading records");
    simulate->add_option("--sweep", cfg.sweep, "'5N' or attempts per record");

    // Let --out/--seed/--threads/--config appear after the subcommand too.
    for (CLI::App* sub : {ingest, fit, predict, evaluate, simulate})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        for (CLI::App* sub : app.get_subcommands()) cfg.subcommand = sub->get_name();
        if (!config_path.empty()) {
            const std::string out = cfg.out;
            cfg = config_from_json(flip::read_json_file(config_path));
            cfg.out = out;
        }
        if (cfg.subcommand.empty())
            throw flip::ValidationError("give a subcommand or --config FILE");
        return dispatch(cfg);
    } catch (const flip::DivergenceError& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return 3;
    } catch (const flip::FitError& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return 3;
    } catch (const flip::CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return 4;
    } catch (const flip::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
