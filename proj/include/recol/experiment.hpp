#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "recol/engine.hpp"
#include "recol/fusion.hpp"
#include "recol/metrics.hpp"
#include "recol/od.hpp"
#include "recol/serialize.hpp"
#include "recol/table.hpp"
#include "recol/version.hpp"

namespace recol {

enum class Metric { roc_auc, pr_auc };

inline std::string to_string(Metric m) { return m == Metric::roc_auc ? "roc_auc" : "pr_auc"; }

inline std::optional<Metric> parse_metric(const std::string& s) {
    if (s == "roc_auc") return Metric::roc_auc;
    if (s == "pr_auc") return Metric::pr_auc;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct DatasetRef {
    std::string path;
    std::string label_column = "label";
    std::string name;  // identity used in results and hashing; defaults to the file stem
};

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    bool stratified = false;
};

/// Either a standard OD algorithm or the direct RECol fusion ("recol-od").
struct ScorerSpec {
    bool recol_od = false;
    OdSpec od;

    std::string name() const { return recol_od ? "recol-od" : to_string(od.kind); }
};

struct ExperimentConfig {
    DatasetRef dataset;
    SplitSpec split;
    ScorerSpec scorer;
    RecolConfig recol;
    Metric metric_of_record = Metric::roc_auc;
};

/// One experiment outcome. Metrics live in [0,1]; reports convert to
/// percentage points.
struct ExperimentResult {
    std::string config_hash;
    std::string dataset;
    std::string scorer;
    FeatureMode feature_mode = FeatureMode::combined;
    double train_roc_auc = 0.0;
    double test_roc_auc = 0.0;
    double train_pr_auc = 0.0;
    double test_pr_auc = 0.0;
    double wall_time_s = 0.0;
    json config;       // canonical config document
    json provenance;   // library version and seeds
};

inline double train_value(const ExperimentResult& r, Metric m) {
    return m == Metric::roc_auc ? r.train_roc_auc : r.train_pr_auc;
}
inline double test_value(const ExperimentResult& r, Metric m) {
    return m == Metric::roc_auc ? r.test_roc_auc : r.test_pr_auc;
}

// ---------------------------------------------------------------------------
// Canonicalization and hashing
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Normalized copy: fields that cannot influence the run are reset so that
/// behaviorally identical configs hash identically (original_only ignores
/// the whole RECol pipeline; recol-od always consumes the RECol-only space).
inline ExperimentConfig canonicalize(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    if (c.dataset.name.empty()) {
        // file stem: strip directories and extension
        std::string stem = c.dataset.path;
        if (const auto slash = stem.find_last_of("/\\"); slash != std::string::npos)
            stem = stem.substr(slash + 1);
        if (const auto dot = stem.find_last_of('.'); dot != std::string::npos && dot > 0)
            stem = stem.substr(0, dot);
        c.dataset.name = stem;
    }
    if (c.scorer.recol_od) {
        c.scorer.od = OdSpec{};
        c.recol.feature_mode = FeatureMode::recol_only;
    } else if (c.recol.feature_mode == FeatureMode::original_only) {
        const auto scaling = c.recol.input_scaling;
        c.recol = RecolConfig{};
        c.recol.input_scaling = scaling;
        c.recol.feature_mode = FeatureMode::original_only;
    }
    return c;
}

namespace detail {

// Scorer/regressor documents keep only the fields their kind consumes.
inline json canonical_scorer_json(const ScorerSpec& s) {
    if (s.recol_od) return json{{"kind", "recol-od"}};
    json j{{"kind", to_string(s.od.kind)}};
    switch (s.od.kind) {
        case OdKind::knn_mean:
        case OdKind::kth_nn:
        case OdKind::lof:
            j["k"] = s.od.k;
            break;
        case OdKind::hbos:
            j["n_bins"] = s.od.n_bins;
            break;
        case OdKind::iforest:
            j["n_trees"] = s.od.n_trees;
            j["subsample_size"] = s.od.subsample_size;
            j["seed"] = s.od.seed;
            break;
        case OdKind::ucblof:
        case OdKind::ldcof:
            j["n_clusters"] = s.od.n_clusters;
            j["alpha"] = s.od.alpha;
            j["beta"] = s.od.beta;
            j["seed"] = s.od.seed;
            break;
    }
    return j;
}

inline json canonical_regressor_json(const RegressorSpec& s) {
    json j{{"kind", to_string(s.kind)}};
    switch (s.kind) {
        case RegressorKind::linear:
            break;
        case RegressorKind::decision_tree:
            j["max_depth"] = s.max_depth;
            j["min_samples_leaf"] = s.min_samples_leaf;
            break;
        case RegressorKind::random_forest:
            j["n_trees"] = s.n_trees;
            j["max_depth"] = s.max_depth;
            j["min_samples_leaf"] = s.min_samples_leaf;
            j["max_features"] = s.max_features;
            j["subsample_fraction"] = s.subsample_fraction;
            j["bootstrap"] = s.bootstrap;
            j["seed"] = s.seed;
            break;
        case RegressorKind::gradient_boosting:
            j["n_trees"] = s.n_trees;
            j["max_depth"] = s.max_depth;
            j["min_samples_leaf"] = s.min_samples_leaf;
            j["learning_rate"] = s.learning_rate;
            j["subsample_fraction"] = s.subsample_fraction;
            j["seed"] = s.seed;
            break;
    }
    return j;
}

inline json canonical_recol_json(const RecolConfig& c) {
    if (c.feature_mode == FeatureMode::original_only)
        return json{{"feature_mode", "original_only"}, {"input_scaling", to_string(c.input_scaling)}};
    json j = to_json(c);
    j["regressor"] = canonical_regressor_json(c.regressor);
    return j;
}

}  // namespace detail

inline json canonical_config_json(const ExperimentConfig& cfg_in) {
    const ExperimentConfig cfg = canonicalize(cfg_in);
    return json{{"dataset", {{"name", cfg.dataset.name}, {"label_column", cfg.dataset.label_column}}},
                {"split",
                 {{"train_fraction", cfg.split.train_fraction},
                  {"seed", cfg.split.seed},
                  {"stratified", cfg.split.stratified}}},
                {"scorer", detail::canonical_scorer_json(cfg.scorer)},
                {"recol", detail::canonical_recol_json(cfg.recol)},
                {"metric_of_record", to_string(cfg.metric_of_record)}};
}

/// Stable digest over the canonicalized config JSON (FNV-1a 64, hex).
inline std::string config_hash(const ExperimentConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_config_json(cfg).dump())));
    return buf;
}

// ---------------------------------------------------------------------------
// Schema-checked config parsing
// ---------------------------------------------------------------------------

namespace schema {

struct Ctx {
    std::vector<std::string> errors;

    void add(const std::string& path, const std::string& msg) {
        errors.push_back(path + ": " + msg);
    }
    void raise_if_errors(const std::string& what) const {
        if (errors.empty()) return;
        std::string m = what;
        for (const auto& e : errors) m += "\n  " + e;
        fail(ErrorKind::schema, m);
    }
};

inline bool require_object(const json& j, const std::string& path, Ctx& ctx) {
    if (j.is_object()) return true;
    ctx.add(path, "expected an object");
    return false;
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed, Ctx& ctx) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                known = true;
                break;
            }
        if (!known) ctx.add(path + "." + it.key(), "unknown field");
    }
}

inline double get_number(const json& obj, const std::string& path, const char* key, double def,
                         Ctx& ctx) {
    if (!obj.contains(key)) return def;
    if (!obj.at(key).is_number()) {
        ctx.add(path + "." + key, "expected a number");
        return def;
    }
    return obj.at(key).get<double>();
}

inline int get_int(const json& obj, const std::string& path, const char* key, int def, Ctx& ctx) {
    if (!obj.contains(key)) return def;
    if (!obj.at(key).is_number_integer()) {
        ctx.add(path + "." + key, "expected an integer");
        return def;
    }
    return obj.at(key).get<int>();
}

inline std::uint64_t get_seed(const json& obj, const std::string& path, const char* key,
                              std::uint64_t def, Ctx& ctx) {
    if (!obj.contains(key)) return def;
    if (!obj.at(key).is_number_integer() || (obj.at(key).is_number_integer() && obj.at(key).get<double>() < 0)) {
        ctx.add(path + "." + key, "expected a non-negative integer");
        return def;
    }
    return obj.at(key).get<std::uint64_t>();
}

inline bool get_bool(const json& obj, const std::string& path, const char* key, bool def, Ctx& ctx) {
    if (!obj.contains(key)) return def;
    if (!obj.at(key).is_boolean()) {
        ctx.add(path + "." + key, "expected a boolean");
        return def;
    }
    return obj.at(key).get<bool>();
}

inline std::string get_string(const json& obj, const std::string& path, const char* key,
                              const std::string& def, Ctx& ctx) {
    if (!obj.contains(key)) return def;
    if (!obj.at(key).is_string()) {
        ctx.add(path + "." + key, "expected a string");
        return def;
    }
    return obj.at(key).get<std::string>();
}

}  // namespace schema

namespace detail {

inline ScorerSpec parse_scorer(const json& j, const std::string& path, schema::Ctx& ctx) {
    ScorerSpec s;
    if (!schema::require_object(j, path, ctx)) return s;
    const std::string kind = schema::get_string(j, path, "kind", "", ctx);
    if (kind == "recol-od") {
        s.recol_od = true;
        schema::check_keys(j, path, {"kind"}, ctx);
        return s;
    }
    const auto od = parse_od_kind(kind);
    if (!od) {
        ctx.add(path + ".kind", "unknown scorer name '" + kind + "'");
        return s;
    }
    s.od.kind = *od;
    switch (*od) {
        case OdKind::knn_mean:
        case OdKind::kth_nn:
        case OdKind::lof:
            schema::check_keys(j, path, {"kind", "k"}, ctx);
            s.od.k = schema::get_int(j, path, "k", s.od.k, ctx);
            break;
        case OdKind::hbos:
            schema::check_keys(j, path, {"kind", "n_bins"}, ctx);
            s.od.n_bins = schema::get_int(j, path, "n_bins", s.od.n_bins, ctx);
            break;
        case OdKind::iforest:
            schema::check_keys(j, path, {"kind", "n_trees", "subsample_size", "seed"}, ctx);
            s.od.n_trees = schema::get_int(j, path, "n_trees", s.od.n_trees, ctx);
            s.od.subsample_size = schema::get_int(j, path, "subsample_size", s.od.subsample_size, ctx);
            s.od.seed = schema::get_seed(j, path, "seed", s.od.seed, ctx);
            break;
        case OdKind::ucblof:
        case OdKind::ldcof:
            schema::check_keys(j, path, {"kind", "n_clusters", "alpha", "beta", "seed"}, ctx);
            s.od.n_clusters = schema::get_int(j, path, "n_clusters", s.od.n_clusters, ctx);
            s.od.alpha = schema::get_number(j, path, "alpha", s.od.alpha, ctx);
            s.od.beta = schema::get_number(j, path, "beta", s.od.beta, ctx);
            s.od.seed = schema::get_seed(j, path, "seed", s.od.seed, ctx);
            break;
    }
    try {
        validate_spec(s.od);
    } catch (const Error& e) {
        ctx.add(path, e.what());
    }
    return s;
}

inline RegressorSpec parse_regressor(const json& j, const std::string& path, schema::Ctx& ctx) {
    RegressorSpec s;
    if (!schema::require_object(j, path, ctx)) return s;
    schema::check_keys(j, path,
                       {"kind", "n_trees", "max_depth", "min_samples_leaf", "max_features",
                        "learning_rate", "subsample_fraction", "bootstrap", "seed"},
                       ctx);
    const std::string kind = schema::get_string(j, path, "kind", "random_forest", ctx);
    const auto parsed = parse_regressor_kind(kind);
    if (!parsed) {
        ctx.add(path + ".kind", "unknown regressor kind '" + kind + "'");
        return s;
    }
    s.kind = *parsed;
    s.n_trees = schema::get_int(j, path, "n_trees", s.n_trees, ctx);
    s.max_depth = schema::get_int(j, path, "max_depth", s.max_depth, ctx);
    s.min_samples_leaf = schema::get_int(j, path, "min_samples_leaf", s.min_samples_leaf, ctx);
    s.max_features = schema::get_int(j, path, "max_features", s.max_features, ctx);
    s.learning_rate = schema::get_number(j, path, "learning_rate", s.learning_rate, ctx);
    s.subsample_fraction =
        schema::get_number(j, path, "subsample_fraction", s.subsample_fraction, ctx);
    s.bootstrap = schema::get_bool(j, path, "bootstrap", s.bootstrap, ctx);
    s.seed = schema::get_seed(j, path, "seed", s.seed, ctx);
    try {
        validate_spec(s);
    } catch (const Error& e) {
        ctx.add(path, e.what());
    }
    return s;
}

inline void parse_r2_drop(const json& j, const std::string& path, RecolConfig& cfg,
                          schema::Ctx& ctx) {
    if (j.is_null()) return;
    if (!schema::require_object(j, path, ctx)) return;
    schema::check_keys(j, path, {"below", "above"}, ctx);
    if (j.contains("below")) cfg.r2_drop_below = schema::get_number(j, path, "below", 0.0, ctx);
    if (j.contains("above")) cfg.r2_drop_above = schema::get_number(j, path, "above", 1.0, ctx);
}

inline RecolConfig parse_recol_config(const json& j, const std::string& path, schema::Ctx& ctx) {
    RecolConfig cfg;
    if (!schema::require_object(j, path, ctx)) return cfg;
    schema::check_keys(j, path,
                       {"regressor", "error_metric", "input_scaling", "clip_at_2sigma", "r2_drop",
                        "recol_scaling", "feature_mode"},
                       ctx);
    if (j.contains("regressor")) cfg.regressor = parse_regressor(j.at("regressor"), path + ".regressor", ctx);
    const std::string metric = schema::get_string(j, path, "error_metric", "mse", ctx);
    if (const auto m = parse_error_metric(metric); m)
        cfg.error_metric = *m;
    else
        ctx.add(path + ".error_metric", "unknown value '" + metric + "'");
    const std::string scaling = schema::get_string(j, path, "input_scaling", "minmax", ctx);
    if (const auto sk = parse_scaler_kind(scaling); sk)
        cfg.input_scaling = *sk;
    else
        ctx.add(path + ".input_scaling", "unknown value '" + scaling + "'");
    cfg.clip_at_2sigma = schema::get_bool(j, path, "clip_at_2sigma", cfg.clip_at_2sigma, ctx);
    if (j.contains("r2_drop")) parse_r2_drop(j.at("r2_drop"), path + ".r2_drop", cfg, ctx);
    const std::string rs = schema::get_string(j, path, "recol_scaling", "minmax", ctx);
    if (rs != "minmax") ctx.add(path + ".recol_scaling", "only 'minmax' is supported");
    const std::string mode = schema::get_string(j, path, "feature_mode", "combined", ctx);
    if (const auto fm = parse_feature_mode(mode); fm)
        cfg.feature_mode = *fm;
    else
        ctx.add(path + ".feature_mode", "unknown value '" + mode + "'");
    try {
        validate_config(cfg);
    } catch (const Error& e) {
        ctx.add(path, e.what());
    }
    return cfg;
}

inline SplitSpec parse_split(const json& j, const std::string& path, schema::Ctx& ctx) {
    SplitSpec s;
    if (!schema::require_object(j, path, ctx)) return s;
    schema::check_keys(j, path, {"train_fraction", "seed", "stratified"}, ctx);
    s.train_fraction = schema::get_number(j, path, "train_fraction", s.train_fraction, ctx);
    s.seed = schema::get_seed(j, path, "seed", s.seed, ctx);
    s.stratified = schema::get_bool(j, path, "stratified", s.stratified, ctx);
    if (!(s.train_fraction > 0.0 && s.train_fraction < 1.0))
        ctx.add(path + ".train_fraction", "must be in (0, 1)");
    return s;
}

}  // namespace detail

/// Parse one experiment config document ({split, scorer, recol,
/// metric_of_record}); the dataset reference comes from the caller. All
/// schema violations are collected and reported together with field paths.
inline ExperimentConfig parse_experiment_config(const json& j, const DatasetRef& dataset) {
    schema::Ctx ctx;
    ExperimentConfig cfg;
    cfg.dataset = dataset;
    if (!j.is_object()) fail(ErrorKind::schema, "config: expected a JSON object");
    schema::check_keys(j, "config", {"split", "scorer", "recol", "metric_of_record"}, ctx);
    if (j.contains("split")) cfg.split = detail::parse_split(j.at("split"), "split", ctx);
    if (j.contains("scorer"))
        cfg.scorer = detail::parse_scorer(j.at("scorer"), "scorer", ctx);
    else
        ctx.add("scorer", "required field is missing");
    if (j.contains("recol")) cfg.recol = detail::parse_recol_config(j.at("recol"), "recol", ctx);
    const std::string metric = schema::get_string(j, "config", "metric_of_record", "roc_auc", ctx);
    if (const auto m = parse_metric(metric); m)
        cfg.metric_of_record = *m;
    else
        ctx.add("metric_of_record", "unknown value '" + metric + "'");
    ctx.raise_if_errors("config schema violations");
    return canonicalize(cfg);
}

// ---------------------------------------------------------------------------
// Running experiments
// ---------------------------------------------------------------------------

struct DetailedRun {
    ExperimentResult result;
    std::vector<double> train_scores;
    std::vector<double> test_scores;
};

namespace detail {

// Labels never enter here: fitting and scoring see feature tables only.
struct PipelineScores {
    std::vector<double> train;
    std::vector<double> test;
};

inline PipelineScores pipeline_scores(const ExperimentConfig& cfg, const Table& train_features,
                                      const Table& test_features) {
    PipelineScores out;
    if (cfg.scorer.recol_od) {
        RecolConfig rc = cfg.recol;
        rc.feature_mode = FeatureMode::recol_only;
        const RecolModelSet ms = fit_recols(train_features, rc);
        const FeatureMatrix train_recols = transform(train_features, ms, rc);
        const FeatureMatrix test_recols = transform(test_features, ms, rc);
        out.train = recol_od(train_recols, train_recols).scores;
        out.test = recol_od(train_recols, test_recols).scores;
        return out;
    }
    FeatureMatrix train_fm, test_fm;
    if (cfg.recol.feature_mode == FeatureMode::original_only) {
        // baseline pathway: no RECol machinery is ever constructed
        const Scaler scaler = fit_scaler(train_features, cfg.recol.input_scaling);
        train_fm = original_features(apply_scaler(scaler, train_features));
        test_fm = original_features(apply_scaler(scaler, test_features));
    } else {
        const RecolModelSet ms = fit_recols(train_features, cfg.recol);
        train_fm = transform(train_features, ms, cfg.recol);
        test_fm = transform(test_features, ms, cfg.recol);
    }
    out.train = score(cfg.scorer.od, train_fm, train_fm, ScoreMode::train_leave_one_out).scores;
    out.test = score(cfg.scorer.od, train_fm, test_fm, ScoreMode::eval).scores;
    return out;
}

}  // namespace detail

/// Full pipeline: split -> fit on train -> transform both -> score -> metrics.
/// Test labels are read only at the metric step; everything upstream receives
/// label-free tables. Deterministic given the config's seeds.
inline DetailedRun run_experiment_detailed(const ExperimentConfig& cfg_in, const Table& data) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = canonicalize(cfg_in);
    if (!data.labels)
        fail(ErrorKind::invalid_argument,
             "run_experiment: dataset has no label column; metrics need ground truth");

    const SplitResult split =
        train_test_split(data, cfg.split.train_fraction, cfg.split.seed, cfg.split.stratified);
    const auto scores =
        detail::pipeline_scores(cfg, split.train.without_labels(), split.test.without_labels());

    DetailedRun run;
    run.train_scores = scores.train;
    run.test_scores = scores.test;
    ExperimentResult& r = run.result;
    r.config_hash = config_hash(cfg);
    r.dataset = cfg.dataset.name;
    r.scorer = cfg.scorer.name();
    r.feature_mode = cfg.scorer.recol_od ? FeatureMode::recol_only : cfg.recol.feature_mode;
    r.train_roc_auc = roc_auc(scores.train, *split.train.labels);
    r.test_roc_auc = roc_auc(scores.test, *split.test.labels);
    r.train_pr_auc = pr_auc(scores.train, *split.train.labels);
    r.test_pr_auc = pr_auc(scores.test, *split.test.labels);
    r.config = canonical_config_json(cfg);
    r.provenance = json{{"version", kVersion},
                        {"split_seed", cfg.split.seed},
                        {"regressor_seed", cfg.recol.regressor.seed},
                        {"od_seed", cfg.scorer.od.seed}};
    r.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Table& data) {
    return run_experiment_detailed(cfg, data).result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const Table data = load_csv(cfg.dataset.path, cfg.dataset.label_column);
    return run_experiment(cfg, data);
}

// ---------------------------------------------------------------------------
// Result persistence (JSON lines)
// ---------------------------------------------------------------------------

inline json to_json(const ExperimentResult& r) {
    return json{{"config_hash", r.config_hash},
                {"dataset", r.dataset},
                {"scorer", r.scorer},
                {"feature_mode", to_string(r.feature_mode)},
                {"train_roc_auc", r.train_roc_auc},
                {"test_roc_auc", r.test_roc_auc},
                {"train_pr_auc", r.train_pr_auc},
                {"test_pr_auc", r.test_pr_auc},
                {"wall_time_s", r.wall_time_s},
                {"config", r.config},
                {"provenance", r.provenance}};
}

inline ExperimentResult result_from_json(const json& j) {
    schema::Ctx ctx;
    ExperimentResult r;
    if (!j.is_object()) fail(ErrorKind::schema, "result: expected a JSON object");
    for (const char* key : {"config_hash", "dataset", "scorer", "feature_mode", "train_roc_auc",
                            "test_roc_auc", "train_pr_auc", "test_pr_auc"})
        if (!j.contains(key)) ctx.add(key, "required field is missing");
    ctx.raise_if_errors("result schema violations");
    r.config_hash = j.at("config_hash").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.scorer = j.at("scorer").get<std::string>();
    const auto fm = parse_feature_mode(j.at("feature_mode").get<std::string>());
    if (!fm) fail(ErrorKind::schema, "result.feature_mode: unknown value");
    r.feature_mode = *fm;
    r.train_roc_auc = j.at("train_roc_auc").get<double>();
    r.test_roc_auc = j.at("test_roc_auc").get<double>();
    r.train_pr_auc = j.at("train_pr_auc").get<double>();
    r.test_pr_auc = j.at("test_pr_auc").get<double>();
    r.wall_time_s = j.value("wall_time_s", 0.0);
    r.config = j.value("config", json::object());
    r.provenance = j.value("provenance", json::object());
    return r;
}

inline void append_result(const ExperimentResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::app);
    if (!out) fail(ErrorKind::io, "cannot open '" + path + "' for appending");
    out << to_json(r).dump() << '\n';
    if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

inline std::vector<ExperimentResult> load_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
    std::vector<ExperimentResult> results;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(ErrorKind::parse, "'" + path + "' line " + std::to_string(line_no) + ": " + e.what());
        }
        results.push_back(result_from_json(j));
    }
    return results;
}

// ---------------------------------------------------------------------------
// Model selection and report tables
// ---------------------------------------------------------------------------

/// Pick the result with the best TRAIN metric; its TEST metric is what gets
/// reported. Ties break on the config hash.
inline const ExperimentResult& select_best(const std::vector<const ExperimentResult*>& results,
                                           Metric metric) {
    if (results.empty()) fail(ErrorKind::invalid_argument, "select_best: empty result set");
    const ExperimentResult* best = results.front();
    for (const ExperimentResult* r : results) {
        const double v = train_value(*r, metric);
        const double b = train_value(*best, metric);
        if (v > b || (v == b && r->config_hash < best->config_hash)) best = r;
    }
    return *best;
}

inline const ExperimentResult& select_best(const std::vector<ExperimentResult>& results,
                                           Metric metric) {
    std::vector<const ExperimentResult*> ptrs;
    ptrs.reserve(results.size());
    for (const auto& r : results) ptrs.push_back(&r);
    return select_best(ptrs, metric);
}

struct ReportTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

enum class ReportStyle { best_vs_best, recol_od_vs_avg, combined_vs_recol_only };

inline std::optional<ReportStyle> parse_report_style(const std::string& s) {
    if (s == "best-vs-best") return ReportStyle::best_vs_best;
    if (s == "recol-od-vs-avg") return ReportStyle::recol_od_vs_avg;
    if (s == "combined-vs-recol-only") return ReportStyle::combined_vs_recol_only;
    return std::nullopt;
}

namespace detail {

inline std::string format_pp(double value01) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value01 * 100.0);
    return buf;
}

inline std::string format_delta_pp(double a01, double b01) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", (a01 - b01) * 100.0);
    return buf;
}

using ResultGroups = std::map<std::string, std::vector<const ExperimentResult*>>;

template <typename Pred>
inline ResultGroups group_by_dataset(const std::vector<ExperimentResult>& results, Pred pred) {
    ResultGroups g;
    for (const auto& r : results)
        if (pred(r)) g[r.dataset].push_back(&r);
    return g;
}

inline void require_aligned(const ResultGroups& a, const ResultGroups& b, const char* what) {
    std::set<std::string> ka, kb;
    for (const auto& [k, v] : a) ka.insert(k);
    for (const auto& [k, v] : b) kb.insert(k);
    if (ka != kb) fail(ErrorKind::invalid_argument, std::string(what) + ": dataset sets are misaligned");
}

// Average baseline: each scorer's best config (picked on train), averaged
// across scorers.
inline double average_baseline(const std::vector<const ExperimentResult*>& baselines, Metric metric) {
    std::map<std::string, std::vector<const ExperimentResult*>> by_scorer;
    for (const auto* r : baselines) by_scorer[r->scorer].push_back(r);
    double sum = 0.0;
    for (const auto& [name, group] : by_scorer) sum += test_value(select_best(group, metric), metric);
    return sum / static_cast<double>(by_scorer.size());
}

}  // namespace detail

/// Per dataset: best baseline vs best RECol run (selection on train, values
/// from test), with the difference in percentage points.
inline ReportTable delta_report(const std::vector<ExperimentResult>& baseline_results,
                                const std::vector<ExperimentResult>& recol_results, Metric metric,
                                const char* baseline_label = "Baseline",
                                const char* recol_label = "RECols") {
    const auto base = detail::group_by_dataset(baseline_results, [](const auto&) { return true; });
    const auto reco = detail::group_by_dataset(recol_results, [](const auto&) { return true; });
    if (base.empty() || reco.empty())
        fail(ErrorKind::invalid_argument, "delta_report: empty result set");
    detail::require_aligned(base, reco, "delta_report");

    ReportTable t;
    t.header = {"Dataset", baseline_label, recol_label, "Delta"};
    for (const auto& [dataset, b_group] : base) {
        const double b = test_value(select_best(b_group, metric), metric);
        const double r = test_value(select_best(reco.at(dataset), metric), metric);
        t.rows.push_back({dataset, detail::format_pp(b), detail::format_pp(r),
                          detail::format_delta_pp(r, b)});
    }
    return t;
}

inline ReportTable make_report(const std::vector<ExperimentResult>& results, Metric metric,
                               ReportStyle style) {
    if (results.empty()) fail(ErrorKind::invalid_argument, "report: empty result set");
    const auto is_baseline = [](const ExperimentResult& r) {
        return r.scorer != "recol-od" && r.feature_mode == FeatureMode::original_only;
    };
    switch (style) {
        case ReportStyle::best_vs_best: {
            std::vector<ExperimentResult> base, reco;
            for (const auto& r : results) {
                if (is_baseline(r)) base.push_back(r);
                if (r.scorer != "recol-od" && r.feature_mode == FeatureMode::combined)
                    reco.push_back(r);
            }
            return delta_report(base, reco, metric);
        }
        case ReportStyle::combined_vs_recol_only: {
            std::vector<ExperimentResult> combined, only;
            for (const auto& r : results) {
                if (r.scorer == "recol-od") continue;
                if (r.feature_mode == FeatureMode::combined) combined.push_back(r);
                if (r.feature_mode == FeatureMode::recol_only) only.push_back(r);
            }
            return delta_report(only, combined, metric, "RECols Only", "Combined");
        }
        case ReportStyle::recol_od_vs_avg: {
            const auto base = detail::group_by_dataset(results, is_baseline);
            const auto fused = detail::group_by_dataset(
                results, [](const ExperimentResult& r) { return r.scorer == "recol-od"; });
            if (base.empty() || fused.empty())
                fail(ErrorKind::invalid_argument,
                     "report: recol-od-vs-avg needs both baseline and recol-od results");
            detail::require_aligned(base, fused, "report");
            ReportTable t;
            t.header = {"Dataset", "Best Baseline", "Avg. Baseline", "RECol-OD",
                        "Delta to Best", "Delta to Avg."};
            for (const auto& [dataset, b_group] : base) {
                const double best = test_value(select_best(b_group, metric), metric);
                const double avg = detail::average_baseline(b_group, metric);
                const double od = test_value(select_best(fused.at(dataset), metric), metric);
                t.rows.push_back({dataset, detail::format_pp(best), detail::format_pp(avg),
                                  detail::format_pp(od), detail::format_delta_pp(od, best),
                                  detail::format_delta_pp(od, avg)});
            }
            return t;
        }
    }
    fail(ErrorKind::invalid_argument, "report: unknown style");
}

inline std::string render_text(const ReportTable& t) {
    std::vector<std::size_t> widths(t.header.size());
    for (std::size_t c = 0; c < t.header.size(); ++c) widths[c] = t.header[c].size();
    for (const auto& row : t.rows)
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    std::string out;
    const auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += "  ";
            // first column left-aligned, numbers right-aligned
            const std::size_t pad = widths[c] - row[c].size();
            if (c == 0) {
                out += row[c];
                out.append(pad, ' ');
            } else {
                out.append(pad, ' ');
                out += row[c];
            }
        }
        out += '\n';
    };
    emit(t.header);
    std::size_t total = 0;
    for (std::size_t w : widths) total += w;
    out.append(total + 2 * (widths.size() - 1), '-');
    out += '\n';
    for (const auto& row : t.rows) emit(row);
    return out;
}

inline void write_csv(const ReportTable& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
    const auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            out << row[c];
        }
        out << '\n';
    };
    emit(t.header);
    for (const auto& row : t.rows) emit(row);
    if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Grid expansion
// ---------------------------------------------------------------------------

struct R2DropOption {
    std::optional<double> below;
    std::optional<double> above;
};

struct GridSpec {
    double train_fraction = 0.7;
    bool stratified = false;
    std::vector<std::uint64_t> seeds{0};
    Metric metric_of_record = Metric::roc_auc;
    std::vector<ScorerSpec> scorers;
    std::vector<RegressorSpec> regressors{RegressorSpec{}};
    std::vector<ErrorMetric> error_metrics{ErrorMetric::mse};
    std::vector<ScalerKind> input_scalings{ScalerKind::minmax};
    std::vector<bool> clip_options{false};
    std::vector<R2DropOption> r2_options{R2DropOption{}};
    std::vector<FeatureMode> feature_modes{FeatureMode::combined};
};

inline GridSpec parse_grid_spec(const json& j) {
    schema::Ctx ctx;
    GridSpec g;
    if (!j.is_object()) fail(ErrorKind::schema, "grid: expected a JSON object");
    schema::check_keys(j, "grid", {"split", "metric_of_record", "scorers", "recol"}, ctx);
    if (j.contains("split")) {
        const auto& js = j.at("split");
        if (schema::require_object(js, "split", ctx)) {
            schema::check_keys(js, "split", {"train_fraction", "seeds", "stratified"}, ctx);
            g.train_fraction = schema::get_number(js, "split", "train_fraction", g.train_fraction, ctx);
            g.stratified = schema::get_bool(js, "split", "stratified", g.stratified, ctx);
            if (js.contains("seeds")) {
                if (!js.at("seeds").is_array() || js.at("seeds").empty())
                    ctx.add("split.seeds", "expected a non-empty array of integers");
                else {
                    g.seeds.clear();
                    for (const auto& s : js.at("seeds")) {
                        if (!s.is_number_integer()) {
                            ctx.add("split.seeds", "expected integers");
                            break;
                        }
                        g.seeds.push_back(s.get<std::uint64_t>());
                    }
                }
            }
        }
    }
    const std::string metric = schema::get_string(j, "grid", "metric_of_record", "roc_auc", ctx);
    if (const auto m = parse_metric(metric); m)
        g.metric_of_record = *m;
    else
        ctx.add("metric_of_record", "unknown value '" + metric + "'");
    if (!j.contains("scorers") || !j.at("scorers").is_array() || j.at("scorers").empty()) {
        ctx.add("scorers", "required non-empty array");
    } else {
        std::size_t i = 0;
        for (const auto& js : j.at("scorers"))
            g.scorers.push_back(detail::parse_scorer(js, "scorers[" + std::to_string(i++) + "]", ctx));
    }
    if (j.contains("recol")) {
        const auto& jr = j.at("recol");
        if (schema::require_object(jr, "recol", ctx)) {
            schema::check_keys(jr, "recol",
                               {"regressors", "error_metrics", "input_scalings", "clip_at_2sigma",
                                "r2_drop", "feature_modes"},
                               ctx);
            if (jr.contains("regressors")) {
                g.regressors.clear();
                std::size_t i = 0;
                for (const auto& r : jr.at("regressors"))
                    g.regressors.push_back(
                        detail::parse_regressor(r, "recol.regressors[" + std::to_string(i++) + "]", ctx));
            }
            if (jr.contains("error_metrics")) {
                g.error_metrics.clear();
                for (const auto& m : jr.at("error_metrics")) {
                    const auto em = m.is_string() ? parse_error_metric(m.get<std::string>()) : std::nullopt;
                    if (!em)
                        ctx.add("recol.error_metrics", "unknown value");
                    else
                        g.error_metrics.push_back(*em);
                }
            }
            if (jr.contains("input_scalings")) {
                g.input_scalings.clear();
                for (const auto& m : jr.at("input_scalings")) {
                    const auto sk = m.is_string() ? parse_scaler_kind(m.get<std::string>()) : std::nullopt;
                    if (!sk)
                        ctx.add("recol.input_scalings", "unknown value");
                    else
                        g.input_scalings.push_back(*sk);
                }
            }
            if (jr.contains("clip_at_2sigma")) {
                g.clip_options.clear();
                for (const auto& b : jr.at("clip_at_2sigma")) {
                    if (!b.is_boolean())
                        ctx.add("recol.clip_at_2sigma", "expected booleans");
                    else
                        g.clip_options.push_back(b.get<bool>());
                }
            }
            if (jr.contains("r2_drop")) {
                g.r2_options.clear();
                std::size_t i = 0;
                for (const auto& r : jr.at("r2_drop")) {
                    R2DropOption opt;
                    if (!r.is_null()) {
                        RecolConfig probe;
                        detail::parse_r2_drop(r, "recol.r2_drop[" + std::to_string(i) + "]", probe, ctx);
                        opt.below = probe.r2_drop_below;
                        opt.above = probe.r2_drop_above;
                    }
                    g.r2_options.push_back(opt);
                    ++i;
                }
            }
            if (jr.contains("feature_modes")) {
                g.feature_modes.clear();
                for (const auto& m : jr.at("feature_modes")) {
                    const auto fm = m.is_string() ? parse_feature_mode(m.get<std::string>()) : std::nullopt;
                    if (!fm)
                        ctx.add("recol.feature_modes", "unknown value");
                    else
                        g.feature_modes.push_back(*fm);
                }
            }
        }
    }
    const bool any_axis_empty = g.seeds.empty() || g.scorers.empty() || g.regressors.empty() ||
                                g.error_metrics.empty() || g.input_scalings.empty() ||
                                g.clip_options.empty() || g.r2_options.empty() ||
                                g.feature_modes.empty();
    if (any_axis_empty) ctx.add("grid", "empty grid: every axis needs at least one value");
    ctx.raise_if_errors("grid schema violations");
    return g;
}

/// Full cross-product of the grid axes, canonicalized and deduplicated by
/// config hash (baseline and recol-od configs collapse their unused axes).
inline std::vector<ExperimentConfig> expand_grid(const GridSpec& g, const DatasetRef& dataset) {
    std::vector<ExperimentConfig> configs;
    std::unordered_set<std::string> seen;
    for (const auto seed : g.seeds)
        for (const auto& scorer : g.scorers)
            for (const auto& regressor : g.regressors)
                for (const auto metric : g.error_metrics)
                    for (const auto scaling : g.input_scalings)
                        for (const bool clip : g.clip_options)
                            for (const auto& r2 : g.r2_options)
                                for (const auto mode : g.feature_modes) {
                                    ExperimentConfig cfg;
                                    cfg.dataset = dataset;
                                    cfg.split.train_fraction = g.train_fraction;
                                    cfg.split.stratified = g.stratified;
                                    cfg.split.seed = seed;
                                    cfg.scorer = scorer;
                                    cfg.recol.regressor = regressor;
                                    cfg.recol.error_metric = metric;
                                    cfg.recol.input_scaling = scaling;
                                    cfg.recol.clip_at_2sigma = clip;
                                    cfg.recol.r2_drop_below = r2.below;
                                    cfg.recol.r2_drop_above = r2.above;
                                    cfg.recol.feature_mode = mode;
                                    cfg.metric_of_record = g.metric_of_record;
                                    cfg = canonicalize(cfg);
                                    if (seen.insert(config_hash(cfg)).second)
                                        configs.push_back(std::move(cfg));
                                }
    return configs;
}

}  // namespace recol
