#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "recol/engine.hpp"
#include "recol/od.hpp"
#include "recol/regressors.hpp"
#include "recol/table.hpp"

namespace recol {

using json = nlohmann::json;

// Format version for persisted model documents.
constexpr int kModelFormatVersion = 1;

// ---------------------------------------------------------------------------
// Enum <-> string
// ---------------------------------------------------------------------------

inline std::optional<RegressorKind> parse_regressor_kind(const std::string& s) {
    if (s == "linear") return RegressorKind::linear;
    if (s == "decision_tree") return RegressorKind::decision_tree;
    if (s == "random_forest") return RegressorKind::random_forest;
    if (s == "gradient_boosting") return RegressorKind::gradient_boosting;
    return std::nullopt;
}

inline std::optional<ScalerKind> parse_scaler_kind(const std::string& s) {
    if (s == "minmax") return ScalerKind::minmax;
    if (s == "standard") return ScalerKind::standard;
    return std::nullopt;
}

inline std::optional<ErrorMetric> parse_error_metric(const std::string& s) {
    if (s == "mse") return ErrorMetric::mse;
    if (s == "mad") return ErrorMetric::mad;
    return std::nullopt;
}

inline std::optional<FeatureMode> parse_feature_mode(const std::string& s) {
    if (s == "original_only") return FeatureMode::original_only;
    if (s == "recol_only") return FeatureMode::recol_only;
    if (s == "combined") return FeatureMode::combined;
    return std::nullopt;
}

inline std::optional<OdKind> parse_od_kind(const std::string& s) {
    if (s == "knn_mean") return OdKind::knn_mean;
    if (s == "kth_nn") return OdKind::kth_nn;
    if (s == "lof") return OdKind::lof;
    if (s == "hbos") return OdKind::hbos;
    if (s == "iforest") return OdKind::iforest;
    if (s == "ucblof") return OdKind::ucblof;
    if (s == "ldcof") return OdKind::ldcof;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Scaler / regressors
// ---------------------------------------------------------------------------

inline json to_json(const Scaler& s) {
    return json{{"kind", to_string(s.kind)},
                {"names", s.names},
                {"offset", s.offset},
                {"scale", s.scale}};
}

inline Scaler scaler_from_json(const json& j) {
    Scaler s;
    const auto kind = parse_scaler_kind(j.at("kind").get<std::string>());
    if (!kind) fail(ErrorKind::schema, "scaler: unknown kind");
    s.kind = *kind;
    s.names = j.at("names").get<std::vector<std::string>>();
    s.offset = j.at("offset").get<std::vector<double>>();
    s.scale = j.at("scale").get<std::vector<double>>();
    if (s.offset.size() != s.names.size() || s.scale.size() != s.names.size())
        fail(ErrorKind::schema, "scaler: parameter lengths do not match names");
    return s;
}

inline json to_json(const RegressorSpec& s) {
    return json{{"kind", to_string(s.kind)},
                {"n_trees", s.n_trees},
                {"max_depth", s.max_depth},
                {"min_samples_leaf", s.min_samples_leaf},
                {"max_features", s.max_features},
                {"learning_rate", s.learning_rate},
                {"subsample_fraction", s.subsample_fraction},
                {"bootstrap", s.bootstrap},
                {"seed", s.seed}};
}

inline RegressorSpec regressor_spec_from_json(const json& j) {
    RegressorSpec s;
    const auto kind = parse_regressor_kind(j.at("kind").get<std::string>());
    if (!kind) fail(ErrorKind::schema, "regressor spec: unknown kind");
    s.kind = *kind;
    s.n_trees = j.value("n_trees", s.n_trees);
    s.max_depth = j.value("max_depth", s.max_depth);
    s.min_samples_leaf = j.value("min_samples_leaf", s.min_samples_leaf);
    s.max_features = j.value("max_features", s.max_features);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.subsample_fraction = j.value("subsample_fraction", s.subsample_fraction);
    s.bootstrap = j.value("bootstrap", s.bootstrap);
    s.seed = j.value("seed", s.seed);
    validate_spec(s);
    return s;
}

namespace detail {

inline json tree_to_json(const TreeModel& t) {
    json nodes = json::array();
    for (const auto& n : t.nodes)
        nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value}));
    return nodes;
}

inline TreeModel tree_from_json(const json& j) {
    TreeModel t;
    for (const auto& n : j) {
        if (!n.is_array() || n.size() != 5) fail(ErrorKind::schema, "tree model: malformed node");
        t.nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(),
                           n[4].get<double>()});
    }
    if (t.nodes.empty()) fail(ErrorKind::schema, "tree model: empty");
    return t;
}

}  // namespace detail

inline json to_json(const TrainedRegressor& m) {
    json model;
    if (const auto* lin = std::get_if<LinearModel>(&m.model())) {
        model = {{"type", "linear"},
                 {"coefficients", lin->coefficients},
                 {"intercept", lin->intercept},
                 {"ridge_lambda", lin->ridge_lambda}};
    } else if (const auto* tree = std::get_if<TreeModel>(&m.model())) {
        model = {{"type", "tree"}, {"nodes", detail::tree_to_json(*tree)}};
    } else if (const auto* forest = std::get_if<ForestModel>(&m.model())) {
        json trees = json::array();
        for (const auto& t : forest->trees) trees.push_back(detail::tree_to_json(t));
        model = {{"type", "forest"}, {"trees", trees}};
    } else if (const auto* boost = std::get_if<BoostModel>(&m.model())) {
        json trees = json::array();
        for (const auto& t : boost->trees) trees.push_back(detail::tree_to_json(t));
        model = {{"type", "boost"},
                 {"init", boost->init},
                 {"learning_rate", boost->learning_rate},
                 {"trees", trees}};
    }
    return json{{"format_version", kModelFormatVersion},
                {"spec", to_json(m.spec())},
                {"n_features", m.n_features()},
                {"n_train", m.n_train()},
                {"feature_names", m.feature_names()},
                {"model", model}};
}

inline TrainedRegressor regressor_from_json(const json& j) {
    if (j.value("format_version", 0) != kModelFormatVersion)
        fail(ErrorKind::schema, "trained regressor: unsupported format_version");
    const RegressorSpec spec = regressor_spec_from_json(j.at("spec"));
    const auto& jm = j.at("model");
    const std::string type = jm.at("type").get<std::string>();
    ModelVariant model;
    if (type == "linear") {
        LinearModel lin;
        lin.coefficients = jm.at("coefficients").get<std::vector<double>>();
        lin.intercept = jm.at("intercept").get<double>();
        lin.ridge_lambda = jm.value("ridge_lambda", 0.0);
        model = std::move(lin);
    } else if (type == "tree") {
        model = detail::tree_from_json(jm.at("nodes"));
    } else if (type == "forest") {
        ForestModel f;
        for (const auto& t : jm.at("trees")) f.trees.push_back(detail::tree_from_json(t));
        if (f.trees.empty()) fail(ErrorKind::schema, "trained regressor: forest has no trees");
        model = std::move(f);
    } else if (type == "boost") {
        BoostModel b;
        b.init = jm.at("init").get<double>();
        b.learning_rate = jm.at("learning_rate").get<double>();
        for (const auto& t : jm.at("trees")) b.trees.push_back(detail::tree_from_json(t));
        model = std::move(b);
    } else {
        fail(ErrorKind::schema, "trained regressor: unknown model type '" + type + "'");
    }
    return TrainedRegressor(spec, std::move(model), j.at("n_features").get<std::size_t>(),
                            j.at("n_train").get<std::size_t>(),
                            j.value("feature_names", std::vector<std::string>{}));
}

// ---------------------------------------------------------------------------
// RecolConfig / RecolModelSet
// ---------------------------------------------------------------------------

inline json to_json(const RecolConfig& c) {
    json j{{"regressor", to_json(c.regressor)},
           {"error_metric", to_string(c.error_metric)},
           {"input_scaling", to_string(c.input_scaling)},
           {"clip_at_2sigma", c.clip_at_2sigma},
           {"recol_scaling", "minmax"},
           {"feature_mode", to_string(c.feature_mode)}};
    if (c.r2_drop_below || c.r2_drop_above) {
        json drop = json::object();
        if (c.r2_drop_below) drop["below"] = *c.r2_drop_below;
        if (c.r2_drop_above) drop["above"] = *c.r2_drop_above;
        j["r2_drop"] = drop;
    } else {
        j["r2_drop"] = nullptr;
    }
    return j;
}

inline json to_json(const RecolModelSet& ms) {
    json columns = json::array();
    for (std::size_t j = 0; j < ms.per_column.size(); ++j) {
        const auto& cm = ms.per_column[j];
        columns.push_back(json{{"name", ms.column_names[j]},
                               {"r2", cm.r2},
                               {"error_stddev", cm.error_stddev},
                               {"recol_min", cm.recol_min},
                               {"recol_max", cm.recol_max},
                               {"model", to_json(cm.model)}});
    }
    return json{{"format_version", kModelFormatVersion},
                {"input_scaler", to_json(ms.input_scaler)},
                {"columns", columns}};
}

inline RecolModelSet model_set_from_json(const json& j) {
    if (j.value("format_version", 0) != kModelFormatVersion)
        fail(ErrorKind::schema, "model set: unsupported format_version");
    RecolModelSet ms;
    ms.input_scaler = scaler_from_json(j.at("input_scaler"));
    for (const auto& jc : j.at("columns")) {
        RecolColumnModel cm;
        cm.model = regressor_from_json(jc.at("model"));
        cm.r2 = jc.at("r2").get<double>();
        cm.error_stddev = jc.at("error_stddev").get<double>();
        cm.recol_min = jc.at("recol_min").get<double>();
        cm.recol_max = jc.at("recol_max").get<double>();
        ms.column_names.push_back(jc.at("name").get<std::string>());
        ms.per_column.push_back(std::move(cm));
    }
    if (ms.per_column.empty()) fail(ErrorKind::schema, "model set: no columns");
    return ms;
}

inline void save_model_set(const RecolModelSet& ms, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
    out << to_json(ms).dump(2) << '\n';
    if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

inline RecolModelSet load_model_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, "'" + path + "': " + e.what());
    }
    return model_set_from_json(j);
}

}  // namespace recol
