#pragma once

#include <optional>
#include <string>
#include <vector>

#include "recol/core.hpp"
#include "recol/feature_matrix.hpp"
#include "recol/regressors.hpp"
#include "recol/table.hpp"

namespace recol {

enum class ErrorMetric { mse, mad };
enum class FeatureMode { original_only, recol_only, combined };

inline std::string to_string(ErrorMetric m) { return m == ErrorMetric::mse ? "mse" : "mad"; }
inline std::string to_string(FeatureMode m) {
    switch (m) {
        case FeatureMode::original_only: return "original_only";
        case FeatureMode::recol_only: return "recol_only";
        case FeatureMode::combined: return "combined";
    }
    return "?";
}

/// One complete way of building RECols: the leave-one-out regressor, the
/// per-row error metric, input scaling, optional clipping at twice the train
/// error stddev, the R^2 drop filter, and which feature space to assemble.
/// RECols themselves are always min-max scaled with train-fitted bounds.
struct RecolConfig {
    RegressorSpec regressor;
    ErrorMetric error_metric = ErrorMetric::mse;
    ScalerKind input_scaling = ScalerKind::minmax;
    bool clip_at_2sigma = false;
    std::optional<double> r2_drop_below;
    std::optional<double> r2_drop_above;
    FeatureMode feature_mode = FeatureMode::combined;
};

inline void validate_config(const RecolConfig& cfg) {
    validate_spec(cfg.regressor);
    if (cfg.r2_drop_below && !(*cfg.r2_drop_below >= 0.0 && *cfg.r2_drop_below <= 1.0))
        fail(ErrorKind::invalid_argument, "recol config: r2_drop_below must be in [0, 1]");
    if (cfg.r2_drop_above && !(*cfg.r2_drop_above >= 0.0 && *cfg.r2_drop_above <= 1.0))
        fail(ErrorKind::invalid_argument, "recol config: r2_drop_above must be in [0, 1]");
    if (cfg.r2_drop_below && cfg.r2_drop_above && !(*cfg.r2_drop_below < *cfg.r2_drop_above))
        fail(ErrorKind::invalid_argument, "recol config: r2_drop_below must be less than r2_drop_above");
}

/// Fitted transform for one table: per original column, the regressor trained
/// on all other columns plus the train statistics needed to reproduce the
/// RECol on new data. Immutable after fit.
struct RecolColumnModel {
    TrainedRegressor model;
    double r2 = 0.0;
    double error_stddev = 0.0;  // population stddev of train errors, pre-clip
    double recol_min = 0.0;     // min-max bounds fitted on (possibly clipped) train errors
    double recol_max = 0.0;
};

struct RecolModelSet {
    Scaler input_scaler;
    std::vector<std::string> column_names;
    std::vector<RecolColumnModel> per_column;  // exactly one entry per original column
};

/// Per-row reconstruction error: squared error or absolute deviation.
inline std::vector<double> reconstruction_error(const std::vector<double>& y,
                                                const std::vector<double>& y_hat,
                                                ErrorMetric metric) {
    if (y.size() != y_hat.size())
        fail(ErrorKind::invalid_argument, "reconstruction_error: length mismatch");
    std::vector<double> e(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - y_hat[i];
        e[i] = metric == ErrorMetric::mse ? d * d : std::fabs(d);
    }
    return e;
}

/// Cap errors at twice the (train) standard deviation.
inline std::vector<double> clip_errors(const std::vector<double>& errors, double sigma) {
    if (sigma < 0.0) fail(ErrorKind::invalid_argument, "clip_errors: negative sigma");
    const double cap = 2.0 * sigma;
    std::vector<double> out(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i) out[i] = std::min(errors[i], cap);
    return out;
}

namespace detail {

// Inputs for the column-j regressor: every scaled column except j,
// in original order.
inline Matrix leave_one_out_inputs(const Table& scaled, std::size_t skip) {
    const std::size_t n = scaled.n_rows(), d = scaled.n_cols();
    Matrix x(n, d - 1);
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < d; ++c) {
        if (c == skip) continue;
        for (std::size_t r = 0; r < n; ++r) x.at(r, out_c) = scaled.columns[c][r];
        ++out_c;
    }
    return x;
}

inline std::vector<std::string> leave_one_out_names(const std::vector<std::string>& names,
                                                    std::size_t skip) {
    std::vector<std::string> out;
    out.reserve(names.size() - 1);
    for (std::size_t c = 0; c < names.size(); ++c)
        if (c != skip) out.push_back(names[c]);
    return out;
}

}  // namespace detail

/// Pack an (already scaled) feature table into a FeatureMatrix of original
/// columns. This is the whole baseline pathway; no RECol state is involved.
inline FeatureMatrix original_features(const Table& scaled) {
    const std::size_t n = scaled.n_rows(), d = scaled.n_cols();
    FeatureMatrix fm;
    fm.m = Matrix(n, d);
    for (std::size_t c = 0; c < d; ++c) {
        fm.columns.push_back({ColumnOrigin::original, c, scaled.names[c]});
        for (std::size_t r = 0; r < n; ++r) fm.m.at(r, c) = scaled.columns[c][r];
    }
    return fm;
}

/// Train one regressor per column on all other columns and record the train
/// error statistics. All statistics (R^2, error stddev, RECol min-max bounds,
/// the input scaler) come from train rows only. Labels on the table, if any,
/// are ignored.
inline RecolModelSet fit_recols(const Table& train, const RecolConfig& cfg) {
    validate_config(cfg);
    validate_table(train);
    const std::size_t d = train.n_cols();
    if (d < 2)
        fail(ErrorKind::invalid_argument,
             "fit_recols: need at least 2 columns for leave-one-out reconstruction");

    RecolModelSet ms;
    ms.input_scaler = fit_scaler(train.without_labels(), cfg.input_scaling);
    ms.column_names = train.names;
    const Table scaled = ms.input_scaler.apply(train.without_labels());

    ms.per_column.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        RegressorSpec spec = cfg.regressor;
        spec.seed = derive_seed(cfg.regressor.seed, j);
        const Matrix x = detail::leave_one_out_inputs(scaled, j);
        const std::vector<double>& y = scaled.columns[j];

        RecolColumnModel cm;
        cm.model = fit(spec, x, y, detail::leave_one_out_names(scaled.names, j));
        const auto y_hat = cm.model.predict(x);
        cm.r2 = r_squared(y, y_hat);
        auto errors = reconstruction_error(y, y_hat, cfg.error_metric);
        cm.error_stddev = population_stddev(errors);
        if (cfg.clip_at_2sigma) errors = clip_errors(errors, cm.error_stddev);
        const auto [mn, mx] = std::minmax_element(errors.begin(), errors.end());
        cm.recol_min = *mn;
        cm.recol_max = *mx;
        ms.per_column[j] = std::move(cm);
    }
    return ms;
}

/// Indices of the RECols kept by the R^2 filter: drop column j iff
/// r2_j < below or r2_j > above (when the respective threshold is set).
inline std::vector<std::size_t> select_recols(const RecolModelSet& ms, const RecolConfig& cfg) {
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < ms.per_column.size(); ++j) {
        const double r2 = ms.per_column[j].r2;
        if (cfg.r2_drop_below && r2 < *cfg.r2_drop_below) continue;
        if (cfg.r2_drop_above && r2 > *cfg.r2_drop_above) continue;
        kept.push_back(j);
    }
    if (kept.empty() && cfg.feature_mode == FeatureMode::recol_only)
        fail(ErrorKind::invalid_argument,
             "select_recols: the R^2 filter dropped every RECol but feature_mode is recol_only");
    return kept;
}

/// Apply the fitted transform: per-row errors through the trained regressors,
/// clipping with the TRAIN sigma, min-max scaling with TRAIN bounds, then
/// feature-space assembly per cfg.feature_mode. Stateless and deterministic;
/// train values of a scaled RECol lie in [0,1], new data may exceed 1.
inline FeatureMatrix transform(const Table& t, const RecolModelSet& ms, const RecolConfig& cfg) {
    validate_config(cfg);
    if (t.names != ms.column_names)
        fail(ErrorKind::invalid_argument, "transform: table schema does not match the fitted model set");
    const std::size_t n = t.n_rows(), d = t.n_cols();
    const Table scaled = ms.input_scaler.apply(t.without_labels());

    if (cfg.feature_mode == FeatureMode::original_only) return original_features(scaled);

    FeatureMatrix fm;

    const auto kept = select_recols(ms, cfg);
    const std::size_t n_orig = cfg.feature_mode == FeatureMode::combined ? d : 0;
    fm.m = Matrix(n, n_orig + kept.size());
    for (std::size_t c = 0; c < n_orig; ++c) {
        fm.columns.push_back({ColumnOrigin::original, c, scaled.names[c]});
        for (std::size_t r = 0; r < n; ++r) fm.m.at(r, c) = scaled.columns[c][r];
    }
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const std::size_t j = kept[k];
        const auto& cm = ms.per_column[j];
        const Matrix x = detail::leave_one_out_inputs(scaled, j);
        const auto y_hat = cm.model.predict(x);
        auto errors = reconstruction_error(scaled.columns[j], y_hat, cfg.error_metric);
        if (cfg.clip_at_2sigma) errors = clip_errors(errors, cm.error_stddev);
        const double range = cm.recol_max > cm.recol_min ? cm.recol_max - cm.recol_min : 1.0;
        fm.columns.push_back({ColumnOrigin::recol, j, "recol(" + scaled.names[j] + ")"});
        for (std::size_t r = 0; r < n; ++r)
            fm.m.at(r, n_orig + k) = (errors[r] - cm.recol_min) / range;
    }
    return fm;
}

}  // namespace recol
