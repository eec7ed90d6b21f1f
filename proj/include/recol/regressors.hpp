#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "recol/core.hpp"

namespace recol {

enum class RegressorKind { linear, decision_tree, random_forest, gradient_boosting };

inline std::string to_string(RegressorKind k) {
    switch (k) {
        case RegressorKind::linear: return "linear";
        case RegressorKind::decision_tree: return "decision_tree";
        case RegressorKind::random_forest: return "random_forest";
        case RegressorKind::gradient_boosting: return "gradient_boosting";
    }
    return "?";
}

constexpr int kUnlimitedDepth = std::numeric_limits<int>::max();

/// Hyperparameters for one regressor. Sentinels: max_depth -1 and
/// min_samples_leaf/max_features 0 resolve to per-kind defaults at fit time
/// (decision_tree/random_forest depth 8, gradient_boosting depth 3,
/// min_samples_leaf 5, random_forest max_features ceil(sqrt(p))).
/// max_depth 0 requests a root-only tree.
struct RegressorSpec {
    RegressorKind kind = RegressorKind::random_forest;
    int n_trees = 100;               // ensembles only
    int max_depth = -1;
    int min_samples_leaf = 0;
    int max_features = 0;            // per-split candidate features (random_forest)
    double learning_rate = 0.1;      // gradient_boosting; 0 yields the constant predictor
    double subsample_fraction = 1.0; // per-tree / per-stage row fraction
    bool bootstrap = true;           // random_forest: draw rows with replacement
    std::uint64_t seed = 0;
};

inline void validate_spec(const RegressorSpec& s) {
    const bool ensemble =
        s.kind == RegressorKind::random_forest || s.kind == RegressorKind::gradient_boosting;
    if (ensemble && s.n_trees < 1)
        fail(ErrorKind::invalid_argument, "regressor spec: n_trees must be >= 1");
    if (s.max_depth < -1)
        fail(ErrorKind::invalid_argument, "regressor spec: max_depth must be >= 0, or -1 for the default");
    if (s.min_samples_leaf < 0)
        fail(ErrorKind::invalid_argument, "regressor spec: min_samples_leaf must be >= 1, or 0 for the default");
    if (!(s.learning_rate >= 0.0 && s.learning_rate <= 1.0))
        fail(ErrorKind::invalid_argument, "regressor spec: learning_rate must be in [0, 1]");
    if (!(s.subsample_fraction > 0.0 && s.subsample_fraction <= 1.0))
        fail(ErrorKind::invalid_argument, "regressor spec: subsample_fraction must be in (0, 1]");
    if (s.max_features < 0)
        fail(ErrorKind::invalid_argument, "regressor spec: max_features must be >= 1, or 0 for all features");
}

// ---------------------------------------------------------------------------
// Model representations
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;        // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;      // leaf mean
};

struct TreeModel {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict_row(const double* x) const {
        int i = 0;
        while (nodes[i].feature >= 0)
            i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].value;
    }
};

struct LinearModel {
    std::vector<double> coefficients;
    double intercept = 0.0;
    double ridge_lambda = 0.0;  // 0 when the plain normal equations were solvable

    double predict_row(const double* x) const {
        double s = intercept;
        for (std::size_t i = 0; i < coefficients.size(); ++i) s += coefficients[i] * x[i];
        return s;
    }
};

struct ForestModel {
    std::vector<TreeModel> trees;  // prediction = mean of trees

    double predict_row(const double* x) const {
        double s = 0.0;
        for (const auto& t : trees) s += t.predict_row(x);
        return s / static_cast<double>(trees.size());
    }
};

struct BoostModel {
    double init = 0.0;  // mean of the training target
    double learning_rate = 0.0;
    std::vector<TreeModel> trees;  // stagewise fits to residuals

    double predict_row(const double* x) const {
        double s = init;
        for (const auto& t : trees) s += learning_rate * t.predict_row(x);
        return s;
    }
};

using ModelVariant = std::variant<LinearModel, TreeModel, ForestModel, BoostModel>;

// ---------------------------------------------------------------------------
// CART (variance-reduction splits)
// ---------------------------------------------------------------------------

namespace detail {

struct TreeParams {
    int max_depth = 8;
    int min_samples_leaf = 5;
    int max_features = 0;  // 0 = all
};

class CartBuilder {
public:
    CartBuilder(const Matrix& x, const std::vector<double>& y, const TreeParams& params, Rng* rng)
        : x_(x), y_(y), params_(params), rng_(rng) {}

    TreeModel build(std::vector<std::size_t> rows) {
        TreeModel tree;
        build_node(std::move(rows), 0, tree);
        return tree;
    }

private:
    // Candidate features for one split: all of them, or a random subset of
    // size max_features, kept in ascending order so the lowest-index /
    // lowest-threshold tie-breaking rule is well defined.
    std::vector<int> candidate_features() const {
        const int p = static_cast<int>(x_.cols);
        if (params_.max_features <= 0 || params_.max_features >= p || rng_ == nullptr) {
            std::vector<int> all(static_cast<std::size_t>(p));
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        std::vector<int> pool(static_cast<std::size_t>(p));
        std::iota(pool.begin(), pool.end(), 0);
        std::vector<int> picked;
        picked.reserve(static_cast<std::size_t>(params_.max_features));
        for (int i = 0; i < params_.max_features; ++i) {
            const auto j = static_cast<std::size_t>(rng_->next_below(pool.size()));
            picked.push_back(pool[j]);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
        }
        std::sort(picked.begin(), picked.end());
        return picked;
    }

    int build_node(std::vector<std::size_t> rows, int depth, TreeModel& tree) {
        const std::size_t m = rows.size();
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t r : rows) {
            sum += y_[r];
            sum_sq += y_[r] * y_[r];
        }
        const double node_mean = sum / static_cast<double>(m);
        const double node_sse = sum_sq - sum * sum / static_cast<double>(m);

        const int node_index = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({-1, 0.0, -1, -1, node_mean});

        const std::size_t min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        if (depth >= params_.max_depth || m < 2 * min_leaf || node_sse <= 0.0)
            return node_index;

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
        std::vector<std::pair<double, double>> vy(m);  // (feature value, target)

        for (int f : candidate_features()) {
            for (std::size_t i = 0; i < m; ++i)
                vy[i] = {x_.at(rows[i], static_cast<std::size_t>(f)), y_[rows[i]]};
            std::sort(vy.begin(), vy.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t k = 1; k < m; ++k) {
                left_sum += vy[k - 1].second;
                left_sq += vy[k - 1].second * vy[k - 1].second;
                if (k < min_leaf || m - k < min_leaf) continue;
                if (vy[k - 1].first == vy[k].first) continue;  // no boundary between ties
                const double right_sum = sum - left_sum;
                const double right_sq = sum_sq - left_sq;
                const double sse_left = left_sq - left_sum * left_sum / static_cast<double>(k);
                const double sse_right =
                    right_sq - right_sum * right_sum / static_cast<double>(m - k);
                const double gain = node_sse - sse_left - sse_right;
                // strict > keeps the first (lowest feature, lowest threshold) on ties
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (vy[k - 1].first + vy[k].first);
                }
            }
        }

        if (best_feature < 0) return node_index;

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            (x_.at(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left_rows
                                                                                : right_rows)
                .push_back(r);
        }
        if (left_rows.size() < min_leaf || right_rows.size() < min_leaf)
            return node_index;  // threshold fell on a boundary the scan did not see
        rows.clear();
        rows.shrink_to_fit();

        const int left = build_node(std::move(left_rows), depth + 1, tree);
        const int right = build_node(std::move(right_rows), depth + 1, tree);
        tree.nodes[static_cast<std::size_t>(node_index)].feature = best_feature;
        tree.nodes[static_cast<std::size_t>(node_index)].threshold = best_threshold;
        tree.nodes[static_cast<std::size_t>(node_index)].left = left;
        tree.nodes[static_cast<std::size_t>(node_index)].right = right;
        return node_index;
    }

    const Matrix& x_;
    const std::vector<double>& y_;
    TreeParams params_;
    Rng* rng_;
};

// Cholesky solve of a symmetric positive definite system; false on failure.
inline bool cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t dim,
                           std::vector<double>& out) {
    std::vector<double> l(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * dim + j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i * dim + k] * l[j * dim + k];
            if (i == j) {
                if (!(s > 0.0) || !std::isfinite(s)) return false;
                l[i * dim + i] = std::sqrt(s);
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    // forward then backward substitution
    std::vector<double> z(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * dim + k] * z[k];
        z[i] = s / l[i * dim + i];
    }
    out.assign(dim, 0.0);
    for (std::size_t ii = dim; ii > 0; --ii) {
        const std::size_t i = ii - 1;
        double s = z[i];
        for (std::size_t k = i + 1; k < dim; ++k) s -= l[k * dim + i] * out[k];
        out[i] = s / l[i * dim + i];
    }
    return true;
}

inline LinearModel fit_linear(const Matrix& x, const std::vector<double>& y) {
    const std::size_t n = x.rows, p = x.cols, dim = p + 1;
    // normal equations over [X | 1]
    std::vector<double> a(dim * dim, 0.0), b(dim, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const double* xr = x.row(r);
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = i; j < p; ++j) a[i * dim + j] += xr[i] * xr[j];
            a[i * dim + p] += xr[i];
            b[i] += xr[i] * y[r];
        }
        b[p] += y[r];
    }
    a[p * dim + p] = static_cast<double>(n);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < i; ++j) a[i * dim + j] = a[j * dim + i];

    double trace = 0.0;
    for (std::size_t i = 0; i < dim; ++i) trace += a[i * dim + i];
    const double trace_scale = trace > 0.0 ? trace / static_cast<double>(dim) : 1.0;

    LinearModel model;
    std::vector<double> beta;
    double lambda = 0.0;
    if (!cholesky_solve(a, b, dim, beta)) {
        // rank-deficient system: escalate a small ridge until it factors
        lambda = 1e-8 * trace_scale;
        for (int attempt = 0; attempt < 16; ++attempt, lambda *= 10.0) {
            std::vector<double> ar = a;
            for (std::size_t i = 0; i < dim; ++i) ar[i * dim + i] += lambda;
            if (cholesky_solve(std::move(ar), b, dim, beta)) break;
            beta.clear();
        }
        if (beta.empty()) fail(ErrorKind::runtime, "linear fit: normal equations unsolvable");
        model.ridge_lambda = lambda;
    }
    model.coefficients.assign(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(p));
    model.intercept = beta[p];
    return model;
}

// Rows for one ensemble member. With replacement (bootstrap) or without;
// a full-fraction draw without replacement is the identity.
inline std::vector<std::size_t> sample_rows(std::size_t n, double fraction, bool with_replacement,
                                            Rng& rng) {
    const std::size_t m = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
    std::vector<std::size_t> rows;
    if (with_replacement) {
        rows.reserve(m);
        for (std::size_t i = 0; i < m; ++i)
            rows.push_back(static_cast<std::size_t>(rng.next_below(n)));
    } else if (m >= n) {
        rows.resize(n);
        std::iota(rows.begin(), rows.end(), 0);
    } else {
        auto perm = rng.permutation(n);
        rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
    }
    return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// TrainedRegressor
// ---------------------------------------------------------------------------

class TrainedRegressor {
public:
    TrainedRegressor() = default;
    TrainedRegressor(RegressorSpec spec, ModelVariant model, std::size_t n_features,
                     std::size_t n_train, std::vector<std::string> feature_names)
        : spec_(std::move(spec)),
          model_(std::move(model)),
          n_features_(n_features),
          n_train_(n_train),
          feature_names_(std::move(feature_names)) {}

    std::vector<double> predict(const Matrix& x) const {
        if (x.cols != n_features_)
            fail(ErrorKind::invalid_argument,
                 "predict: expected " + std::to_string(n_features_) + " features, got " +
                     std::to_string(x.cols));
        std::vector<double> out(x.rows);
        std::visit(
            [&](const auto& m) {
                for (std::size_t r = 0; r < x.rows; ++r) out[r] = m.predict_row(x.row(r));
            },
            model_);
        return out;
    }

    const RegressorSpec& spec() const { return spec_; }
    const ModelVariant& model() const { return model_; }
    std::size_t n_features() const { return n_features_; }
    std::size_t n_train() const { return n_train_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }

private:
    RegressorSpec spec_;
    ModelVariant model_;
    std::size_t n_features_ = 0;
    std::size_t n_train_ = 0;
    std::vector<std::string> feature_names_;
};

inline TrainedRegressor fit(const RegressorSpec& spec, const Matrix& x,
                            const std::vector<double>& y,
                            std::vector<std::string> feature_names = {}) {
    validate_spec(spec);
    if (x.rows != y.size())
        fail(ErrorKind::invalid_argument, "fit: X and y row counts differ");
    if (x.rows < 2) fail(ErrorKind::invalid_argument, "fit: need at least 2 training rows");
    if (x.cols == 0) fail(ErrorKind::invalid_argument, "fit: need at least one feature");
    for (double v : x.data)
        if (!std::isfinite(v)) fail(ErrorKind::invalid_argument, "fit: non-finite value in X");
    for (double v : y)
        if (!std::isfinite(v)) fail(ErrorKind::invalid_argument, "fit: non-finite value in y");
    if (!feature_names.empty() && feature_names.size() != x.cols)
        fail(ErrorKind::invalid_argument, "fit: feature name count mismatch");

    const std::size_t n = x.rows;
    const int p = static_cast<int>(x.cols);
    const bool is_forest = spec.kind == RegressorKind::random_forest;

    detail::TreeParams params;
    params.max_depth = spec.max_depth >= 0
                           ? spec.max_depth
                           : (spec.kind == RegressorKind::gradient_boosting ? 3 : 8);
    params.min_samples_leaf = spec.min_samples_leaf > 0 ? spec.min_samples_leaf : 5;
    params.max_features = 0;
    if (is_forest) {
        params.max_features = spec.max_features > 0
                                  ? std::min(spec.max_features, p)
                                  : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
    }

    ModelVariant model;
    switch (spec.kind) {
        case RegressorKind::linear:
            model = detail::fit_linear(x, y);
            break;
        case RegressorKind::decision_tree: {
            std::vector<std::size_t> rows(n);
            std::iota(rows.begin(), rows.end(), 0);
            model = detail::CartBuilder(x, y, params, nullptr).build(std::move(rows));
            break;
        }
        case RegressorKind::random_forest: {
            ForestModel forest;
            forest.trees.resize(static_cast<std::size_t>(spec.n_trees));
            for (int t = 0; t < spec.n_trees; ++t) {
                // per-tree seed: training order and thread count cannot matter
                Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(t)));
                auto rows = detail::sample_rows(n, spec.subsample_fraction, spec.bootstrap, rng);
                forest.trees[static_cast<std::size_t>(t)] =
                    detail::CartBuilder(x, y, params, &rng).build(std::move(rows));
            }
            model = std::move(forest);
            break;
        }
        case RegressorKind::gradient_boosting: {
            BoostModel boost;
            boost.init = mean_of(y);
            boost.learning_rate = spec.learning_rate;
            std::vector<double> current(n, boost.init);
            std::vector<double> residual(n);
            boost.trees.reserve(static_cast<std::size_t>(spec.n_trees));
            for (int t = 0; t < spec.n_trees; ++t) {
                Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(t)));
                for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - current[i];
                auto rows = detail::sample_rows(n, spec.subsample_fraction, false, rng);
                TreeModel tree = detail::CartBuilder(x, residual, params, nullptr).build(std::move(rows));
                for (std::size_t i = 0; i < n; ++i)
                    current[i] += spec.learning_rate * tree.predict_row(x.row(i));
                boost.trees.push_back(std::move(tree));
            }
            model = std::move(boost);
            break;
        }
    }
    return TrainedRegressor(spec, std::move(model), x.cols, n, std::move(feature_names));
}

inline std::vector<double> predict(const TrainedRegressor& m, const Matrix& x) {
    return m.predict(x);
}

/// Coefficient of determination, 1 - SS_res/SS_tot. A constant target
/// (SS_tot == 0) yields 0 so the low-R^2 filter treats it as uninformative.
inline double r_squared(const std::vector<double>& y, const std::vector<double>& y_hat) {
    if (y.size() != y_hat.size())
        fail(ErrorKind::invalid_argument, "r_squared: length mismatch");
    if (y.size() < 2) fail(ErrorKind::invalid_argument, "r_squared: need at least 2 values");
    const double m = mean_of(y);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        ss_tot += (y[i] - m) * (y[i] - m);
    }
    if (ss_tot == 0.0) return 0.0;
    return 1.0 - ss_res / ss_tot;
}

}  // namespace recol
