#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "recol/core.hpp"
#include "recol/feature_matrix.hpp"

namespace recol {

enum class OdKind { knn_mean, kth_nn, lof, hbos, iforest, ucblof, ldcof };

inline std::string to_string(OdKind k) {
    switch (k) {
        case OdKind::knn_mean: return "knn_mean";
        case OdKind::kth_nn: return "kth_nn";
        case OdKind::lof: return "lof";
        case OdKind::hbos: return "hbos";
        case OdKind::iforest: return "iforest";
        case OdKind::ucblof: return "ucblof";
        case OdKind::ldcof: return "ldcof";
    }
    return "?";
}

struct OdSpec {
    OdKind kind = OdKind::kth_nn;
    int k = 10;              // neighbors (knn_mean, kth_nn, lof)
    int n_bins = 0;          // hbos; 0 = ceil(sqrt(n_train))
    int n_trees = 100;       // iforest
    int subsample_size = 0;  // iforest; 0 = min(256, n_train)
    int n_clusters = 8;      // ucblof, ldcof
    double alpha = 0.9;      // large-cluster coverage fraction
    double beta = 5.0;       // large-to-small cluster size ratio
    std::uint64_t seed = 0;
};

inline void validate_spec(const OdSpec& s) {
    if (s.k < 1) fail(ErrorKind::invalid_argument, "od spec: k must be >= 1");
    if (s.n_bins < 0) fail(ErrorKind::invalid_argument, "od spec: n_bins must be >= 1, or 0 for the default");
    if (s.n_trees < 1) fail(ErrorKind::invalid_argument, "od spec: n_trees must be >= 1");
    if (s.subsample_size < 0)
        fail(ErrorKind::invalid_argument, "od spec: subsample_size must be >= 2, or 0 for the default");
    if (s.n_clusters < 1) fail(ErrorKind::invalid_argument, "od spec: n_clusters must be >= 1");
    if (!(s.alpha > 0.0 && s.alpha < 1.0)) fail(ErrorKind::invalid_argument, "od spec: alpha must be in (0, 1)");
    if (!(s.beta > 1.0)) fail(ErrorKind::invalid_argument, "od spec: beta must be > 1");
}

/// Per-row outlier scores, higher = more outlying.
struct OutlierScores {
    std::vector<double> scores;
    std::string scorer;
};

/// Whose rows are being scored. train_leave_one_out scores the training
/// matrix itself, with each point excluded from its own neighbor statistics
/// where the definition would otherwise trivially return zero distances
/// (the kNN family and LOF; histogram, forest and cluster scorers use the
/// fitted model as-is).
enum class ScoreMode { eval, train_leave_one_out };

// ---------------------------------------------------------------------------
// Isolation-forest path normalization
// ---------------------------------------------------------------------------

/// Average unsuccessful-BST search path length: 2 H(n-1) - 2 (n-1)/n.
/// The harmonic number is summed exactly for small n and approximated with
/// the Euler-Mascheroni constant above that, matching the iforest literature.
inline double c_factor(std::size_t n) {
    if (n < 2) fail(ErrorKind::invalid_argument, "c_factor: n must be >= 2");
    const std::size_t m = n - 1;
    double h;
    if (m <= 10) {
        h = 0.0;
        for (std::size_t i = 1; i <= m; ++i) h += 1.0 / static_cast<double>(i);
    } else {
        constexpr double kEulerMascheroni = 0.5772156649015329;
        h = std::log(static_cast<double>(m)) + kEulerMascheroni;
    }
    return 2.0 * h - 2.0 * static_cast<double>(m) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// k-means (Lloyd with k-means++ seeding)
// ---------------------------------------------------------------------------

struct KMeansResult {
    Matrix centroids;                     // n_clusters x dim
    std::vector<std::size_t> assignment;  // per train row
    std::vector<double> inertia_history;  // one value per Lloyd iteration
};

namespace detail {

inline std::size_t nearest_centroid(const Matrix& centroids, const double* x, std::size_t dim) {
    std::size_t best = 0;
    double best_d = squared_distance(centroids.row(0), x, dim);
    for (std::size_t c = 1; c < centroids.rows; ++c) {
        const double d = squared_distance(centroids.row(c), x, dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace detail

inline KMeansResult kmeans(const Matrix& x, std::size_t n_clusters, std::uint64_t seed) {
    const std::size_t n = x.rows, dim = x.cols;
    if (n_clusters < 1 || n_clusters > n)
        fail(ErrorKind::invalid_argument, "kmeans: n_clusters must be in [1, n_rows]");

    Rng rng(seed);
    Matrix centroids(n_clusters, dim);

    // k-means++ seeding
    std::vector<double> d2(n, 0.0);
    {
        const std::size_t first = static_cast<std::size_t>(rng.next_below(n));
        std::copy_n(x.row(first), dim, centroids.row(0));
        for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centroids.row(0), dim);
        for (std::size_t c = 1; c < n_clusters; ++c) {
            double total = 0.0;
            for (double v : d2) total += v;
            std::size_t pick;
            if (total > 0.0) {
                const double target = rng.next_double() * total;
                double cum = 0.0;
                pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    cum += d2[i];
                    if (cum > target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::size_t>(rng.next_below(n));  // all remaining points coincide
            }
            std::copy_n(x.row(pick), dim, centroids.row(c));
            for (std::size_t i = 0; i < n; ++i)
                d2[i] = std::min(d2[i], squared_distance(x.row(i), centroids.row(c), dim));
        }
    }

    KMeansResult res;
    res.assignment.assign(n, 0);
    constexpr int kMaxIterations = 100;
    std::vector<std::size_t> counts(n_clusters);
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        bool changed = iter == 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t a = detail::nearest_centroid(centroids, x.row(i), dim);
            if (a != res.assignment[i]) changed = true;
            res.assignment[i] = a;
        }
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t a : res.assignment) ++counts[a];
        // Re-seed empty clusters at the point farthest from its centroid.
        for (std::size_t c = 0; c < n_clusters; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[res.assignment[i]] <= 1) continue;
                const double d = squared_distance(x.row(i), centroids.row(res.assignment[i]), dim);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far_d < 0.0) continue;
            std::copy_n(x.row(far), dim, centroids.row(c));
            --counts[res.assignment[far]];
            res.assignment[far] = c;
            ++counts[c];
            changed = true;
        }
        // Move centroids to member means.
        Matrix sums(n_clusters, dim);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = x.row(i);
            double* s = sums.row(res.assignment[i]);
            for (std::size_t f = 0; f < dim; ++f) s[f] += xi[f];
        }
        for (std::size_t c = 0; c < n_clusters; ++c)
            if (counts[c] > 0)
                for (std::size_t f = 0; f < dim; ++f)
                    centroids.at(c, f) = sums.at(c, f) / static_cast<double>(counts[c]);

        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            inertia += squared_distance(x.row(i), centroids.row(res.assignment[i]), dim);
        res.inertia_history.push_back(inertia);
        if (!changed) break;
    }
    res.centroids = std::move(centroids);
    return res;
}

inline KMeansResult kmeans(const FeatureMatrix& train, std::size_t n_clusters, std::uint64_t seed) {
    return kmeans(train.m, n_clusters, seed);
}

// ---------------------------------------------------------------------------
// Scorers
// ---------------------------------------------------------------------------

namespace detail {

// k nearest train rows of point x, ascending (distance, index); ties by index.
inline std::vector<std::pair<double, std::size_t>> k_nearest(const Matrix& train, const double* x,
                                                             std::size_t k, std::size_t skip) {
    std::vector<std::pair<double, std::size_t>> all;
    all.reserve(train.rows);
    for (std::size_t i = 0; i < train.rows; ++i) {
        if (i == skip) continue;
        all.emplace_back(squared_distance(train.row(i), x, train.cols), i);
    }
    const std::size_t kk = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(kk), all.end());
    all.resize(kk);
    for (auto& [d, i] : all) d = std::sqrt(d);
    return all;
}

constexpr std::size_t kNoSkip = static_cast<std::size_t>(-1);

// Local reachability densities of every train point, train-internal
// (each point's neighborhood excludes itself). Density of a point whose
// neighborhood collapses to zero reach distance is capped to keep scores
// finite.
constexpr double kMaxLrd = 1e12;

struct LofModel {
    std::vector<std::vector<std::pair<double, std::size_t>>> neighbors;  // per train point
    std::vector<double> k_distance;
    std::vector<double> lrd;
};

inline LofModel fit_lof(const Matrix& train, std::size_t k) {
    const std::size_t n = train.rows;
    LofModel m;
    m.neighbors.resize(n);
    m.k_distance.resize(n);
    m.lrd.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        m.neighbors[i] = k_nearest(train, train.row(i), k, i);
        m.k_distance[i] = m.neighbors[i].back().first;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double reach_sum = 0.0;
        for (const auto& [d, o] : m.neighbors[i]) reach_sum += std::max(d, m.k_distance[o]);
        const double mean_reach = reach_sum / static_cast<double>(m.neighbors[i].size());
        m.lrd[i] = mean_reach > 0.0 ? std::min(1.0 / mean_reach, kMaxLrd) : kMaxLrd;
    }
    return m;
}

inline double lof_of_point(const LofModel& m, const Matrix& train, const double* x,
                           std::size_t k, std::size_t skip) {
    const auto nn = k_nearest(train, x, k, skip);
    double reach_sum = 0.0, lrd_sum = 0.0;
    for (const auto& [d, o] : nn) {
        reach_sum += std::max(d, m.k_distance[o]);
        lrd_sum += m.lrd[o];
    }
    const double mean_reach = reach_sum / static_cast<double>(nn.size());
    const double lrd_x = mean_reach > 0.0 ? std::min(1.0 / mean_reach, kMaxLrd) : kMaxLrd;
    return (lrd_sum / static_cast<double>(nn.size())) / lrd_x;
}

// --- HBOS -------------------------------------------------------------------

struct HbosModel {
    std::size_t n_bins = 0;
    std::vector<double> lo, width;            // per feature
    std::vector<std::vector<double>> neg_log;  // per feature, per bin
};

inline HbosModel fit_hbos(const Matrix& train, std::size_t n_bins) {
    HbosModel m;
    m.n_bins = n_bins;
    m.lo.resize(train.cols);
    m.width.resize(train.cols);
    m.neg_log.resize(train.cols);
    for (std::size_t f = 0; f < train.cols; ++f) {
        double lo = train.at(0, f), hi = lo;
        for (std::size_t r = 1; r < train.rows; ++r) {
            lo = std::min(lo, train.at(r, f));
            hi = std::max(hi, train.at(r, f));
        }
        m.lo[f] = lo;
        m.width[f] = hi > lo ? (hi - lo) / static_cast<double>(n_bins) : 0.0;
        std::vector<std::size_t> counts(n_bins, 0);
        if (m.width[f] > 0.0) {
            for (std::size_t r = 0; r < train.rows; ++r) {
                auto b = static_cast<std::size_t>((train.at(r, f) - lo) / m.width[f]);
                ++counts[std::min(b, n_bins - 1)];
            }
        } else {
            counts[0] = train.rows;  // constant feature: one bin holds everything
        }
        const double max_count = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
        auto& nl = m.neg_log[f];
        nl.resize(n_bins);
        for (std::size_t b = 0; b < n_bins; ++b) {
            // relative bin height; empty bins get a pseudo-height of 1e-6 of the max
            const double rel = counts[b] > 0 ? static_cast<double>(counts[b]) / max_count : 1e-6;
            nl[b] = -std::log(rel);
        }
    }
    return m;
}

inline double hbos_of_point(const HbosModel& m, const double* x, std::size_t dim) {
    double s = 0.0;
    for (std::size_t f = 0; f < dim; ++f) {
        std::size_t b = 0;
        if (m.width[f] > 0.0) {
            const double rel = (x[f] - m.lo[f]) / m.width[f];
            // values outside the train range fall into the edge bins
            if (rel <= 0.0)
                b = 0;
            else if (rel >= static_cast<double>(m.n_bins))
                b = m.n_bins - 1;
            else
                b = static_cast<std::size_t>(rel);
        }
        s += m.neg_log[f][b];
    }
    return s;
}

// --- isolation forest ---------------------------------------------------------

struct IsoNode {
    int feature = -1;  // -1 marks an external node
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::size_t size = 0;
};

struct IsoTree {
    std::vector<IsoNode> nodes;

    double path_length(const double* x) const {
        double depth = 0.0;
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(i)];
            i = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
            depth += 1.0;
        }
        const std::size_t size = nodes[static_cast<std::size_t>(i)].size;
        return depth + (size >= 2 ? c_factor(size) : 0.0);
    }
};

inline int build_iso_node(const Matrix& x, std::vector<std::size_t>& rows, std::size_t lo,
                          std::size_t hi, int depth, int depth_limit, Rng& rng, IsoTree& tree) {
    const std::size_t m = hi - lo;
    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({-1, 0.0, -1, -1, m});
    if (m <= 1 || depth >= depth_limit) return node_index;

    // candidate features: those with a non-degenerate range in this node
    std::vector<int> candidates;
    std::vector<std::pair<double, double>> ranges(x.cols);
    for (std::size_t f = 0; f < x.cols; ++f) {
        double mn = x.at(rows[lo], f), mx = mn;
        for (std::size_t i = lo + 1; i < hi; ++i) {
            const double v = x.at(rows[i], f);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        ranges[f] = {mn, mx};
        if (mx > mn) candidates.push_back(static_cast<int>(f));
    }
    if (candidates.empty()) return node_index;

    const int feature = candidates[static_cast<std::size_t>(rng.next_below(candidates.size()))];
    const auto [mn, mx] = ranges[static_cast<std::size_t>(feature)];
    const double threshold = rng.uniform(mn, mx);

    auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(lo),
                                 rows.begin() + static_cast<std::ptrdiff_t>(hi),
                                 [&](std::size_t r) { return x.at(r, static_cast<std::size_t>(feature)) <= threshold; });
    const std::size_t mid = static_cast<std::size_t>(mid_it - rows.begin());
    if (mid == lo || mid == hi) return node_index;  // degenerate uniform draw on the boundary

    const int left = build_iso_node(x, rows, lo, mid, depth + 1, depth_limit, rng, tree);
    const int right = build_iso_node(x, rows, mid, hi, depth + 1, depth_limit, rng, tree);
    auto& nd = tree.nodes[static_cast<std::size_t>(node_index)];
    nd.feature = feature;
    nd.threshold = threshold;
    nd.left = left;
    nd.right = right;
    return node_index;
}

struct IsoForest {
    std::vector<IsoTree> trees;
    double normalizer = 1.0;  // c(subsample_size)

    double score_point(const double* x) const {
        double total = 0.0;
        for (const auto& t : trees) total += t.path_length(x);
        const double avg = total / static_cast<double>(trees.size());
        return std::pow(2.0, -avg / normalizer);
    }
};

inline IsoForest fit_iforest(const Matrix& train, int n_trees, std::size_t subsample,
                             std::uint64_t seed) {
    IsoForest forest;
    forest.normalizer = c_factor(subsample);
    const int depth_limit =
        static_cast<int>(std::ceil(std::log2(static_cast<double>(subsample))));
    forest.trees.resize(static_cast<std::size_t>(n_trees));
    for (int t = 0; t < n_trees; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> rows;
        if (subsample >= train.rows) {
            rows.resize(train.rows);
            std::iota(rows.begin(), rows.end(), 0);
        } else {
            auto perm = rng.permutation(train.rows);
            rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(subsample));
        }
        IsoTree& tree = forest.trees[static_cast<std::size_t>(t)];
        build_iso_node(train, rows, 0, rows.size(), 0, depth_limit, rng, tree);
    }
    return forest;
}

// --- cluster scorers ----------------------------------------------------------

struct CblofModel {
    Matrix centroids;                        // large-cluster centroids only
    std::vector<double> mean_member_dist;    // per large cluster
};

// Large/small cluster partition: sort non-empty clusters by size descending
// and cut at the smallest prefix covering alpha of the points, or where the
// size ratio to the next cluster reaches beta.
inline CblofModel fit_cblof(const Matrix& train, const OdSpec& spec) {
    const auto km = kmeans(train, static_cast<std::size_t>(spec.n_clusters), spec.seed);
    const std::size_t k = km.centroids.rows;

    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t a : km.assignment) ++sizes[a];
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < k; ++c)
        if (sizes[c] > 0) order.push_back(c);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return sizes[a] != sizes[b] ? sizes[a] > sizes[b] : a < b;
    });

    std::size_t boundary = order.size();
    std::size_t cum = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        cum += sizes[order[i]];
        const bool covers = static_cast<double>(cum) >=
                            spec.alpha * static_cast<double>(train.rows);
        const bool ratio = i + 1 < order.size() &&
                           static_cast<double>(sizes[order[i]]) >=
                               spec.beta * static_cast<double>(sizes[order[i + 1]]);
        if (covers || ratio) {
            boundary = i + 1;
            break;
        }
    }

    CblofModel m;
    m.centroids = Matrix(boundary, train.cols);
    m.mean_member_dist.resize(boundary);
    for (std::size_t i = 0; i < boundary; ++i) {
        const std::size_t c = order[i];
        std::copy_n(km.centroids.row(c), train.cols, m.centroids.row(i));
        double sum = 0.0;
        for (std::size_t r = 0; r < train.rows; ++r)
            if (km.assignment[r] == c)
                sum += euclidean_distance(train.row(r), km.centroids.row(c), train.cols);
        m.mean_member_dist[i] = sum / static_cast<double>(sizes[c]);
    }
    return m;
}

}  // namespace detail

/// Fit the scorer on `train` and score every row of `eval`.
/// Distances are Euclidean throughout; kNN ties break by row index.
inline OutlierScores score(const OdSpec& spec, const FeatureMatrix& train,
                           const FeatureMatrix& eval, ScoreMode mode = ScoreMode::eval) {
    validate_spec(spec);
    if (train.rows() == 0) fail(ErrorKind::invalid_argument, "score: empty train matrix");
    if (eval.rows() == 0) fail(ErrorKind::invalid_argument, "score: empty eval matrix");
    if (train.cols() != eval.cols())
        fail(ErrorKind::invalid_argument, "score: train and eval widths differ");
    if (mode == ScoreMode::train_leave_one_out && eval.m.data != train.m.data)
        fail(ErrorKind::invalid_argument,
             "score: train_leave_one_out requires eval to be the train matrix itself");

    const Matrix& tr = train.m;
    const Matrix& ev = eval.m;
    const std::size_t k = static_cast<std::size_t>(spec.k);
    const bool loo = mode == ScoreMode::train_leave_one_out;

    OutlierScores out;
    out.scorer = to_string(spec.kind);
    out.scores.resize(ev.rows);

    switch (spec.kind) {
        case OdKind::knn_mean:
        case OdKind::kth_nn: {
            if (k >= tr.rows)
                fail(ErrorKind::invalid_argument, "score: k must be smaller than the train row count");
            for (std::size_t r = 0; r < ev.rows; ++r) {
                const auto nn = detail::k_nearest(tr, ev.row(r), k, loo ? r : detail::kNoSkip);
                if (spec.kind == OdKind::kth_nn) {
                    out.scores[r] = nn.back().first;
                } else {
                    double s = 0.0;
                    for (const auto& [d, i] : nn) s += d;
                    out.scores[r] = s / static_cast<double>(nn.size());
                }
            }
            break;
        }
        case OdKind::lof: {
            if (k >= tr.rows)
                fail(ErrorKind::invalid_argument, "score: k must be smaller than the train row count");
            const auto model = detail::fit_lof(tr, k);
            for (std::size_t r = 0; r < ev.rows; ++r)
                out.scores[r] = detail::lof_of_point(model, tr, ev.row(r), k,
                                                     loo ? r : detail::kNoSkip);
            break;
        }
        case OdKind::hbos: {
            const std::size_t n_bins =
                spec.n_bins > 0
                    ? static_cast<std::size_t>(spec.n_bins)
                    : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(tr.rows))));
            const auto model = detail::fit_hbos(tr, n_bins);
            for (std::size_t r = 0; r < ev.rows; ++r)
                out.scores[r] = detail::hbos_of_point(model, ev.row(r), ev.cols);
            break;
        }
        case OdKind::iforest: {
            if (tr.rows < 2) fail(ErrorKind::invalid_argument, "score: iforest needs at least 2 train rows");
            const std::size_t subsample =
                spec.subsample_size >= 2
                    ? std::min(static_cast<std::size_t>(spec.subsample_size), tr.rows)
                    : std::min<std::size_t>(256, tr.rows);
            const auto forest = detail::fit_iforest(tr, spec.n_trees, subsample, spec.seed);
            for (std::size_t r = 0; r < ev.rows; ++r) out.scores[r] = forest.score_point(ev.row(r));
            break;
        }
        case OdKind::ucblof:
        case OdKind::ldcof: {
            if (static_cast<std::size_t>(spec.n_clusters) > tr.rows)
                fail(ErrorKind::invalid_argument, "score: n_clusters exceeds the train row count");
            const auto model = detail::fit_cblof(tr, spec);
            for (std::size_t r = 0; r < ev.rows; ++r) {
                std::size_t best = 0;
                double best_d = euclidean_distance(model.centroids.row(0), ev.row(r), ev.cols);
                for (std::size_t c = 1; c < model.centroids.rows; ++c) {
                    const double d = euclidean_distance(model.centroids.row(c), ev.row(r), ev.cols);
                    if (d < best_d) {
                        best_d = d;
                        best = c;
                    }
                }
                if (spec.kind == OdKind::ucblof) {
                    out.scores[r] = best_d;
                } else {
                    // guard keeps scores finite for degenerate point-clusters
                    out.scores[r] = best_d / std::max(model.mean_member_dist[best], 1e-12);
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace recol
