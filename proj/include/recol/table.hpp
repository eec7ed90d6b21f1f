#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "recol/core.hpp"

namespace recol {

/// Column-major numeric table with an optional binary ground-truth label
/// vector. Labels are carried next to the features but are only ever read
/// by evaluation code; fitting paths receive label-free views.
struct Table {
    std::vector<std::string> names;             // unique column names
    std::vector<std::vector<double>> columns;   // one vector per column, equal length
    std::optional<std::vector<int>> labels;     // 0/1 per row, if present

    std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().size(); }
    std::size_t n_cols() const { return columns.size(); }

    /// Copy with labels removed.
    Table without_labels() const {
        Table t;
        t.names = names;
        t.columns = columns;
        return t;
    }

    Table select_rows(const std::vector<std::size_t>& rows) const {
        Table t;
        t.names = names;
        t.columns.resize(columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) {
            t.columns[c].reserve(rows.size());
            for (std::size_t r : rows) t.columns[c].push_back(columns[c][r]);
        }
        if (labels) {
            std::vector<int> l;
            l.reserve(rows.size());
            for (std::size_t r : rows) l.push_back((*labels)[r]);
            t.labels = std::move(l);
        }
        return t;
    }
};

inline void validate_table(const Table& t) {
    if (t.n_cols() == 0 || t.n_rows() == 0)
        fail(ErrorKind::invalid_argument, "table must have at least one row and one column");
    const std::size_t n = t.n_rows();
    std::unordered_set<std::string> seen;
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
        if (t.columns[c].size() != n)
            fail(ErrorKind::invalid_argument, "column '" + t.names[c] + "' has mismatched length");
        if (!seen.insert(t.names[c]).second)
            fail(ErrorKind::invalid_argument, "duplicate column name '" + t.names[c] + "'");
        for (double v : t.columns[c])
            if (!std::isfinite(v))
                fail(ErrorKind::invalid_argument, "non-finite value in column '" + t.names[c] + "'");
    }
    if (t.labels) {
        if (t.labels->size() != n)
            fail(ErrorKind::invalid_argument, "label vector has mismatched length");
        for (int l : *t.labels)
            if (l != 0 && l != 1)
                fail(ErrorKind::invalid_argument, "labels must be 0 or 1");
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline std::string trim(std::string s) {
    const auto issp = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && issp(s.front())) s.erase(s.begin());
    while (!s.empty() && issp(s.back())) s.pop_back();
    return s;
}

// Locale-independent double parse of an entire cell.
inline bool parse_double(std::string_view sv, double& out) {
    const char* first = sv.data();
    const char* last = sv.data() + sv.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

}  // namespace detail

/// Load a CSV file with a header row. All cells must parse as finite
/// numbers; `label_column`, when given, is removed from the features and
/// stored as the 0/1 label vector.
inline Table load_csv(const std::string& path, const std::optional<std::string>& label_column = {}) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::parse, "'" + path + "': empty file, header row required");
    auto header = detail::split_csv_line(line);
    for (auto& h : header) h = detail::trim(h);
    {
        std::unordered_set<std::string> seen;
        for (const auto& h : header)
            if (!seen.insert(h).second)
                fail(ErrorKind::parse, "'" + path + "': duplicate header name '" + h + "'");
    }

    std::size_t label_idx = header.size();
    if (label_column) {
        const auto it = std::find(header.begin(), header.end(), *label_column);
        if (it == header.end())
            fail(ErrorKind::invalid_argument, "'" + path + "': label column '" + *label_column + "' not found");
        label_idx = static_cast<std::size_t>(it - header.begin());
    }

    Table t;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != label_idx) t.names.push_back(header[c]);
    t.columns.resize(t.names.size());
    std::vector<int> labels;

    std::size_t row = 1;  // 1-based data row index for error messages
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            fail(ErrorKind::parse, "'" + path + "': row " + std::to_string(row) + " has " +
                                       std::to_string(cells.size()) + " cells, expected " +
                                       std::to_string(header.size()));
        std::size_t out_c = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string cell = detail::trim(cells[c]);
            double v;
            if (!detail::parse_double(cell, v) || !std::isfinite(v))
                fail(ErrorKind::parse, "'" + path + "': non-numeric cell \"" + cell + "\" at row " +
                                           std::to_string(row) + ", column \"" + header[c] + "\"");
            if (c == label_idx) {
                if (v != 0.0 && v != 1.0)
                    fail(ErrorKind::parse, "'" + path + "': label value " + cell + " at row " +
                                               std::to_string(row) + " is outside {0,1}");
                labels.push_back(static_cast<int>(v));
            } else {
                t.columns[out_c++].push_back(v);
            }
        }
        ++row;
    }
    if (label_column) t.labels = std::move(labels);
    validate_table(t);
    return t;
}

/// Write a table as CSV. Doubles are written with 17 significant digits,
/// enough to round-trip bit-for-bit through load_csv.
inline void write_csv(const Table& t, const std::string& path, const std::string& label_name = "label") {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
        if (c) out << ',';
        out << t.names[c];
    }
    if (t.labels) out << (t.n_cols() ? "," : "") << label_name;
    out << '\n';
    char buf[40];
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
        for (std::size_t c = 0; c < t.n_cols(); ++c) {
            if (c) out << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", t.columns[c][r]);
            out << buf;
        }
        if (t.labels) out << (t.n_cols() ? "," : "") << (*t.labels)[r];
        out << '\n';
    }
    if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Train/test split
// ---------------------------------------------------------------------------

struct SplitResult {
    Table train;
    Table test;
    std::uint64_t seed = 0;
    double train_fraction = 0.0;
};

/// Uniform random permutation, then prefix split: |train| = round(fraction * n).
/// `stratified` permutes and splits within each label class instead, keeping
/// the total train size identical to the unstratified rule.
inline SplitResult train_test_split(const Table& t, double train_fraction, std::uint64_t seed,
                                    bool stratified = false) {
    const std::size_t n = t.n_rows();
    if (n < 2) fail(ErrorKind::invalid_argument, "train_test_split: need at least 2 rows");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        fail(ErrorKind::invalid_argument, "train_test_split: train_fraction must be in (0,1)");
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == n)
        fail(ErrorKind::invalid_argument, "train_test_split: split would leave an empty train or test set");

    Rng rng(seed);
    std::vector<std::size_t> train_rows, test_rows;
    if (!stratified) {
        const auto perm = rng.permutation(n);
        train_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    } else {
        if (!t.labels)
            fail(ErrorKind::invalid_argument, "train_test_split: stratified split requires labels");
        std::vector<std::size_t> by_class[2];
        for (std::size_t r = 0; r < n; ++r) by_class[(*t.labels)[r]].push_back(r);
        // Per-class prefix sizes, adjusted so the total matches the global rule.
        std::size_t take1 = std::min(
            by_class[1].size(),
            static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(by_class[1].size()))));
        std::size_t take0 = n_train >= take1 ? n_train - take1 : 0;
        if (take0 > by_class[0].size()) {
            take1 += take0 - by_class[0].size();
            take0 = by_class[0].size();
        }
        const std::size_t takes[2] = {take0, take1};
        for (int cls = 0; cls < 2; ++cls) {
            auto& rows = by_class[cls];
            const auto perm = rng.permutation(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                (i < takes[cls] ? train_rows : test_rows).push_back(rows[perm[i]]);
            }
        }
    }
    if (train_rows.empty() || test_rows.empty())
        fail(ErrorKind::invalid_argument, "train_test_split: degenerate split");

    SplitResult s;
    s.train = t.select_rows(train_rows);
    s.test = t.select_rows(test_rows);
    s.seed = seed;
    s.train_fraction = train_fraction;
    return s;
}

// ---------------------------------------------------------------------------
// Scalers
// ---------------------------------------------------------------------------

enum class ScalerKind { minmax, standard };

inline std::string to_string(ScalerKind k) {
    return k == ScalerKind::minmax ? "minmax" : "standard";
}

/// Per-column affine scaler fitted on training rows only. Parameters are
/// immutable after fit. Constant columns map to 0 under both kinds (minmax
/// range and standard deviation are treated as 1 to avoid division by zero).
struct Scaler {
    ScalerKind kind = ScalerKind::minmax;
    std::vector<std::string> names;  // fit-time schema
    std::vector<double> offset;      // min or mean, per column
    std::vector<double> scale;       // max-min or stddev; 1 for constant columns

    std::vector<double> apply_column(std::size_t c, const std::vector<double>& v) const {
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - offset[c]) / scale[c];
        return out;
    }

    Table apply(const Table& t) const {
        if (t.n_cols() != names.size())
            fail(ErrorKind::invalid_argument, "scaler: column count mismatch");
        for (std::size_t c = 0; c < names.size(); ++c)
            if (t.names[c] != names[c])
                fail(ErrorKind::invalid_argument, "scaler: schema mismatch at column '" + t.names[c] + "'");
        Table out = t;
        for (std::size_t c = 0; c < t.n_cols(); ++c) out.columns[c] = apply_column(c, t.columns[c]);
        return out;
    }
};

inline Scaler fit_scaler(const Table& train, ScalerKind kind) {
    Scaler s;
    s.kind = kind;
    s.names = train.names;
    s.offset.resize(train.n_cols());
    s.scale.resize(train.n_cols());
    for (std::size_t c = 0; c < train.n_cols(); ++c) {
        const auto& col = train.columns[c];
        if (kind == ScalerKind::minmax) {
            const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
            s.offset[c] = *mn;
            s.scale[c] = (*mx > *mn) ? (*mx - *mn) : 1.0;
        } else {
            s.offset[c] = mean_of(col);
            const double sd = population_stddev(col);
            s.scale[c] = sd > 0.0 ? sd : 1.0;
        }
    }
    return s;
}

inline Table apply_scaler(const Scaler& s, const Table& t) { return s.apply(t); }

// ---------------------------------------------------------------------------
// Synthetic linear-band generator
// ---------------------------------------------------------------------------

/// Two-attribute dataset with a linear relation y = slope*x + intercept.
/// Inlier residuals are normal noise truncated to the +-2 sigma band;
/// outlier residual magnitudes start at outlier_offset_sigmas * noise_sigma.
/// With noise_sigma == 0 the offset is taken in absolute units so outliers
/// still leave the exact line. x is uniform on [0, 10].
inline Table generate_synthetic_linear(std::size_t n, double slope, double intercept,
                                       double noise_sigma, double outlier_fraction,
                                       double outlier_offset_sigmas, std::uint64_t seed) {
    if (n < 2) fail(ErrorKind::invalid_argument, "generate_synthetic_linear: need n >= 2");
    if (!(outlier_fraction > 0.0 && outlier_fraction < 0.5))
        fail(ErrorKind::invalid_argument, "generate_synthetic_linear: outlier_fraction must be in (0, 0.5)");
    if (noise_sigma < 0.0 || outlier_offset_sigmas < 0.0)
        fail(ErrorKind::invalid_argument, "generate_synthetic_linear: sigma arguments must be non-negative");

    const std::size_t n_out =
        static_cast<std::size_t>(std::llround(outlier_fraction * static_cast<double>(n)));
    const double sigma_eff = noise_sigma > 0.0 ? noise_sigma : 1.0;

    Rng rng(seed);
    std::vector<double> xs(n), ys(n);
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(0.0, 10.0);
        double residual;
        if (i < n_out) {
            // magnitude >= offset * sigma, sign uniform
            const double mag = sigma_eff * (outlier_offset_sigmas + std::fabs(rng.normal()));
            residual = (rng.next_u64() & 1) ? mag : -mag;
            labels[i] = 1;
        } else if (noise_sigma > 0.0) {
            do {
                residual = noise_sigma * rng.normal();
            } while (std::fabs(residual) > 2.0 * noise_sigma);
        } else {
            residual = 0.0;
        }
        xs[i] = x;
        ys[i] = slope * x + intercept + residual;
    }

    // Shuffle rows so label order carries no information.
    const auto perm = rng.permutation(n);
    Table t;
    t.names = {"x", "y"};
    t.columns.resize(2);
    t.columns[0].reserve(n);
    t.columns[1].reserve(n);
    std::vector<int> shuffled_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        t.columns[0].push_back(xs[perm[i]]);
        t.columns[1].push_back(ys[perm[i]]);
        shuffled_labels[i] = labels[perm[i]];
    }
    t.labels = std::move(shuffled_labels);
    return t;
}

}  // namespace recol
