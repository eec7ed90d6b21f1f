#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "recol/core.hpp"

namespace recol {

enum class ColumnOrigin { original, recol };

struct ColumnInfo {
    ColumnOrigin origin = ColumnOrigin::original;
    std::size_t source = 0;  // index of the original column this came from
    std::string name;
};

/// Row-major feature matrix handed to the outlier detectors, with provenance
/// per column. Carries no labels by construction.
struct FeatureMatrix {
    Matrix m;
    std::vector<ColumnInfo> columns;

    std::size_t rows() const { return m.rows; }
    std::size_t cols() const { return m.cols; }

    std::size_t count(ColumnOrigin origin) const {
        std::size_t n = 0;
        for (const auto& c : columns) n += c.origin == origin ? 1 : 0;
        return n;
    }
};

inline void write_csv(const FeatureMatrix& fm, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
    for (std::size_t c = 0; c < fm.cols(); ++c) {
        if (c) out << ',';
        out << fm.columns[c].name;
    }
    out << '\n';
    char buf[40];
    for (std::size_t r = 0; r < fm.rows(); ++r) {
        for (std::size_t c = 0; c < fm.cols(); ++c) {
            if (c) out << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", fm.m.at(r, c));
            out << buf;
        }
        out << '\n';
    }
    if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

}  // namespace recol
