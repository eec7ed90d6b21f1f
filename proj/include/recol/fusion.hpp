#pragma once

#include <string>
#include <vector>

#include "recol/core.hpp"
#include "recol/feature_matrix.hpp"
#include "recol/od.hpp"

namespace recol {

/// RECol-OD: min-max normalize each RECol with train-fitted bounds and
/// average across columns. No downstream OD model.
struct FusionSpec {
    enum class Normalization { minmax } normalization = Normalization::minmax;
    enum class Aggregation { mean } aggregation = Aggregation::mean;
};

/// Column bounds are fitted on `recols_train`; eval values outside those
/// bounds are kept as-is (scores can exceed 1), since clipping would erase
/// exactly the extremity the fusion exploits. Higher = more outlying.
inline OutlierScores recol_od(const Matrix& recols_train, const Matrix& recols_eval,
                              const FusionSpec& = {}) {
    if (recols_train.cols == 0 || recols_eval.cols == 0)
        fail(ErrorKind::invalid_argument, "recol_od: at least one RECol column required");
    if (recols_train.cols != recols_eval.cols)
        fail(ErrorKind::invalid_argument, "recol_od: train and eval widths differ");
    if (recols_train.rows == 0 || recols_eval.rows == 0)
        fail(ErrorKind::invalid_argument, "recol_od: empty matrix");

    const std::size_t d = recols_train.cols;
    std::vector<double> lo(d), range(d);
    for (std::size_t c = 0; c < d; ++c) {
        double mn = recols_train.at(0, c), mx = mn;
        for (std::size_t r = 1; r < recols_train.rows; ++r) {
            mn = std::min(mn, recols_train.at(r, c));
            mx = std::max(mx, recols_train.at(r, c));
        }
        lo[c] = mn;
        range[c] = mx > mn ? mx - mn : 1.0;
    }

    OutlierScores out;
    out.scorer = "recol-od";
    out.scores.resize(recols_eval.rows);
    for (std::size_t r = 0; r < recols_eval.rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += (recols_eval.at(r, c) - lo[c]) / range[c];
        out.scores[r] = s / static_cast<double>(d);
    }
    return out;
}

inline OutlierScores recol_od(const FeatureMatrix& recols_train, const FeatureMatrix& recols_eval,
                              const FusionSpec& spec = {}) {
    for (const auto& c : recols_train.columns)
        if (c.origin != ColumnOrigin::recol)
            fail(ErrorKind::invalid_argument, "recol_od: input contains non-RECol columns");
    return recol_od(recols_train.m, recols_eval.m, spec);
}

}  // namespace recol
