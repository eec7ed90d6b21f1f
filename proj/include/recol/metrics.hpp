#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "recol/core.hpp"

namespace recol {

/// ROC-AUC as the Mann-Whitney statistic: P(score_outlier > score_inlier)
/// plus half the tie probability. Computed with average ranks in O(n log n).
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        fail(ErrorKind::invalid_argument, "roc_auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        fail(ErrorKind::invalid_argument, "roc_auc: both classes must be present");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // ranks i+1 .. j share the average rank
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum_pos += avg_rank;
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// PR-AUC in the average-precision formulation: descending-score sweep,
/// AP = sum over thresholds of (recall step * precision), with tied scores
/// collapsed into a single threshold block. No interpolation.
inline double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        fail(ErrorKind::invalid_argument, "pr_auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l);
    if (n_pos == 0) fail(ErrorKind::invalid_argument, "pr_auc: at least one positive label required");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        std::size_t block_tp = 0;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            block_tp += static_cast<std::size_t>(labels[order[j]]);
            ++j;
        }
        tp += block_tp;
        fp += (j - i) - block_tp;
        if (block_tp > 0) {
            const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            const double recall_step = static_cast<double>(block_tp) / static_cast<double>(n_pos);
            ap += recall_step * precision;
        }
        i = j;
    }
    return ap;
}

}  // namespace recol
