// metrics.hpp - ROC-AUC and ROC curve extraction.
//
// AUC uses the rank (Mann-Whitney) formulation with mid-ranks for tied
// scores, i.e. a tied inlier/outlier pair contributes one half.  Kept in its
// own header because both the training loop (per-epoch model selection) and
// the evaluation harness depend on it.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"

namespace odkit {

// Probability that a random outlier (label 1) scores above a random inlier
// (label 0), ties counted half.  Undefined (error) when either class is
// missing or any score is non-finite.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw DataError("auc: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(labels.size()) + " labels");
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l);
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw DataError("auc: undefined for single-class labels (" + std::to_string(n_pos) +
                        " outliers, " + std::to_string(n_neg) + " inliers)");
    for (double s : scores)
        if (!std::isfinite(s)) throw NumericError("auc: non-finite score");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based mid-rank
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] == 1) rank_sum_pos += mid_rank;
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct RocPoint {
    double threshold;  // predict outlier when score >= threshold
    double fpr;
    double tpr;
};

// ROC curve over all distinct thresholds, including the degenerate endpoints
// (0,0) (threshold above every score) and (1,1) (threshold at the minimum).
inline std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                        const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DataError("roc_points: scores/labels length mismatch");
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l);
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("roc_points: undefined for single-class labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> out;
    out.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            labels[order[j]] == 1 ? ++tp : ++fp;
            ++j;
        }
        out.push_back({scores[order[i]], static_cast<double>(fp) / static_cast<double>(n_neg),
                       static_cast<double>(tp) / static_cast<double>(n_pos)});
        i = j;
    }
    return out;
}

}  // namespace odkit
