#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "ipa/errors.hpp"

namespace ipa {

/// Area under the ROC curve by the Mann-Whitney statistic; tied scores share
/// their average rank.
inline double auc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size()) throw DimensionError("auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double pos = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
        for (std::size_t q = i; q < j; ++q)
            if (labels[order[q]] > 0.5) rank_sum += avg_rank;
        i = j;
    }
    for (double y : labels) pos += (y > 0.5 ? 1.0 : 0.0);
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0.0 || neg == 0.0) throw MetricError("auc: need at least one positive and one negative label");
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

/// Mean negative log-likelihood of probabilities clamped to [1e-12, 1 - 1e-12].
inline double logloss(std::span<const double> probabilities, std::span<const double> labels) {
    if (probabilities.size() != labels.size()) throw DimensionError("logloss: length mismatch");
    if (probabilities.empty()) throw DimensionError("logloss: empty batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(probabilities[i], 1e-12, 1.0 - 1e-12);
        acc -= labels[i] > 0.5 ? std::log(p) : std::log1p(-p);
    }
    return acc / static_cast<double>(labels.size());
}

inline double rmse(std::span<const double> predictions, std::span<const double> labels) {
    if (predictions.size() != labels.size()) throw DimensionError("rmse: length mismatch");
    if (predictions.empty()) throw DimensionError("rmse: empty batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double d = predictions[i] - labels[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(labels.size()));
}

inline double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace ipa
