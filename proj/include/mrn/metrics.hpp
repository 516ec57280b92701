#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mrn/errors.hpp"

namespace mrn::harness {

struct ConfusionCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    long total() const { return tp + fp + fn + tn; }
};

struct MetricsReport {
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
    std::vector<std::pair<double, double>> roc;  // (FPR, TPR), from (0,0) to (1,1)
    double auc = 0.5;
    double threshold = 0.5;
    ConfusionCounts counts;
};

/// Accuracy/precision/recall/F1 from a confusion table; precision and
/// recall are 0 when their denominator is 0, F1 is 0 when both are.
inline MetricsReport metrics_from_counts(const ConfusionCounts& c, double threshold = 0.5) {
    MetricsReport r;
    r.counts = c;
    r.threshold = threshold;
    long total = c.total();
    r.accuracy = total == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
    r.precision = (c.tp + c.fp) == 0 ? 0.0
                                     : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    r.recall = (c.tp + c.fn) == 0 ? 0.0
                                  : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    r.f1 = (r.precision + r.recall) == 0.0
               ? 0.0
               : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

/// ROC by sweeping thresholds over the distinct scores (with the implicit
/// +inf/-inf sentinels at the ends) and trapezoidal AUC. Tied scores move
/// diagonally, which counts tied positive/negative pairs as one half in the
/// pairwise formulation.
inline std::pair<std::vector<std::pair<double, double>>, double> roc_auc(
    const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw LengthMismatch("roc_auc: scores and labels differ in length");
    long pos = 0, neg = 0;
    for (int y : labels) (y ? pos : neg) += 1;
    if (pos == 0 || neg == 0)
        throw DegenerateLabels("roc_auc: need at least one positive and one negative label");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    std::vector<std::pair<double, double>> points;
    points.emplace_back(0.0, 0.0);
    double auc = 0.0;
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        double s = scores[order[i]];
        long dtp = 0, dfp = 0;
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] ? dtp : dfp) += 1;
            ++i;
        }
        double fpr0 = static_cast<double>(fp) / static_cast<double>(neg);
        double tpr0 = static_cast<double>(tp) / static_cast<double>(pos);
        tp += dtp;
        fp += dfp;
        double fpr1 = static_cast<double>(fp) / static_cast<double>(neg);
        double tpr1 = static_cast<double>(tp) / static_cast<double>(pos);
        auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
        points.emplace_back(fpr1, tpr1);
    }
    return {std::move(points), auc};
}

/// Threshold scores, count the confusion table, and attach ROC/AUC. With a
/// single-class label vector the ROC degenerates to the diagonal (AUC 0.5).
inline MetricsReport evaluate_scores(const std::vector<double>& scores,
                                     const std::vector<int>& labels, double threshold = 0.5) {
    if (scores.size() != labels.size())
        throw LengthMismatch("evaluate_scores: scores and labels differ in length");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool verdict = scores[i] >= threshold;
        if (verdict && labels[i])
            ++c.tp;
        else if (verdict && !labels[i])
            ++c.fp;
        else if (!verdict && labels[i])
            ++c.fn;
        else
            ++c.tn;
    }
    MetricsReport r = metrics_from_counts(c, threshold);
    try {
        auto [points, auc] = roc_auc(scores, labels);
        r.roc = std::move(points);
        r.auc = auc;
    } catch (const DegenerateLabels&) {
        r.roc = {{0.0, 0.0}, {1.0, 1.0}};
        r.auc = 0.5;
    }
    return r;
}

}  // namespace mrn::harness
