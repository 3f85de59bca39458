#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "aiareseg/serialize.hpp"
#include "aiareseg/tensor.hpp"

namespace aia {

// Dice similarity coefficient between two binary masks. Two empty masks
// count as a perfect match.
template <typename T>
double dsc_metric(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "dsc_metric");
    double inter = 0, total = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double x = a.data()[i] != T(0) ? 1.0 : 0.0;
        double y = b.data()[i] != T(0) ? 1.0 : 0.0;
        inter += x * y;
        total += x + y;
    }
    return total == 0 ? 1.0 : 2.0 * inter / total;
}

// Mean absolute per-pixel difference between a probability map and truth.
template <typename T>
double mae_metric(const Tensor<T>& pred, const Tensor<T>& truth) {
    check_same_shape(pred, truth, "mae_metric");
    double acc = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        acc += std::abs(static_cast<double>(pred.data()[i]) -
                        static_cast<double>(truth.data()[i]));
    return acc / static_cast<double>(pred.size());
}

// Axis-aligned box with inclusive pixel coordinates.
struct BBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    BBox() = default;
    BBox(double x0, double y0, double x1, double y1)
        : x_min(x0), y_min(y0), x_max(x1), y_max(y1) {
        if (x_min > x_max || y_min > y_max) throw contract_error("bbox: min exceeds max");
    }

    double area() const { return (x_max - x_min + 1) * (y_max - y_min + 1); }
};

// Tight box over the nonzero pixels of a [H,W] or [1,H,W] mask.
template <typename T>
std::optional<BBox> mask_to_bbox(const Tensor<T>& mask) {
    size_t h, w;
    if (mask.rank() == 2) {
        h = mask.shape()[0];
        w = mask.shape()[1];
    } else if (mask.rank() == 3 && mask.shape()[0] == 1) {
        h = mask.shape()[1];
        w = mask.shape()[2];
    } else {
        throw shape_error("mask_to_bbox: expected [H,W] or [1,H,W], got " +
                          shape_str(mask.shape()));
    }
    size_t x0 = w, y0 = h, x1 = 0, y1 = 0;
    bool any = false;
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x)
            if (mask.data()[y * w + x] != T(0)) {
                any = true;
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (!any) return std::nullopt;
    return BBox(static_cast<double>(x0), static_cast<double>(y0),
                static_cast<double>(x1), static_cast<double>(y1));
}

inline double iou(const BBox& a, const BBox& b) {
    double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min) + 1;
    double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min) + 1;
    if (iw <= 0 || ih <= 0) return 0.0;
    double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

// One scored detection for a frame; a frame with no detection carries nullopt.
struct ScoredBox {
    double score = 0;
    BBox box;
};

// Per-IOU-threshold evaluation record: detections sorted by descending score
// with their greedy match outcome, plus the ground-truth total.
struct PrecisionRecallCurve {
    std::vector<std::pair<double, bool>> entries;  // (score, is_true_positive)
    size_t truth_count = 0;
    double iou_threshold = 0;
};

// Greedy one-to-one matching by descending score at IOU >= threshold.
// Single-object task: at most one detection and one truth per frame.
inline PrecisionRecallCurve pr_curve(const std::vector<std::optional<ScoredBox>>& detections,
                                     const std::vector<std::optional<BBox>>& truths,
                                     double iou_threshold) {
    if (detections.size() != truths.size())
        throw contract_error("pr_curve: detections and truths must cover the same frames");
    PrecisionRecallCurve c;
    c.iou_threshold = iou_threshold;
    for (const auto& t : truths)
        if (t) ++c.truth_count;
    std::vector<size_t> order;
    for (size_t f = 0; f < detections.size(); ++f)
        if (detections[f]) order.push_back(f);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return detections[a]->score > detections[b]->score;
    });
    std::vector<char> matched(truths.size(), 0);
    for (size_t f : order) {
        bool tp = truths[f] && !matched[f] && iou(detections[f]->box, *truths[f]) >= iou_threshold;
        if (tp) matched[f] = 1;
        c.entries.emplace_back(detections[f]->score, tp);
    }
    return c;
}

// 101-point interpolated area under the precision-recall curve.
inline double ap_from_curve(const PrecisionRecallCurve& c) {
    if (c.truth_count == 0 || c.entries.empty()) return 0.0;
    std::vector<double> precision, recall;
    size_t tp = 0;
    for (size_t i = 0; i < c.entries.size(); ++i) {
        if (c.entries[i].second) ++tp;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(c.truth_count));
    }
    double ap = 0;
    for (int i = 0; i <= 100; ++i) {
        double r = static_cast<double>(i) / 100.0;
        double best = 0;
        for (size_t j = 0; j < recall.size(); ++j)
            if (recall[j] >= r) best = std::max(best, precision[j]);
        ap += best;
    }
    return ap / 101.0;
}

inline double average_precision(const std::vector<std::optional<ScoredBox>>& detections,
                                const std::vector<std::optional<BBox>>& truths,
                                double iou_threshold) {
    return ap_from_curve(pr_curve(detections, truths, iou_threshold));
}

// Mean of AP over IOU thresholds 0.50:0.05:0.95.
inline double mean_ap(const std::vector<std::optional<ScoredBox>>& detections,
                      const std::vector<std::optional<BBox>>& truths) {
    double acc = 0;
    for (int i = 0; i < 10; ++i) acc += average_precision(detections, truths, 0.50 + 0.05 * i);
    return acc / 10.0;
}

// One row of the evaluation CSV.
struct MetricRow {
    std::string sequence;
    size_t frame = 0;
    double dsc = 0;
    double mae = 0;
};

struct MetricSummary {
    double ap50 = 0;
    double ap75 = 0;
    double map = 0;
};

inline void write_metric_report(std::ostream& os, const std::vector<MetricRow>& rows,
                                const MetricSummary& summary) {
    os << "sequence,frame,dsc,mae\n";
    os.precision(6);
    os << std::fixed;
    for (const auto& r : rows)
        os << r.sequence << ',' << r.frame << ',' << r.dsc << ',' << r.mae << '\n';
    os << "ap50,ap75,map\n"
       << summary.ap50 << ',' << summary.ap75 << ',' << summary.map << '\n';
}

inline void write_metric_report(const std::string& path, const std::vector<MetricRow>& rows,
                                const MetricSummary& summary) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open metric report for writing: " + path);
    write_metric_report(os, rows, summary);
}

} // namespace aia
