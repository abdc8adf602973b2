#include "sirst/pixel_metrics.hpp"

#include <numeric>

#include "sirst/error.hpp"

namespace sirst {

ScoreHistogram::ScoreHistogram(std::size_t bins) : pos_(bins, 0), neg_(bins, 0) {
    if (bins < 2) throw InvalidArgument("histogram needs at least 2 bins");
    if (bins - 1 > 0xFFFFFFFFull) throw InvalidArgument("histogram bin count too large");
}

std::uint64_t ScoreHistogram::total_pos() const {
    return std::accumulate(pos_.begin(), pos_.end(), std::uint64_t{0});
}

std::uint64_t ScoreHistogram::total_neg() const {
    return std::accumulate(neg_.begin(), neg_.end(), std::uint64_t{0});
}

std::size_t ScoreHistogram::bin_of(double value) const {
    return level_of(value, static_cast<std::uint32_t>(bins() - 1));
}

double ScoreHistogram::bin_value(std::size_t bin) const {
    return static_cast<double>(bin) / static_cast<double>(bins() - 1);
}

void ScoreHistogram::add(std::size_t bin, bool positive, std::uint64_t n) {
    (positive ? pos_ : neg_).at(bin) += n;
}

ScoreHistogram& ScoreHistogram::merge(const ScoreHistogram& other) {
    if (other.bins() != bins()) throw InvalidArgument("merging histograms of different bin counts");
    for (std::size_t b = 0; b < bins(); ++b) {
        pos_[b] += other.pos_[b];
        neg_[b] += other.neg_[b];
    }
    lossy_ = lossy_ || other.lossy_;
    return *this;
}

void accumulate(ScoreHistogram& hist, const ProbMap& pred, const BinaryMask& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw InvalidArgument("prediction and ground truth dimensions differ");
    const auto top = static_cast<std::uint32_t>(hist.bins() - 1);
    const std::uint32_t depth_top = max_level(pred.bit_depth);
    bool lossy = depth_top != 0 && top % depth_top != 0;
    for (std::size_t i = 0, n = pred.size(); i < n; ++i) {
        const std::uint32_t bin = level_of(pred.values[i], top);
        if (depth_top == 0 && pred.values[i] * top != static_cast<double>(bin)) lossy = true;
        hist.add(bin, gt.bits[i] != 0);
    }
    if (lossy) hist.mark_lossy();
}

PixelConfusion confusion_at(const ScoreHistogram& hist, double threshold) {
    PixelConfusion c;
    const auto pos = hist.pos_counts();
    const auto neg = hist.neg_counts();
    for (std::size_t b = 0; b < hist.bins(); ++b) {
        if (hist.bin_value(b) > threshold) {
            c.tp += pos[b];
            c.fp += neg[b];
        } else {
            c.fn += pos[b];
            c.tn += neg[b];
        }
    }
    return c;
}

PRCurve pixel_pr_curve(const ScoreHistogram& hist) {
    const std::uint64_t total_pos = hist.total_pos();
    if (total_pos == 0) throw UndefinedMetric("PR curve undefined: no positive pixels");
    const auto pos = hist.pos_counts();
    const auto neg = hist.neg_counts();

    // Predicted-positive counts for `bin > threshold_bin`, walking thresholds upward.
    std::uint64_t tp = total_pos;
    std::uint64_t fp = hist.total_neg();
    PRCurve curve;
    auto emit = [&](double threshold) {
        if (tp + fp == 0) return;
        curve.push_back(PRPoint{threshold,
                                static_cast<double>(tp) / static_cast<double>(tp + fp),
                                static_cast<double>(tp) / static_cast<double>(total_pos), tp, fp});
    };
    if (pos[0] + neg[0] == 0) emit(0.0);
    for (std::size_t b = 0; b < hist.bins(); ++b) {
        if (pos[b] + neg[b] == 0) continue;
        tp -= pos[b];
        fp -= neg[b];
        emit(hist.bin_value(b));
    }
    return curve;
}

double hse_p(const PRCurve& curve) {
    if (curve.empty()) throw InvalidArgument("HSE-P of an empty PR curve");
    double area = 0.0;
    for (std::size_t k = 0; k < curve.size(); ++k) {
        const double next_recall = k + 1 < curve.size() ? curve[k + 1].recall : 0.0;
        area += curve[k].precision * (curve[k].recall - next_recall);
    }
    return area;
}

std::vector<RocPoint> roc_curve(const ScoreHistogram& hist) {
    const std::uint64_t total_pos = hist.total_pos();
    const std::uint64_t total_neg = hist.total_neg();
    if (total_pos == 0 || total_neg == 0)
        throw UndefinedMetric("ROC undefined: both classes must be present");
    const auto pos = hist.pos_counts();
    const auto neg = hist.neg_counts();
    std::uint64_t tp = total_pos;
    std::uint64_t fp = total_neg;
    std::vector<RocPoint> points;
    points.push_back(RocPoint{-1.0, 1.0, 1.0});
    for (std::size_t b = 0; b < hist.bins(); ++b) {
        if (pos[b] + neg[b] == 0) continue;
        tp -= pos[b];
        fp -= neg[b];
        points.push_back(RocPoint{hist.bin_value(b), static_cast<double>(fp) / total_neg,
                                  static_cast<double>(tp) / total_pos});
    }
    return points;
}

double roc_auc(const ScoreHistogram& hist) {
    const std::uint64_t total_pos = hist.total_pos();
    const std::uint64_t total_neg = hist.total_neg();
    if (total_pos == 0 || total_neg == 0)
        throw UndefinedMetric("ROC-AUC undefined: both classes must be present");
    const auto pos = hist.pos_counts();
    const auto neg = hist.neg_counts();
    // 2 * (#pairs pos > neg) + #ties, in exact integer arithmetic.
    unsigned __int128 doubled = 0;
    std::uint64_t neg_below = 0;
    for (std::size_t b = 0; b < hist.bins(); ++b) {
        if (pos[b] != 0)
            doubled += static_cast<unsigned __int128>(pos[b]) * (2 * neg_below + neg[b]);
        neg_below += neg[b];
    }
    const long double denom = 2.0L * static_cast<long double>(total_pos) * total_neg;
    return static_cast<double>(static_cast<long double>(doubled) / denom);
}

OverlapCounts overlap(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw InvalidArgument("IoU of masks with different dimensions");
    OverlapCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.bits[i] != 0;
        const bool g = gt.bits[i] != 0;
        c.intersection += (p && g) ? 1 : 0;
        c.union_ += (p || g) ? 1 : 0;
    }
    return c;
}

double iou(const BinaryMask& pred, const BinaryMask& gt) {
    const OverlapCounts c = overlap(pred, gt);
    if (c.union_ == 0) return 1.0;
    return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

double niou(std::span<const std::pair<BinaryMask, BinaryMask>> pairs) {
    if (pairs.empty()) throw InvalidArgument("nIoU of an empty corpus");
    double sum = 0.0;
    for (const auto& [pred, gt] : pairs) sum += iou(pred, gt);
    return sum / static_cast<double>(pairs.size());
}

}  // namespace sirst
