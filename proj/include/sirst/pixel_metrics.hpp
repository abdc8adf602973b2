#pragma once
// Pixel-level metrics: score histograms, the pixel PR curve and its area
// (HSE-P), ROC-AUC, IoU and nIoU.
//
// Curves are computed from integer per-bin counts, so results are exact for
// 8/16-bit inputs and independent of accumulation order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sirst/mask_core.hpp"

namespace sirst {

inline constexpr std::size_t kDefaultHistogramBins = 65536;

class ScoreHistogram {
public:
    explicit ScoreHistogram(std::size_t bins = kDefaultHistogramBins);

    std::size_t bins() const { return pos_.size(); }
    std::span<const std::uint64_t> pos_counts() const { return pos_; }
    std::span<const std::uint64_t> neg_counts() const { return neg_; }
    std::uint64_t total_pos() const;
    std::uint64_t total_neg() const;

    // True once any accumulated map was not exactly representable in the bins.
    bool lossy() const { return lossy_; }
    void mark_lossy() { lossy_ = true; }

    std::size_t bin_of(double value) const;
    // Confidence value represented by a bin.
    double bin_value(std::size_t bin) const;

    void add(std::size_t bin, bool positive, std::uint64_t n = 1);
    ScoreHistogram& merge(const ScoreHistogram& other);

    friend bool operator==(const ScoreHistogram&, const ScoreHistogram&) = default;

private:
    std::vector<std::uint64_t> pos_;
    std::vector<std::uint64_t> neg_;
    bool lossy_ = false;
};

// Adds every pixel of `pred` to `hist`, keyed by the ground truth label.
// Throws InvalidArgument on dimension mismatch.
void accumulate(ScoreHistogram& hist, const ProbMap& pred, const BinaryMask& gt);

struct PixelConfusion {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Confusion of the prediction `value > threshold` over the histogram.
PixelConfusion confusion_at(const ScoreHistogram& hist, double threshold);

struct PRPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
};

using PRCurve = std::vector<PRPoint>;

// One point per distinct predicted-positive set `value > t`, t ranging over
// 0 and every occupied confidence level; thresholds strictly increasing.
// Throws UndefinedMetric when the histogram holds no positive pixel.
PRCurve pixel_pr_curve(const ScoreHistogram& hist);

// Step-rule area under precision(recall): sum_k P_k (R_k - R_{k+1}), R_{n+1} = 0.
double hse_p(const PRCurve& curve);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

// ROC points from (0,0) to (1,1) over all occupied levels.
std::vector<RocPoint> roc_curve(const ScoreHistogram& hist);

// Mann-Whitney form of the trapezoidal ROC area, ties counted half.
// Throws UndefinedMetric unless both classes are present.
double roc_auc(const ScoreHistogram& hist);

struct OverlapCounts {
    std::uint64_t intersection = 0;
    std::uint64_t union_ = 0;
};

OverlapCounts overlap(const BinaryMask& pred, const BinaryMask& gt);

// |pred & gt| / |pred | gt|, 1.0 when both are empty.
double iou(const BinaryMask& pred, const BinaryMask& gt);

// Mean of per-image IoU.
double niou(std::span<const std::pair<BinaryMask, BinaryMask>> pairs);

}  // namespace sirst
