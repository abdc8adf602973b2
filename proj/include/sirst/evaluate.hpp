#pragma once
// Corpus evaluation: every pixel- and target-level metric in one pass,
// parallel over images with an order-independent integer reduction.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sirst/corpus.hpp"
#include "sirst/pixel_metrics.hpp"
#include "sirst/target_metrics.hpp"

namespace sirst {

enum class ReportScale { kUnit, kPercent };

inline constexpr const char* kReportFormatVersion = "1.0";
inline constexpr std::size_t kMaxPixelCurveSamples = 256;

struct EvalConfig {
    ThresholdSet thresholds = ThresholdSet::uniform(19);
    double tau = kDefaultTau;
    Connectivity connectivity = Connectivity::kEight;
    double fixed_threshold = 0.5;  // binarization for IoU, nIoU, Pd and Fa
    std::size_t histogram_bins = kDefaultHistogramBins;
    std::size_t workers = 1;
    ReportScale report_scale = ReportScale::kPercent;

    // Throws InvalidArgument on out-of-range fields.
    void validate() const;
};

struct ImageDigest {
    std::string image_id;
    std::string digest;  // FNV-1a 64, hex
};

// All metric values are stored on the [0,1] scale; emission applies report_scale.
struct MetricReport {
    std::string format_version = kReportFormatVersion;
    EvalConfig config;

    std::size_t images = 0;
    std::uint64_t pixels = 0;
    std::uint64_t positive_pixels = 0;
    std::uint64_t gt_targets = 0;

    double iou = 0.0;   // corpus-pooled intersection / union at the fixed threshold
    double niou = 0.0;  // mean of per-image IoU at the fixed threshold
    std::optional<double> pd;
    double fa = 0.0;
    bool fa_valid = true;
    std::optional<double> hse_p;
    std::optional<double> hse_t;
    std::optional<double> hse;
    std::optional<double> roc_auc;

    std::vector<TargetPRPoint> target_pr;  // one per threshold, empty when undefined
    std::vector<PRPoint> pixel_pr;         // at most kMaxPixelCurveSamples points

    bool lossy_quantization = false;
    std::vector<std::string> empty_images;  // empty prediction and gt, IoU scored 1
    std::vector<ImageDigest> inputs;        // sorted by image_id
    std::string corpus_digest;
    std::vector<std::string> warnings;

    bool target_metrics_defined() const { return hse_t.has_value(); }
};

// Throws InvalidArgument on an empty corpus, duplicate ids or dimension mismatch.
MetricReport evaluate(const Corpus& corpus, const EvalConfig& cfg);

// Pooled score histogram of a corpus, accumulated with per-worker histograms.
ScoreHistogram build_histogram(const Corpus& corpus, std::size_t bins, std::size_t workers);

std::string digest_item(const CorpusItem& item);

// Evenly spaced subset of the curve, always keeping both ends.
PRCurve sample_curve(const PRCurve& curve, std::size_t max_points);

// Both demo cases evaluated with the default configuration, plus the
// ordering property: AUC ranks case one higher while HSE-P ranks it lower.
struct RocDemoOutcome {
    MetricReport case_one;
    MetricReport case_two;
    double fp_ratio = 0.0;  // case one false-positive pixels / case two, at the fixed threshold
    bool holds() const;
};

inline constexpr double kRocDemoMinFpRatio = 10.0;
inline constexpr double kRocDemoMinAuc = 0.97;

RocDemoOutcome run_roc_demo(std::uint64_t seed, std::size_t workers);

}  // namespace sirst
