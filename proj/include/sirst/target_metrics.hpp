#pragma once
// Target-level metrics: greedy centroid matching, Pd/Fa, the multi-threshold
// target PR sweep, HSE-T and the HSE product fusion.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sirst/mask_core.hpp"

namespace sirst {

inline constexpr double kDefaultTau = 3.0;
// Fa above this ratio marks a detector as invalid.
inline constexpr double kFaValidityLimit = 1e-4;

class ThresholdSet {
public:
    // Throws InvalidArgument unless values are strictly increasing inside (0, 1).
    explicit ThresholdSet(std::vector<double> values);

    // t_j = j / (count + 1), j = 1..count. count = 19 gives 0.05, 0.10, ..., 0.95.
    static ThresholdSet uniform(std::size_t count);

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    double operator[](std::size_t j) const { return values_[j]; }

private:
    std::vector<double> values_;
};

struct Match {
    std::uint32_t gt_id = 0;
    std::uint32_t pred_id = 0;
    double distance = 0.0;
};

struct MatchResult {
    std::vector<Match> matches;
    std::size_t n_match = 0;
    std::size_t n_pred = 0;
    std::size_t n_gt = 0;
};

// Each ground-truth centroid, in id order, claims the first unmatched
// prediction (in id order) within Euclidean distance tau.
MatchResult match_targets(const TargetSet& pred, const TargetSet& gt, double tau);

// Per-image target and false-alarm counts at one binarization.
struct TargetCounts {
    std::uint64_t n_match = 0;
    std::uint64_t n_pred = 0;
    std::uint64_t n_gt = 0;
    std::uint64_t false_pixels = 0;  // predicted pixels outside the ground truth
    std::uint64_t pixels = 0;

    TargetCounts& operator+=(const TargetCounts& o) {
        n_match += o.n_match;
        n_pred += o.n_pred;
        n_gt += o.n_gt;
        false_pixels += o.false_pixels;
        pixels += o.pixels;
        return *this;
    }
    friend bool operator==(const TargetCounts&, const TargetCounts&) = default;
};

TargetCounts count_targets(const BinaryMask& pred, const TargetSet& pred_targets,
                           const BinaryMask& gt, const TargetSet& gt_targets, double tau);

struct PdFa {
    double pd = 0.0;
    double fa = 0.0;        // false pixels / total pixels
    bool fa_valid = true;   // fa <= 1e-4, decided on integer counts
    TargetCounts counts;

    double fa_e6() const { return fa * 1e6; }
};

// fp * 10^4 <= total, i.e. fp / total <= 1e-4 without rounding.
bool fa_within_limit(std::uint64_t false_pixels, std::uint64_t total_pixels);

using MaskPair = std::pair<BinaryMask, BinaryMask>;  // (prediction, ground truth)
using ProbPair = std::pair<ProbMap, BinaryMask>;

// Pd and Fa on binary predictions. Throws UndefinedMetric when there is no
// ground-truth target, InvalidArgument on empty corpus or dimension mismatch.
PdFa pd_fa(std::span<const MaskPair> corpus, double tau = kDefaultTau,
           Connectivity conn = Connectivity::kEight);

struct TargetPRPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    TargetCounts counts;
};

// Precision/recall of corpus-pooled target counts at threshold t.
// Precision is 0 when nothing is predicted. Throws UndefinedMetric when N_g = 0.
TargetPRPoint target_pr_at_threshold(std::span<const ProbPair> corpus, double t,
                                     double tau = kDefaultTau,
                                     Connectivity conn = Connectivity::kEight);

TargetPRPoint make_target_pr_point(double threshold, const TargetCounts& counts);

struct HseTResult {
    double value = 0.0;
    std::vector<TargetPRPoint> points;
    bool negative_increment = false;  // some R(t_j) < R(t_{j+1})
};

// sum_j P(t_j) [R(t_j) - R(t_{j+1})], R(t_{M+1}) = 0. Increments are used
// unclamped; negative ones are reported through `negative_increment`.
double integrate_target_pr(std::span<const TargetPRPoint> points, bool* negative_increment = nullptr);

HseTResult hse_t(std::span<const ProbPair> corpus, const ThresholdSet& thresholds,
                 double tau = kDefaultTau, Connectivity conn = Connectivity::kEight);

// Product fusion on the [0,1] scale.
inline double hse(double hse_p, double hse_t) { return hse_p * hse_t; }

// Product fusion of two 0-100 scores, reported on the 0-100 scale.
inline double hse_percent(double hse_p_percent, double hse_t_percent) {
    return hse_p_percent * hse_t_percent / 100.0;
}

}  // namespace sirst
