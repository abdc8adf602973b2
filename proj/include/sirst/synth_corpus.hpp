#pragma once
// Seeded synthetic SIRST-style scenes: hard-disk targets over clipped noise,
// plus controlled degradations of the ideal prediction.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sirst/corpus.hpp"
#include "sirst/mask_core.hpp"

namespace sirst {

struct SceneSpec {
    std::size_t height = 256;
    std::size_t width = 256;
    std::size_t n_targets = 3;
    std::size_t radius_min = 1;
    std::size_t radius_max = 3;
    double noise_level = 0.05;  // background noise sigma, clipped to [0, noise_level]
    std::uint64_t seed = 0;
    BitDepth bit_depth = BitDepth::k16;
};

struct Disk {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t radius = 0;
};

struct Scene {
    BinaryMask gt;
    ProbMap ideal;
    std::vector<Disk> targets;  // placement order
};

// Pixels (r, c) with (r - row)^2 + (c - col)^2 <= radius^2.
std::size_t disk_area(std::size_t radius);

// Throws InvalidArgument for out-of-range fields, InfeasibleSpec when the
// targets cannot be placed disjointly after bounded retries.
Scene gen_scene(const SceneSpec& spec);

struct ErrorModeSpec {
    double miss_fraction = 0.0;            // fraction of gt targets zeroed
    std::size_t false_alarm_count = 0;     // spurious 5-pixel blobs away from gt
    double false_alarm_confidence = 0.0;
    std::size_t erosion_pixels = 0;        // boundary layers attenuated
    double confidence_jitter = 0.0;        // additive Gaussian sigma
};

// Attenuation factor applied to eroded boundary layers.
inline constexpr double kErosionAttenuation = 0.5;
// Minimum Chebyshev distance between a false-alarm blob center and any gt pixel.
inline constexpr std::size_t kFalseAlarmClearance = 6;

// Applies misses, erosion, false alarms, then jitter, and re-quantizes to the
// input bit depth. Throws InvalidArgument on bad ranges or dimension mismatch,
// InfeasibleSpec when blobs cannot be placed.
ProbMap perturb(const ProbMap& ideal, const BinaryMask& gt, const ErrorModeSpec& errors,
                std::uint64_t seed);

// `images` scenes (ids "img_0000", ...) each derived from (spec.seed, index).
Corpus gen_corpus(const SceneSpec& spec, const ErrorModeSpec& errors, std::size_t images);

// Fixed construction for the ROC-vs-PR demonstration.
struct RocDemoParams {
    std::size_t images = 8;
    std::size_t height = 128;
    std::size_t width = 128;
    std::size_t targets = 3;
    std::size_t radius = 2;
    double background_max = 0.2;        // negatives uniform in [0, background_max]
    double target_confidence = 0.6;
    double false_alarm_confidence = 0.7;
    double case_one_fp_fraction = 0.008;  // negatives raised to the false-alarm confidence
    std::size_t case_two_fp_per_image = 3;
    double case_two_rim_confidence = 0.195;  // target pixels off the 4-neighborhood core
};

struct RocDemo {
    Corpus case_one;  // many moderate-confidence false positives
    Corpus case_two;  // few false positives, depressed target rims
};

RocDemo build_roc_demo(std::uint64_t seed, const RocDemoParams& params = {});

}  // namespace sirst
