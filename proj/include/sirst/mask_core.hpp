#pragma once
// Probability maps, binary masks and connected-component labeling.
//
// All functions here are pure; they may be called concurrently on shared
// immutable inputs.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace sirst {

// Source quantization of a probability map. Quantized maps hold
// values level / (2^bits - 1).
enum class BitDepth { k8, k16, kContinuous };

// Number of representable levels minus one (255, 65535), or 0 for continuous.
std::uint32_t max_level(BitDepth depth);

struct ProbMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;  // row-major, each in [0, 1]
    BitDepth bit_depth = BitDepth::kContinuous;

    std::size_t size() const { return values.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
};

// Validates dimensions and value range; throws InvalidArgument.
ProbMap make_prob_map(std::size_t height, std::size_t width, std::vector<double> values,
                      BitDepth depth = BitDepth::kContinuous);
void validate(const ProbMap& map);

// Builds a map from integer levels (8-bit: level/255, 16-bit: level/65535).
ProbMap prob_map_from_levels(std::size_t height, std::size_t width,
                             std::span<const std::uint16_t> levels, BitDepth depth);

// Rounds every value to the nearest level of `depth`. Idempotent.
ProbMap quantize(const ProbMap& map, BitDepth depth);

// Integer level of a value on a grid with `max_level` + 1 levels.
inline std::uint32_t level_of(double value, std::uint32_t max_level) {
    return static_cast<std::uint32_t>(value * max_level + 0.5);
}

struct BinaryMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> bits;  // row-major, 0 or 1

    BinaryMask() = default;
    BinaryMask(std::size_t h, std::size_t w) : height(h), width(w), bits(h * w, 0) {}

    std::size_t size() const { return bits.size(); }
    bool at(std::size_t row, std::size_t col) const { return bits[row * width + col] != 0; }
    void set(std::size_t row, std::size_t col, bool v = true) { bits[row * width + col] = v ? 1 : 0; }
    std::size_t count() const;
};

enum class Connectivity { kFour, kEight };

struct LabelMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint32_t> labels;  // 0 = background, 1..count = component id
    std::uint32_t count = 0;
};

struct Target {
    std::uint32_t id = 0;
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    std::size_t area = 0;
    // Inclusive bounding box.
    std::size_t min_row = 0, min_col = 0, max_row = 0, max_col = 0;
};

using TargetSet = std::vector<Target>;

struct Components {
    LabelMap labels;
    TargetSet targets;  // targets[k].id == k + 1
};

// Output bit is set exactly where value > t.
BinaryMask binarize(const ProbMap& map, double t);

// Two-pass union-find labeling. Ids follow first-encounter raster order.
Components label_components(const BinaryMask& mask, Connectivity conn = Connectivity::kEight);

struct Pixel {
    std::size_t row = 0;
    std::size_t col = 0;
};

// Mean (row, col) of a non-empty pixel set; throws InvalidArgument when empty.
std::pair<double, double> centroid(std::span<const Pixel> pixels);

}  // namespace sirst
