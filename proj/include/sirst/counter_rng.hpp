#pragma once
// Counter-based pseudo-random numbers.
//
// output(key, i) = mix(key + (i + 1) * 0x9E3779B97F4A7C15), where mix is the
// SplitMix64 finalizer. For key = seed this reproduces the i-th output of a
// sequential SplitMix64 stream; e.g. key 1234567 yields 6457827717110365317,
// 3203168211198807973, 9817491932198370423, ... Only integer and exact
// floating-point arithmetic is used, so streams are identical across platforms.

#include <cstdint>

namespace sirst::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t counter_hash(std::uint64_t key, std::uint64_t counter) {
    return mix(key + (counter + 1) * kGolden);
}

// Independent sub-key for a named stream of a seed.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    return counter_hash(seed ^ 0xD1B54A32D192ED03ull, stream);
}

// Uniform in [0, 1) with 53 random bits.
constexpr double uniform01(std::uint64_t key, std::uint64_t counter) {
    return static_cast<double>(counter_hash(key, counter) >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n); n > 0.
constexpr std::uint64_t below(std::uint64_t key, std::uint64_t counter, std::uint64_t n) {
    return counter_hash(key, counter) % n;
}

// Approximately standard normal: Irwin-Hall sum of 12 uniforms minus 6.
constexpr double gaussian(std::uint64_t key, std::uint64_t counter) {
    double s = 0.0;
    for (std::uint64_t k = 0; k < 12; ++k) s += uniform01(key, counter * 12 + k);
    return s - 6.0;
}

// Sequential view over a counter stream.
class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}
    std::uint64_t next() { return counter_hash(key_, counter_++); }
    std::uint64_t below(std::uint64_t n) { return next() % n; }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace sirst::rng
