#include "sirst/synth_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "sirst/counter_rng.hpp"
#include "sirst/error.hpp"

namespace sirst {

namespace {

enum Stream : std::uint64_t {
    kPlacement = 1,
    kNoise = 2,
    kMiss = 3,
    kFalseAlarm = 4,
    kJitter = 5,
    kSceneSeed = 6,
    kPerturbSeed = 7,
    kDemoCaseOne = 8,
    kDemoCaseTwo = 9,
};

constexpr std::size_t kPlacementRetries = 10000;

std::int64_t sq(std::int64_t v) { return v * v; }

bool in_disk(std::size_t r, std::size_t c, const Disk& d) {
    return sq(static_cast<std::int64_t>(r) - static_cast<std::int64_t>(d.row)) +
               sq(static_cast<std::int64_t>(c) - static_cast<std::int64_t>(d.col)) <=
           sq(static_cast<std::int64_t>(d.radius));
}

void paint_disk(BinaryMask& mask, const Disk& d) {
    for (std::size_t r = d.row - d.radius; r <= d.row + d.radius; ++r)
        for (std::size_t c = d.col - d.radius; c <= d.col + d.radius; ++c)
            if (in_disk(r, c, d)) mask.set(r, c);
}

std::string image_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "img_%04zu", index);
    return buf;
}

}  // namespace

std::size_t disk_area(std::size_t radius) {
    const auto r = static_cast<std::int64_t>(radius);
    std::size_t n = 0;
    for (std::int64_t dr = -r; dr <= r; ++dr)
        for (std::int64_t dc = -r; dc <= r; ++dc) n += (dr * dr + dc * dc <= r * r) ? 1 : 0;
    return n;
}

Scene gen_scene(const SceneSpec& spec) {
    if (spec.height == 0 || spec.width == 0) throw InvalidArgument("scene must be at least 1x1");
    if (spec.radius_min < 1 || spec.radius_max < spec.radius_min)
        throw InvalidArgument("target radii must satisfy 1 <= min <= max");
    if (!(spec.noise_level >= 0.0 && spec.noise_level <= 1.0))
        throw InvalidArgument("noise level must lie in [0,1]");

    Scene scene;
    scene.gt = BinaryMask(spec.height, spec.width);
    const std::uint64_t place_key = rng::derive_key(spec.seed, kPlacement);
    std::uint64_t counter = 0;
    const std::size_t span = spec.radius_max - spec.radius_min + 1;
    for (std::size_t i = 0; i < spec.n_targets; ++i) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
            const std::size_t radius = spec.radius_min + rng::below(place_key, counter++, span);
            if (spec.height <= 2 * radius || spec.width <= 2 * radius) continue;
            const std::size_t row = radius + rng::below(place_key, counter++, spec.height - 2 * radius);
            const std::size_t col = radius + rng::below(place_key, counter++, spec.width - 2 * radius);
            const Disk cand{row, col, radius};
            const bool clear = std::all_of(scene.targets.begin(), scene.targets.end(), [&](const Disk& d) {
                const std::int64_t gap = static_cast<std::int64_t>(d.radius + radius + 2);
                return sq(static_cast<std::int64_t>(d.row) - static_cast<std::int64_t>(row)) +
                           sq(static_cast<std::int64_t>(d.col) - static_cast<std::int64_t>(col)) >=
                       gap * gap;
            });
            if (!clear) continue;
            scene.targets.push_back(cand);
            paint_disk(scene.gt, cand);
            placed = true;
        }
        if (!placed)
            throw InfeasibleSpec("cannot place target " + std::to_string(i + 1) + " of " +
                                 std::to_string(spec.n_targets) + " without overlap");
    }

    std::vector<double> values(spec.height * spec.width, 0.0);
    const std::uint64_t noise_key = rng::derive_key(spec.seed, kNoise);
    // Cap at the highest level not above the noise level so rounding cannot exceed it.
    const std::uint32_t top = max_level(spec.bit_depth);
    const double cap = top == 0 ? spec.noise_level
                                : std::floor(spec.noise_level * top) / static_cast<double>(top);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (scene.gt.bits[i]) {
            values[i] = 1.0;
        } else if (spec.noise_level > 0.0) {
            const double v = spec.noise_level * rng::gaussian(noise_key, i);
            values[i] = std::clamp(v, 0.0, cap);
        }
    }
    scene.ideal = quantize(make_prob_map(spec.height, spec.width, std::move(values)), spec.bit_depth);
    return scene;
}

ProbMap perturb(const ProbMap& ideal, const BinaryMask& gt, const ErrorModeSpec& e,
                std::uint64_t seed) {
    if (ideal.height != gt.height || ideal.width != gt.width)
        throw InvalidArgument("prediction and ground truth dimensions differ");
    if (!(e.miss_fraction >= 0.0 && e.miss_fraction <= 1.0) ||
        !(e.false_alarm_confidence >= 0.0 && e.false_alarm_confidence <= 1.0) ||
        !(e.confidence_jitter >= 0.0))
        throw InvalidArgument("error mode fields out of range");

    ProbMap out = ideal;
    const std::size_t h = gt.height;
    const std::size_t w = gt.width;
    auto& v = out.values;

    // Misses: zero round(fraction * K) components, those with the lowest hash.
    if (e.miss_fraction > 0.0) {
        const Components comps = label_components(gt, Connectivity::kEight);
        const std::size_t k = comps.targets.size();
        const auto n_miss = static_cast<std::size_t>(e.miss_fraction * static_cast<double>(k) + 0.5);
        std::vector<std::uint32_t> order(k);
        std::iota(order.begin(), order.end(), 1u);
        const std::uint64_t key = rng::derive_key(seed, kMiss);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return rng::counter_hash(key, a) < rng::counter_hash(key, b);
        });
        std::vector<char> missed(k + 1, 0);
        for (std::size_t i = 0; i < n_miss; ++i) missed[order[i]] = 1;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (missed[comps.labels.labels[i]] && comps.labels.labels[i] != 0) v[i] = 0.0;
    }

    // Erosion: peel `erosion_pixels` 8-connected boundary layers off the gt.
    if (e.erosion_pixels > 0) {
        BinaryMask inner = gt;
        for (std::size_t layer = 0; layer < e.erosion_pixels; ++layer) {
            BinaryMask next = inner;
            for (std::size_t r = 0; r < h; ++r) {
                for (std::size_t c = 0; c < w; ++c) {
                    if (!inner.at(r, c)) continue;
                    bool boundary = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
                    for (int dr = -1; dr <= 1 && !boundary; ++dr)
                        for (int dc = -1; dc <= 1 && !boundary; ++dc)
                            boundary = !inner.at(r + dr, c + dc);
                    if (boundary) {
                        next.set(r, c, false);
                        v[r * w + c] *= kErosionAttenuation;
                    }
                }
            }
            inner = std::move(next);
        }
    }

    // False alarms: plus-shaped blobs, clear of the gt and of each other.
    if (e.false_alarm_count > 0) {
        const std::uint64_t key = rng::derive_key(seed, kFalseAlarm);
        std::uint64_t counter = 0;
        std::vector<Pixel> centers;
        if (h < 3 || w < 3) throw InfeasibleSpec("image too small for false-alarm blobs");
        const auto clear = static_cast<std::int64_t>(kFalseAlarmClearance);
        for (std::size_t i = 0; i < e.false_alarm_count; ++i) {
            bool placed = false;
            for (std::size_t attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
                const std::size_t r = 1 + rng::below(key, counter++, h - 2);
                const std::size_t c = 1 + rng::below(key, counter++, w - 2);
                bool ok = std::all_of(centers.begin(), centers.end(), [&](const Pixel& p) {
                    return std::max(std::abs(static_cast<std::int64_t>(p.row) - static_cast<std::int64_t>(r)),
                                    std::abs(static_cast<std::int64_t>(p.col) - static_cast<std::int64_t>(c))) >= 4;
                });
                const auto r0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(r) - clear);
                const auto r1 = std::min<std::int64_t>(static_cast<std::int64_t>(h) - 1, static_cast<std::int64_t>(r) + clear);
                const auto c0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(c) - clear);
                const auto c1 = std::min<std::int64_t>(static_cast<std::int64_t>(w) - 1, static_cast<std::int64_t>(c) + clear);
                for (std::int64_t rr = r0; rr <= r1 && ok; ++rr)
                    for (std::int64_t cc = c0; cc <= c1 && ok; ++cc)
                        ok = !gt.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
                if (!ok) continue;
                centers.push_back(Pixel{r, c});
                placed = true;
            }
            if (!placed) throw InfeasibleSpec("cannot place false-alarm blob " + std::to_string(i + 1));
        }
        for (const Pixel& p : centers) {
            const std::size_t idx[5] = {p.row * w + p.col, (p.row - 1) * w + p.col, (p.row + 1) * w + p.col,
                                        p.row * w + p.col - 1, p.row * w + p.col + 1};
            for (std::size_t i : idx) v[i] = std::max(v[i], e.false_alarm_confidence);
        }
    }

    if (e.confidence_jitter > 0.0) {
        const std::uint64_t key = rng::derive_key(seed, kJitter);
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = std::clamp(v[i] + e.confidence_jitter * rng::gaussian(key, i), 0.0, 1.0);
    }
    return quantize(out, ideal.bit_depth);
}

Corpus gen_corpus(const SceneSpec& spec, const ErrorModeSpec& errors, std::size_t images) {
    Corpus corpus;
    corpus.reserve(images);
    for (std::size_t i = 0; i < images; ++i) {
        SceneSpec s = spec;
        s.seed = rng::counter_hash(rng::derive_key(spec.seed, kSceneSeed), i);
        Scene scene = gen_scene(s);
        const std::uint64_t pseed = rng::counter_hash(rng::derive_key(spec.seed, kPerturbSeed), i);
        ProbMap pred = perturb(scene.ideal, scene.gt, errors, pseed);
        corpus.push_back(CorpusItem{image_id(i), std::move(pred), std::move(scene.gt)});
    }
    return corpus;
}

RocDemo build_roc_demo(std::uint64_t seed, const RocDemoParams& p) {
    RocDemo demo;
    const std::uint32_t top = max_level(BitDepth::k16);
    auto to_level = [&](double x) { return static_cast<std::uint16_t>(level_of(x, top)); };
    const std::uint16_t target_level = to_level(p.target_confidence);
    const std::uint16_t fa_level = to_level(p.false_alarm_confidence);
    const std::uint16_t rim_level = to_level(p.case_two_rim_confidence);
    const std::uint64_t bg_levels = level_of(p.background_max, top) + 1;
    const auto fp_cut = static_cast<std::uint64_t>(p.case_one_fp_fraction * 0x1.0p64);

    for (std::size_t i = 0; i < p.images; ++i) {
        SceneSpec spec;
        spec.height = p.height;
        spec.width = p.width;
        spec.n_targets = p.targets;
        spec.radius_min = spec.radius_max = p.radius;
        spec.noise_level = 0.0;
        spec.seed = rng::counter_hash(rng::derive_key(seed, kSceneSeed), i);
        Scene scene = gen_scene(spec);

        const std::size_t n = p.height * p.width;
        std::vector<std::uint16_t> background(n);
        const std::uint64_t noise_key = rng::derive_key(spec.seed, kNoise);
        for (std::size_t k = 0; k < n; ++k)
            background[k] = static_cast<std::uint16_t>(rng::below(noise_key, k, bg_levels));

        std::vector<std::uint16_t> one = background;
        std::vector<std::uint16_t> two = background;
        for (std::size_t k = 0; k < n; ++k) {
            if (scene.gt.bits[k]) one[k] = target_level;
        }
        for (const Disk& d : scene.targets) {
            for (std::size_t r = d.row - d.radius; r <= d.row + d.radius; ++r) {
                for (std::size_t c = d.col - d.radius; c <= d.col + d.radius; ++c) {
                    if (!in_disk(r, c, d)) continue;
                    const std::size_t dist = (r > d.row ? r - d.row : d.row - r) +
                                             (c > d.col ? c - d.col : d.col - c);
                    two[r * p.width + c] = dist <= 1 ? target_level : rim_level;
                }
            }
        }

        const std::uint64_t key_one = rng::derive_key(spec.seed, kDemoCaseOne);
        for (std::size_t k = 0; k < n; ++k)
            if (!scene.gt.bits[k] && rng::counter_hash(key_one, k) < fp_cut) one[k] = fa_level;

        const std::uint64_t key_two = rng::derive_key(spec.seed, kDemoCaseTwo);
        std::uint64_t counter = 0;
        for (std::size_t placed = 0; placed < p.case_two_fp_per_image;) {
            const std::size_t k = rng::below(key_two, counter++, n);
            if (scene.gt.bits[k] || two[k] == fa_level) continue;
            two[k] = fa_level;
            ++placed;
        }

        const std::string id = image_id(i);
        demo.case_one.push_back(
            CorpusItem{id, prob_map_from_levels(p.height, p.width, one, BitDepth::k16), scene.gt});
        demo.case_two.push_back(
            CorpusItem{id, prob_map_from_levels(p.height, p.width, two, BitDepth::k16), scene.gt});
    }
    return demo;
}

}  // namespace sirst
