#include "sirst/mask_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sirst/error.hpp"

namespace sirst {

std::uint32_t max_level(BitDepth depth) {
    switch (depth) {
        case BitDepth::k8: return 255;
        case BitDepth::k16: return 65535;
        case BitDepth::kContinuous: return 0;
    }
    return 0;
}

void validate(const ProbMap& map) {
    if (map.height == 0 || map.width == 0)
        throw InvalidArgument("probability map must be at least 1x1");
    if (map.values.size() != map.height * map.width)
        throw InvalidArgument("probability map has " + std::to_string(map.values.size()) +
                              " values, expected " + std::to_string(map.height * map.width));
    for (double v : map.values) {
        if (!(v >= 0.0 && v <= 1.0))
            throw InvalidArgument("probability value out of [0,1]: " + std::to_string(v));
    }
}

ProbMap make_prob_map(std::size_t height, std::size_t width, std::vector<double> values,
                      BitDepth depth) {
    ProbMap map{height, width, std::move(values), depth};
    validate(map);
    return map;
}

ProbMap prob_map_from_levels(std::size_t height, std::size_t width,
                             std::span<const std::uint16_t> levels, BitDepth depth) {
    const std::uint32_t top = max_level(depth);
    if (top == 0) throw InvalidArgument("levels require a quantized bit depth");
    if (levels.size() != height * width)
        throw InvalidArgument("level count does not match dimensions");
    std::vector<double> values(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] > top) throw InvalidArgument("level exceeds bit depth");
        values[i] = static_cast<double>(levels[i]) / top;
    }
    return make_prob_map(height, width, std::move(values), depth);
}

ProbMap quantize(const ProbMap& map, BitDepth depth) {
    const std::uint32_t top = max_level(depth);
    if (top == 0) return map;
    ProbMap out{map.height, map.width, std::vector<double>(map.size()), depth};
    for (std::size_t i = 0; i < map.size(); ++i)
        out.values[i] = static_cast<double>(level_of(map.values[i], top)) / top;
    return out;
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BinaryMask binarize(const ProbMap& map, double t) {
    BinaryMask mask(map.height, map.width);
    const double* v = map.values.data();
    std::uint8_t* b = mask.bits.data();
    for (std::size_t i = 0, n = map.size(); i < n; ++i) b[i] = v[i] > t ? 1 : 0;
    return mask;
}

namespace {

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

std::uint32_t unite(std::vector<std::uint32_t>& parent, std::uint32_t a, std::uint32_t b) {
    a = find_root(parent, a);
    b = find_root(parent, b);
    if (a == b) return a;
    if (a < b) {
        parent[b] = a;
        return a;
    }
    parent[a] = b;
    return b;
}

}  // namespace

Components label_components(const BinaryMask& mask, Connectivity conn) {
    const std::size_t h = mask.height;
    const std::size_t w = mask.width;
    Components out;
    out.labels.height = h;
    out.labels.width = w;
    out.labels.labels.assign(h * w, 0);
    auto& lab = out.labels.labels;
    const std::uint8_t* bits = mask.bits.data();
    const bool eight = conn == Connectivity::kEight;

    // Pass 1: provisional labels; parent[0] is a background sentinel.
    std::vector<std::uint32_t> parent{0};
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t row = r * w;
        for (std::size_t c = 0; c < w; ++c) {
            if (!bits[row + c]) continue;
            std::uint32_t label = 0;
            auto consider = [&](std::uint32_t n) {
                if (n == 0) return;
                label = label == 0 ? n : unite(parent, label, n);
            };
            if (c > 0) consider(lab[row + c - 1]);
            if (r > 0) {
                const std::size_t up = row - w;
                consider(lab[up + c]);
                if (eight) {
                    if (c > 0) consider(lab[up + c - 1]);
                    if (c + 1 < w) consider(lab[up + c + 1]);
                }
            }
            if (label == 0) {
                label = static_cast<std::uint32_t>(parent.size());
                parent.push_back(label);
            }
            lab[row + c] = label;
        }
    }
    if (parent.size() == 1) return out;

    // Pass 2: resolve roots, renumber in raster order and gather statistics.
    std::vector<std::uint32_t> remap(parent.size(), 0);
    struct Acc {
        std::uint64_t area = 0, sum_r = 0, sum_c = 0;
        std::size_t min_r, min_c, max_r = 0, max_c = 0;
    };
    std::vector<Acc> acc;
    std::uint32_t next = 0;
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t row = r * w;
        for (std::size_t c = 0; c < w; ++c) {
            std::uint32_t& l = lab[row + c];
            if (l == 0) continue;
            const std::uint32_t root = find_root(parent, l);
            if (remap[root] == 0) {
                remap[root] = ++next;
                acc.push_back(Acc{0, 0, 0, r, c, r, c});
            }
            l = remap[root];
            Acc& a = acc[l - 1];
            ++a.area;
            a.sum_r += r;
            a.sum_c += c;
            a.min_r = std::min(a.min_r, r);
            a.min_c = std::min(a.min_c, c);
            a.max_r = std::max(a.max_r, r);
            a.max_c = std::max(a.max_c, c);
        }
    }
    out.labels.count = next;
    out.targets.reserve(next);
    for (std::uint32_t k = 0; k < next; ++k) {
        const Acc& a = acc[k];
        const double area = static_cast<double>(a.area);
        out.targets.push_back(Target{k + 1, static_cast<double>(a.sum_r) / area,
                                     static_cast<double>(a.sum_c) / area,
                                     static_cast<std::size_t>(a.area), a.min_r, a.min_c, a.max_r,
                                     a.max_c});
    }
    return out;
}

std::pair<double, double> centroid(std::span<const Pixel> pixels) {
    if (pixels.empty()) throw InvalidArgument("centroid of an empty pixel set");
    std::uint64_t sum_r = 0, sum_c = 0;
    for (const Pixel& p : pixels) {
        sum_r += p.row;
        sum_c += p.col;
    }
    const double n = static_cast<double>(pixels.size());
    return {static_cast<double>(sum_r) / n, static_cast<double>(sum_c) / n};
}

}  // namespace sirst
