#include "sirst/nn_micro.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "sirst/counter_rng.hpp"
#include "sirst/error.hpp"

namespace sirst::nn {

namespace {

void check_conv(const Tensor3& x, const ConvParams& p) {
    if (p.k % 2 == 0) throw InvalidArgument("convolution kernel size must be odd");
    if (x.channels != p.in_ch)
        throw InvalidArgument("convolution expects " + std::to_string(p.in_ch) + " input channels, got " +
                              std::to_string(x.channels));
    if (p.kernel.size() != p.out_ch * p.in_ch * p.k * p.k || p.bias.size() != p.out_ch)
        throw InvalidArgument("convolution parameter sizes inconsistent with arity");
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void fill_uniform(std::span<double> v, std::uint64_t key, std::uint64_t& counter, double lo, double hi) {
    for (double& x : v) x = lo + (hi - lo) * rng::uniform01(key, counter++);
}

ConvParams random_conv(std::size_t out_ch, std::size_t in_ch, std::size_t k, std::uint64_t key,
                       std::uint64_t& counter) {
    ConvParams p = ConvParams::zeros(out_ch, in_ch, k);
    fill_uniform(p.kernel, key, counter, -0.1, 0.1);
    fill_uniform(p.bias, key, counter, -0.1, 0.1);
    return p;
}

Tensor3 slice_channels(const Tensor3& x, std::size_t begin, std::size_t count) {
    Tensor3 out(count, x.height, x.width);
    std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(begin * x.plane()), count * x.plane(), out.data.begin());
    return out;
}

void add_into(std::vector<double>& dst, std::span<const double> src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

class Hasher {
public:
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h_ ^= (v >> (8 * i)) & 0xFF;
            h_ *= 0x100000001B3ull;
        }
    }
    void values(std::span<const double> v) {
        u64(v.size());
        for (double x : v) u64(std::bit_cast<std::uint64_t>(x));
    }
    void conv(const ConvParams& p) {
        u64(p.out_ch);
        u64(p.in_ch);
        u64(p.k);
        values(p.kernel);
        values(p.bias);
    }
    std::uint64_t value() const { return h_ == 0 ? 1 : h_; }

private:
    std::uint64_t h_ = 0xCBF29CE484222325ull;
};

}  // namespace

bool Tensor3::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

ConvParams ConvParams::zeros(std::size_t out_ch, std::size_t in_ch, std::size_t k) {
    return ConvParams{out_ch, in_ch, k, std::vector<double>(out_ch * in_ch * k * k, 0.0),
                      std::vector<double>(out_ch, 0.0)};
}

Tensor3 conv(const Tensor3& x, const ConvParams& p) {
    check_conv(x, p);
    const std::size_t h = x.height, w = x.width, k = p.k;
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    Tensor3 out(p.out_ch, h, w);
    for (std::size_t o = 0; o < p.out_ch; ++o) {
        double* dst = &out.data[o * h * w];
        std::fill_n(dst, h * w, p.bias[o]);
        for (std::size_t i = 0; i < p.in_ch; ++i) {
            const double* src = &x.data[i * h * w];
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const double wt = p.w(o, i, ky, kx);
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                    for (std::size_t y = 0; y < h; ++y) {
                        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
                        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t xx = 0; xx < w; ++xx) {
                            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) + dx;
                            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                            dst[y * w + xx] += wt * src[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)];
                        }
                    }
                }
            }
        }
    }
    return out;
}

void conv_backward(const Tensor3& x, const ConvParams& p, const Tensor3& grad_out, ConvGrads& grads,
                   Tensor3* grad_x) {
    check_conv(x, p);
    if (grad_out.channels != p.out_ch || grad_out.height != x.height || grad_out.width != x.width)
        throw InvalidArgument("convolution gradient shape mismatch");
    if (grads.kernel.size() != p.kernel.size() || grads.bias.size() != p.bias.size())
        grads = ConvGrads::zeros_like(p);
    const std::size_t h = x.height, w = x.width, k = p.k;
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    if (grad_x) *grad_x = Tensor3(x.channels, h, w);
    for (std::size_t o = 0; o < p.out_ch; ++o) {
        const double* g = &grad_out.data[o * h * w];
        double bsum = 0.0;
        for (std::size_t n = 0; n < h * w; ++n) bsum += g[n];
        grads.bias[o] += bsum;
        for (std::size_t i = 0; i < p.in_ch; ++i) {
            const double* src = &x.data[i * h * w];
            double* gsrc = grad_x ? &grad_x->data[i * h * w] : nullptr;
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const double wt = p.w(o, i, ky, kx);
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                    double wsum = 0.0;
                    for (std::size_t y = 0; y < h; ++y) {
                        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
                        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t xx = 0; xx < w; ++xx) {
                            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) + dx;
                            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                            const std::size_t s = static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx);
                            wsum += g[y * w + xx] * src[s];
                            if (gsrc) gsrc[s] += g[y * w + xx] * wt;
                        }
                    }
                    grads.kernel[((o * p.in_ch + i) * k + ky) * k + kx] += wsum;
                }
            }
        }
    }
}

namespace {

struct Tap {
    std::size_t i0, i1;
    double l0, l1;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
        const double src = std::max(0.0, (static_cast<double>(i) + 0.5) * scale - 0.5);
        const auto i0 = std::min(static_cast<std::size_t>(src), in - 1);
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        const double l1 = src - static_cast<double>(i0);
        taps[i] = Tap{i0, i1, 1.0 - l1, l1};
    }
    return taps;
}

}  // namespace

Tensor3 bilinear_upsample(const Tensor3& x, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0) throw InvalidArgument("upsample target extent must be positive");
    if (x.height == 0 || x.width == 0) throw InvalidArgument("upsample of an empty tensor");
    if (out_h < x.height || out_w < x.width) throw InvalidArgument("upsample target smaller than input");
    const auto ty = bilinear_taps(x.height, out_h);
    const auto tx = bilinear_taps(x.width, out_w);
    Tensor3 out(x.channels, out_h, out_w);
    for (std::size_t c = 0; c < x.channels; ++c)
        for (std::size_t y = 0; y < out_h; ++y)
            for (std::size_t xx = 0; xx < out_w; ++xx) {
                const Tap& a = ty[y];
                const Tap& b = tx[xx];
                out.at(c, y, xx) = a.l0 * (b.l0 * x.at(c, a.i0, b.i0) + b.l1 * x.at(c, a.i0, b.i1)) +
                                   a.l1 * (b.l0 * x.at(c, a.i1, b.i0) + b.l1 * x.at(c, a.i1, b.i1));
            }
    return out;
}

Tensor3 bilinear_upsample_backward(const Tensor3& grad_out, std::size_t in_h, std::size_t in_w) {
    if (in_h == 0 || in_w == 0) throw InvalidArgument("upsample source extent must be positive");
    const auto ty = bilinear_taps(in_h, grad_out.height);
    const auto tx = bilinear_taps(in_w, grad_out.width);
    Tensor3 g(grad_out.channels, in_h, in_w);
    for (std::size_t c = 0; c < grad_out.channels; ++c)
        for (std::size_t y = 0; y < grad_out.height; ++y)
            for (std::size_t xx = 0; xx < grad_out.width; ++xx) {
                const double v = grad_out.at(c, y, xx);
                const Tap& a = ty[y];
                const Tap& b = tx[xx];
                g.at(c, a.i0, b.i0) += a.l0 * b.l0 * v;
                g.at(c, a.i0, b.i1) += a.l0 * b.l1 * v;
                g.at(c, a.i1, b.i0) += a.l1 * b.l0 * v;
                g.at(c, a.i1, b.i1) += a.l1 * b.l1 * v;
            }
    return g;
}

Tensor3 batch_norm(const Tensor3& x, const NormParams& p) {
    if (p.scale.size() != x.channels || p.shift.size() != x.channels || p.running_mean.size() != x.channels ||
        p.running_var.size() != x.channels)
        throw InvalidArgument("norm parameters do not match channel count");
    if (!(p.epsilon > 0.0)) throw InvalidArgument("norm epsilon must be positive");
    Tensor3 out(x.channels, x.height, x.width);
    for (std::size_t c = 0; c < x.channels; ++c) {
        const double inv = 1.0 / std::sqrt(p.running_var[c] + p.epsilon);
        for (std::size_t n = 0; n < x.plane(); ++n) {
            const std::size_t idx = c * x.plane() + n;
            out.data[idx] = p.scale[c] * (x.data[idx] - p.running_mean[c]) * inv + p.shift[c];
        }
    }
    return out;
}

SamfStage make_samf_stage(std::size_t channels, std::size_t prior_channels, std::size_t aligned_channels,
                          std::uint64_t seed) {
    if (channels == 0 || channels % 2 != 0) throw InvalidArgument("SAMF channel count must be even");
    const std::size_t half = channels / 2;
    const std::uint64_t key = rng::derive_key(seed, 0x5A3F);
    std::uint64_t counter = 0;
    SamfStage s;
    s.align = random_conv(aligned_channels, prior_channels, 1, key, counter);
    s.mul_branch = random_conv(half, aligned_channels, 1, key, counter);
    s.add_branch = random_conv(half, aligned_channels, 1, key, counter);
    s.add_norm.scale.resize(half);
    s.add_norm.shift.resize(half);
    s.add_norm.running_mean.resize(half);
    s.add_norm.running_var.resize(half);
    for (std::size_t c = 0; c < half; ++c) {
        s.add_norm.scale[c] = 1.0 + 0.2 * rng::uniform01(key, counter++) - 0.1;
        s.add_norm.shift[c] = 0.2 * rng::uniform01(key, counter++) - 0.1;
        s.add_norm.running_mean[c] = 0.2 * rng::uniform01(key, counter++) - 0.1;
        s.add_norm.running_var[c] = 1.0 + 0.1 * rng::uniform01(key, counter++);
    }
    s.fuse_mul = random_conv(half, half, 3, key, counter);
    s.fuse_add = random_conv(half, half, 1, key, counter);
    s.out_fuse = random_conv(channels, channels, 3, key, counter);
    return s;
}

Tensor3 random_tensor(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed, double amplitude) {
    Tensor3 t(c, h, w);
    const std::uint64_t key = rng::derive_key(seed, 0x7E45);
    for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = amplitude * (2.0 * rng::uniform01(key, i) - 1.0);
    return t;
}

std::uint64_t fingerprint(const SamfStage& s) {
    Hasher h;
    h.conv(s.align);
    h.conv(s.mul_branch);
    h.conv(s.add_branch);
    h.values(s.add_norm.scale);
    h.values(s.add_norm.shift);
    h.values(s.add_norm.running_mean);
    h.values(s.add_norm.running_var);
    h.u64(std::bit_cast<std::uint64_t>(s.add_norm.epsilon));
    h.conv(s.fuse_mul);
    h.conv(s.fuse_add);
    h.conv(s.out_fuse);
    return h.value();
}

SamfOutput samf_forward(const Tensor3& features, const Tensor3& prior, const SamfStage& s) {
    const std::size_t c = features.channels;
    if (c == 0 || c % 2 != 0) throw InvalidArgument("SAMF input channel count must be even");
    const std::size_t half = c / 2;
    if (s.mul_branch.out_ch != half || s.add_branch.out_ch != half || s.fuse_mul.in_ch != half ||
        s.fuse_mul.out_ch != half || s.fuse_add.in_ch != half || s.fuse_add.out_ch != half ||
        s.out_fuse.in_ch != c || s.out_fuse.out_ch != c)
        throw InvalidArgument("SAMF stage arities do not match the feature channel split");

    SamfOutput r;
    SamfCache& k = r.cache;
    k.features = features;
    k.prior = prior;
    k.aligned = bilinear_upsample(conv(prior, s.align), features.height, features.width);
    k.gate = conv(k.aligned, s.mul_branch);
    for (double& v : k.gate.data) v = sigmoid(v);
    k.add_pre = conv(k.aligned, s.add_branch);
    k.add_norm = batch_norm(k.add_pre, s.add_norm);
    k.add_map = k.add_norm;
    for (double& v : k.add_map.data) v = std::max(v, 0.0);

    k.mul_in = slice_channels(features, 0, half);
    for (std::size_t i = 0; i < k.mul_in.size(); ++i) k.mul_in.data[i] *= k.gate.data[i];
    k.add_in = slice_channels(features, half, half);
    for (std::size_t i = 0; i < k.add_in.size(); ++i) k.add_in.data[i] += k.add_map.data[i];

    const Tensor3 b_mul = conv(k.mul_in, s.fuse_mul);
    const Tensor3 b_add = conv(k.add_in, s.fuse_add);
    k.fused = Tensor3(c, features.height, features.width);
    std::copy(b_mul.data.begin(), b_mul.data.end(), k.fused.data.begin());
    std::copy(b_add.data.begin(), b_add.data.end(), k.fused.data.begin() + static_cast<std::ptrdiff_t>(b_mul.size()));
    for (std::size_t i = 0; i < k.fused.size(); ++i) k.fused.data[i] += features.data[i];

    r.out = conv(k.fused, s.out_fuse);
    k.out_channels = r.out.channels;
    k.fingerprint = fingerprint(s);
    return r;
}

SamfBackward samf_backward(const Tensor3& grad_out, const SamfCache& k, const SamfStage& s) {
    if (k.fingerprint == 0) throw InvalidState("SAMF backward called with an empty cache");
    if (k.fingerprint != fingerprint(s)) throw InvalidState("SAMF cache was produced by a different stage");
    if (grad_out.channels != k.out_channels || grad_out.height != k.features.height || grad_out.width != k.features.width)
        throw InvalidState("SAMF output gradient does not match the cached forward pass");

    const std::size_t c = k.features.channels;
    const std::size_t half = c / 2;
    const std::size_t plane = k.features.plane();
    SamfBackward r;
    SamfGrads& g = r.grads;
    g.align = ConvGrads::zeros_like(s.align);
    g.mul_branch = ConvGrads::zeros_like(s.mul_branch);
    g.add_branch = ConvGrads::zeros_like(s.add_branch);
    g.fuse_mul = ConvGrads::zeros_like(s.fuse_mul);
    g.fuse_add = ConvGrads::zeros_like(s.fuse_add);
    g.out_fuse = ConvGrads::zeros_like(s.out_fuse);
    g.add_norm.scale.assign(half, 0.0);
    g.add_norm.shift.assign(half, 0.0);

    Tensor3 g_fused;
    conv_backward(k.fused, s.out_fuse, grad_out, g.out_fuse, &g_fused);
    r.grad_features = g_fused;  // residual path

    const Tensor3 g_bmul = slice_channels(g_fused, 0, half);
    const Tensor3 g_badd = slice_channels(g_fused, half, half);
    Tensor3 g_mul_in, g_add_in;
    conv_backward(k.mul_in, s.fuse_mul, g_bmul, g.fuse_mul, &g_mul_in);
    conv_backward(k.add_in, s.fuse_add, g_badd, g.fuse_add, &g_add_in);

    Tensor3 g_gate_pre(half, k.features.height, k.features.width);
    Tensor3 g_add_pre(half, k.features.height, k.features.width);
    for (std::size_t i = 0; i < half * plane; ++i) {
        const double gate = k.gate.data[i];
        r.grad_features.data[i] += g_mul_in.data[i] * gate;
        g_gate_pre.data[i] = g_mul_in.data[i] * k.features.data[i] * gate * (1.0 - gate);
        r.grad_features.data[half * plane + i] += g_add_in.data[i];
    }
    for (std::size_t ch = 0; ch < half; ++ch) {
        const double inv = 1.0 / std::sqrt(s.add_norm.running_var[ch] + s.add_norm.epsilon);
        for (std::size_t n = 0; n < plane; ++n) {
            const std::size_t i = ch * plane + n;
            const double g_norm = k.add_norm.data[i] > 0.0 ? g_add_in.data[i] : 0.0;
            g.add_norm.scale[ch] += g_norm * (k.add_pre.data[i] - s.add_norm.running_mean[ch]) * inv;
            g.add_norm.shift[ch] += g_norm;
            g_add_pre.data[i] = g_norm * s.add_norm.scale[ch] * inv;
        }
    }

    Tensor3 g_aligned, g_aligned_add;
    conv_backward(k.aligned, s.mul_branch, g_gate_pre, g.mul_branch, &g_aligned);
    conv_backward(k.aligned, s.add_branch, g_add_pre, g.add_branch, &g_aligned_add);
    add_into(g_aligned.data, g_aligned_add.data);
    const Tensor3 g_proj = bilinear_upsample_backward(g_aligned, k.prior.height, k.prior.width);
    conv_backward(k.prior, s.align, g_proj, g.align, nullptr);  // prior is frozen
    return r;
}

Tensor3 stack_samf(const Tensor3& features, std::span<const Tensor3> priors, std::span<const SamfStage> stages) {
    return stack_samf_forward(features, priors, stages).out;
}

StackOutput stack_samf_forward(const Tensor3& features, std::span<const Tensor3> priors,
                               std::span<const SamfStage> stages) {
    if (stages.empty()) throw InvalidArgument("SAMF stack needs at least one stage");
    if (priors.size() != stages.size()) throw InvalidArgument("SAMF stack needs one prior per stage");
    StackOutput r;
    r.out = features;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        SamfOutput o = samf_forward(r.out, priors[i], stages[i]);
        r.out = std::move(o.out);
        r.caches.push_back(std::move(o.cache));
    }
    return r;
}

StackBackward stack_samf_backward(const Tensor3& grad_out, std::span<const SamfCache> caches,
                                  std::span<const SamfStage> stages) {
    if (caches.size() != stages.size() || stages.empty())
        throw InvalidState("SAMF stack caches do not match the stages");
    StackBackward r;
    r.grads.resize(stages.size());
    Tensor3 g = grad_out;
    for (std::size_t i = stages.size(); i-- > 0;) {
        SamfBackward b = samf_backward(g, caches[i], stages[i]);
        g = std::move(b.grad_features);
        r.grads[i] = std::move(b.grads);
    }
    r.grad_features = std::move(g);
    return r;
}

std::vector<ParamView> parameters(SamfStage& s) {
    return {
        {"align.kernel", s.align.kernel},           {"align.bias", s.align.bias},
        {"mul_branch.kernel", s.mul_branch.kernel}, {"mul_branch.bias", s.mul_branch.bias},
        {"add_branch.kernel", s.add_branch.kernel}, {"add_branch.bias", s.add_branch.bias},
        {"add_norm.scale", s.add_norm.scale},       {"add_norm.shift", s.add_norm.shift},
        {"fuse_mul.kernel", s.fuse_mul.kernel},     {"fuse_mul.bias", s.fuse_mul.bias},
        {"fuse_add.kernel", s.fuse_add.kernel},     {"fuse_add.bias", s.fuse_add.bias},
        {"out_fuse.kernel", s.out_fuse.kernel},     {"out_fuse.bias", s.out_fuse.bias},
    };
}

std::vector<GradView> gradients(const SamfGrads& g) {
    return {
        {"align.kernel", g.align.kernel},           {"align.bias", g.align.bias},
        {"mul_branch.kernel", g.mul_branch.kernel}, {"mul_branch.bias", g.mul_branch.bias},
        {"add_branch.kernel", g.add_branch.kernel}, {"add_branch.bias", g.add_branch.bias},
        {"add_norm.scale", g.add_norm.scale},       {"add_norm.shift", g.add_norm.shift},
        {"fuse_mul.kernel", g.fuse_mul.kernel},     {"fuse_mul.bias", g.fuse_mul.bias},
        {"fuse_add.kernel", g.fuse_add.kernel},     {"fuse_add.bias", g.fuse_add.bias},
        {"out_fuse.kernel", g.out_fuse.kernel},     {"out_fuse.bias", g.out_fuse.bias},
    };
}

double soft_dice_loss(const Tensor3& logits, const Tensor3& gt, Tensor3* grad) {
    if (!logits.same_shape(gt)) throw InvalidArgument("loss inputs differ in shape");
    const std::size_t n = logits.size();
    std::vector<double> p(n);
    double sum_p = 0.0, sum_g = 0.0, inter = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = sigmoid(logits.data[i]);
        sum_p += p[i];
        sum_g += gt.data[i];
        inter += p[i] * gt.data[i];
    }
    const double denom = sum_p + sum_g + kDiceEpsilon;
    if (grad) {
        *grad = Tensor3(logits.channels, logits.height, logits.width);
        for (std::size_t i = 0; i < n; ++i) {
            const double d_p = -(2.0 * gt.data[i] * denom - 2.0 * inter) / (denom * denom);
            grad->data[i] = d_p * p[i] * (1.0 - p[i]);
        }
    }
    return 1.0 - 2.0 * inter / denom;
}

CoIsdLoss co_isd_loss(const Tensor3& y_main, const Tensor3& y_light, const Tensor3& y_gt, BranchLossWeights w) {
    if (!(w.alpha >= 0.0)) throw InvalidArgument("branch loss weight must be non-negative");
    if (!y_main.same_shape(y_light) || !y_main.same_shape(y_gt))
        throw InvalidArgument("branch outputs and ground truth differ in shape");
    if (y_main.channels != 1) throw InvalidArgument("branch outputs must be single-channel logits");
    CoIsdLoss r;
    r.main = soft_dice_loss(y_main, y_gt, &r.grad_main);
    r.light = soft_dice_loss(y_light, y_gt, &r.grad_light);
    for (double& g : r.grad_light.data) g *= w.alpha;
    r.total = r.main + w.alpha * r.light;
    return r;
}

ParamGrads shared_grad_accumulate(const ParamGrads& a, const ParamGrads& b, double alpha) {
    if (a.size() != b.size()) throw InvalidArgument("gradient sets cover different parameters");
    ParamGrads out;
    for (const auto& [name, ga] : a) {
        const auto it = b.find(name);
        if (it == b.end()) throw InvalidArgument("gradient set lacks parameter " + name);
        if (it->second.size() != ga.size()) throw InvalidArgument("gradient length mismatch for " + name);
        std::vector<double> sum(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) sum[i] = ga[i] + alpha * it->second[i];
        out.emplace(name, std::move(sum));
    }
    return out;
}

Tensor3 mask_to_tensor(const BinaryMask& mask) {
    Tensor3 t(1, mask.height, mask.width);
    for (std::size_t i = 0; i < mask.size(); ++i) t.data[i] = mask.bits[i] ? 1.0 : 0.0;
    return t;
}

CoIsdToy make_co_isd_toy(std::size_t channels, std::size_t prior_channels, std::size_t aligned_channels,
                         std::uint64_t seed) {
    CoIsdToy toy;
    const std::uint64_t key = rng::derive_key(seed, 0xC015);
    std::uint64_t counter = 0;
    toy.encoder = random_conv(channels, 1, 3, key, counter);
    toy.decoder = random_conv(1, channels, 1, key, counter);
    // Encoder weights scaled up so tanh features are not vanishingly small.
    for (double& v : toy.encoder.kernel) v *= 10.0;
    toy.samf = make_samf_stage(channels, prior_channels, aligned_channels, seed ^ 0xA5A5);
    return toy;
}

std::vector<ParamView> shared_parameters(CoIsdToy& toy) {
    return {{"encoder.kernel", toy.encoder.kernel},
            {"encoder.bias", toy.encoder.bias},
            {"decoder.kernel", toy.decoder.kernel},
            {"decoder.bias", toy.decoder.bias}};
}

namespace {

struct ToyForward {
    Tensor3 features;
    SamfOutput samf;
    Tensor3 y_main;
    Tensor3 y_light;
};

ToyForward toy_forward(const CoIsdToy& toy, const Tensor3& image, const Tensor3& prior) {
    ToyForward f;
    f.features = conv(image, toy.encoder);
    for (double& v : f.features.data) v = std::tanh(v);
    f.samf = samf_forward(f.features, prior, toy.samf);
    f.y_main = conv(f.samf.out, toy.decoder);
    f.y_light = conv(f.features, toy.decoder);
    return f;
}

ParamGrads named(const ConvGrads& enc, const ConvGrads& dec) {
    return {{"encoder.kernel", enc.kernel},
            {"encoder.bias", enc.bias},
            {"decoder.kernel", dec.kernel},
            {"decoder.bias", dec.bias}};
}

// Shared-parameter gradients for a single output gradient routed through one branch.
ParamGrads branch_grads(const CoIsdToy& toy, const Tensor3& image, const ToyForward& f, const Tensor3& grad_y,
                        bool through_samf, SamfGrads* samf_grads) {
    ConvGrads enc = ConvGrads::zeros_like(toy.encoder);
    ConvGrads dec = ConvGrads::zeros_like(toy.decoder);
    Tensor3 g_feat;
    if (through_samf) {
        Tensor3 g_samf_out;
        conv_backward(f.samf.out, toy.decoder, grad_y, dec, &g_samf_out);
        SamfBackward b = samf_backward(g_samf_out, f.samf.cache, toy.samf);
        if (samf_grads) *samf_grads = std::move(b.grads);
        g_feat = std::move(b.grad_features);
    } else {
        conv_backward(f.features, toy.decoder, grad_y, dec, &g_feat);
    }
    for (std::size_t i = 0; i < g_feat.size(); ++i) g_feat.data[i] *= 1.0 - f.features.data[i] * f.features.data[i];
    conv_backward(image, toy.encoder, g_feat, enc, nullptr);
    return named(enc, dec);
}

}  // namespace

double co_isd_total_loss(const CoIsdToy& toy, const Tensor3& image, const Tensor3& prior, const Tensor3& gt,
                         BranchLossWeights w) {
    const ToyForward f = toy_forward(toy, image, prior);
    return co_isd_loss(f.y_main, f.y_light, gt, w).total;
}

CoIsdGradients co_isd_gradients(const CoIsdToy& toy, const Tensor3& image, const Tensor3& prior, const Tensor3& gt,
                                BranchLossWeights w) {
    const ToyForward f = toy_forward(toy, image, prior);
    CoIsdGradients r;
    r.loss = co_isd_loss(f.y_main, f.y_light, gt, w);

    // Separate routes: each branch loss differentiated on its own.
    r.shared_main = branch_grads(toy, image, f, r.loss.grad_main, true, &r.samf);
    Tensor3 g_light_unweighted;
    soft_dice_loss(f.y_light, gt, &g_light_unweighted);
    r.shared_light = branch_grads(toy, image, f, g_light_unweighted, false, nullptr);

    // Joint route: both output gradients flow into the shared buffers in one pass.
    ConvGrads enc = ConvGrads::zeros_like(toy.encoder);
    ConvGrads dec = ConvGrads::zeros_like(toy.decoder);
    Tensor3 g_samf_out, g_feat_light;
    conv_backward(f.samf.out, toy.decoder, r.loss.grad_main, dec, &g_samf_out);
    conv_backward(f.features, toy.decoder, r.loss.grad_light, dec, &g_feat_light);
    Tensor3 g_feat = samf_backward(g_samf_out, f.samf.cache, toy.samf).grad_features;
    for (std::size_t i = 0; i < g_feat.size(); ++i) {
        g_feat.data[i] += g_feat_light.data[i];
        g_feat.data[i] *= 1.0 - f.features.data[i] * f.features.data[i];
    }
    conv_backward(image, toy.encoder, g_feat, enc, nullptr);
    r.shared_joint = named(enc, dec);
    return r;
}

}  // namespace sirst::nn
