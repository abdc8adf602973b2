#pragma once
// Minimal dense double-precision kernel for the semantic alignment and
// modulated fusion (SAMF) block and the shared-parameter two-branch loss.
//
// Backward passes are derived by hand per primitive. Prior features are
// frozen: no operation produces a gradient for them.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sirst/mask_core.hpp"

namespace sirst::nn {

struct Tensor3 {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;  // row-major, channel-major

    Tensor3() = default;
    Tensor3(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
        : channels(c), height(h), width(w), data(c * h * w, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return height * width; }
    double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
    double at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
    bool same_shape(const Tensor3& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    bool all_finite() const;
};

// Same-padding convolution, weights indexed [out][in][ky][kx].
struct ConvParams {
    std::size_t out_ch = 0;
    std::size_t in_ch = 0;
    std::size_t k = 1;
    std::vector<double> kernel;
    std::vector<double> bias;

    static ConvParams zeros(std::size_t out_ch, std::size_t in_ch, std::size_t k);
    double& w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
        return kernel[((o * in_ch + i) * k + ky) * k + kx];
    }
    double w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
        return kernel[((o * in_ch + i) * k + ky) * k + kx];
    }
};

struct ConvGrads {
    std::vector<double> kernel;
    std::vector<double> bias;

    static ConvGrads zeros_like(const ConvParams& p) {
        return ConvGrads{std::vector<double>(p.kernel.size(), 0.0), std::vector<double>(p.bias.size(), 0.0)};
    }
};

// Inference-form batch norm: scale * (x - running_mean) / sqrt(running_var + epsilon) + shift.
// Running statistics are fixed buffers; only scale and shift are trained.
struct NormParams {
    std::vector<double> scale;
    std::vector<double> shift;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-5;
};

struct NormGrads {
    std::vector<double> scale;
    std::vector<double> shift;
};

// Throws InvalidArgument on channel mismatch or even kernel size.
Tensor3 conv(const Tensor3& x, const ConvParams& p);

// Accumulates parameter gradients into `grads`; writes the input gradient
// only when `grad_x` is non-null.
void conv_backward(const Tensor3& x, const ConvParams& p, const Tensor3& grad_out, ConvGrads& grads,
                   Tensor3* grad_x);

// Align-corners-false bilinear resize to a larger or equal extent.
Tensor3 bilinear_upsample(const Tensor3& x, std::size_t out_h, std::size_t out_w);
Tensor3 bilinear_upsample_backward(const Tensor3& grad_out, std::size_t in_h, std::size_t in_w);

Tensor3 batch_norm(const Tensor3& x, const NormParams& p);

struct SamfStage {
    ConvParams align;       // 1x1, prior channels -> aligned channels
    ConvParams mul_branch;  // 1x1, aligned -> C/2, followed by sigmoid
    ConvParams add_branch;  // 1x1, aligned -> C/2, followed by norm + ReLU
    NormParams add_norm;
    ConvParams fuse_mul;    // 3x3, C/2 -> C/2
    ConvParams fuse_add;    // 1x1, C/2 -> C/2
    ConvParams out_fuse;    // 3x3, C -> C
};

// Seeded uniform [-0.1, 0.1] weights; norm scale 1 + u, running_var 1 + |u|.
SamfStage make_samf_stage(std::size_t channels, std::size_t prior_channels,
                          std::size_t aligned_channels, std::uint64_t seed);

// Uniform [-0.1, 0.1] values from a counter stream.
Tensor3 random_tensor(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed,
                      double amplitude = 0.1);

struct SamfGrads {
    ConvGrads align, mul_branch, add_branch;
    NormGrads add_norm;
    ConvGrads fuse_mul, fuse_add, out_fuse;
};

struct SamfCache {
    std::uint64_t fingerprint = 0;  // of the stage that produced it; 0 = empty
    Tensor3 features, prior;
    Tensor3 aligned;   // upsampled prior projection
    Tensor3 gate;      // sigmoid output
    Tensor3 add_pre;   // add-branch conv output before normalization
    Tensor3 add_norm;  // normalized, before ReLU
    Tensor3 add_map;   // ReLU output
    Tensor3 mul_in;    // first channel half * gate
    Tensor3 add_in;    // second channel half + add_map
    Tensor3 fused;     // both fused halves, concatenated, + features
    std::size_t out_channels = 0;
};

struct SamfOutput {
    Tensor3 out;
    SamfCache cache;
};

// Throws InvalidArgument on odd channel count or inconsistent stage arities.
SamfOutput samf_forward(const Tensor3& features, const Tensor3& prior, const SamfStage& stage);

struct SamfBackward {
    Tensor3 grad_features;
    SamfGrads grads;
};

// Throws InvalidState when the cache is empty, was produced by a different
// stage, or does not match the gradient shape.
SamfBackward samf_backward(const Tensor3& grad_out, const SamfCache& cache, const SamfStage& stage);

std::uint64_t fingerprint(const SamfStage& stage);

// Sequential stages: stage k consumes stage k-1's output and priors[k].
// Throws InvalidArgument when the lists are empty or differ in length.
Tensor3 stack_samf(const Tensor3& features, std::span<const Tensor3> priors, std::span<const SamfStage> stages);

struct StackOutput {
    Tensor3 out;
    std::vector<SamfCache> caches;
};

StackOutput stack_samf_forward(const Tensor3& features, std::span<const Tensor3> priors,
                               std::span<const SamfStage> stages);

struct StackBackward {
    Tensor3 grad_features;
    std::vector<SamfGrads> grads;
};

StackBackward stack_samf_backward(const Tensor3& grad_out, std::span<const SamfCache> caches,
                                  std::span<const SamfStage> stages);

// Named views of every trainable parameter and the matching gradients, in
// the same order ("align.kernel", "align.bias", ..., "out_fuse.bias").
struct ParamView {
    std::string name;
    std::span<double> values;
};
struct GradView {
    std::string name;
    std::span<const double> values;
};
std::vector<ParamView> parameters(SamfStage& stage);
std::vector<GradView> gradients(const SamfGrads& grads);

using ParamGrads = std::map<std::string, std::vector<double>>;

// ---- two-branch shared-parameter training objective ----

struct BranchLossWeights {
    double alpha = 1.0;
};

inline constexpr double kDiceEpsilon = 1e-6;

// Soft-Dice on sigmoid(logits): 1 - 2 sum(p g) / (sum p + sum g + eps).
// Stands in for the edge-enhanced difficulty-mining loss. When `grad` is
// non-null it receives d loss / d logits.
double soft_dice_loss(const Tensor3& logits, const Tensor3& gt, Tensor3* grad);

struct CoIsdLoss {
    double total = 0.0;
    double main = 0.0;
    double light = 0.0;
    Tensor3 grad_main;   // d total / d y_main
    Tensor3 grad_light;  // d total / d y_light = alpha * d light / d y_light
};

// total = L(y_main) + alpha * L(y_light). Throws InvalidArgument on shape
// mismatch, multi-channel logits or negative alpha.
CoIsdLoss co_isd_loss(const Tensor3& y_main, const Tensor3& y_light, const Tensor3& y_gt,
                      BranchLossWeights weights);

// g_main + alpha * g_light per key. Throws InvalidArgument when key sets or
// lengths differ.
ParamGrads shared_grad_accumulate(const ParamGrads& grads_main, const ParamGrads& grads_light, double alpha);

Tensor3 mask_to_tensor(const BinaryMask& mask);

// Tiny shared encoder-decoder. The main branch routes the encoder features
// through one SAMF stage with a frozen prior; the light branch skips it.
//   features = tanh(encoder(image))
//   y_main   = decoder(samf(features, prior))
//   y_light  = decoder(features)
struct CoIsdToy {
    ConvParams encoder;  // 3x3, 1 -> C
    ConvParams decoder;  // 1x1, C -> 1
    SamfStage samf;
};

CoIsdToy make_co_isd_toy(std::size_t channels, std::size_t prior_channels, std::size_t aligned_channels,
                         std::uint64_t seed);

// Shared parameters: "encoder.kernel", "encoder.bias", "decoder.kernel", "decoder.bias".
std::vector<ParamView> shared_parameters(CoIsdToy& toy);

double co_isd_total_loss(const CoIsdToy& toy, const Tensor3& image, const Tensor3& prior, const Tensor3& gt,
                         BranchLossWeights weights);

struct CoIsdGradients {
    CoIsdLoss loss;
    ParamGrads shared_main;   // d L_main / d shared
    ParamGrads shared_light;  // d L_light / d shared (unweighted)
    ParamGrads shared_joint;  // one backward pass of the total loss
    SamfGrads samf;           // main-branch-only parameters
};

CoIsdGradients co_isd_gradients(const CoIsdToy& toy, const Tensor3& image, const Tensor3& prior,
                                const Tensor3& gt, BranchLossWeights weights);

}  // namespace sirst::nn
