#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "sirst/error.hpp"
#include "sirst/nn_check.hpp"
#include "sirst/nn_micro.hpp"

using namespace sirst;
using namespace sirst::nn;

namespace {

// Direct quadruple loop with explicit bounds checks.
Tensor3 naive_conv(const Tensor3& x, const ConvParams& p) {
    Tensor3 y(p.out_ch, x.height, x.width);
    const long pad = static_cast<long>(p.k / 2);
    for (std::size_t o = 0; o < p.out_ch; ++o)
        for (long r = 0; r < static_cast<long>(x.height); ++r)
            for (long c = 0; c < static_cast<long>(x.width); ++c) {
                double s = p.bias[o];
                for (std::size_t i = 0; i < p.in_ch; ++i)
                    for (long ky = 0; ky < static_cast<long>(p.k); ++ky)
                        for (long kx = 0; kx < static_cast<long>(p.k); ++kx) {
                            const long sr = r + ky - pad, sc = c + kx - pad;
                            if (sr < 0 || sc < 0 || sr >= static_cast<long>(x.height) || sc >= static_cast<long>(x.width))
                                continue;
                            s += p.w(o, i, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx)) *
                                 x.at(i, static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
                        }
                y.at(o, static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s;
            }
    return y;
}

Tensor3 naive_upsample(const Tensor3& x, std::size_t oh, std::size_t ow) {
    auto coord = [](std::size_t i, std::size_t in, std::size_t out) {
        double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
        return std::max(s, 0.0);
    };
    Tensor3 y(x.channels, oh, ow);
    for (std::size_t ch = 0; ch < x.channels; ++ch)
        for (std::size_t r = 0; r < oh; ++r)
            for (std::size_t c = 0; c < ow; ++c) {
                const double sr = coord(r, x.height, oh), sc = coord(c, x.width, ow);
                const std::size_t r0 = static_cast<std::size_t>(std::floor(sr)), c0 = static_cast<std::size_t>(std::floor(sc));
                const std::size_t r1 = std::min(r0 + 1, x.height - 1), c1 = std::min(c0 + 1, x.width - 1);
                const double fr = sr - static_cast<double>(r0), fc = sc - static_cast<double>(c0);
                y.at(ch, r, c) = (1 - fr) * ((1 - fc) * x.at(ch, r0, c0) + fc * x.at(ch, r0, c1)) +
                                 fr * ((1 - fc) * x.at(ch, r1, c0) + fc * x.at(ch, r1, c1));
            }
    return y;
}

// The forward pass chained from naive primitives.
Tensor3 naive_samf(const Tensor3& top, const Tensor3& prior, const SamfStage& s) {
    const Tensor3 aligned = naive_upsample(naive_conv(prior, s.align), top.height, top.width);
    Tensor3 gate = naive_conv(aligned, s.mul_branch);
    for (double& v : gate.data) v = 1.0 / (1.0 + std::exp(-v));
    Tensor3 add = naive_conv(aligned, s.add_branch);
    for (std::size_t ch = 0; ch < add.channels; ++ch)
        for (std::size_t k = 0; k < add.plane(); ++k) {
            double& v = add.data[ch * add.plane() + k];
            v = s.add_norm.scale[ch] * (v - s.add_norm.running_mean[ch]) /
                    std::sqrt(s.add_norm.running_var[ch] + s.add_norm.epsilon) +
                s.add_norm.shift[ch];
            v = v > 0 ? v : 0;
        }
    const std::size_t half = top.channels / 2, plane = top.plane();
    Tensor3 a(half, top.height, top.width), b(half, top.height, top.width);
    for (std::size_t k = 0; k < half * plane; ++k) {
        a.data[k] = top.data[k] * gate.data[k];
        b.data[k] = top.data[half * plane + k] + add.data[k];
    }
    const Tensor3 bm = naive_conv(a, s.fuse_mul), ba = naive_conv(b, s.fuse_add);
    Tensor3 cat(top.channels, top.height, top.width);
    for (std::size_t k = 0; k < half * plane; ++k) {
        cat.data[k] = bm.data[k] + top.data[k];
        cat.data[half * plane + k] = ba.data[k] + top.data[half * plane + k];
    }
    return naive_conv(cat, s.out_fuse);
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

double dot(const Tensor3& a, const Tensor3& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

}  // namespace

TEST_CASE("conv special cases") {
    const Tensor3 x = random_tensor(3, 4, 5, 1, 1.0);
    ConvParams id = ConvParams::zeros(3, 3, 1);
    for (std::size_t c = 0; c < 3; ++c) id.w(c, c, 0, 0) = 1.0;
    CHECK(conv(x, id).data == x.data);

    ConvParams bias = ConvParams::zeros(2, 3, 3);
    bias.bias = {0.25, -1.5};
    const Tensor3 y = conv(x, bias);
    for (std::size_t k = 0; k < y.plane(); ++k) {
        CHECK(y.data[k] == 0.25);
        CHECK(y.data[y.plane() + k] == -1.5);
    }
    CHECK_THROWS_AS(conv(random_tensor(2, 3, 3, 1), bias), InvalidArgument);
    CHECK_THROWS_AS(conv(x, ConvParams::zeros(1, 3, 2)), InvalidArgument);
}

TEST_CASE("conv matches the naive loop") {
    const Tensor3 x = random_tensor(4, 5, 5, 2, 1.0);
    for (std::size_t k : {1u, 3u}) {
        ConvParams p = ConvParams::zeros(3, 4, k);
        const Tensor3 w = random_tensor(1, 1, p.kernel.size(), 3, 1.0);
        p.kernel = w.data;
        p.bias = {0.1, -0.2, 0.3};
        CHECK(max_abs_diff(conv(x, p), naive_conv(x, p)) <= 1e-12);
    }
}

TEST_CASE("conv backward is the adjoint of conv") {
    // <conv(x) - b, g> = <x, conv^T g> for the linear part.
    const Tensor3 x = random_tensor(3, 6, 5, 4, 1.0);
    ConvParams p = ConvParams::zeros(2, 3, 3);
    p.kernel = random_tensor(1, 1, p.kernel.size(), 5, 1.0).data;
    const Tensor3 g = random_tensor(2, 6, 5, 6, 1.0);
    ConvGrads grads = ConvGrads::zeros_like(p);
    Tensor3 gx;
    conv_backward(x, p, g, grads, &gx);
    CHECK(dot(conv(x, p), g) == doctest::Approx(dot(x, gx)).epsilon(1e-12));
    // Kernel gradient: the same bilinear form differentiated w.r.t. the weights.
    double s = 0.0;
    for (std::size_t i = 0; i < p.kernel.size(); ++i) s += grads.kernel[i] * p.kernel[i];
    CHECK(s == doctest::Approx(dot(conv(x, p), g)).epsilon(1e-12));
}

TEST_CASE("bilinear upsampling") {
    const Tensor3 x = random_tensor(2, 3, 4, 7, 1.0);
    CHECK(bilinear_upsample(x, 3, 4).data == x.data);
    Tensor3 flat(1, 3, 3, 0.4);
    for (double v : bilinear_upsample(flat, 7, 8).data) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));

    Tensor3 small(1, 2, 2);
    small.data = {0, 1, 2, 3};
    const std::vector<double> expect{0,   0.25, 0.75, 1,   0.5, 0.75, 1.25, 1.5,
                                     1.5, 1.75, 2.25, 2.5, 2,   2.25, 2.75, 3};
    const Tensor3 up = bilinear_upsample(small, 4, 4);
    for (std::size_t i = 0; i < 16; ++i) CHECK(up.data[i] == expect[i]);

    CHECK(max_abs_diff(bilinear_upsample(x, 7, 9), naive_upsample(x, 7, 9)) <= 1e-12);
    CHECK_THROWS_AS(bilinear_upsample(x, 0, 4), InvalidArgument);
    CHECK_THROWS_AS(bilinear_upsample(x, 2, 4), InvalidArgument);
}

TEST_CASE("upsample backward is the adjoint") {
    const Tensor3 x = random_tensor(2, 3, 4, 8, 1.0);
    const Tensor3 g = random_tensor(2, 7, 10, 9, 1.0);
    CHECK(dot(bilinear_upsample(x, 7, 10), g) == doctest::Approx(dot(x, bilinear_upsample_backward(g, 3, 4))).epsilon(1e-12));
}

TEST_CASE("SAMF forward") {
    const SamfStage s = make_samf_stage(64, 16, 32, 1);
    const Tensor3 top = random_tensor(64, 14, 14, 2);
    const Tensor3 prior = random_tensor(16, 2, 2, 3);
    const SamfOutput o = samf_forward(top, prior, s);
    CHECK(o.out.same_shape(top));
    CHECK(o.out.all_finite());

    const SamfStage small = make_samf_stage(4, 3, 2, 4);
    const Tensor3 t = random_tensor(4, 5, 6, 5, 1.0), p = random_tensor(3, 3, 3, 6, 1.0);
    CHECK(max_abs_diff(samf_forward(t, p, small).out, naive_samf(t, p, small)) <= 1e-12);

    CHECK_THROWS_AS(samf_forward(random_tensor(3, 4, 4, 1), p, small), InvalidArgument);
    CHECK_THROWS_AS(samf_forward(random_tensor(6, 4, 4, 1), p, small), InvalidArgument);
}

TEST_CASE("zero gate pre-activation halves the multiplicative input") {
    SamfStage s = make_samf_stage(4, 3, 2, 9);
    std::fill(s.mul_branch.kernel.begin(), s.mul_branch.kernel.end(), 0.0);
    std::fill(s.mul_branch.bias.begin(), s.mul_branch.bias.end(), 0.0);
    const Tensor3 t = random_tensor(4, 5, 5, 10, 1.0), p = random_tensor(3, 2, 2, 11, 1.0);
    const SamfOutput o = samf_forward(t, p, s);
    for (double g : o.cache.gate.data) CHECK(g == 0.5);
    for (std::size_t k = 0; k < o.cache.mul_in.size(); ++k) CHECK(o.cache.mul_in.data[k] == 0.5 * t.data[k]);
}

TEST_CASE("gate ranges and shapes over a grid of toys") {
    for (std::size_t c : {2u, 6u})
        for (std::size_t h : {1u, 4u, 9u})
            for (std::size_t w : {1u, 3u, 8u}) {
                const SamfStage s = make_samf_stage(c, 2, 3, h * 10 + w);
                const SamfOutput o = samf_forward(random_tensor(c, h, w, h, 3.0), random_tensor(2, 1, 1, w, 3.0), s);
                CHECK(o.out.same_shape(Tensor3(c, h, w)));
                for (double g : o.cache.gate.data) CHECK((g > 0.0 && g < 1.0));
                for (double a : o.cache.add_map.data) CHECK(a >= 0.0);
            }
}

TEST_CASE("SAMF backward") {
    SamfStage s = make_samf_stage(2, 3, 2, 12);
    const Tensor3 prior = random_tensor(3, 3, 3, 13, 1.0);
    Tensor3 top = random_tensor(2, 6, 6, 14, 1.0);
    const Tensor3 weights = random_tensor(2, 6, 6, 15, 1.0);
    const SamfOutput o = samf_forward(top, prior, s);

    SUBCASE("zero output gradient") {
        const SamfBackward b = samf_backward(Tensor3(2, 6, 6), o.cache, s);
        for (double v : b.grad_features.data) CHECK(v == 0.0);
        for (const GradView& g : gradients(b.grads))
            for (double v : g.values) CHECK(v == 0.0);
    }

    SUBCASE("finite differences") {
        const SamfBackward b = samf_backward(weights, o.cache, s);
        auto objective = [&] { return dot(samf_forward(top, prior, s).out, weights); };
        auto params = parameters(s);
        auto grads = gradients(b.grads);
        REQUIRE(params.size() == grads.size());
        for (std::size_t p = 0; p < params.size(); ++p) {
            CHECK(params[p].name == grads[p].name);
            for (std::size_t i = 0; i < params[p].values.size(); ++i) {
                const double fd = oracle::central_difference(params[p].values[i], 1e-5, objective);
                CHECK(oracle::rel_err(grads[p].values[i], fd) < 1e-4);
            }
        }
        for (std::size_t i = 0; i < top.size(); ++i) {
            const double fd = oracle::central_difference(top.data[i], 1e-5, objective);
            CHECK(oracle::rel_err(b.grad_features.data[i], fd) < 1e-4);
        }
    }

    SUBCASE("cache mismatch") {
        CHECK_THROWS_AS(samf_backward(weights, SamfCache{}, s), InvalidState);
        CHECK_THROWS_AS(samf_backward(Tensor3(2, 5, 5), o.cache, s), InvalidState);
        SamfStage other = s;
        other.out_fuse.bias[0] += 1.0;
        CHECK_THROWS_AS(samf_backward(weights, o.cache, other), InvalidState);
    }
}

TEST_CASE("stacking") {
    std::vector<SamfStage> stages;
    std::vector<Tensor3> priors;
    for (std::uint64_t k = 0; k < 4; ++k) {
        stages.push_back(make_samf_stage(4, 3, 2, 20 + k));
        priors.push_back(random_tensor(3, 2 + k, 2 + k, 30 + k, 1.0));
    }
    const Tensor3 top = random_tensor(4, 6, 6, 40, 1.0);
    CHECK(stack_samf(top, std::span(priors).first(1), std::span(stages).first(1)).data ==
          samf_forward(top, priors[0], stages[0]).out.data);
    Tensor3 manual = top;
    for (std::size_t k = 0; k < 4; ++k) manual = samf_forward(manual, priors[k], stages[k]).out;
    const Tensor3 stacked = stack_samf(top, priors, stages);
    CHECK(stacked.data == manual.data);
    CHECK(stacked.same_shape(top));
    CHECK_THROWS_AS(stack_samf(top, std::span(priors).first(2), stages), InvalidArgument);
    CHECK_THROWS_AS(stack_samf(top, {}, {}), InvalidArgument);
}

TEST_CASE("two-branch loss") {
    const Tensor3 ym = random_tensor(1, 5, 5, 50, 2.0), yl = random_tensor(1, 5, 5, 51, 2.0);
    Tensor3 gt(1, 5, 5);
    gt.at(0, 1, 1) = gt.at(0, 3, 2) = 1.0;

    const CoIsdLoss zero = co_isd_loss(ym, yl, gt, {0.0});
    CHECK(zero.total == zero.main);
    for (double g : zero.grad_light.data) CHECK(g == 0.0);

    const CoIsdLoss same = co_isd_loss(ym, ym, gt, {1.0});
    CHECK(same.grad_main.data == same.grad_light.data);

    Tensor3 a = ym, b = yl;
    const CoIsdLoss l = co_isd_loss(a, b, gt, {0.7});
    auto total = [&] { return co_isd_loss(a, b, gt, {0.7}).total; };
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(oracle::rel_err(l.grad_main.data[i], oracle::central_difference(a.data[i], 1e-5, total)) < 1e-4);
        CHECK(oracle::rel_err(l.grad_light.data[i], oracle::central_difference(b.data[i], 1e-5, total)) < 1e-4);
    }

    CHECK_THROWS_AS(co_isd_loss(ym, Tensor3(1, 4, 5), gt, {1.0}), InvalidArgument);
    CHECK_THROWS_AS(co_isd_loss(ym, yl, gt, {-1.0}), InvalidArgument);
    CHECK_THROWS_AS(co_isd_loss(Tensor3(2, 1, 1), Tensor3(2, 1, 1), Tensor3(2, 1, 1), {1.0}), InvalidArgument);
}

TEST_CASE("shared gradient accumulation") {
    const ParamGrads g{{"a", {1.0, 2.0}}, {"b", {-3.0}}};
    const ParamGrads z{{"a", {0.0, 0.0}}, {"b", {0.0}}};
    CHECK(shared_grad_accumulate(g, z, 1.0) == g);
    const ParamGrads twice = shared_grad_accumulate(g, g, 1.0);
    CHECK(twice.at("a") == std::vector<double>{2.0, 4.0});
    CHECK(twice.at("b") == std::vector<double>{-6.0});
    CHECK_THROWS_AS(shared_grad_accumulate(g, ParamGrads{{"a", {0.0, 0.0}}, {"c", {0.0}}}, 1.0), InvalidArgument);
    CHECK_THROWS_AS(shared_grad_accumulate(g, ParamGrads{{"a", {0.0}}, {"b", {0.0}}}, 1.0), InvalidArgument);

    // Linearity in the pair of inputs.
    const ParamGrads c{{"a", {0.5, -1.0}}, {"b", {2.0}}}, d{{"a", {4.0, 0.25}}, {"b", {-1.0}}};
    const double alpha = 0.5;
    const ParamGrads lhs1 = shared_grad_accumulate(g, c, alpha), lhs2 = shared_grad_accumulate(z, d, alpha);
    const ParamGrads rhs = shared_grad_accumulate(g, ParamGrads{{"a", {4.5, -0.75}}, {"b", {1.0}}}, alpha);
    for (const auto& [k, v] : rhs)
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(lhs1.at(k)[i] + lhs2.at(k)[i] == doctest::Approx(v[i]));
}

TEST_CASE("end-to-end toy gradients") {
    CoIsdToy toy = make_co_isd_toy(4, 3, 2, 60);
    const Tensor3 image = random_tensor(1, 6, 6, 61, 1.0), prior = random_tensor(3, 3, 3, 62, 1.0);
    Tensor3 gt(1, 6, 6);
    gt.at(0, 2, 2) = gt.at(0, 2, 3) = 1.0;
    const CoIsdGradients g = co_isd_gradients(toy, image, prior, gt, {1.0});
    const ParamGrads acc = shared_grad_accumulate(g.shared_main, g.shared_light, 1.0);
    for (const auto& [k, v] : acc)
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(v[i] - g.shared_joint.at(k)[i]) <= 1e-12);
    auto total = [&] { return co_isd_total_loss(toy, image, prior, gt, {1.0}); };
    for (ParamView& p : shared_parameters(toy))
        for (std::size_t i = 0; i < p.values.size(); ++i)
            CHECK(oracle::rel_err(acc.at(p.name)[i], oracle::central_difference(p.values[i], 1e-5, total)) < 1e-4);
}

TEST_CASE("invariant suite passes") {
    for (const CheckRow& row : run_nn_checks()) {
        INFO(row.name << ": " << row.detail);
        CHECK(row.passed);
    }
}
