#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "sirst/error.hpp"
#include "sirst/pixel_metrics.hpp"

using namespace sirst;

namespace {

Corpus random_8bit_corpus(std::mt19937_64& gen, std::size_t images, std::size_t h, std::size_t w) {
    Corpus c;
    std::uniform_int_distribution<int> level(0, 255);
    for (std::size_t i = 0; i < images; ++i) {
        BinaryMask gt = oracle::random_mask(gen, h, w, 0.05);
        std::vector<std::uint16_t> lv(h * w);
        for (std::size_t k = 0; k < lv.size(); ++k) {
            const int base = level(gen);
            lv[k] = static_cast<std::uint16_t>(gt.bits[k] ? std::max(base, level(gen)) : base / 2);
        }
        c.push_back({"img" + std::to_string(i), prob_map_from_levels(h, w, lv, BitDepth::k8), std::move(gt)});
    }
    return c;
}

ScoreHistogram hist_of(const Corpus& c, std::size_t bins = kDefaultHistogramBins) {
    ScoreHistogram h(bins);
    for (const auto& item : c) accumulate(h, item.pred, item.gt);
    return h;
}

}  // namespace

TEST_CASE("accumulate endpoints") {
    ScoreHistogram h;
    BinaryMask gt(1, 2);
    gt.set(0, 1);
    accumulate(h, make_prob_map(1, 2, {0.0, 1.0}), gt);
    CHECK(h.neg_counts()[0] == 1);
    CHECK(h.pos_counts()[65535] == 1);
    CHECK(h.total_pos() == 1);
    CHECK(h.total_neg() == 1);
    CHECK_FALSE(h.lossy());
    CHECK_THROWS_AS(accumulate(h, make_prob_map(1, 3, {0, 0, 0}), gt), InvalidArgument);
}

TEST_CASE("accumulation order does not matter") {
    std::mt19937_64 gen(1);
    const Corpus c = random_8bit_corpus(gen, 3, 16, 16);
    ScoreHistogram ab, ba;
    accumulate(ab, c[0].pred, c[0].gt);
    accumulate(ab, c[1].pred, c[1].gt);
    accumulate(ba, c[1].pred, c[1].gt);
    accumulate(ba, c[0].pred, c[0].gt);
    CHECK(ab == ba);
    ScoreHistogram x = hist_of({c[0]}), y = hist_of({c[1]}), z = hist_of({c[2]});
    ScoreHistogram left = x;
    left.merge(y).merge(z);
    ScoreHistogram yz = y;
    yz.merge(z);
    ScoreHistogram right = x;
    right.merge(yz);
    CHECK(left == right);
}

TEST_CASE("bin counts match a flatten-and-tally oracle") {
    std::mt19937_64 gen(2);
    const Corpus c = random_8bit_corpus(gen, 10, 16, 16);
    const ScoreHistogram h = hist_of(c, 256);
    std::vector<std::uint64_t> pos(256, 0), neg(256, 0);
    for (const auto& item : c)
        for (std::size_t k = 0; k < item.pred.size(); ++k)
            (item.gt.bits[k] ? pos : neg)[static_cast<std::size_t>(std::lround(item.pred.values[k] * 255))]++;
    CHECK(std::equal(pos.begin(), pos.end(), h.pos_counts().begin()));
    CHECK(std::equal(neg.begin(), neg.end(), h.neg_counts().begin()));
}

TEST_CASE("lossy quantization is flagged") {
    BinaryMask gt(1, 2);
    gt.set(0, 0);
    ScoreHistogram h(256);
    accumulate(h, make_prob_map(1, 2, {0.3, 0.0}), gt);
    CHECK(h.lossy());
    ScoreHistogram h16(256);
    const std::vector<std::uint16_t> lv{1, 0};
    accumulate(h16, prob_map_from_levels(1, 2, lv, BitDepth::k16), gt);
    CHECK(h16.lossy());
    ScoreHistogram exact;
    accumulate(exact, prob_map_from_levels(1, 2, lv, BitDepth::k8), gt);
    CHECK_FALSE(exact.lossy());
}

TEST_CASE("perfect separation gives one point") {
    BinaryMask gt(2, 2);
    gt.set(0, 0);
    gt.set(1, 1);
    const ScoreHistogram h = hist_of({{"a", make_prob_map(2, 2, {1.0, 0.0, 0.0, 1.0}), gt}});
    const PRCurve curve = pixel_pr_curve(h);
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].precision == 1.0);
    CHECK(curve[0].recall == 1.0);
    CHECK(hse_p(curve) == 1.0);
    CHECK(roc_auc(h) == 1.0);
}

TEST_CASE("constant confidence yields prevalence") {
    BinaryMask gt(2, 2);
    gt.set(0, 1);
    gt.set(1, 0);
    const ScoreHistogram h = hist_of({{"a", make_prob_map(2, 2, {0.4, 0.4, 0.4, 0.4}), gt}});
    const PRCurve curve = pixel_pr_curve(h);
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].threshold == 0.0);
    CHECK(curve[0].precision == 0.5);
    CHECK(hse_p(curve) == 0.5);
    CHECK(roc_auc(h) == 0.5);
}

TEST_CASE("undefined curves") {
    ScoreHistogram h;
    h.add(10, false);
    CHECK_THROWS_AS(pixel_pr_curve(h), UndefinedMetric);
    CHECK_THROWS_AS(roc_auc(h), UndefinedMetric);
    CHECK_THROWS_AS(hse_p(PRCurve{}), InvalidArgument);
}

TEST_CASE("PR curve matches the exhaustive oracle and is well ordered") {
    std::mt19937_64 gen(4);
    for (int i = 0; i < 10; ++i) {
        const Corpus c = random_8bit_corpus(gen, 2, 20, 20);
        const ScoreHistogram h = hist_of(c);
        const PRCurve curve = pixel_pr_curve(h);
        for (std::size_t k = 1; k < curve.size(); ++k) {
            CHECK(curve[k].threshold > curve[k - 1].threshold);
            CHECK(curve[k].recall <= curve[k - 1].recall);
        }
        CHECK(hse_p(curve) == doctest::Approx(oracle::exhaustive_ap_8bit(c)).epsilon(1e-13));
        CHECK(std::abs(roc_auc(h) - oracle::pairwise_auc(c)) < 1e-12);
    }
}

TEST_CASE("adding false-positive mass never raises HSE-P") {
    std::mt19937_64 gen(6);
    const Corpus c = random_8bit_corpus(gen, 2, 16, 16);
    double prev = hse_p(pixel_pr_curve(hist_of(c)));
    ScoreHistogram h = hist_of(c);
    for (std::size_t bin : {65535u, 30000u, 500u}) {
        h.add(bin, false, 5);
        const double v = hse_p(pixel_pr_curve(h));
        CHECK(v <= prev + 1e-15);
        prev = v;
    }
}

TEST_CASE("AUC is invariant under monotone level remapping") {
    std::mt19937_64 gen(8);
    const Corpus c = random_8bit_corpus(gen, 2, 16, 16);
    Corpus sq = c;
    for (auto& item : sq)
        for (double& v : item.pred.values) v = v * v;
    CHECK(roc_auc(hist_of(c)) == doctest::Approx(roc_auc(hist_of(sq))).epsilon(1e-15));
}

TEST_CASE("ROC curve endpoints") {
    std::mt19937_64 gen(9);
    const auto roc = roc_curve(hist_of(random_8bit_corpus(gen, 1, 16, 16)));
    CHECK(roc.front().fpr == 1.0);
    CHECK(roc.front().tpr == 1.0);
    CHECK(roc.back().fpr == 0.0);
    CHECK(roc.back().tpr == 0.0);
}

TEST_CASE("IoU and nIoU") {
    BinaryMask gt(2, 3), pred(2, 3);
    gt.set(0, 0);
    gt.set(0, 1);
    gt.set(1, 0);
    gt.set(1, 1);
    pred.set(0, 0);
    pred.set(0, 1);
    pred.set(1, 0);
    pred.set(1, 2);
    CHECK(iou(pred, gt) == 3.0 / 5.0);
    CHECK(iou(gt, gt) == 1.0);
    CHECK(iou(pred, gt) == iou(gt, pred));
    BinaryMask other(2, 3);
    other.set(1, 2);
    CHECK(iou(other, gt) == 0.0);
    CHECK(iou(BinaryMask(2, 3), BinaryMask(2, 3)) == 1.0);
    CHECK_THROWS_AS(iou(BinaryMask(1, 1), gt), InvalidArgument);

    const std::vector<std::pair<BinaryMask, BinaryMask>> pairs{{gt, gt}, {other, gt}};
    CHECK(niou(pairs) == 0.5);
    CHECK_THROWS_AS(niou(std::span<const std::pair<BinaryMask, BinaryMask>>{}), InvalidArgument);
}

TEST_CASE("nIoU equals the mean of per-image IoU") {
    std::mt19937_64 gen(12);
    std::vector<std::pair<BinaryMask, BinaryMask>> pairs;
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) {
        pairs.emplace_back(oracle::random_mask(gen, 10, 10, 0.3), oracle::random_mask(gen, 10, 10, 0.3));
        std::size_t in = 0, un = 0;
        for (std::size_t k = 0; k < 100; ++k) {
            in += pairs.back().first.bits[k] & pairs.back().second.bits[k];
            un += pairs.back().first.bits[k] | pairs.back().second.bits[k];
        }
        sum += static_cast<double>(in) / static_cast<double>(un);
    }
    CHECK(niou(pairs) == doctest::Approx(sum / 5.0).epsilon(1e-15));
}
