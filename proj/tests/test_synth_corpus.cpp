#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "sirst/counter_rng.hpp"
#include "sirst/error.hpp"
#include "sirst/synth_corpus.hpp"
#include "sirst/target_metrics.hpp"

using namespace sirst;

TEST_CASE("counter generator test vectors") {
    const std::uint64_t expect[] = {6457827717110365317ull, 3203168211198807973ull, 9817491932198370423ull,
                                    4593380528125082431ull, 16408922859458223821ull};
    for (std::uint64_t i = 0; i < 5; ++i) CHECK(rng::counter_hash(1234567, i) == expect[i]);
    rng::Stream s(1234567);
    for (auto e : expect) CHECK(s.next() == e);
    CHECK(rng::uniform01(1, 0) >= 0.0);
    CHECK(rng::uniform01(1, 0) < 1.0);
}

TEST_CASE("gaussian draws have roughly unit variance") {
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double g = rng::gaussian(99, static_cast<std::uint64_t>(i));
        sum += g;
        sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("empty scene is pure noise") {
    SceneSpec spec;
    spec.height = spec.width = 32;
    spec.n_targets = 0;
    spec.seed = 4;
    const Scene s = gen_scene(spec);
    CHECK(s.gt.count() == 0);
    for (double v : s.ideal.values) {
        CHECK(v >= 0.0);
        CHECK(v <= spec.noise_level + 1e-12);
    }
}

TEST_CASE("scenes are pure functions of the seed") {
    SceneSpec spec;
    spec.height = spec.width = 64;
    spec.seed = 77;
    const Scene a = gen_scene(spec), b = gen_scene(spec);
    CHECK(a.gt.bits == b.gt.bits);
    CHECK(a.ideal.values == b.ideal.values);
    spec.seed = 78;
    CHECK(gen_scene(spec).gt.bits != a.gt.bits);
}

TEST_CASE("ground truth recovers the requested disks") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SceneSpec spec;
        spec.height = spec.width = 64;
        spec.n_targets = 4;
        spec.seed = seed;
        const Scene s = gen_scene(spec);
        const Components c = label_components(s.gt);
        REQUIRE(c.targets.size() == spec.n_targets);
        REQUIRE(oracle::blobs(s.gt, true).size() == spec.n_targets);
        for (const Disk& d : s.targets) {
            CHECK(d.radius >= spec.radius_min);
            CHECK(d.radius <= spec.radius_max);
            const std::uint32_t id = c.labels.labels[d.row * spec.width + d.col];
            REQUIRE(id != 0);
            CHECK(c.targets[id - 1].area == disk_area(d.radius));
            CHECK(c.targets[id - 1].centroid_row == static_cast<double>(d.row));
            CHECK(c.targets[id - 1].centroid_col == static_cast<double>(d.col));
        }
    }
}

TEST_CASE("infeasible placement is reported") {
    SceneSpec spec;
    spec.height = spec.width = 8;
    spec.n_targets = 20;
    CHECK_THROWS_AS(gen_scene(spec), InfeasibleSpec);
    spec.radius_min = 0;
    CHECK_THROWS_AS(gen_scene(spec), InvalidArgument);
}

TEST_CASE("perturb with no errors is the identity") {
    SceneSpec spec;
    spec.height = spec.width = 48;
    spec.seed = 3;
    const Scene s = gen_scene(spec);
    CHECK(perturb(s.ideal, s.gt, {}, 9).values == s.ideal.values);
}

TEST_CASE("full miss fraction removes every detection") {
    SceneSpec spec;
    spec.height = spec.width = 48;
    spec.seed = 5;
    const Scene s = gen_scene(spec);
    ErrorModeSpec e;
    e.miss_fraction = 1.0;
    const ProbMap p = perturb(s.ideal, s.gt, e, 1);
    const std::vector<ProbPair> corpus{{p, s.gt}};
    for (double t : {0.06, 0.3, 0.9}) CHECK(target_pr_at_threshold(corpus, t).recall == 0.0);
}

TEST_CASE("false alarms add exactly k components") {
    SceneSpec spec;
    spec.height = spec.width = 96;
    spec.noise_level = 0.02;
    spec.seed = 8;
    const Scene s = gen_scene(spec);
    ErrorModeSpec e;
    e.false_alarm_count = 4;
    e.false_alarm_confidence = 0.7;
    const ProbMap p = perturb(s.ideal, s.gt, e, 2);
    const std::vector<ProbPair> corpus{{p, s.gt}};
    for (double t : {0.1, 0.5, 0.69}) {
        const TargetPRPoint pt = target_pr_at_threshold(corpus, t);
        CHECK(pt.counts.n_match == spec.n_targets);
        CHECK(pt.counts.n_pred == spec.n_targets + 4);
        CHECK(pt.precision == doctest::Approx(3.0 / 7.0));
    }
    CHECK(target_pr_at_threshold(corpus, 0.71).counts.n_pred == spec.n_targets);
}

TEST_CASE("erosion attenuates the target rim") {
    SceneSpec spec;
    spec.height = spec.width = 32;
    spec.n_targets = 1;
    spec.radius_min = spec.radius_max = 3;
    spec.noise_level = 0.0;
    const Scene s = gen_scene(spec);
    ErrorModeSpec e;
    e.erosion_pixels = 1;
    const ProbMap p = perturb(s.ideal, s.gt, e, 1);
    const Disk& d = s.targets[0];
    CHECK(p.at(d.row, d.col) == 1.0);
    CHECK(p.at(d.row, d.col + 3) == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("jitter is deterministic and stays in range") {
    SceneSpec spec;
    spec.height = spec.width = 32;
    const Scene s = gen_scene(spec);
    ErrorModeSpec e;
    e.confidence_jitter = 0.3;
    const ProbMap a = perturb(s.ideal, s.gt, e, 4), b = perturb(s.ideal, s.gt, e, 4);
    CHECK(a.values == b.values);
    for (double v : a.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(perturb(s.ideal, s.gt, e, 5).values != a.values);
}

TEST_CASE("corpus ids and depth") {
    SceneSpec spec;
    spec.height = spec.width = 32;
    spec.bit_depth = BitDepth::k8;
    const Corpus c = gen_corpus(spec, {}, 3);
    REQUIRE(c.size() == 3);
    CHECK(c[0].image_id == "img_0000");
    CHECK(c[2].image_id == "img_0002");
    for (double v : c[1].pred.values) CHECK(v * 255.0 == std::round(v * 255.0));
}

TEST_CASE("ROC demo construction") {
    const RocDemo d = build_roc_demo(1);
    REQUIRE(d.case_one.size() == d.case_two.size());
    for (std::size_t i = 0; i < d.case_one.size(); ++i) {
        CHECK(d.case_one[i].gt.bits == d.case_two[i].gt.bits);
        CHECK(d.case_one[i].image_id == d.case_two[i].image_id);
    }
    std::uint64_t fp1 = 0, fp2 = 0;
    for (std::size_t i = 0; i < d.case_one.size(); ++i)
        for (std::size_t k = 0; k < d.case_one[i].pred.size(); ++k) {
            if (d.case_one[i].gt.bits[k]) continue;
            fp1 += d.case_one[i].pred.values[k] > 0.5;
            fp2 += d.case_two[i].pred.values[k] > 0.5;
        }
    CHECK(fp1 >= 10 * fp2);
}
