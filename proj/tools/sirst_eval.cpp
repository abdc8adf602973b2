// sirst-eval: batch evaluation, corpus generation and self-checks.
//
// Exit codes: 0 success, 1 load error, 2 corpus with undefined target
// metrics, 3 failed property demo or invariant suite.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sirst/corpus_io.hpp"
#include "sirst/error.hpp"
#include "sirst/evaluate.hpp"
#include "sirst/nn_check.hpp"
#include "sirst/parallel.hpp"
#include "sirst/report.hpp"
#include "sirst/synth_corpus.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitLoad = 1;
constexpr int kExitUndefined = 2;
constexpr int kExitProperty = 3;

// "19" means 19 uniform thresholds; anything with a comma or a dot is an explicit list.
sirst::ThresholdSet parse_thresholds(const std::string& text) {
    if (text.find_first_of(",.") == std::string::npos) {
        std::size_t count = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), count);
        if (ec != std::errc() || ptr != text.data() + text.size())
            throw sirst::InvalidArgument("bad threshold count: " + text);
        return sirst::ThresholdSet::uniform(count);
    }
    std::vector<double> values;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw sirst::InvalidArgument("bad threshold value: " + item);
        }
    }
    return sirst::ThresholdSet(std::move(values));
}

void write_text(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sirst::IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw sirst::IoError("write failed for " + path);
}


struct EvalOptions {
    std::string manifest;
    double tau = sirst::kDefaultTau;
    std::string thresholds = "19";
    int connectivity = 8;
    double fixed_threshold = 0.5;
    std::size_t bins = sirst::kDefaultHistogramBins;
    std::size_t workers = sirst::default_workers();
    std::string format = "json";
    std::string scale = "percent";
    std::string out;
};

sirst::EvalConfig make_config(const EvalOptions& o) {
    sirst::EvalConfig cfg;
    cfg.thresholds = parse_thresholds(o.thresholds);
    cfg.tau = o.tau;
    cfg.connectivity = o.connectivity == 4 ? sirst::Connectivity::kFour : sirst::Connectivity::kEight;
    cfg.fixed_threshold = o.fixed_threshold;
    cfg.histogram_bins = o.bins;
    cfg.workers = o.workers;
    cfg.report_scale = o.scale == "unit" ? sirst::ReportScale::kUnit : sirst::ReportScale::kPercent;
    cfg.validate();
    return cfg;
}

int run_eval(const EvalOptions& o) {
    const sirst::EvalConfig cfg = make_config(o);
    const sirst::Corpus corpus = sirst::load_corpus(o.manifest);
    const sirst::MetricReport report = sirst::evaluate(corpus, cfg);
    const auto format = o.format == "csv" ? sirst::ReportFormat::kCsv : sirst::ReportFormat::kJson;
    if (o.out.empty() || o.out == "-")
        std::cout << sirst::render_report(report, format);
    else
        sirst::emit_report(report, format, o.out);
    for (const std::string& w : report.warnings) std::cerr << "warning: " << w << "\n";
    return report.target_metrics_defined() ? kExitOk : kExitUndefined;
}

struct CurveOptions {
    std::string manifest;
    std::string kind = "pr";
    std::size_t bins = sirst::kDefaultHistogramBins;
    std::size_t workers = sirst::default_workers();
    std::string out;
};

int run_curve(const CurveOptions& o) {
    const sirst::Corpus corpus = sirst::load_corpus(o.manifest);
    const sirst::ScoreHistogram hist = sirst::build_histogram(corpus, o.bins, o.workers);
    std::string text;
    if (o.kind == "roc") {
        text = "threshold,fpr,tpr\n";
        for (const sirst::RocPoint& p : sirst::roc_curve(hist))
            text += sirst::format_number(p.threshold) + "," + sirst::format_number(p.fpr) + "," +
                    sirst::format_number(p.tpr) + "\n";
    } else {
        text = "threshold,precision,recall,tp,fp\n";
        for (const sirst::PRPoint& p : sirst::pixel_pr_curve(hist))
            text += sirst::format_number(p.threshold) + "," + sirst::format_number(p.precision) + "," +
                    sirst::format_number(p.recall) + "," + std::to_string(p.tp) + "," + std::to_string(p.fp) + "\n";
    }
    write_text(text, o.out);
    return kExitOk;
}

struct GenOptions {
    std::string out;
    std::size_t images = 10;
    sirst::SceneSpec scene;
    sirst::ErrorModeSpec errors;
    int bit_depth = 16;
};

int run_gen(GenOptions o) {
    o.scene.bit_depth = o.bit_depth == 8 ? sirst::BitDepth::k8 : sirst::BitDepth::k16;
    const sirst::Corpus corpus = sirst::gen_corpus(o.scene, o.errors, o.images);
    const auto manifest = sirst::write_corpus(o.out, corpus, o.scene.bit_depth);
    std::cout << manifest.string() << "\n";
    return kExitOk;
}

int run_demo_roc(std::uint64_t seed, std::size_t workers) {
    const sirst::RocDemoOutcome r = sirst::run_roc_demo(seed, workers);
    std::printf("case      roc_auc   hse_p     fa_e6\n");
    std::printf("case_I    %.6f  %.6f  %.2f\n", *r.case_one.roc_auc, *r.case_one.hse_p, r.case_one.fa * 1e6);
    std::printf("case_II   %.6f  %.6f  %.2f\n", *r.case_two.roc_auc, *r.case_two.hse_p, r.case_two.fa * 1e6);
    std::printf("fp ratio  %.2f\n", r.fp_ratio);
    const bool ok = r.holds();
    std::printf("%s: AUC ranks case_I above case_II while HSE-P ranks it below\n", ok ? "PASS" : "FAIL");
    return ok ? kExitOk : kExitProperty;
}

int run_nn_check(std::uint64_t seed) {
    const auto rows = sirst::nn::run_nn_checks(seed);
    bool all = true;
    for (const auto& row : rows) {
        std::printf("%-4s %-30s %s\n", row.passed ? "PASS" : "FAIL", row.name.c_str(), row.detail.c_str());
        all = all && row.passed;
    }
    return all ? kExitOk : kExitProperty;
}

int run_fuse(double pixel, double target) {
    if (!(pixel >= 0.0 && pixel <= 100.0) || !(target >= 0.0 && target <= 100.0))
        throw sirst::InvalidArgument("scores must lie in [0, 100]");
    std::printf("%.2f\n", sirst::hse_percent(pixel, target));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evaluation toolkit for single-frame infrared small target detection"};
    app.require_subcommand(1);
    int code = kExitOk;

    EvalOptions eval;
    auto* e = app.add_subcommand("eval", "Evaluate a prediction corpus");
    e->add_option("--manifest", eval.manifest, "TSV manifest: image_id, pred path, gt path")->required();
    e->add_option("--tau", eval.tau, "Centroid matching tolerance in pixels")->capture_default_str();
    e->add_option("--thresholds", eval.thresholds, "Threshold count or comma list")->capture_default_str();
    e->add_option("--connectivity", eval.connectivity)->check(CLI::IsMember({4, 8}))->capture_default_str();
    e->add_option("--fixed-threshold", eval.fixed_threshold)->capture_default_str();
    e->add_option("--bins", eval.bins, "Score histogram bins")->capture_default_str();
    e->add_option("--workers", eval.workers)->check(CLI::PositiveNumber);
    e->add_option("--format", eval.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    e->add_option("--scale", eval.scale)->check(CLI::IsMember({"percent", "unit"}))->capture_default_str();
    e->add_option("--out", eval.out, "Output path (default stdout)");
    e->callback([&] { code = run_eval(eval); });

    CurveOptions curve;
    auto* c = app.add_subcommand("curve", "Dump the pixel PR or ROC curve as CSV");
    c->add_option("--manifest", curve.manifest)->required();
    c->add_option("--kind", curve.kind)->check(CLI::IsMember({"pr", "roc"}))->capture_default_str();
    c->add_option("--bins", curve.bins)->capture_default_str();
    c->add_option("--workers", curve.workers)->check(CLI::PositiveNumber);
    c->add_option("--out", curve.out);
    c->callback([&] { code = run_curve(curve); });

    GenOptions gen;
    auto* g = app.add_subcommand("gen", "Generate a synthetic corpus with PGM files and a manifest");
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--images", gen.images)->capture_default_str();
    g->add_option("--height", gen.scene.height)->capture_default_str();
    g->add_option("--width", gen.scene.width)->capture_default_str();
    g->add_option("--targets", gen.scene.n_targets)->capture_default_str();
    g->add_option("--radius-min", gen.scene.radius_min)->capture_default_str();
    g->add_option("--radius-max", gen.scene.radius_max)->capture_default_str();
    g->add_option("--noise", gen.scene.noise_level)->capture_default_str();
    g->add_option("--seed", gen.scene.seed)->capture_default_str();
    g->add_option("--bit-depth", gen.bit_depth)->check(CLI::IsMember({8, 16}))->capture_default_str();
    g->add_option("--miss", gen.errors.miss_fraction, "Fraction of targets dropped");
    g->add_option("--false-alarms", gen.errors.false_alarm_count, "Spurious blobs per image");
    g->add_option("--false-alarm-confidence", gen.errors.false_alarm_confidence);
    g->add_option("--erosion", gen.errors.erosion_pixels, "Boundary layers attenuated");
    g->add_option("--jitter", gen.errors.confidence_jitter, "Gaussian confidence noise sigma");
    g->callback([&] { code = run_gen(gen); });

    std::uint64_t demo_seed = 2024;
    std::size_t demo_workers = sirst::default_workers();
    auto* d = app.add_subcommand("demo-roc", "Show AUC and HSE-P disagreeing on an imbalanced corpus pair");
    d->add_option("--seed", demo_seed)->capture_default_str();
    d->add_option("--workers", demo_workers)->check(CLI::PositiveNumber);
    d->callback([&] { code = run_demo_roc(demo_seed, demo_workers); });

    std::uint64_t nn_seed = 7;
    auto* n = app.add_subcommand("nn-check", "Run the fusion-kernel gradient and invariant suite");
    n->add_option("--seed", nn_seed)->capture_default_str();
    n->callback([&] { code = run_nn_check(nn_seed); });

    double fuse_pixel = 0.0, fuse_target = 0.0;
    auto* f = app.add_subcommand("fuse", "Fuse pixel-level and target-level percent scores");
    f->add_option("pixel", fuse_pixel, "Pixel-level score in percent")->required();
    f->add_option("target", fuse_target, "Target-level score in percent")->required();
    f->callback([&] { code = run_fuse(fuse_pixel, fuse_target); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    } catch (const sirst::LoadError& err) {
        for (const auto& issue : err.issues())
            std::cerr << "load error" << (issue.image_id.empty() ? "" : " [" + issue.image_id + "]") << ": "
                      << issue.message << "\n";
        return kExitLoad;
    } catch (const sirst::IoError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitLoad;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitLoad;
    }
    return code;
}
