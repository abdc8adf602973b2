#include "sirst/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sirst/error.hpp"

namespace sirst {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double scale_of(ReportScale s) { return s == ReportScale::kPercent ? 100.0 : 1.0; }

ordered_json opt(const std::optional<double>& v, double k) {
    return v ? ordered_json(*v * k) : ordered_json(nullptr);
}

template <typename T>
T required(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw InvalidArgument(std::string("report field missing: ") + key);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(std::string("report field has wrong type: ") + key);
    }
}

std::optional<double> optional_number(const json& j, const char* key, double k) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return required<double>(j, key) / k;
}

}  // namespace

std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

ordered_json report_to_json(const MetricReport& r) {
    const double k = scale_of(r.config.report_scale);
    ordered_json j;
    j["format_version"] = r.format_version;
    j["scale"] = r.config.report_scale == ReportScale::kPercent ? "percent" : "unit";

    ordered_json cfg;
    cfg["thresholds"] = r.config.thresholds.values();
    cfg["tau"] = r.config.tau;
    cfg["connectivity"] = r.config.connectivity == Connectivity::kEight ? 8 : 4;
    cfg["fixed_threshold"] = r.config.fixed_threshold;
    cfg["histogram_bins"] = r.config.histogram_bins;
    j["config"] = cfg;

    ordered_json conv;
    conv["iou"] = "corpus-pooled intersection over union at fixed_threshold";
    conv["niou"] = "mean of per-image IoU at fixed_threshold; empty-vs-empty scores 1";
    conv["target_counts"] = "pooled over the corpus before dividing";
    conv["pixel_pr_integration"] = "step rule, sum of precision times recall decrement";
    conv["hse_t_closure"] = "recall past the last threshold taken as 0";
    conv["fa_units"] = "fa is a ratio; fa_e6 is fa in units of 1e-6";
    j["conventions"] = conv;

    ordered_json counts;
    counts["images"] = r.images;
    counts["pixels"] = r.pixels;
    counts["positive_pixels"] = r.positive_pixels;
    counts["gt_targets"] = r.gt_targets;
    j["counts"] = counts;

    ordered_json s;
    s["iou"] = r.iou * k;
    s["niou"] = r.niou * k;
    s["pd"] = opt(r.pd, k);
    s["fa"] = r.fa;
    s["fa_e6"] = r.fa * 1e6;
    s["fa_valid"] = r.fa_valid;
    s["hse_p"] = opt(r.hse_p, k);
    s["hse_t"] = opt(r.hse_t, k);
    s["hse"] = opt(r.hse, k);
    s["roc_auc"] = opt(r.roc_auc, k);
    j["summary"] = s;

    ordered_json tpr = ordered_json::array();
    for (const TargetPRPoint& p : r.target_pr) {
        ordered_json e;
        e["threshold"] = p.threshold;
        e["precision"] = p.precision * k;
        e["recall"] = p.recall * k;
        e["n_match"] = p.counts.n_match;
        e["n_pred"] = p.counts.n_pred;
        e["n_gt"] = p.counts.n_gt;
        tpr.push_back(std::move(e));
    }
    j["target_pr"] = std::move(tpr);

    ordered_json ppr = ordered_json::array();
    for (const PRPoint& p : r.pixel_pr) {
        ordered_json e;
        e["threshold"] = p.threshold;
        e["precision"] = p.precision * k;
        e["recall"] = p.recall * k;
        e["tp"] = p.tp;
        e["fp"] = p.fp;
        ppr.push_back(std::move(e));
    }
    j["pixel_pr"] = std::move(ppr);

    ordered_json flags;
    flags["lossy_quantization"] = r.lossy_quantization;
    flags["empty_images"] = r.empty_images;
    j["flags"] = flags;

    ordered_json inputs;
    inputs["corpus_digest"] = r.corpus_digest;
    ordered_json images = ordered_json::array();
    for (const ImageDigest& d : r.inputs) images.push_back({{"image_id", d.image_id}, {"digest", d.digest}});
    inputs["images"] = std::move(images);
    j["inputs"] = std::move(inputs);
    j["warnings"] = r.warnings;
    return j;
}

MetricReport report_from_json(const json& j) {
    MetricReport r;
    r.format_version = required<std::string>(j, "format_version");
    const std::string scale = required<std::string>(j, "scale");
    if (scale != "percent" && scale != "unit") throw InvalidArgument("unknown report scale: " + scale);
    r.config.report_scale = scale == "percent" ? ReportScale::kPercent : ReportScale::kUnit;
    const double k = scale_of(r.config.report_scale);

    const json& cfg = j.at("config");
    r.config.thresholds = ThresholdSet(required<std::vector<double>>(cfg, "thresholds"));
    r.config.tau = required<double>(cfg, "tau");
    const int conn = required<int>(cfg, "connectivity");
    if (conn != 4 && conn != 8) throw InvalidArgument("connectivity must be 4 or 8");
    r.config.connectivity = conn == 8 ? Connectivity::kEight : Connectivity::kFour;
    r.config.fixed_threshold = required<double>(cfg, "fixed_threshold");
    r.config.histogram_bins = required<std::size_t>(cfg, "histogram_bins");

    const json& counts = j.at("counts");
    r.images = required<std::size_t>(counts, "images");
    r.pixels = required<std::uint64_t>(counts, "pixels");
    r.positive_pixels = required<std::uint64_t>(counts, "positive_pixels");
    r.gt_targets = required<std::uint64_t>(counts, "gt_targets");

    const json& s = j.at("summary");
    r.iou = required<double>(s, "iou") / k;
    r.niou = required<double>(s, "niou") / k;
    r.pd = optional_number(s, "pd", k);
    r.fa = required<double>(s, "fa");
    r.fa_valid = required<bool>(s, "fa_valid");
    r.hse_p = optional_number(s, "hse_p", k);
    r.hse_t = optional_number(s, "hse_t", k);
    r.hse = optional_number(s, "hse", k);
    r.roc_auc = optional_number(s, "roc_auc", k);

    for (const json& e : j.value("target_pr", json::array())) {
        TargetPRPoint p;
        p.threshold = required<double>(e, "threshold");
        p.precision = required<double>(e, "precision") / k;
        p.recall = required<double>(e, "recall") / k;
        p.counts.n_match = required<std::uint64_t>(e, "n_match");
        p.counts.n_pred = required<std::uint64_t>(e, "n_pred");
        p.counts.n_gt = required<std::uint64_t>(e, "n_gt");
        r.target_pr.push_back(p);
    }
    for (const json& e : j.value("pixel_pr", json::array())) {
        PRPoint p;
        p.threshold = required<double>(e, "threshold");
        p.precision = required<double>(e, "precision") / k;
        p.recall = required<double>(e, "recall") / k;
        p.tp = e.value("tp", std::uint64_t{0});
        p.fp = e.value("fp", std::uint64_t{0});
        r.pixel_pr.push_back(p);
    }
    if (j.contains("flags")) {
        const json& f = j.at("flags");
        r.lossy_quantization = f.value("lossy_quantization", false);
        r.empty_images = f.value("empty_images", std::vector<std::string>{});
    }
    if (j.contains("inputs")) {
        const json& in = j.at("inputs");
        r.corpus_digest = in.value("corpus_digest", std::string{});
        for (const json& d : in.value("images", json::array()))
            r.inputs.push_back(ImageDigest{required<std::string>(d, "image_id"), required<std::string>(d, "digest")});
    }
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
}

std::string report_to_csv(const MetricReport& r) {
    const double k = scale_of(r.config.report_scale);
    auto num = [](double v) { return format_number(v); };
    auto opt_num = [&](const std::optional<double>& v) { return v ? num(*v * k) : std::string(); };
    std::ostringstream out;
    out << "kind,threshold,precision,recall,n_match,n_pred,n_gt,iou,niou,pd,fa_e6,fa_valid,hse_p,hse_t,hse,roc_auc\n";
    out << "summary," << num(r.config.fixed_threshold) << ",,,,,," << num(r.iou * k) << ','
        << num(r.niou * k) << ',' << opt_num(r.pd) << ',' << num(r.fa * 1e6) << ','
        << (r.fa_valid ? "true" : "false") << ',' << opt_num(r.hse_p) << ',' << opt_num(r.hse_t)
        << ',' << opt_num(r.hse) << ',' << opt_num(r.roc_auc) << '\n';
    for (const TargetPRPoint& p : r.target_pr) {
        out << "threshold," << num(p.threshold) << ',' << num(p.precision * k) << ','
            << num(p.recall * k) << ',' << p.counts.n_match << ',' << p.counts.n_pred << ','
            << p.counts.n_gt << ",,,,,,,,,\n";
    }
    return out.str();
}

std::string render_report(const MetricReport& report, ReportFormat format) {
    if (format == ReportFormat::kCsv) return report_to_csv(report);
    return report_to_json(report).dump(2) + "\n";
}

void emit_report(const MetricReport& report, ReportFormat format, const std::filesystem::path& path) {
    const std::string text = render_report(report, format);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open report for writing: " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) throw IoError("failed writing report: " + path.string());
}

}  // namespace sirst
