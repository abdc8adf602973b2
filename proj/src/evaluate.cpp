#include "sirst/evaluate.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <numeric>
#include <set>

#include "sirst/error.hpp"
#include "sirst/parallel.hpp"
#include "sirst/synth_corpus.hpp"

namespace sirst {

namespace {

class Fnv1a {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= p[i];
            hash_ *= 0x100000001B3ull;
        }
    }
    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b, 8);
    }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
        return buf;
    }

private:
    std::uint64_t hash_ = 0xCBF29CE484222325ull;
};

struct ImageResult {
    TargetCounts fixed;
    OverlapCounts overlap;
    std::vector<TargetCounts> per_threshold;
};

void check_corpus(const Corpus& corpus) {
    if (corpus.empty()) throw InvalidArgument("cannot evaluate an empty corpus");
    std::set<std::string> ids;
    for (const CorpusItem& item : corpus) {
        if (!ids.insert(item.image_id).second)
            throw InvalidArgument("duplicate image id: " + item.image_id);
        if (item.pred.height != item.gt.height || item.pred.width != item.gt.width ||
            item.pred.size() != item.gt.size())
            throw InvalidArgument("dimension mismatch for image " + item.image_id);
        validate(item.pred);
    }
}

std::vector<std::size_t> id_order(const Corpus& corpus) {
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return corpus[a].image_id < corpus[b].image_id;
    });
    return order;
}

std::string fmt_threshold(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", t);
    return buf;
}

}  // namespace

void EvalConfig::validate() const {
    if (thresholds.empty()) throw InvalidArgument("threshold set is empty");
    if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
    if (!(fixed_threshold >= 0.0 && fixed_threshold <= 1.0))
        throw InvalidArgument("fixed threshold must lie in [0,1]");
    if (histogram_bins < 2) throw InvalidArgument("histogram needs at least 2 bins");
    if (workers == 0) throw InvalidArgument("worker count must be positive");
}

std::string digest_item(const CorpusItem& item) {
    Fnv1a f;
    f.u64(item.pred.height);
    f.u64(item.pred.width);
    f.u64(static_cast<std::uint64_t>(item.pred.bit_depth));
    for (double v : item.pred.values) f.u64(std::bit_cast<std::uint64_t>(v));
    f.bytes(item.gt.bits.data(), item.gt.bits.size());
    return f.hex();
}

PRCurve sample_curve(const PRCurve& curve, std::size_t max_points) {
    if (curve.size() <= max_points || max_points < 2) return curve;
    PRCurve out;
    out.reserve(max_points);
    const std::size_t last = curve.size() - 1;
    for (std::size_t i = 0; i < max_points; ++i) {
        const std::size_t k = (i * last + (max_points - 1) / 2) / (max_points - 1);
        if (out.empty() || out.back().threshold != curve[k].threshold) out.push_back(curve[k]);
    }
    return out;
}

ScoreHistogram build_histogram(const Corpus& corpus, std::size_t bins, std::size_t workers) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(corpus.size(), 1));
    std::vector<ScoreHistogram> local(workers, ScoreHistogram(bins));
    parallel_for(corpus.size(), workers, [&](std::size_t i, std::size_t w) {
        accumulate(local[w], corpus[i].pred, corpus[i].gt);
    });
    for (std::size_t w = 1; w < workers; ++w) local[0].merge(local[w]);
    return std::move(local[0]);
}

MetricReport evaluate(const Corpus& corpus, const EvalConfig& cfg) {
    cfg.validate();
    check_corpus(corpus);

    const std::vector<std::size_t> order = id_order(corpus);
    const std::size_t m = cfg.thresholds.size();
    const std::size_t workers =
        std::clamp<std::size_t>(cfg.workers, 1, std::max<std::size_t>(corpus.size(), 1));

    std::vector<ImageResult> results(corpus.size());
    std::vector<ScoreHistogram> hists(workers, ScoreHistogram(cfg.histogram_bins));
    parallel_for(corpus.size(), workers, [&](std::size_t slot, std::size_t w) {
        const CorpusItem& item = corpus[order[slot]];
        ImageResult& res = results[slot];
        accumulate(hists[w], item.pred, item.gt);

        const Components gt = label_components(item.gt, cfg.connectivity);
        const BinaryMask fixed = binarize(item.pred, cfg.fixed_threshold);
        const Components fixed_c = label_components(fixed, cfg.connectivity);
        res.fixed = count_targets(fixed, fixed_c.targets, item.gt, gt.targets, cfg.tau);
        res.overlap = overlap(fixed, item.gt);

        res.per_threshold.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            const BinaryMask mask = binarize(item.pred, cfg.thresholds[j]);
            const Components pc = label_components(mask, cfg.connectivity);
            res.per_threshold[j] = count_targets(mask, pc.targets, item.gt, gt.targets, cfg.tau);
        }
    });
    for (std::size_t w = 1; w < workers; ++w) hists[0].merge(hists[w]);
    const ScoreHistogram& hist = hists[0];

    MetricReport report;
    report.config = cfg;
    report.images = corpus.size();

    TargetCounts fixed_total;
    std::vector<TargetCounts> sweep(m);
    OverlapCounts pooled;
    double iou_sum = 0.0;
    Fnv1a corpus_hash;
    for (std::size_t slot = 0; slot < corpus.size(); ++slot) {
        const CorpusItem& item = corpus[order[slot]];
        const ImageResult& res = results[slot];
        fixed_total += res.fixed;
        for (std::size_t j = 0; j < m; ++j) sweep[j] += res.per_threshold[j];
        pooled.intersection += res.overlap.intersection;
        pooled.union_ += res.overlap.union_;
        if (res.overlap.union_ == 0) {
            iou_sum += 1.0;
            report.empty_images.push_back(item.image_id);
        } else {
            iou_sum += static_cast<double>(res.overlap.intersection) /
                       static_cast<double>(res.overlap.union_);
        }
        ImageDigest d{item.image_id, digest_item(item)};
        corpus_hash.str(d.image_id);
        corpus_hash.str(d.digest);
        report.inputs.push_back(std::move(d));
    }
    report.corpus_digest = corpus_hash.hex();

    report.pixels = fixed_total.pixels;
    report.positive_pixels = hist.total_pos();
    report.gt_targets = fixed_total.n_gt;
    report.iou = pooled.union_ == 0 ? 1.0
                                    : static_cast<double>(pooled.intersection) /
                                          static_cast<double>(pooled.union_);
    report.niou = iou_sum / static_cast<double>(corpus.size());
    report.fa = static_cast<double>(fixed_total.false_pixels) / static_cast<double>(fixed_total.pixels);
    report.fa_valid = fa_within_limit(fixed_total.false_pixels, fixed_total.pixels);

    report.lossy_quantization = hist.lossy();
    if (report.lossy_quantization)
        report.warnings.push_back("lossy-quantization: confidences were rounded to " +
                                  std::to_string(cfg.histogram_bins) + " histogram bins");
    if (!report.empty_images.empty())
        report.warnings.push_back("empty-iou: " + std::to_string(report.empty_images.size()) +
                                  " image(s) with empty prediction and ground truth scored IoU 1");

    if (report.positive_pixels > 0) {
        const PRCurve curve = pixel_pr_curve(hist);
        report.hse_p = hse_p(curve);
        report.pixel_pr = sample_curve(curve, kMaxPixelCurveSamples);
    }
    if (report.positive_pixels > 0 && hist.total_neg() > 0) report.roc_auc = roc_auc(hist);

    if (fixed_total.n_gt > 0) {
        report.pd = static_cast<double>(fixed_total.n_match) / static_cast<double>(fixed_total.n_gt);
        for (std::size_t j = 0; j < m; ++j)
            report.target_pr.push_back(make_target_pr_point(cfg.thresholds[j], sweep[j]));
        bool negative = false;
        report.hse_t = integrate_target_pr(report.target_pr, &negative);
        for (std::size_t j = 0; negative && j < m; ++j) {
            const double next = j + 1 < m ? report.target_pr[j + 1].recall : 0.0;
            if (report.target_pr[j].recall < next)
                report.warnings.push_back("negative-recall-increment: recall rises from t=" +
                                          fmt_threshold(cfg.thresholds[j]) + " to t=" +
                                          fmt_threshold(cfg.thresholds[j + 1]));
        }
    } else {
        report.warnings.push_back("undefined-target-metrics: corpus has no ground-truth target");
    }
    if (report.hse_p && report.hse_t) report.hse = hse(*report.hse_p, *report.hse_t);
    return report;
}

bool RocDemoOutcome::holds() const {
    if (!case_one.roc_auc || !case_two.roc_auc || !case_one.hse_p || !case_two.hse_p) return false;
    return fp_ratio >= kRocDemoMinFpRatio && *case_one.roc_auc > *case_two.roc_auc &&
           *case_one.hse_p < *case_two.hse_p && *case_one.roc_auc > kRocDemoMinAuc &&
           *case_two.roc_auc > kRocDemoMinAuc;
}

RocDemoOutcome run_roc_demo(std::uint64_t seed, std::size_t workers) {
    const RocDemo demo = build_roc_demo(seed);
    EvalConfig cfg;
    cfg.workers = workers;
    cfg.report_scale = ReportScale::kUnit;
    RocDemoOutcome out{evaluate(demo.case_one, cfg), evaluate(demo.case_two, cfg), 0.0};
    // fa shares the pixel denominator, so its ratio is the false-positive pixel ratio.
    out.fp_ratio = out.case_two.fa > 0.0 ? out.case_one.fa / out.case_two.fa : 0.0;
    return out;
}

}  // namespace sirst
