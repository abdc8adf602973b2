#include "sirst/target_metrics.hpp"

#include <cmath>
#include <string>

#include "sirst/error.hpp"

namespace sirst {

ThresholdSet::ThresholdSet(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t j = 0; j < values_.size(); ++j) {
        const double t = values_[j];
        if (!(t > 0.0 && t < 1.0))
            throw InvalidArgument("threshold outside (0,1): " + std::to_string(t));
        if (j > 0 && !(values_[j - 1] < t))
            throw InvalidArgument("thresholds must be strictly increasing");
    }
}

ThresholdSet ThresholdSet::uniform(std::size_t count) {
    if (count == 0) throw InvalidArgument("threshold count must be positive");
    std::vector<double> v(count);
    for (std::size_t j = 0; j < count; ++j)
        v[j] = static_cast<double>(j + 1) / static_cast<double>(count + 1);
    return ThresholdSet(std::move(v));
}

MatchResult match_targets(const TargetSet& pred, const TargetSet& gt, double tau) {
    if (!(tau > 0.0)) throw InvalidArgument("matching tolerance must be positive");
    MatchResult result;
    result.n_pred = pred.size();
    result.n_gt = gt.size();
    std::vector<char> taken(pred.size(), 0);
    const double tau2 = tau * tau;
    for (const Target& g : gt) {
        for (std::size_t k = 0; k < pred.size(); ++k) {
            if (taken[k]) continue;
            const double dr = pred[k].centroid_row - g.centroid_row;
            const double dc = pred[k].centroid_col - g.centroid_col;
            const double d2 = dr * dr + dc * dc;
            if (d2 <= tau2) {
                taken[k] = 1;
                result.matches.push_back(Match{g.id, pred[k].id, std::sqrt(d2)});
                break;
            }
        }
    }
    result.n_match = result.matches.size();
    return result;
}

TargetCounts count_targets(const BinaryMask& pred, const TargetSet& pred_targets,
                           const BinaryMask& gt, const TargetSet& gt_targets, double tau) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw InvalidArgument("prediction and ground truth dimensions differ");
    const MatchResult m = match_targets(pred_targets, gt_targets, tau);
    TargetCounts c;
    c.n_match = m.n_match;
    c.n_pred = m.n_pred;
    c.n_gt = m.n_gt;
    c.pixels = pred.size();
    for (std::size_t i = 0; i < pred.size(); ++i)
        c.false_pixels += (pred.bits[i] && !gt.bits[i]) ? 1 : 0;
    return c;
}

bool fa_within_limit(std::uint64_t false_pixels, std::uint64_t total_pixels) {
    return static_cast<unsigned __int128>(false_pixels) * 10000u <= total_pixels;
}

PdFa pd_fa(std::span<const MaskPair> corpus, double tau, Connectivity conn) {
    if (corpus.empty()) throw InvalidArgument("Pd/Fa of an empty corpus");
    TargetCounts total;
    for (const auto& [pred, gt] : corpus) {
        const Components pc = label_components(pred, conn);
        const Components gc = label_components(gt, conn);
        total += count_targets(pred, pc.targets, gt, gc.targets, tau);
    }
    if (total.n_gt == 0) throw UndefinedMetric("Pd undefined: corpus has no ground-truth target");
    PdFa r;
    r.counts = total;
    r.pd = static_cast<double>(total.n_match) / static_cast<double>(total.n_gt);
    r.fa = static_cast<double>(total.false_pixels) / static_cast<double>(total.pixels);
    r.fa_valid = fa_within_limit(total.false_pixels, total.pixels);
    return r;
}

TargetPRPoint make_target_pr_point(double threshold, const TargetCounts& counts) {
    if (counts.n_gt == 0) throw UndefinedMetric("target recall undefined: no ground-truth target");
    TargetPRPoint p;
    p.threshold = threshold;
    p.counts = counts;
    p.precision = counts.n_pred == 0
                      ? 0.0
                      : static_cast<double>(counts.n_match) / static_cast<double>(counts.n_pred);
    p.recall = static_cast<double>(counts.n_match) / static_cast<double>(counts.n_gt);
    return p;
}

TargetPRPoint target_pr_at_threshold(std::span<const ProbPair> corpus, double t, double tau,
                                     Connectivity conn) {
    if (!(t > 0.0 && t < 1.0)) throw InvalidArgument("threshold outside (0,1)");
    TargetCounts total;
    for (const auto& [prob, gt] : corpus) {
        const BinaryMask pred = binarize(prob, t);
        const Components pc = label_components(pred, conn);
        const Components gc = label_components(gt, conn);
        total += count_targets(pred, pc.targets, gt, gc.targets, tau);
    }
    return make_target_pr_point(t, total);
}

double integrate_target_pr(std::span<const TargetPRPoint> points, bool* negative_increment) {
    if (points.empty()) throw InvalidArgument("HSE-T needs at least one threshold");
    double sum = 0.0;
    bool negative = false;
    for (std::size_t j = 0; j < points.size(); ++j) {
        const double next = j + 1 < points.size() ? points[j + 1].recall : 0.0;
        const double delta = points[j].recall - next;
        negative = negative || delta < 0.0;
        sum += points[j].precision * delta;
    }
    if (negative_increment) *negative_increment = negative;
    return sum;
}

HseTResult hse_t(std::span<const ProbPair> corpus, const ThresholdSet& thresholds, double tau,
                 Connectivity conn) {
    if (thresholds.empty()) throw InvalidArgument("HSE-T needs a non-empty threshold set");
    HseTResult r;
    r.points.reserve(thresholds.size());
    for (double t : thresholds.values())
        r.points.push_back(target_pr_at_threshold(corpus, t, tau, conn));
    r.value = integrate_target_pr(r.points, &r.negative_increment);
    return r;
}

}  // namespace sirst
