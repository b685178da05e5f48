// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/detection_eval.hpp"

#include <algorithm>
#include <cmath>

namespace phishdetect {

MatchOutcome match_detections(std::span<const Detection> detections,
                              std::span<const GroundTruth> ground_truth, double iou_min) {
    MatchOutcome out;
    for (const auto& gt : ground_truth) {
        out.per_brand[gt.brand];  // ensure brands with only ground truth appear
    }

    std::vector<std::size_t> order(detections.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].prob > detections[b].prob;
    });

    std::vector<bool> matched(ground_truth.size(), false);
    for (std::size_t oi : order) {
        const Detection& det = detections[oi];
        int best_gt = -1;
        double best_iou = 0.0;
        for (std::size_t gi = 0; gi < ground_truth.size(); ++gi) {
            if (matched[gi] || ground_truth[gi].brand != det.brand) {
                continue;
            }
            const double v = iou(det.box, ground_truth[gi].box);
            if (v >= iou_min && v > best_iou) {
                best_iou = v;
                best_gt = static_cast<int>(gi);
            }
        }
        MatchedDetection md;
        md.detection = det;
        if (best_gt >= 0) {
            matched[static_cast<std::size_t>(best_gt)] = true;
            md.true_positive = true;
            md.matched_ground_truth = best_gt;
            out.per_brand[det.brand].tp += 1;
        } else {
            out.per_brand[det.brand].fp += 1;
        }
        out.detections.push_back(std::move(md));
    }
    for (std::size_t gi = 0; gi < ground_truth.size(); ++gi) {
        if (!matched[gi]) {
            out.per_brand[ground_truth[gi].brand].fn += 1;
        }
    }
    return out;
}

PRCurve pr_curve(std::vector<ScoredMatch> matches, long gt_count) {
    if (gt_count <= 0) {
        throw DataError("pr_curve: brand has no ground truth; report it as absent");
    }
    std::stable_sort(matches.begin(), matches.end(),
                     [](const ScoredMatch& a, const ScoredMatch& b) { return a.prob > b.prob; });

    PRCurve curve;
    curve.gt_count = gt_count;
    long tp = 0;
    long fp = 0;
    std::size_t i = 0;
    while (i < matches.size()) {
        const double threshold = matches[i].prob;
        // Detections sharing one probability enter the sweep together.
        while (i < matches.size() && matches[i].prob == threshold) {
            (matches[i].true_positive ? tp : fp) += 1;
            ++i;
        }
        PRPoint point;
        point.threshold = threshold;
        point.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        point.recall = static_cast<double>(tp) / static_cast<double>(gt_count);
        curve.points.push_back(point);
    }
    return curve;
}

double auc(const PRCurve& curve) {
    // Collapse equal-recall plateaus to the final precision seen there.
    std::vector<PRPoint> collapsed;
    for (const auto& p : curve.points) {
        if (!collapsed.empty() && collapsed.back().recall == p.recall) {
            collapsed.back() = p;
        } else {
            collapsed.push_back(p);
        }
    }
    double area = 0.0;
    double prev_recall = 0.0;
    double prev_precision = collapsed.empty() ? 0.0 : collapsed.front().precision;
    for (const auto& p : collapsed) {
        area += (p.recall - prev_recall) * (p.precision + prev_precision) / 2.0;
        prev_recall = p.recall;
        prev_precision = p.precision;
    }
    return area;
}

DetectorEvaluation evaluate_detector(const LogoModel& model, std::span<const LogoSample> samples,
                                     double decode_threshold, double iou_min) {
    std::map<std::string, std::vector<ScoredMatch>> matches;
    std::map<std::string, long> gt_counts;

    for (const auto& sample : samples) {
        std::vector<GroundTruth> gts;
        gts.reserve(sample.targets.size());
        for (const auto& t : sample.targets) {
            gts.push_back({model.config.brands[static_cast<std::size_t>(t.cls)], t.box});
            gt_counts[gts.back().brand] += 1;
        }
        const auto detections = model.detect(sample.image, decode_threshold);
        const MatchOutcome outcome = match_detections(detections, gts, iou_min);
        for (const auto& md : outcome.detections) {
            matches[md.detection.brand].push_back({md.detection.prob, md.true_positive});
        }
    }

    DetectorEvaluation eval;
    double auc_sum = 0.0;
    for (const auto& [brand, count] : gt_counts) {
        PRCurve curve = pr_curve(matches[brand], count);
        const double area = auc(curve);
        eval.curves.emplace(brand, std::move(curve));
        eval.auc_per_brand.emplace(brand, area);
        auc_sum += area;
    }
    for (const auto& [brand, scored] : matches) {
        if (!gt_counts.count(brand)) {
            eval.brands_without_ground_truth.push_back(brand);
        }
    }
    if (!eval.auc_per_brand.empty()) {
        eval.mean_auc = auc_sum / static_cast<double>(eval.auc_per_brand.size());
    }
    return eval;
}

AucDelta auc_delta(const std::map<std::string, double>& auc_new,
                   const std::map<std::string, double>& auc_old) {
    AucDelta out;
    double inc_sum = 0.0;
    double dec_sum = 0.0;
    for (const auto& [brand, value] : auc_new) {
        auto it = auc_old.find(brand);
        if (it == auc_old.end()) {
            out.only_in_new.push_back(brand);
            continue;
        }
        const double d = value - it->second;
        out.delta.emplace(brand, d);
        if (d > 0.0) {
            out.increases += 1;
            inc_sum += d;
        } else if (d < 0.0) {
            out.decreases += 1;
            dec_sum += d;
        } else {
            out.unchanged += 1;
        }
    }
    for (const auto& [brand, value] : auc_old) {
        if (!auc_new.count(brand)) {
            out.only_in_old.push_back(brand);
        }
    }
    if (out.increases > 0) {
        out.mean_increase = inc_sum / static_cast<double>(out.increases);
    }
    if (out.decreases > 0) {
        out.mean_decrease = dec_sum / static_cast<double>(out.decreases);
    }
    return out;
}

}  // namespace phishdetect
