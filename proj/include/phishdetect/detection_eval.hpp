// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Detector evaluation: greedy IOU matching (label match + IOU >= 0.5 is a
// true positive), per-brand precision/recall sweeps, trapezoidal AUC, and
// AUC deltas between two models.

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "phishdetect/geometry.hpp"
#include "phishdetect/logo_model.hpp"

namespace phishdetect {

struct GroundTruth {
    std::string brand;
    BoundingBox box;
};

struct MatchCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

struct MatchedDetection {
    Detection detection;
    bool true_positive = false;
    int matched_ground_truth = -1;  // index into the ground-truth span
};

struct MatchOutcome {
    std::map<std::string, MatchCounts> per_brand;
    std::vector<MatchedDetection> detections;  // greedy probability order
};

// Greedy by descending probability over one image: a detection is a true
// positive when its label matches a still-unmatched ground truth with
// IOU >= iou_min (best IOU wins); otherwise a false positive. Unmatched
// ground truths count as false negatives. One match per ground truth.
MatchOutcome match_detections(std::span<const Detection> detections,
                              std::span<const GroundTruth> ground_truth, double iou_min = 0.5);

// Precision/recall sweep ---------------------------------------------------------

struct ScoredMatch {
    double prob = 0.0;
    bool true_positive = false;
};

struct PRPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct PRCurve {
    std::vector<PRPoint> points;  // one per distinct threshold, high to low
    long gt_count = 0;
};

// Sweeps the detection probability from high to low over matched
// detections for one brand. gt_count must be positive; brands with no
// ground truth are reported as absent, never as zero.
PRCurve pr_curve(std::vector<ScoredMatch> matches, long gt_count);

// Trapezoidal area over recall. Equal-recall plateaus collapse to their
// final precision; the segment from recall 0 to the first point holds that
// point's precision constant.
double auc(const PRCurve& curve);

// Whole-corpus evaluation ---------------------------------------------------------

struct DetectorEvaluation {
    std::map<std::string, PRCurve> curves;         // brands with ground truth
    std::map<std::string, double> auc_per_brand;   // same key set as curves
    std::vector<std::string> brands_without_ground_truth;
    double mean_auc = 0.0;
};

DetectorEvaluation evaluate_detector(const LogoModel& model, std::span<const LogoSample> samples,
                                     double decode_threshold = 0.01, double iou_min = 0.5);

// AUC comparison -------------------------------------------------------------------

struct AucDelta {
    std::map<std::string, double> delta;  // new - old, brands present in both
    long increases = 0;
    long decreases = 0;
    long unchanged = 0;
    double mean_increase = 0.0;  // over strictly positive deltas
    double mean_decrease = 0.0;  // over strictly negative deltas (negative value)
    std::vector<std::string> only_in_new;
    std::vector<std::string> only_in_old;
};

AucDelta auc_delta(const std::map<std::string, double>& auc_new,
                   const std::map<std::string, double>& auc_old);

}  // namespace phishdetect
