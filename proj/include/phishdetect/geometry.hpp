// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Box geometry shared by the logo detector and its evaluation: IOU and
// greedy per-brand non-maximum suppression.

#pragma once

#include <string>
#include <vector>

#include "phishdetect/common.hpp"

namespace phishdetect {

// Axis-aligned box in normalized center form (all fields relative to the
// image, in [0,1] for in-frame boxes).
struct BoundingBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    double xmin() const { return cx - w / 2.0; }
    double xmax() const { return cx + w / 2.0; }
    double ymin() const { return cy - h / 2.0; }
    double ymax() const { return cy + h / 2.0; }
    double area() const { return w * h; }

    static BoundingBox from_corners(double xmin, double ymin, double xmax, double ymax);
};

struct Detection {
    BoundingBox box;
    std::string brand;
    double prob = 0.0;  // objectness x class probability
};

// Intersection over union; 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

// Greedy per-brand suppression: repeatedly keep the highest-probability
// detection and drop same-brand detections whose IOU with a kept box
// exceeds the threshold. Output sorted by probability descending; ties keep
// input order.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

}  // namespace phishdetect
