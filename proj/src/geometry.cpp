// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace phishdetect {

BoundingBox BoundingBox::from_corners(double xmin, double ymin, double xmax, double ymax) {
    if (!(xmin < xmax) || !(ymin < ymax)) {
        throw DataError("bounding box corners must satisfy xmin < xmax and ymin < ymax");
    }
    return BoundingBox{(xmin + xmax) / 2.0, (ymin + ymax) / 2.0, xmax - xmin, ymax - ymin};
}

double iou(const BoundingBox& a, const BoundingBox& b) {
    if (!(a.w > 0.0 && a.h > 0.0 && b.w > 0.0 && b.h > 0.0) ||
        !std::isfinite(a.cx + a.cy + a.w + a.h + b.cx + b.cy + b.w + b.h)) {
        throw DataError("iou: boxes must have positive finite extent");
    }
    const double ix = std::max(0.0, std::min(a.xmax(), b.xmax()) - std::max(a.xmin(), b.xmin()));
    const double iy = std::max(0.0, std::min(a.ymax(), b.ymax()) - std::max(a.ymin(), b.ymin()));
    const double inter = ix * iy;
    if (inter <= 0.0) {
        return 0.0;
    }
    return inter / (a.area() + b.area() - inter);
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
        throw DataError("nms: iou threshold must lie in (0,1)");
    }
    std::stable_sort(detections.begin(), detections.end(),
                     [](const Detection& a, const Detection& b) { return a.prob > b.prob; });
    std::vector<Detection> kept;
    kept.reserve(detections.size());
    for (const Detection& cand : detections) {
        bool suppressed = false;
        for (const Detection& k : kept) {
            if (k.brand == cand.brand && iou(k.box, cand.box) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) {
            kept.push_back(cand);
        }
    }
    return kept;
}

}  // namespace phishdetect
