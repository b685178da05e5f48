// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference gradient checker; the verification substrate
// for every differentiable operation.

#pragma once

#include <functional>
#include <vector>

#include "phishdetect/tensor.hpp"

namespace phishdetect {

struct GradCheckEntry {
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    bool pass = false;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::vector<GradCheckEntry> coords;
};

// f builds a scalar loss on the given tape from the (requires_grad) point.
// Analytic gradients come from one backward pass; numeric ones from central
// differences per coordinate. rel_error = |a-n| / max(|a|+|n|, 1e-8).
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

GradCheckReport gradient_check(const ScalarFn& f, const Tensor& point, double step = 1e-3,
                               double tolerance = 1e-4);

}  // namespace phishdetect
