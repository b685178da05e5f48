// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/gradcheck.hpp"

#include <cmath>

namespace phishdetect {

GradCheckReport gradient_check(const ScalarFn& f, const Tensor& point, double step,
                               double tolerance) {
    if (step <= 0.0) {
        throw DataError("gradient_check: step must be positive");
    }

    Tensor x = point.clone();
    x.set_requires_grad(true);
    Tape tape;
    Tensor loss = f(tape, x);
    if (loss.size() != 1) {
        throw ShapeError("gradient_check: function must be scalar-valued");
    }
    std::vector<double> analytic(static_cast<std::size_t>(x.size()), 0.0);
    if (loss.requires_grad()) {
        tape.backward(loss);
        if (x.has_grad()) {
            auto g = x.grad();
            analytic.assign(g.begin(), g.end());
        }
    }

    auto eval_at = [&](const std::vector<double>& values) {
        Tensor probe = Tensor::from_data(point.shape(), values);
        Tape t(true);
        const double v = f(t, probe).item();
        if (!std::isfinite(v)) {
            throw DivergenceError("gradient_check: non-finite function value at perturbed point");
        }
        return v;
    };

    GradCheckReport report;
    report.coords.resize(static_cast<std::size_t>(x.size()));
    std::vector<double> values(point.data().begin(), point.data().end());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + step;
        const double up = eval_at(values);
        values[i] = saved - step;
        const double down = eval_at(values);
        values[i] = saved;

        GradCheckEntry& e = report.coords[i];
        e.analytic = analytic[i];
        e.numeric = (up - down) / (2.0 * step);
        const double denom = std::max(std::abs(e.analytic) + std::abs(e.numeric), 1e-8);
        e.rel_error = std::abs(e.analytic - e.numeric) / denom;
        if (e.rel_error >= report.max_rel_error) {
            report.max_rel_error = e.rel_error;
            report.worst_index = i;
        }
    }
    report.pass = report.max_rel_error < tolerance;
    return report;
}

}  // namespace phishdetect
