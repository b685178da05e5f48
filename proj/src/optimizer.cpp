// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/optimizer.hpp"

#include <cmath>

namespace phishdetect {

void Optimizer::step(std::span<Tensor> params) {
    step(params, {});
}

void Optimizer::step(std::span<Tensor> params, const std::vector<bool>& trainable) {
    if (!trainable.empty() && trainable.size() != params.size()) {
        throw ShapeError("optimizer: trainable mask length does not match parameter count");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!trainable.empty() && !trainable[i]) {
            continue;
        }
        if (params[i].has_grad() && params[i].has_nonfinite_grad()) {
            throw DivergenceError("optimizer: non-finite gradient in parameter " +
                                  std::to_string(i) + "; step aborted");
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (!p.has_grad()) {
            continue;
        }
        if (!trainable.empty() && !trainable[i]) {
            p.zero_grad();  // frozen gradients are discarded
            continue;
        }
        auto g = p.grad();
        auto v = p.data_mut();
        const double lr = config_.learning_rate;

        switch (config_.kind) {
            case OptimizerKind::sgd: {
                for (std::size_t j = 0; j < v.size(); ++j) {
                    v[j] -= lr * g[j];
                }
                break;
            }
            case OptimizerKind::momentum: {
                Slot& slot = slots_[p.storage_id()];
                if (slot.velocity.size() != v.size()) {
                    slot.velocity.assign(v.size(), 0.0);
                }
                for (std::size_t j = 0; j < v.size(); ++j) {
                    slot.velocity[j] = config_.momentum * slot.velocity[j] + g[j];
                    v[j] -= lr * slot.velocity[j];
                }
                break;
            }
            case OptimizerKind::adam: {
                Slot& slot = slots_[p.storage_id()];
                if (slot.velocity.size() != v.size()) {
                    slot.velocity.assign(v.size(), 0.0);
                    slot.second.assign(v.size(), 0.0);
                }
                slot.step_count += 1;
                const double b1 = config_.beta1;
                const double b2 = config_.beta2;
                const double bc1 = 1.0 - std::pow(b1, static_cast<double>(slot.step_count));
                const double bc2 = 1.0 - std::pow(b2, static_cast<double>(slot.step_count));
                for (std::size_t j = 0; j < v.size(); ++j) {
                    slot.velocity[j] = b1 * slot.velocity[j] + (1.0 - b1) * g[j];
                    slot.second[j] = b2 * slot.second[j] + (1.0 - b2) * g[j] * g[j];
                    const double mhat = slot.velocity[j] / bc1;
                    const double vhat = slot.second[j] / bc2;
                    v[j] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
                }
                break;
            }
        }
    }
}

void Optimizer::zero_grad(std::span<Tensor> params) {
    for (auto& p : params) {
        p.zero_grad();
    }
}

}  // namespace phishdetect
