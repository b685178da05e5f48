// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Stochastic-gradient optimizer. Plain SGD by default; momentum and Adam
// behind configuration. Auxiliary buffers are keyed by parameter identity.

#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "phishdetect/tensor.hpp"

namespace phishdetect {

enum class OptimizerKind { sgd, momentum, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double learning_rate = 0.01;
    double momentum = 0.9;      // momentum variant
    double beta1 = 0.9;         // adam
    double beta2 = 0.999;       // adam
    double epsilon = 1e-8;      // adam
};

class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config) : config_(config) {}

    const OptimizerConfig& config() const { return config_; }

    // Applies one update to every parameter with a populated gradient.
    // Non-finite gradients abort the whole step before any parameter is
    // touched. An optional trainable mask (aligned with params) freezes
    // entries; frozen gradients are discarded.
    void step(std::span<Tensor> params);
    void step(std::span<Tensor> params, const std::vector<bool>& trainable);

    void zero_grad(std::span<Tensor> params);

private:
    struct Slot {
        std::vector<double> velocity;  // momentum / adam first moment
        std::vector<double> second;    // adam second moment
        long step_count = 0;
    };
    OptimizerConfig config_;
    std::unordered_map<const void*, Slot> slots_;
};

}  // namespace phishdetect
