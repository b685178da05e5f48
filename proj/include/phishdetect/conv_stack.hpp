// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared convolutional backbone: a list of conv(ReLU) stages with optional
// max pooling, used by both the page-similarity and logo models.

#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "phishdetect/ops.hpp"
#include "phishdetect/tensor.hpp"

namespace phishdetect {

struct ConvStage {
    int filters = 8;
    int kernel = 3;
    int pool = 2;  // max-pool window after the conv; 1 disables
};

Tensor he_normal(Shape shape, Rng& rng);

nlohmann::json stages_to_json(std::span<const ConvStage> stages);
std::vector<ConvStage> stages_from_json(const nlohmann::json& arr);

struct ConvStack {
    std::vector<ConvStage> spec;
    std::vector<Tensor> kernels;
    std::vector<Tensor> biases;

    static ConvStack init(std::span<const ConvStage> spec, int in_channels, Rng& rng);

    // conv (same padding) -> ReLU -> optional max pool, per stage.
    Tensor forward(Tape& tape, const Tensor& input) const;

    std::vector<Tensor> params() const;
    int out_channels() const;

    ConvStack clone() const;
};

}  // namespace phishdetect
