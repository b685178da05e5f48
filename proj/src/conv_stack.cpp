// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/conv_stack.hpp"

#include <cmath>

namespace phishdetect {

Tensor he_normal(Shape shape, Rng& rng) {
    // fan_in of a {O,C,kh,kw} kernel is C*kh*kw.
    double fan_in = 1.0;
    for (std::size_t i = 1; i < shape.size(); ++i) {
        fan_in *= shape[i];
    }
    const double stddev = std::sqrt(2.0 / fan_in);
    std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : data) {
        v = rng.normal(0.0, stddev);
    }
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

nlohmann::json stages_to_json(std::span<const ConvStage> stages) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : stages) {
        arr.push_back({{"filters", s.filters}, {"kernel", s.kernel}, {"pool", s.pool}});
    }
    return arr;
}

std::vector<ConvStage> stages_from_json(const nlohmann::json& arr) {
    std::vector<ConvStage> out;
    for (const auto& s : arr) {
        out.push_back(
            {s.at("filters").get<int>(), s.at("kernel").get<int>(), s.at("pool").get<int>()});
    }
    return out;
}

ConvStack ConvStack::init(std::span<const ConvStage> spec, int in_channels, Rng& rng) {
    if (spec.empty()) {
        throw ConfigError("backbone needs at least one stage");
    }
    ConvStack stack;
    stack.spec.assign(spec.begin(), spec.end());
    int channels = in_channels;
    for (const auto& stage : spec) {
        stack.kernels.push_back(he_normal({stage.filters, channels, stage.kernel, stage.kernel},
                                          rng));
        stack.biases.push_back(Tensor::zeros({stage.filters}, true));
        channels = stage.filters;
    }
    return stack;
}

Tensor ConvStack::forward(Tape& tape, const Tensor& input) const {
    Tensor x = input;
    for (std::size_t i = 0; i < kernels.size(); ++i) {
        x = relu(tape, conv2d(tape, x, kernels[i], biases[i], 1, Padding::same));
        if (spec[i].pool > 1) {
            x = max_pool2d(tape, x, spec[i].pool);
        }
    }
    return x;
}

std::vector<Tensor> ConvStack::params() const {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < kernels.size(); ++i) {
        out.push_back(kernels[i]);
        out.push_back(biases[i]);
    }
    return out;
}

int ConvStack::out_channels() const {
    return spec.back().filters;
}

ConvStack ConvStack::clone() const {
    ConvStack out;
    out.spec = spec;
    for (const auto& k : kernels) out.kernels.push_back(k.clone());
    for (const auto& b : biases) out.biases.push_back(b.clone());
    return out;
}

}  // namespace phishdetect
