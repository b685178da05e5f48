// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-shot logo detector: a small backbone feeding one grid/anchor
// prediction head, with decoding, transfer-learning head surgery, and a
// two-phase freeze schedule.

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "phishdetect/conv_stack.hpp"
#include "phishdetect/geometry.hpp"
#include "phishdetect/image.hpp"
#include "phishdetect/tensor.hpp"

namespace phishdetect {

struct GridSpec {
    int cells = 4;    // S
    int anchors = 2;  // A
    std::vector<std::array<double, 2>> priors = {{0.15, 0.15}, {0.4, 0.2}};  // (w,h) normalized
    int classes = 0;  // C

    int channels() const { return anchors * (5 + classes); }
    void validate() const;
};

struct LogoConfig {
    int input_size = 64;
    std::vector<ConvStage> backbone = {{8, 3, 2}, {16, 3, 2}, {32, 3, 4}};  // 64 -> 4
    GridSpec grid;
    std::vector<std::string> brands;

    double learning_rate = 0.001;
    int batch_size = 8;
    double nms_iou_threshold = 0.45;
};

// One annotated ground-truth instance in model terms.
struct LogoTarget {
    int cls = 0;
    BoundingBox box;  // normalized center form
};

struct LogoSample {
    std::string id;
    ImageTensor image;
    std::vector<LogoTarget> targets;
};

class LogoModel {
public:
    LogoConfig config;
    ConvStack backbone;
    Tensor head_weight;  // {A*(5+C), backbone_channels, 1, 1}
    Tensor head_bias;    // {A*(5+C)}

    static LogoModel init(const LogoConfig& config, std::uint64_t seed);

    // Deep copy; training works on a clone so the input stays frozen.
    LogoModel clone() const;

    std::vector<Tensor> backbone_params() const { return backbone.params(); }
    std::vector<Tensor> head_params() const { return {head_weight, head_bias}; }
    std::vector<Tensor> params() const;

    // Head output in conv layout {A*(5+C), S, S} (training path).
    Tensor predict_conv(Tape& tape, const Tensor& image) const;

    // Canonical raw prediction tensor {S,S,A,5+C}; no gradients.
    Tensor raw_predict(const ImageTensor& image) const;

    std::vector<Detection> detect(const ImageTensor& image, double conf_threshold) const;

    void save(const std::filesystem::path& path) const;
    static LogoModel load(const std::filesystem::path& path);
};

// Decode per cell/anchor: center = (cell offset + sigmoid(tx,ty)) / S, size
// = prior * exp(tw,th), prob = sigmoid(to) * max softmax class. Detections
// with prob >= conf_threshold are emitted with the argmax class label.
std::vector<Detection> decode_predictions(const Tensor& raw, const GridSpec& grid,
                                          double conf_threshold,
                                          std::span<const std::string> brands);

// Composite single-shot loss over one image's head output: localization
// squared error on matched anchors, objectness cross-entropy over all
// anchors, class cross-entropy on matched anchors; weights 5/1/1.
struct LossWeights {
    double localization = 5.0;
    double objectness = 1.0;
    double classification = 1.0;
};

Tensor ssd_loss(Tape& tape, const Tensor& conv_out, const GridSpec& grid,
                std::span<const LogoTarget> targets, const LossWeights& weights = {});

// Rebuilds the prediction head for a larger brand list: per anchor, the
// existing box/objectness/class channels are copied bit for bit, new class
// slots are freshly initialized (He-normal, or zero), and every other layer
// is left bit-identical.
enum class NewSlotInit { he_normal, zero };

LogoModel head_surgery(const LogoModel& model, std::span<const std::string> new_brands,
                       std::uint64_t seed, NewSlotInit init = NewSlotInit::he_normal);

// Two-phase transfer learning mask over params() order.
enum class FreezePhase { frozen_backbone, full };

std::vector<bool> freeze_schedule(const LogoModel& model, FreezePhase phase);

struct TrainPhase {
    FreezePhase phase = FreezePhase::full;
    int steps = 0;
};

struct StepLog {
    int phase_index = 0;
    int step = 0;
    double loss = 0.0;
};

LogoModel train_logo(LogoModel model, std::span<const LogoSample> samples,
                     std::span<const TrainPhase> schedule, std::uint64_t seed,
                     std::vector<StepLog>* log = nullptr);

}  // namespace phishdetect
