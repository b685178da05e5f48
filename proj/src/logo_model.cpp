// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/logo_model.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "phishdetect/ops.hpp"
#include "phishdetect/optimizer.hpp"
#include "phishdetect/weights.hpp"

namespace phishdetect {

using nlohmann::json;

void GridSpec::validate() const {
    if (cells < 1 || anchors < 1 || classes < 1) {
        throw ConfigError("grid spec needs positive cells, anchors and classes");
    }
    if (static_cast<int>(priors.size()) != anchors) {
        throw ConfigError("grid spec needs one (w,h) prior per anchor");
    }
    for (const auto& p : priors) {
        if (!(p[0] > 0.0 && p[1] > 0.0)) {
            throw ConfigError("anchor priors must be positive");
        }
    }
}

LogoModel LogoModel::init(const LogoConfig& config, std::uint64_t seed) {
    if (config.grid.classes != static_cast<int>(config.brands.size())) {
        throw ConfigError("logo model brand list must match grid class count");
    }
    config.grid.validate();
    Rng rng(seed);
    LogoModel m;
    m.config = config;
    m.backbone = ConvStack::init(config.backbone, 3, rng);
    m.head_weight = he_normal({config.grid.channels(), m.backbone.out_channels(), 1, 1}, rng);
    m.head_bias = Tensor::zeros({config.grid.channels()}, true);
    return m;
}

LogoModel LogoModel::clone() const {
    LogoModel m;
    m.config = config;
    m.backbone = backbone.clone();
    m.head_weight = head_weight.clone();
    m.head_bias = head_bias.clone();
    return m;
}

std::vector<Tensor> LogoModel::params() const {
    std::vector<Tensor> out = backbone.params();
    out.push_back(head_weight);
    out.push_back(head_bias);
    return out;
}

Tensor LogoModel::predict_conv(Tape& tape, const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != config.input_size ||
        image.dim(2) != config.input_size) {
        throw ShapeError("predict: expected {3," + std::to_string(config.input_size) + "," +
                         std::to_string(config.input_size) + "} input, got " +
                         shape_str(image.shape()));
    }
    Tensor features = backbone.forward(tape, image);
    Tensor out = conv2d(tape, features, head_weight, head_bias, 1, Padding::valid);
    if (out.dim(1) != config.grid.cells || out.dim(2) != config.grid.cells) {
        throw ShapeError("backbone produced a " + std::to_string(out.dim(1)) + "x" +
                         std::to_string(out.dim(2)) + " grid, spec expects " +
                         std::to_string(config.grid.cells));
    }
    return out;
}

Tensor LogoModel::raw_predict(const ImageTensor& image) const {
    Tape tape(false);
    const Tensor conv = predict_conv(tape, image.to_tensor());
    const GridSpec& g = config.grid;
    const int s = g.cells;
    const int per_anchor = 5 + g.classes;

    // Conv layout {A*(5+C), S, S} -> canonical {S, S, A, 5+C}.
    std::vector<double> raw(static_cast<std::size_t>(s) * s * g.anchors * per_anchor);
    auto cv = conv.data();
    for (int cy = 0; cy < s; ++cy) {
        for (int cx = 0; cx < s; ++cx) {
            for (int a = 0; a < g.anchors; ++a) {
                for (int j = 0; j < per_anchor; ++j) {
                    const std::size_t src =
                        (static_cast<std::size_t>(a * per_anchor + j) * s + cy) * s + cx;
                    const std::size_t dst =
                        ((static_cast<std::size_t>(cy) * s + cx) * g.anchors + a) * per_anchor +
                        j;
                    raw[dst] = cv[src];
                }
            }
        }
    }
    return Tensor::from_data({s, s, g.anchors, per_anchor}, std::move(raw));
}

std::vector<Detection> LogoModel::detect(const ImageTensor& image, double conf_threshold) const {
    const Tensor raw = raw_predict(image);
    return nms(decode_predictions(raw, config.grid, conf_threshold, config.brands),
               config.nms_iou_threshold);
}

std::vector<Detection> decode_predictions(const Tensor& raw, const GridSpec& grid,
                                          double conf_threshold,
                                          std::span<const std::string> brands) {
    grid.validate();
    const int s = grid.cells;
    const int per_anchor = 5 + grid.classes;
    const Shape expected = {s, s, grid.anchors, per_anchor};
    if (raw.shape() != expected) {
        throw ShapeError("decode: raw tensor is " + shape_str(raw.shape()) + ", grid expects " +
                         shape_str(expected));
    }
    if (static_cast<int>(brands.size()) != grid.classes) {
        throw ShapeError("decode: brand list does not match grid class count");
    }
    if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
        throw DataError("decode: confidence threshold must lie in [0,1]");
    }

    std::vector<Detection> out;
    auto rv = raw.data();
    std::vector<double> cls(static_cast<std::size_t>(grid.classes));
    for (int cy = 0; cy < s; ++cy) {
        for (int cx = 0; cx < s; ++cx) {
            for (int a = 0; a < grid.anchors; ++a) {
                const std::size_t base =
                    ((static_cast<std::size_t>(cy) * s + cx) * grid.anchors + a) * per_anchor;
                const double tx = rv[base + 0];
                const double ty = rv[base + 1];
                const double tw = rv[base + 2];
                const double th = rv[base + 3];
                const double objectness = sigmoid_value(rv[base + 4]);
                for (int k = 0; k < grid.classes; ++k) {
                    cls[static_cast<std::size_t>(k)] = rv[base + 5 + static_cast<std::size_t>(k)];
                }
                softmax_inplace(cls);
                int best = 0;
                for (int k = 1; k < grid.classes; ++k) {
                    if (cls[static_cast<std::size_t>(k)] > cls[static_cast<std::size_t>(best)]) {
                        best = k;
                    }
                }
                const double prob = objectness * cls[static_cast<std::size_t>(best)];
                if (prob < conf_threshold) {
                    continue;
                }
                Detection det;
                det.box.cx = (cx + sigmoid_value(tx)) / s;
                det.box.cy = (cy + sigmoid_value(ty)) / s;
                det.box.w = grid.priors[static_cast<std::size_t>(a)][0] * std::exp(tw);
                det.box.h = grid.priors[static_cast<std::size_t>(a)][1] * std::exp(th);
                det.brand = brands[static_cast<std::size_t>(best)];
                det.prob = prob;
                out.push_back(std::move(det));
            }
        }
    }
    return out;
}

namespace {

// Overlap of two boxes sharing a center; used for prior matching.
double centered_iou(double w1, double h1, double w2, double h2) {
    const double inter = std::min(w1, w2) * std::min(h1, h2);
    return inter / (w1 * h1 + w2 * h2 - inter);
}

struct AnchorAssignment {
    int cell_y = 0, cell_x = 0, anchor = 0;
    int cls = 0;
    double offset_x = 0.0, offset_y = 0.0;  // sigmoid targets in [0,1)
    double tw = 0.0, th = 0.0;              // log-size targets
};

}  // namespace

Tensor ssd_loss(Tape& tape, const Tensor& conv_out, const GridSpec& grid,
                std::span<const LogoTarget> targets, const LossWeights& weights) {
    grid.validate();
    const int s = grid.cells;
    const int per_anchor = 5 + grid.classes;
    const Shape expected = {grid.channels(), s, s};
    if (conv_out.shape() != expected) {
        throw ShapeError("ssd_loss: head output is " + shape_str(conv_out.shape()) +
                         ", grid expects " + shape_str(expected));
    }

    // Assign each target to the cell holding its center and the prior with
    // the best centered IOU; later duplicates for one slot are dropped.
    std::vector<AnchorAssignment> assigns;
    std::vector<signed char> taken(static_cast<std::size_t>(s) * s * grid.anchors, 0);
    for (const auto& t : targets) {
        if (t.cls < 0 || t.cls >= grid.classes) {
            throw DataError("ssd_loss: class index out of range");
        }
        if (!(t.box.w > 0.0 && t.box.h > 0.0)) {
            throw DataError("ssd_loss: target box must have positive extent");
        }
        AnchorAssignment a;
        a.cls = t.cls;
        a.cell_x = std::clamp(static_cast<int>(t.box.cx * s), 0, s - 1);
        a.cell_y = std::clamp(static_cast<int>(t.box.cy * s), 0, s - 1);
        int best = 0;
        double best_iou = -1.0;
        for (int k = 0; k < grid.anchors; ++k) {
            const double v = centered_iou(grid.priors[static_cast<std::size_t>(k)][0],
                                          grid.priors[static_cast<std::size_t>(k)][1], t.box.w,
                                          t.box.h);
            if (v > best_iou) {
                best_iou = v;
                best = k;
            }
        }
        a.anchor = best;
        const std::size_t slot =
            (static_cast<std::size_t>(a.cell_y) * s + a.cell_x) * grid.anchors + a.anchor;
        if (taken[slot]) {
            continue;
        }
        taken[slot] = 1;
        a.offset_x = t.box.cx * s - a.cell_x;
        a.offset_y = t.box.cy * s - a.cell_y;
        a.tw = std::log(t.box.w / grid.priors[static_cast<std::size_t>(a.anchor)][0]);
        a.th = std::log(t.box.h / grid.priors[static_cast<std::size_t>(a.anchor)][1]);
        assigns.push_back(a);
    }

    auto cv = conv_out.data();
    auto value_at = [&](int a, int j, int cy, int cx) {
        return cv[(static_cast<std::size_t>(a * per_anchor + j) * s + cy) * s + cx];
    };

    // Forward value; gradients are written by the closure below.
    double loss = 0.0;
    std::vector<double> cls_prob(static_cast<std::size_t>(grid.classes));
    for (int cy = 0; cy < s; ++cy) {
        for (int cx = 0; cx < s; ++cx) {
            for (int a = 0; a < grid.anchors; ++a) {
                const double to = value_at(a, 4, cy, cx);
                const double obj_target =
                    taken[(static_cast<std::size_t>(cy) * s + cx) * grid.anchors + a] ? 1.0 : 0.0;
                loss += weights.objectness * (std::max(to, 0.0) - to * obj_target +
                                              std::log1p(std::exp(-std::abs(to))));
            }
        }
    }
    for (const auto& a : assigns) {
        const double sx = sigmoid_value(value_at(a.anchor, 0, a.cell_y, a.cell_x));
        const double sy = sigmoid_value(value_at(a.anchor, 1, a.cell_y, a.cell_x));
        const double tw = value_at(a.anchor, 2, a.cell_y, a.cell_x);
        const double th = value_at(a.anchor, 3, a.cell_y, a.cell_x);
        loss += weights.localization *
                ((sx - a.offset_x) * (sx - a.offset_x) + (sy - a.offset_y) * (sy - a.offset_y) +
                 (tw - a.tw) * (tw - a.tw) + (th - a.th) * (th - a.th));

        for (int k = 0; k < grid.classes; ++k) {
            cls_prob[static_cast<std::size_t>(k)] = value_at(a.anchor, 5 + k, a.cell_y, a.cell_x);
        }
        const double max_logit = *std::max_element(cls_prob.begin(), cls_prob.end());
        double lse = 0.0;
        for (double v : cls_prob) {
            lse += std::exp(v - max_logit);
        }
        lse = max_logit + std::log(lse);
        loss += weights.classification *
                (lse - cls_prob[static_cast<std::size_t>(a.cls)]);
    }

    Tensor result = Tensor::from_data({1}, {loss});
    result.set_requires_grad(tape.enabled() && conv_out.requires_grad());
    if (result.requires_grad()) {
        auto assigns_ptr = std::make_shared<std::vector<AnchorAssignment>>(assigns);
        auto taken_ptr = std::make_shared<std::vector<signed char>>(std::move(taken));
        tape.record("ssd_loss", {conv_out}, result,
                    [conv_out, result, grid, weights, assigns_ptr, taken_ptr]() mutable {
            const int s = grid.cells;
            const int per_anchor = 5 + grid.classes;
            const double g = result.grad()[0];
            auto cv = conv_out.data();
            std::vector<double> gin(cv.size(), 0.0);
            auto idx = [&](int a, int j, int cy, int cx) {
                return (static_cast<std::size_t>(a * per_anchor + j) * s + cy) * s + cx;
            };

            for (int cy = 0; cy < s; ++cy) {
                for (int cx = 0; cx < s; ++cx) {
                    for (int a = 0; a < grid.anchors; ++a) {
                        const std::size_t i = idx(a, 4, cy, cx);
                        const double target =
                            (*taken_ptr)[(static_cast<std::size_t>(cy) * s + cx) * grid.anchors +
                                         a]
                                ? 1.0
                                : 0.0;
                        gin[i] += g * weights.objectness * (sigmoid_value(cv[i]) - target);
                    }
                }
            }
            std::vector<double> cls(static_cast<std::size_t>(grid.classes));
            for (const auto& a : *assigns_ptr) {
                const std::size_t ix = idx(a.anchor, 0, a.cell_y, a.cell_x);
                const std::size_t iy = idx(a.anchor, 1, a.cell_y, a.cell_x);
                const std::size_t iw = idx(a.anchor, 2, a.cell_y, a.cell_x);
                const std::size_t ih = idx(a.anchor, 3, a.cell_y, a.cell_x);
                const double sx = sigmoid_value(cv[ix]);
                const double sy = sigmoid_value(cv[iy]);
                gin[ix] += g * weights.localization * 2.0 * (sx - a.offset_x) * sx * (1.0 - sx);
                gin[iy] += g * weights.localization * 2.0 * (sy - a.offset_y) * sy * (1.0 - sy);
                gin[iw] += g * weights.localization * 2.0 * (cv[iw] - a.tw);
                gin[ih] += g * weights.localization * 2.0 * (cv[ih] - a.th);

                for (int k = 0; k < grid.classes; ++k) {
                    cls[static_cast<std::size_t>(k)] = cv[idx(a.anchor, 5 + k, a.cell_y,
                                                              a.cell_x)];
                }
                softmax_inplace(cls);
                for (int k = 0; k < grid.classes; ++k) {
                    const double target = k == a.cls ? 1.0 : 0.0;
                    gin[idx(a.anchor, 5 + k, a.cell_y, a.cell_x)] +=
                        g * weights.classification * (cls[static_cast<std::size_t>(k)] - target);
                }
            }
            conv_out.accumulate_grad(gin);
        });
    }
    return result;
}

LogoModel head_surgery(const LogoModel& model, std::span<const std::string> new_brands,
                       std::uint64_t seed, NewSlotInit init) {
    const int old_classes = model.config.grid.classes;
    const int new_classes = static_cast<int>(new_brands.size());
    if (new_classes < old_classes) {
        throw DataError("head_surgery: shrinking the brand count is unsupported");
    }
    for (int i = 0; i < old_classes; ++i) {
        if (model.config.brands[static_cast<std::size_t>(i)] !=
            new_brands[static_cast<std::size_t>(i)]) {
            throw DataError("head_surgery: new brand list must extend the existing one");
        }
    }

    LogoModel out;
    out.config = model.config;
    out.config.brands.assign(new_brands.begin(), new_brands.end());
    out.config.grid.classes = new_classes;
    out.backbone = model.backbone.clone();

    if (new_classes == old_classes) {
        out.head_weight = model.head_weight.clone();
        out.head_bias = model.head_bias.clone();
        return out;
    }

    const int in_c = model.backbone.out_channels();
    const int anchors = model.config.grid.anchors;
    const int old_pa = 5 + old_classes;
    const int new_pa = 5 + new_classes;

    Rng rng(seed);
    Tensor w = init == NewSlotInit::he_normal
                   ? he_normal({anchors * new_pa, in_c, 1, 1}, rng)
                   : Tensor::zeros({anchors * new_pa, in_c, 1, 1}, true);
    Tensor b = Tensor::zeros({anchors * new_pa}, true);

    auto old_w = model.head_weight.data();
    auto old_b = model.head_bias.data();
    auto new_w = w.data_mut();
    auto new_b = b.data_mut();
    for (int a = 0; a < anchors; ++a) {
        for (int j = 0; j < old_pa; ++j) {
            const std::size_t src_row = static_cast<std::size_t>(a * old_pa + j);
            const std::size_t dst_row = static_cast<std::size_t>(a * new_pa + j);
            std::copy(old_w.begin() + static_cast<long>(src_row) * in_c,
                      old_w.begin() + static_cast<long>(src_row + 1) * in_c,
                      new_w.begin() + static_cast<long>(dst_row) * in_c);
            new_b[dst_row] = old_b[src_row];
        }
    }
    out.head_weight = w;
    out.head_bias = b;
    return out;
}

std::vector<bool> freeze_schedule(const LogoModel& model, FreezePhase phase) {
    const std::size_t backbone_count = model.backbone_params().size();
    const std::size_t total = backbone_count + model.head_params().size();
    std::vector<bool> trainable(total, true);
    if (phase == FreezePhase::frozen_backbone) {
        for (std::size_t i = 0; i < backbone_count; ++i) {
            trainable[i] = false;
        }
    }
    return trainable;
}

LogoModel train_logo(LogoModel model, std::span<const LogoSample> samples,
                     std::span<const TrainPhase> schedule, std::uint64_t seed,
                     std::vector<StepLog>* log) {
    if (samples.empty()) {
        throw DataError("train_logo: empty corpus");
    }
    model = model.clone();  // keep the caller's parameters frozen
    Rng rng(seed);
    OptimizerConfig opt_cfg;
    opt_cfg.kind = OptimizerKind::adam;
    opt_cfg.learning_rate = model.config.learning_rate;
    Optimizer optimizer(opt_cfg);
    std::vector<Tensor> params = model.params();

    std::vector<Tensor> images;
    images.reserve(samples.size());
    for (const auto& smp : samples) {
        images.push_back(smp.image.to_tensor());
    }

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // trigger reshuffle on first use

    for (std::size_t phase_idx = 0; phase_idx < schedule.size(); ++phase_idx) {
        const TrainPhase& phase = schedule[phase_idx];
        const std::vector<bool> trainable = freeze_schedule(model, phase.phase);
        for (int step = 1; step <= phase.steps; ++step) {
            Tape tape;
            std::vector<Tensor> losses;
            for (int b = 0; b < model.config.batch_size; ++b) {
                if (cursor == order.size()) {
                    rng.shuffle(order);
                    cursor = 0;
                }
                const std::size_t i = order[cursor++];
                Tensor conv = model.predict_conv(tape, images[i]);
                losses.push_back(ssd_loss(tape, conv, model.config.grid, samples[i].targets));
            }
            Tensor batch_loss = mean_of(tape, losses);
            const double loss_value = batch_loss.item();
            if (!std::isfinite(loss_value)) {
                throw DivergenceError("train_logo: non-finite loss in phase " +
                                      std::to_string(phase_idx) + " step " +
                                      std::to_string(step));
            }
            optimizer.zero_grad(params);
            tape.backward(batch_loss);
            optimizer.step(params, trainable);
            if (log) {
                log->push_back({static_cast<int>(phase_idx), step, loss_value});
            }
        }
    }
    return model;
}

void LogoModel::save(const std::filesystem::path& path) const {
    json cfg;
    cfg["input_size"] = config.input_size;
    cfg["backbone"] = stages_to_json(config.backbone);
    cfg["cells"] = config.grid.cells;
    cfg["anchors"] = config.grid.anchors;
    json priors = json::array();
    for (const auto& p : config.grid.priors) {
        priors.push_back({p[0], p[1]});
    }
    cfg["priors"] = priors;
    cfg["brands"] = config.brands;
    cfg["learning_rate"] = config.learning_rate;
    cfg["batch_size"] = config.batch_size;
    cfg["nms_iou_threshold"] = config.nms_iou_threshold;

    std::vector<NamedTensor> params;
    for (std::size_t i = 0; i < backbone.kernels.size(); ++i) {
        params.push_back({"stage" + std::to_string(i) + "_w", backbone.kernels[i]});
        params.push_back({"stage" + std::to_string(i) + "_b", backbone.biases[i]});
    }
    params.push_back({"head_w", head_weight});
    params.push_back({"head_b", head_bias});
    save_weights(path, "logo-detect", cfg.dump(), params);
}

LogoModel LogoModel::load(const std::filesystem::path& path) {
    const WeightArchive archive = load_weights(path);
    if (archive.kind != "logo-detect") {
        throw DataError("archive " + path.string() + " holds a '" + archive.kind +
                        "' model, expected 'logo-detect'");
    }
    json cfg;
    try {
        cfg = json::parse(archive.config_json);
    } catch (const json::exception& e) {
        throw DataError("bad config block in " + path.string() + ": " + e.what());
    }

    LogoModel m;
    m.config.input_size = cfg.at("input_size").get<int>();
    m.config.backbone = stages_from_json(cfg.at("backbone"));
    m.config.grid.cells = cfg.at("cells").get<int>();
    m.config.grid.anchors = cfg.at("anchors").get<int>();
    m.config.grid.priors.clear();
    for (const auto& p : cfg.at("priors")) {
        m.config.grid.priors.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    m.config.brands = cfg.at("brands").get<std::vector<std::string>>();
    m.config.grid.classes = static_cast<int>(m.config.brands.size());
    m.config.learning_rate = cfg.at("learning_rate").get<double>();
    m.config.batch_size = cfg.at("batch_size").get<int>();
    m.config.nms_iou_threshold = cfg.at("nms_iou_threshold").get<double>();

    int channels = 3;
    m.backbone.spec = m.config.backbone;
    for (std::size_t i = 0; i < m.config.backbone.size(); ++i) {
        const auto& stage = m.config.backbone[i];
        Tensor k = require_param(archive, "stage" + std::to_string(i) + "_w",
                                 {stage.filters, channels, stage.kernel, stage.kernel});
        Tensor b = require_param(archive, "stage" + std::to_string(i) + "_b", {stage.filters});
        k.set_requires_grad(true);
        b.set_requires_grad(true);
        m.backbone.kernels.push_back(k);
        m.backbone.biases.push_back(b);
        channels = stage.filters;
    }
    m.head_weight =
        require_param(archive, "head_w", {m.config.grid.channels(), channels, 1, 1});
    m.head_bias = require_param(archive, "head_b", {m.config.grid.channels()});
    m.head_weight.set_requires_grad(true);
    m.head_bias.set_requires_grad(true);
    return m;
}

}  // namespace phishdetect
