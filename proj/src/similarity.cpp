// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"
#include "phishdetect/ops.hpp"
#include "phishdetect/optimizer.hpp"
#include "phishdetect/weights.hpp"

namespace phishdetect {

using nlohmann::json;

SimilarityModel SimilarityModel::init(const SimilarityConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    SimilarityModel m;
    m.config = config;
    m.backbone = ConvStack::init(config.backbone, 3, rng);
    m.head_weight = he_normal(
        {config.head_filters, m.backbone.out_channels(), config.head_kernel, config.head_kernel},
        rng);
    m.head_bias = Tensor::zeros({config.head_filters}, true);
    return m;
}

SimilarityModel SimilarityModel::clone() const {
    SimilarityModel m;
    m.config = config;
    m.backbone = backbone.clone();
    m.head_weight = head_weight.clone();
    m.head_bias = head_bias.clone();
    return m;
}

std::vector<Tensor> SimilarityModel::params() {
    std::vector<Tensor> out = backbone.params();
    out.push_back(head_weight);
    out.push_back(head_bias);
    return out;
}

Tensor SimilarityModel::embed(Tape& tape, const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != config.input_size ||
        image.dim(2) != config.input_size) {
        throw ShapeError("embed: expected {3," + std::to_string(config.input_size) + "," +
                         std::to_string(config.input_size) + "} input, got " +
                         shape_str(image.shape()));
    }
    Tensor x = backbone.forward(tape, image);
    x = relu(tape, conv2d(tape, x, head_weight, head_bias, 1, Padding::valid));
    return global_max_pool(tape, x);
}

std::vector<double> SimilarityModel::embed(const ImageTensor& image) const {
    Tape tape(false);
    const Tensor e = embed(tape, image.to_tensor());
    return std::vector<double>(e.data().begin(), e.data().end());
}

void SimilarityModel::save(const std::filesystem::path& path) const {
    json cfg;
    cfg["input_size"] = config.input_size;
    cfg["backbone"] = stages_to_json(config.backbone);
    cfg["head_filters"] = config.head_filters;
    cfg["head_kernel"] = config.head_kernel;
    cfg["margin"] = config.margin;
    cfg["distance_threshold"] = config.distance_threshold;
    cfg["learning_rate"] = config.learning_rate;
    cfg["batch_size"] = config.batch_size;

    std::vector<NamedTensor> params;
    for (std::size_t i = 0; i < backbone.kernels.size(); ++i) {
        params.push_back({"stage" + std::to_string(i) + "_w", backbone.kernels[i]});
        params.push_back({"stage" + std::to_string(i) + "_b", backbone.biases[i]});
    }
    params.push_back({"head_w", head_weight});
    params.push_back({"head_b", head_bias});
    save_weights(path, "visual-similarity", cfg.dump(), params);
}

SimilarityModel SimilarityModel::load(const std::filesystem::path& path) {
    const WeightArchive archive = load_weights(path);
    if (archive.kind != "visual-similarity") {
        throw DataError("archive " + path.string() + " holds a '" + archive.kind +
                        "' model, expected 'visual-similarity'");
    }
    json cfg;
    try {
        cfg = json::parse(archive.config_json);
    } catch (const json::exception& e) {
        throw DataError("bad config block in " + path.string() + ": " + e.what());
    }

    SimilarityModel m;
    m.config.input_size = cfg.at("input_size").get<int>();
    m.config.backbone = stages_from_json(cfg.at("backbone"));
    m.config.head_filters = cfg.at("head_filters").get<int>();
    m.config.head_kernel = cfg.at("head_kernel").get<int>();
    m.config.margin = cfg.at("margin").get<double>();
    m.config.distance_threshold = cfg.at("distance_threshold").get<double>();
    m.config.learning_rate = cfg.at("learning_rate").get<double>();
    m.config.batch_size = cfg.at("batch_size").get<int>();

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
    m.head_weight = require_param(
        archive, "head_w",
        {m.config.head_filters, channels, m.config.head_kernel, m.config.head_kernel});
    m.head_bias = require_param(archive, "head_b", {m.config.head_filters});
    m.head_weight.set_requires_grad(true);
    m.head_bias.set_requires_grad(true);
    return m;
}

void BrandGallery::add(std::string page_id, std::string brand, std::vector<double> embedding) {
    if (embedding.empty()) {
        throw DataError("gallery embedding must be non-empty");
    }
    if (!entries_.empty() && entries_.front().embedding.size() != embedding.size()) {
        throw DataError("gallery embeddings must share one length");
    }
    for (const auto& e : entries_) {
        if (e.page_id == page_id) {
            throw DataError("duplicate gallery page id '" + page_id + "'");
        }
    }
    entries_.push_back({std::move(page_id), std::move(brand), std::move(embedding)});
}

bool BrandGallery::has_brand(const std::string& brand) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const GalleryEntry& e) { return e.brand == brand; });
}

int BrandGallery::embedding_dim() const {
    return entries_.empty() ? 0 : static_cast<int>(entries_.front().embedding.size());
}

void BrandGallery::save(const std::filesystem::path& path) const {
    if (entries_.empty()) {
        throw DataError("cannot save an empty gallery");
    }
    json cfg;
    json pages = json::array();
    for (const auto& e : entries_) {
        pages.push_back({{"id", e.page_id}, {"brand", e.brand}});
    }
    cfg["pages"] = pages;
    cfg["embedding_dim"] = embedding_dim();
    cfg["theta_reference"] = theta_reference;
    if (theta_calibrated) {
        cfg["theta_calibrated"] = *theta_calibrated;
    }

    const int n = static_cast<int>(entries_.size());
    const int d = embedding_dim();
    std::vector<double> matrix;
    matrix.reserve(static_cast<std::size_t>(n) * d);
    for (const auto& e : entries_) {
        matrix.insert(matrix.end(), e.embedding.begin(), e.embedding.end());
    }
    const NamedTensor params[] = {{"embeddings", Tensor::from_data({n, d}, std::move(matrix))}};
    save_weights(path, "brand-gallery", cfg.dump(), params);
}

BrandGallery BrandGallery::load(const std::filesystem::path& path) {
    const WeightArchive archive = load_weights(path);
    if (archive.kind != "brand-gallery") {
        throw DataError("archive " + path.string() + " holds a '" + archive.kind +
                        "', expected 'brand-gallery'");
    }
    const json cfg = json::parse(archive.config_json);
    const int d = cfg.at("embedding_dim").get<int>();
    const auto& pages = cfg.at("pages");
    const Tensor matrix =
        require_param(archive, "embeddings", {static_cast<int>(pages.size()), d});

    BrandGallery g;
    g.theta_reference = cfg.at("theta_reference").get<double>();
    if (cfg.contains("theta_calibrated")) {
        g.theta_calibrated = cfg.at("theta_calibrated").get<double>();
    }
    auto data = matrix.data();
    for (std::size_t i = 0; i < pages.size(); ++i) {
        std::vector<double> emb(data.begin() + static_cast<long>(i) * d,
                                data.begin() + static_cast<long>(i + 1) * d);
        g.add(pages[i].at("id").get<std::string>(), pages[i].at("brand").get<std::string>(),
              std::move(emb));
    }
    return g;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("l2_distance: length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

Tensor triplet_loss(Tape& tape, const Tensor& anchor, const Tensor& positive,
                    const Tensor& negative, double margin) {
    if (anchor.shape() != positive.shape() || anchor.shape() != negative.shape()) {
        throw ShapeError("triplet_loss: embedding lengths disagree");
    }
    if (!(margin > 0.0)) {
        throw DataError("triplet_loss: margin must be positive");
    }
    Tensor dp = sub(tape, anchor, positive);
    Tensor dn = sub(tape, anchor, negative);
    Tensor d_ap = sum(tape, mul(tape, dp, dp));
    Tensor d_an = sum(tape, mul(tape, dn, dn));
    return relu(tape, add_scalar(tape, sub(tape, d_ap, d_an), margin));
}

double triplet_loss_value(std::span<const double> anchor, std::span<const double> positive,
                          std::span<const double> negative, double margin) {
    double d_ap = 0.0;
    double d_an = 0.0;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        d_ap += (anchor[i] - positive[i]) * (anchor[i] - positive[i]);
        d_an += (anchor[i] - negative[i]) * (anchor[i] - negative[i]);
    }
    return std::max(0.0, d_ap - d_an + margin);
}

std::vector<MatchResult> rank_gallery(std::span<const double> embedding,
                                      const BrandGallery& gallery, int k) {
    if (gallery.size() == 0) {
        throw DataError("rank_gallery: empty gallery");
    }
    if (k < 1) {
        throw DataError("rank_gallery: k must be >= 1");
    }
    std::vector<MatchResult> all;
    all.reserve(gallery.size());
    for (const auto& e : gallery.entries()) {
        all.push_back({e.page_id, e.brand, l2_distance(embedding, e.embedding), 0});
    }
    std::sort(all.begin(), all.end(), [](const MatchResult& a, const MatchResult& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.page_id < b.page_id;
    });
    if (static_cast<std::size_t>(k) < all.size()) {
        all.resize(static_cast<std::size_t>(k));
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i].rank = static_cast<int>(i) + 1;
    }
    return all;
}

SimilarityDecision classify_similarity(std::span<const MatchResult> matches, double theta_sim) {
    if (matches.empty()) {
        throw DataError("classify_similarity: no matches");
    }
    const MatchResult& top = matches.front();
    return {top.distance < theta_sim, top.brand, top.distance};
}

std::pair<double, int> brand_distance(std::span<const double> embedding,
                                      const BrandGallery& gallery, const std::string& brand) {
    if (!gallery.has_brand(brand)) {
        throw DataError("brand_distance: unknown brand '" + brand + "'");
    }
    const auto full = rank_gallery(embedding, gallery, static_cast<int>(gallery.size()));
    for (const auto& m : full) {
        if (m.brand == brand) {
            return {m.distance, m.rank};
        }
    }
    throw DataError("brand_distance: unreachable");  // has_brand guarantees a hit
}

std::vector<Triplet> sample_triplets(const BrandGallery& gallery, int batch_size,
                                     TripletStrategy strategy, Rng& rng) {
    const auto& entries = gallery.entries();
    std::map<std::string, std::vector<int>> by_brand;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        by_brand[entries[i].brand].push_back(static_cast<int>(i));
    }
    if (by_brand.size() < 2) {
        throw DataError("sample_triplets: need at least 2 brands");
    }
    std::vector<int> anchors;
    for (const auto& [brand, idx] : by_brand) {
        if (idx.size() >= 2) {
            anchors.insert(anchors.end(), idx.begin(), idx.end());
        }
    }
    if (anchors.empty()) {
        throw DataError("sample_triplets: no brand has 2 or more pages");
    }

    std::vector<Triplet> out;
    out.reserve(static_cast<std::size_t>(batch_size));
    for (int b = 0; b < batch_size; ++b) {
        Triplet t;
        t.anchor = anchors[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(anchors.size())))];
        const std::string& brand = entries[static_cast<std::size_t>(t.anchor)].brand;

        const auto& same = by_brand[brand];
        do {
            t.positive = same[static_cast<std::size_t>(rng.uniform_int(
                static_cast<int>(same.size())))];
        } while (t.positive == t.anchor);

        std::vector<int> others;
        for (const auto& [other_brand, idx] : by_brand) {
            if (other_brand != brand) {
                others.insert(others.end(), idx.begin(), idx.end());
            }
        }
        if (strategy == TripletStrategy::uniform) {
            t.negative = others[static_cast<std::size_t>(rng.uniform_int(
                static_cast<int>(others.size())))];
        } else {
            const auto& anchor_emb = entries[static_cast<std::size_t>(t.anchor)].embedding;
            double best = 0.0;
            for (int c = 0; c < 16; ++c) {
                const int cand = others[static_cast<std::size_t>(rng.uniform_int(
                    static_cast<int>(others.size())))];
                t.negative_pool.push_back(cand);
                const double d =
                    l2_distance(anchor_emb, entries[static_cast<std::size_t>(cand)].embedding);
                if (c == 0 || d < best) {
                    best = d;
                    t.negative = cand;
                }
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

BrandGallery build_gallery(const SimilarityModel& model, std::span<const PageSample> pages) {
    BrandGallery g;
    g.theta_reference = model.config.distance_threshold;
    for (const auto& p : pages) {
        g.add(p.id, p.brand, model.embed(p.image));
    }
    g.theta_calibrated = calibrate_distance_threshold(g);
    return g;
}

SimilarityModel train_similarity(SimilarityModel model, std::span<const PageSample> pages,
                                 int epochs, std::uint64_t seed, TripletStrategy strategy,
                                 std::vector<double>* epoch_loss_log) {
    if (epochs < 0) {
        throw ConfigError("train_similarity: negative epoch count");
    }
    if (epochs == 0) {
        return model;
    }
    model = model.clone();  // keep the caller's parameters frozen

    Rng rng(seed);
    OptimizerConfig opt_cfg;
    opt_cfg.kind = OptimizerKind::adam;
    opt_cfg.learning_rate = model.config.learning_rate;
    Optimizer optimizer(opt_cfg);
    std::vector<Tensor> params = model.params();

    std::vector<Tensor> images;
    images.reserve(pages.size());
    for (const auto& p : pages) {
        images.push_back(p.image.to_tensor());
    }

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        // Refresh embeddings; hard-negative mining reads current distances.
        const BrandGallery gallery = build_gallery(model, pages);
        const auto triplets =
            sample_triplets(gallery, static_cast<int>(pages.size()), strategy, rng);

        double epoch_loss = 0.0;
        Tape tape;
        for (std::size_t start = 0; start < triplets.size();
             start += static_cast<std::size_t>(model.config.batch_size)) {
            const std::size_t end = std::min(
                triplets.size(), start + static_cast<std::size_t>(model.config.batch_size));
            std::vector<Tensor> losses;
            for (std::size_t i = start; i < end; ++i) {
                const Triplet& t = triplets[i];
                Tensor a = model.embed(tape, images[static_cast<std::size_t>(t.anchor)]);
                Tensor p = model.embed(tape, images[static_cast<std::size_t>(t.positive)]);
                Tensor n = model.embed(tape, images[static_cast<std::size_t>(t.negative)]);
                losses.push_back(triplet_loss(tape, a, p, n, model.config.margin));
            }
            Tensor batch_loss = mean_of(tape, losses);
            const double loss_value = batch_loss.item();
            if (!std::isfinite(loss_value)) {
                throw DivergenceError("train_similarity: non-finite loss at epoch " +
                                      std::to_string(epoch));
            }
            epoch_loss += loss_value * static_cast<double>(end - start);
            optimizer.zero_grad(params);
            tape.backward(batch_loss);
            optimizer.step(params);
            tape.clear();
        }
        if (epoch_loss > 0.0 || !triplets.empty()) {
            epoch_loss /= static_cast<double>(triplets.size());
        }
        if (epoch_loss_log) {
            epoch_loss_log->push_back(epoch_loss);
        }
    }
    return model;
}

std::optional<double> calibrate_distance_threshold(const BrandGallery& gallery) {
    std::vector<double> nearest;
    const auto& entries = gallery.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        double best = -1.0;
        for (std::size_t j = 0; j < entries.size(); ++j) {
            if (i == j || entries[i].brand != entries[j].brand) {
                continue;
            }
            const double d = l2_distance(entries[i].embedding, entries[j].embedding);
            if (best < 0.0 || d < best) {
                best = d;
            }
        }
        if (best >= 0.0) {
            nearest.push_back(best);
        }
    }
    if (nearest.empty()) {
        return std::nullopt;
    }
    std::sort(nearest.begin(), nearest.end());
    // Nearest-rank 95th percentile.
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(nearest.size())));
    return nearest[std::min(nearest.size() - 1, std::max<std::size_t>(rank, 1) - 1)];
}

}  // namespace phishdetect
