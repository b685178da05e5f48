// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/url_model.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "phishdetect/ops.hpp"
#include "phishdetect/optimizer.hpp"
#include "phishdetect/weights.hpp"

namespace phishdetect {

using nlohmann::json;

CharVocabulary CharVocabulary::build(std::span<const UrlSample> corpus) {
    if (corpus.empty()) {
        throw DataError("build_vocabulary: empty corpus");
    }
    CharVocabulary vocab;
    std::vector<bool> seen(256, false);
    for (const auto& s : corpus) {
        for (char c : s.url) {
            seen[static_cast<unsigned char>(c)] = true;
        }
    }
    int next = 2;  // 0 = pad, 1 = oov
    for (int b = 0; b < 256; ++b) {
        if (seen[static_cast<std::size_t>(b)]) {
            vocab.index_[static_cast<unsigned char>(b)] = next++;
        }
    }
    return vocab;
}

CharVocabulary CharVocabulary::from_bytes(std::span<const unsigned char> bytes) {
    CharVocabulary vocab;
    int next = 2;
    for (unsigned char b : bytes) {
        if (!vocab.index_.emplace(b, next).second) {
            throw DataError("vocabulary bytes contain duplicates");
        }
        ++next;
    }
    return vocab;
}

int CharVocabulary::index_of(char c) const {
    auto it = index_.find(static_cast<unsigned char>(c));
    return it == index_.end() ? oov_index() : it->second;
}

std::vector<unsigned char> CharVocabulary::bytes() const {
    std::vector<unsigned char> out(index_.size());
    for (const auto& [b, idx] : index_) {
        out[static_cast<std::size_t>(idx - 2)] = b;
    }
    return out;
}

std::vector<int> encode_url(const std::string& url, const CharVocabulary& vocab, int max_len) {
    if (max_len <= 0) {
        throw DataError("encode_url: max_len must be positive");
    }
    std::vector<int> out(static_cast<std::size_t>(max_len), vocab.pad_index());
    const std::size_t n = std::min(url.size(), static_cast<std::size_t>(max_len));
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = vocab.index_of(url[i]);
    }
    return out;
}

UrlModelConfig UrlModelConfig::for_variant(const std::string& name) {
    UrlModelConfig cfg;
    cfg.variant = name;
    if (name == "original") {
        cfg.lstm_units = 16;
        cfg.epochs = 3;
    } else if (name == "new-1") {
        cfg.lstm_units = 64;
        cfg.epochs = 3;
    } else if (name == "new-2") {
        cfg.lstm_units = 16;
        cfg.epochs = 6;
    } else if (name == "new-3") {
        cfg.lstm_units = 64;
        cfg.epochs = 6;
    } else {
        throw ConfigError("unknown url model variant '" + name +
                          "' (expected original, new-1, new-2, new-3)");
    }
    return cfg;
}

namespace {

Tensor glorot_uniform(Shape shape, Rng& rng) {
    const double fan_in = shape.size() == 2 ? shape[1] : shape[0];
    const double fan_out = shape[0];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : data) {
        v = rng.uniform(-limit, limit);
    }
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

json config_to_json(const UrlModelConfig& cfg, const CharVocabulary& vocab) {
    json j;
    j["embed_dim"] = cfg.embed_dim;
    j["lstm_units"] = cfg.lstm_units;
    j["dropout_rate"] = cfg.dropout_rate;
    j["epochs"] = cfg.epochs;
    j["max_len"] = cfg.max_len;
    j["validation_split"] = cfg.validation_split;
    j["variant"] = cfg.variant;
    j["learning_rate"] = cfg.learning_rate;
    j["batch_size"] = cfg.batch_size;
    j["vocab"] = vocab.bytes();
    return j;
}

}  // namespace

UrlModel UrlModel::init(const UrlModelConfig& config, CharVocabulary vocab, std::uint64_t seed) {
    Rng rng(seed);
    UrlModel m;
    m.config = config;
    m.vocab = std::move(vocab);
    const int vocab_size = m.vocab.size();
    const int e = config.embed_dim;
    const int u = config.lstm_units;

    std::vector<double> emb(static_cast<std::size_t>(vocab_size) * e);
    for (auto& v : emb) {
        v = rng.uniform(-0.05, 0.05);
    }
    m.embedding = Tensor::from_data({vocab_size, e}, std::move(emb), true);
    m.wx = glorot_uniform({4 * u, e}, rng);
    m.wh = glorot_uniform({4 * u, u}, rng);
    m.bias = Tensor::zeros({4 * u}, true);
    // Unit forget-gate bias keeps early training stable.
    for (int i = 0; i < u; ++i) {
        m.bias.data_mut()[static_cast<std::size_t>(u + i)] = 1.0;
    }
    m.dense_w = glorot_uniform({1, u}, rng);
    m.dense_b = Tensor::zeros({1}, true);
    return m;
}

UrlModel UrlModel::zero_init(const UrlModelConfig& config, CharVocabulary vocab) {
    UrlModel m;
    m.config = config;
    m.vocab = std::move(vocab);
    const int u = config.lstm_units;
    m.embedding = Tensor::zeros({m.vocab.size(), config.embed_dim}, true);
    m.wx = Tensor::zeros({4 * u, config.embed_dim}, true);
    m.wh = Tensor::zeros({4 * u, u}, true);
    m.bias = Tensor::zeros({4 * u}, true);
    m.dense_w = Tensor::zeros({1, u}, true);
    m.dense_b = Tensor::zeros({1}, true);
    return m;
}

std::vector<Tensor> UrlModel::params() {
    return {embedding, wx, wh, bias, dense_w, dense_b};
}

void UrlModel::set_trainable(bool trainable) {
    for (auto& p : params()) {
        p.set_requires_grad(trainable);
    }
}

namespace {

// Effective character count: pad steps do not advance the recurrence.
std::span<const int> trim_padding(std::span<const int> encoded, int pad_index) {
    std::size_t n = encoded.size();
    while (n > 0 && encoded[n - 1] == pad_index) {
        --n;
    }
    return encoded.subspan(0, n);
}

}  // namespace

double UrlModel::score(const std::string& url) const {
    Tape tape(false);
    const std::vector<int> encoded = encode_url(url, vocab, config.max_len);
    const auto active = trim_padding(encoded, vocab.pad_index());

    Tensor h;
    if (active.empty()) {
        h = Tensor::zeros({config.lstm_units});
    } else {
        Tensor xs = embedding_lookup(tape, embedding, active);
        h = lstm_sequence(tape, xs, wx, wh, bias);
    }
    const Tensor logit = add(tape, matmul(tape, dense_w, h), dense_b);
    return sigmoid_value(logit.item());
}

Tensor UrlModel::train_logit(Tape& tape, std::span<const int> encoded, Rng& rng) const {
    const auto active = trim_padding(encoded, vocab.pad_index());
    Tensor h;
    if (active.empty()) {
        h = Tensor::zeros({config.lstm_units});
    } else {
        Tensor xs = embedding_lookup(tape, embedding, active);
        xs = dropout(tape, xs, config.dropout_rate, DropoutMode::train, rng);
        h = lstm_sequence(tape, xs, wx, wh, bias);
        h = dropout(tape, h, config.dropout_rate, DropoutMode::train, rng);
    }
    return add(tape, matmul(tape, dense_w, h), dense_b);
}

void UrlModel::save(const std::filesystem::path& path) const {
    const json cfg = config_to_json(config, vocab);
    const NamedTensor params[] = {
        {"embedding", embedding}, {"lstm_wx", wx},      {"lstm_wh", wh},
        {"lstm_bias", bias},      {"dense_w", dense_w}, {"dense_b", dense_b},
    };
    save_weights(path, "url-lstm", cfg.dump(), params);
}

UrlModel UrlModel::load(const std::filesystem::path& path) {
    const WeightArchive archive = load_weights(path);
    if (archive.kind != "url-lstm") {
        throw DataError("archive " + path.string() + " holds a '" + archive.kind +
                        "' model, expected 'url-lstm'");
    }
    json cfg;
    try {
        cfg = json::parse(archive.config_json);
    } catch (const json::exception& e) {
        throw DataError("bad config block in " + path.string() + ": " + e.what());
    }

    UrlModel m;
    m.config.embed_dim = cfg.at("embed_dim").get<int>();
    m.config.lstm_units = cfg.at("lstm_units").get<int>();
    m.config.dropout_rate = cfg.at("dropout_rate").get<double>();
    m.config.epochs = cfg.at("epochs").get<int>();
    m.config.max_len = cfg.at("max_len").get<int>();
    m.config.validation_split = cfg.at("validation_split").get<double>();
    m.config.variant = cfg.at("variant").get<std::string>();
    m.config.learning_rate = cfg.at("learning_rate").get<double>();
    m.config.batch_size = cfg.at("batch_size").get<int>();
    const auto vocab_bytes = cfg.at("vocab").get<std::vector<unsigned char>>();
    m.vocab = CharVocabulary::from_bytes(vocab_bytes);

    const int v = m.vocab.size();
    const int e = m.config.embed_dim;
    const int u = m.config.lstm_units;
    m.embedding = require_param(archive, "embedding", {v, e});
    m.wx = require_param(archive, "lstm_wx", {4 * u, e});
    m.wh = require_param(archive, "lstm_wh", {4 * u, u});
    m.bias = require_param(archive, "lstm_bias", {4 * u});
    m.dense_w = require_param(archive, "dense_w", {1, u});
    m.dense_b = require_param(archive, "dense_b", {1});
    for (auto& p : m.params()) {
        p.set_requires_grad(true);
    }
    return m;
}

UrlModel train_url_model(std::span<const UrlSample> samples, const UrlModelConfig& config,
                         std::uint64_t seed, std::vector<EpochLog>* log) {
    bool has_phishing = false;
    bool has_legitimate = false;
    for (const auto& s : samples) {
        (s.label == Label::phishing ? has_phishing : has_legitimate) = true;
    }
    if (!has_phishing || !has_legitimate) {
        throw DataError("train_url_model: dataset must contain both classes");
    }

    auto [train_set, val_set] =
        split_url_dataset(samples, SplitSpec{config.validation_split, seed});

    const CharVocabulary vocab = CharVocabulary::build(train_set);
    UrlModel model = UrlModel::init(config, vocab, seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);

    OptimizerConfig opt_cfg;
    opt_cfg.kind = OptimizerKind::adam;
    opt_cfg.learning_rate = config.learning_rate;
    Optimizer optimizer(opt_cfg);
    std::vector<Tensor> params = model.params();

    std::vector<std::vector<int>> encoded(train_set.size());
    std::vector<double> targets(train_set.size());
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        encoded[i] = encode_url(train_set[i].url, vocab, config.max_len);
        targets[i] = train_set[i].label == Label::phishing ? 1.0 : 0.0;
    }

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        long correct = 0;
        Tape tape;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<Tensor> losses;
            losses.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                Tensor logit = model.train_logit(tape, encoded[i], rng);
                losses.push_back(bce_with_logits(tape, logit, targets[i]));
                const bool predicted_phishing = logit.item() > 0.0;
                correct += predicted_phishing == (targets[i] > 0.5) ? 1 : 0;
            }
            Tensor batch_loss = mean_of(tape, losses);
            const double loss_value = batch_loss.item();
            if (!std::isfinite(loss_value)) {
                throw DivergenceError("train_url_model: non-finite loss at epoch " +
                                      std::to_string(epoch));
            }
            epoch_loss += loss_value * static_cast<double>(end - start);
            optimizer.zero_grad(params);
            tape.backward(batch_loss);
            optimizer.step(params);
            tape.clear();
        }

        const double train_loss = epoch_loss / static_cast<double>(train_set.size());
        const double train_acc =
            static_cast<double>(correct) / static_cast<double>(train_set.size());

        double val_loss = 0.0;
        long val_correct = 0;
        for (const auto& s : val_set) {
            const double p = model.score(s.url);
            const double t = s.label == Label::phishing ? 1.0 : 0.0;
            const double eps = 1e-12;
            val_loss -= t * std::log(p + eps) + (1.0 - t) * std::log(1.0 - p + eps);
            val_correct += (p > 0.5) == (t > 0.5) ? 1 : 0;
        }
        val_loss /= static_cast<double>(val_set.size());
        const double val_acc =
            static_cast<double>(val_correct) / static_cast<double>(val_set.size());

        if (log) {
            log->push_back({epoch, "train", train_loss, train_acc});
            log->push_back({epoch, "validation", val_loss, val_acc});
        }
    }
    return model;
}

ScoreHistogram bin_scores(std::span<const double> scores) {
    ScoreHistogram hist;
    for (double s : scores) {
        if (!(s >= 0.0 && s <= 1.0)) {
            throw DataError("bin_scores: score " + format_double(s) + " outside [0,1]");
        }
        // A score lands in the highest bin whose lower edge <= score; 1.0
        // stays in the top bin.
        const int idx = std::min(3, static_cast<int>(s * 4.0));
        hist.counts[static_cast<std::size_t>(idx)] += 1;
    }
    return hist;
}

Label classify_url(double score, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("classify_url: threshold must lie in (0,1)");
    }
    return score > threshold ? Label::phishing : Label::legitimate;
}

}  // namespace phishdetect
