// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Character-level URL phishing scorer: embedding -> dropout -> LSTM (last
// hidden state) -> dropout -> dense -> sigmoid, in four named size/epoch
// variants, with the four-bin score histogram used for evaluation.

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phishdetect/corpus.hpp"
#include "phishdetect/tensor.hpp"

namespace phishdetect {

// Dense character-index mapping with reserved pad and out-of-vocabulary
// entries (indices 0 and 1); corpus characters follow in byte order.
class CharVocabulary {
public:
    static CharVocabulary build(std::span<const UrlSample> corpus);
    static CharVocabulary from_bytes(std::span<const unsigned char> bytes);

    int size() const { return static_cast<int>(index_.size()) + 2; }
    int pad_index() const { return 0; }
    int oov_index() const { return 1; }
    int index_of(char c) const;
    std::vector<unsigned char> bytes() const;  // corpus chars in index order

private:
    std::map<unsigned char, int> index_;
};

// Head-truncating, right-padding encoder; total over all inputs.
std::vector<int> encode_url(const std::string& url, const CharVocabulary& vocab, int max_len);

struct UrlModelConfig {
    int embed_dim = 32;
    int lstm_units = 16;
    double dropout_rate = 0.5;
    int epochs = 3;
    int max_len = 256;
    double validation_split = 0.25;
    std::string variant = "original";

    // Training-loop defaults; the source material names no optimizer.
    double learning_rate = 0.003;
    int batch_size = 32;

    // The four named variants pin (units, epochs): original=(16,3),
    // new-1=(64,3), new-2=(16,6), new-3=(64,6).
    static UrlModelConfig for_variant(const std::string& name);
};

struct EpochLog {
    int epoch = 0;
    std::string split;  // "train" | "validation"
    double loss = 0.0;
    double accuracy = 0.0;
};

class UrlModel {
public:
    UrlModelConfig config;
    CharVocabulary vocab;
    Tensor embedding;  // {V, embed_dim}
    Tensor wx;         // {4*units, embed_dim}
    Tensor wh;         // {4*units, units}
    Tensor bias;       // {4*units}
    Tensor dense_w;    // {1, units}
    Tensor dense_b;    // {1}

    static UrlModel init(const UrlModelConfig& config, CharVocabulary vocab, std::uint64_t seed);
    static UrlModel zero_init(const UrlModelConfig& config, CharVocabulary vocab);

    std::vector<Tensor> params();
    void set_trainable(bool trainable);

    // Deterministic score in [0,1]; dropout disabled.
    double score(const std::string& url) const;

    // Training-path logit with dropout active.
    Tensor train_logit(Tape& tape, std::span<const int> encoded, Rng& rng) const;

    void save(const std::filesystem::path& path) const;
    static UrlModel load(const std::filesystem::path& path);
};

// Trains per the config on a stratified split of `samples`; appends one
// train and one validation entry per epoch to `log` when provided.
UrlModel train_url_model(std::span<const UrlSample> samples, const UrlModelConfig& config,
                         std::uint64_t seed, std::vector<EpochLog>* log = nullptr);

// Four-bin histogram over [0,0.25), [0.25,0.5), [0.5,0.75), [0.75,1].
struct ScoreHistogram {
    std::array<long, 4> counts{0, 0, 0, 0};
    long total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
};

ScoreHistogram bin_scores(std::span<const double> scores);

// Phishing iff score strictly exceeds the threshold.
Label classify_url(double score, double threshold);

}  // namespace phishdetect
