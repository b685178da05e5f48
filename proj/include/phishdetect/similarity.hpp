// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Triplet-embedding page matcher: a small convolutional backbone with a
// 5x5 ReLU head and global max pooling embeds screenshots; retrieval ranks
// gallery pages by L2 distance; a distance threshold marks phishing.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phishdetect/conv_stack.hpp"
#include "phishdetect/image.hpp"
#include "phishdetect/tensor.hpp"

namespace phishdetect {

struct SimilarityConfig {
    int input_size = 64;
    std::vector<ConvStage> backbone = {{8, 3, 2}, {16, 3, 2}};
    int head_filters = 32;  // reference-scale value is 512
    int head_kernel = 5;
    double margin = 2.2;
    double distance_threshold = 8.0;

    double learning_rate = 0.001;
    int batch_size = 8;
};

struct PageSample {
    std::string id;
    std::string brand;
    ImageTensor image;
};

class SimilarityModel {
public:
    SimilarityConfig config;
    ConvStack backbone;
    Tensor head_weight;  // {head_filters, last_stage_filters, k, k}
    Tensor head_bias;    // {head_filters}

    static SimilarityModel init(const SimilarityConfig& config, std::uint64_t seed);

    // Deep copy; training works on a clone so the input stays frozen.
    SimilarityModel clone() const;

    std::vector<Tensor> params();

    // Embedding on the tape (training path). Input {3,H,W} at input_size.
    Tensor embed(Tape& tape, const Tensor& image) const;
    // Frozen path for scoring; deterministic.
    std::vector<double> embed(const ImageTensor& image) const;

    void save(const std::filesystem::path& path) const;
    static SimilarityModel load(const std::filesystem::path& path);
};

// Gallery of per-brand page embeddings; immutable once built.
struct GalleryEntry {
    std::string page_id;
    std::string brand;
    std::vector<double> embedding;
};

class BrandGallery {
public:
    void add(std::string page_id, std::string brand, std::vector<double> embedding);
    const std::vector<GalleryEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool has_brand(const std::string& brand) const;
    int embedding_dim() const;

    // The published reference threshold plus the value recalibrated for
    // this gallery (95th percentile of leave-one-out same-brand nearest
    // distances); both travel in run metadata.
    double theta_reference = 8.0;
    std::optional<double> theta_calibrated;

    void save(const std::filesystem::path& path) const;
    static BrandGallery load(const std::filesystem::path& path);

private:
    std::vector<GalleryEntry> entries_;
};

struct MatchResult {
    std::string page_id;
    std::string brand;
    double distance = 0.0;
    int rank = 0;  // 1-based
};

double l2_distance(std::span<const double> a, std::span<const double> b);

// Hinge on squared distances: max(0, |a-p|^2 - |a-n|^2 + margin).
Tensor triplet_loss(Tape& tape, const Tensor& anchor, const Tensor& positive,
                    const Tensor& negative, double margin);
double triplet_loss_value(std::span<const double> anchor, std::span<const double> positive,
                          std::span<const double> negative, double margin);

// k nearest gallery pages by raw L2 distance, ascending, ties broken by
// page id; ranks run from 1. Returns the whole gallery when k exceeds it.
std::vector<MatchResult> rank_gallery(std::span<const double> embedding,
                                      const BrandGallery& gallery, int k);

struct SimilarityDecision {
    bool phishing = false;
    std::string top_brand;
    double top_distance = 0.0;
};

// Phishing iff the top-1 distance is strictly below the threshold.
SimilarityDecision classify_similarity(std::span<const MatchResult> matches, double theta_sim);

// Minimum distance over the brand's pages plus that page's global rank.
std::pair<double, int> brand_distance(std::span<const double> embedding,
                                      const BrandGallery& gallery, const std::string& brand);

// Triplet sampling --------------------------------------------------------------

enum class TripletStrategy { uniform, hard_negative };

struct Triplet {
    int anchor = 0;
    int positive = 0;
    int negative = 0;
    std::vector<int> negative_pool;  // hard-negative candidates considered
};

// Indices reference gallery entries. Anchors require a brand with >= 2
// pages; negatives come from a different brand. Hard negatives pick the
// closest of a 16-candidate pool under the gallery's current embeddings.
std::vector<Triplet> sample_triplets(const BrandGallery& gallery, int batch_size,
                                     TripletStrategy strategy, Rng& rng);

// Training ----------------------------------------------------------------------

BrandGallery build_gallery(const SimilarityModel& model, std::span<const PageSample> pages);

SimilarityModel train_similarity(SimilarityModel model, std::span<const PageSample> pages,
                                 int epochs, std::uint64_t seed,
                                 TripletStrategy strategy = TripletStrategy::uniform,
                                 std::vector<double>* epoch_loss_log = nullptr);

// 95th percentile (nearest-rank) of leave-one-out same-brand nearest
// distances; empty when no brand has two pages.
std::optional<double> calibrate_distance_threshold(const BrandGallery& gallery);

}  // namespace phishdetect
