// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale synthetic corpora: URL samples imitating cloud-hosted
// phishing patterns (random consonant subdomains on reputable suffixes vs
// dictionary-word hosts), and brand page screenshots with one logo glyph
// and ground-truth boxes per page. Pure functions of (params, seed).

#pragma once

#include <span>
#include <string>
#include <vector>

#include "phishdetect/corpus.hpp"
#include "phishdetect/similarity.hpp"

namespace phishdetect {

// Cloud hosting suffixes used by the phishing class (and by some
// legitimate dictionary-word hosts, so the suffix alone is no cue).
std::span<const std::string> synth_cloud_suffixes();

// Dictionary used for legitimate hosts and paths.
std::span<const std::string> synth_words();

// Random consonant-heavy string of the kind the phishing class uses for
// its subdomains (length >= 8).
std::string synth_random_subdomain(Rng& rng);

// n_per_class samples per label; phishing subdomains are always >= 8
// consonant-heavy characters on a cloud suffix.
std::vector<UrlSample> synth_urls(int n_per_class, std::uint64_t seed);

struct SynthPagesResult {
    std::vector<PageSample> pages;
    std::vector<GroundTruthAnnotation> annotations;  // one logo box per page
    std::vector<std::string> brands;
};

// Fixed pool of synthetic brand names (8 available).
std::vector<std::string> synth_brand_names(int count);

// Per brand: a distinct color/layout template (header bar, button block,
// unique logo glyph) with per-page jitter in placement, hue and noise
// blocks. The logo lands anywhere in frame; its box is the annotation.
SynthPagesResult synth_pages(std::span<const std::string> brands, int pages_per_brand,
                             std::uint64_t seed, int image_size = 64);

}  // namespace phishdetect
