// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Fuses the three model signals into a phishing verdict. The confidence
// grade follows the affirmative vote count (3/2/1 -> high/medium/low); the
// similarity vote is brand-conditioned whenever the logo vote names a
// brand, and brand disagreements are surfaced with the cross distance
// rather than silently resolved.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"
#include "phishdetect/geometry.hpp"
#include "phishdetect/similarity.hpp"

namespace phishdetect {

enum class Confidence { none, low, medium, high };

std::string confidence_str(Confidence c);
std::optional<Confidence> parse_confidence(std::string_view s);

// Vote count -> grade; the single rule consistent with every published row.
Confidence confidence_for(int affirmative_votes);

struct UrlVote {
    double score = 0.0;
    bool yes = false;
};

struct LogoVote {
    bool yes = false;
    std::optional<std::string> brand;  // best guess even on a "no"
    double prob = 0.0;
    bool empty = false;  // no detections at all
};

struct SimilarityVote {
    bool yes = false;
    std::string brand;
    double distance = 0.0;
    int rank = 0;
    bool empty = false;  // no matches supplied
};

struct BrandDistanceInfo {
    double distance = 0.0;
    int rank = 0;
};

struct ModelSignals {
    std::string url;
    double url_score = 0.0;
    std::vector<Detection> logo_detections;       // post-NMS
    std::vector<MatchResult> similarity_matches;  // ascending distance
    // Optional callback into the similarity gallery for brand-conditioned
    // distance queries (cross-brand evidence).
    std::function<std::optional<BrandDistanceInfo>(const std::string&)> brand_distance;
};

struct CombinerConfig {
    double theta_url = 0.5;
    double theta_logo = 0.25;
    double theta_sim = 8.0;
};

struct Evidence {
    UrlVote url;
    LogoVote logo;
    SimilarityVote similarity;
    // Logo-brand distance/rank when the similarity top-1 names a different
    // brand than an affirmative logo vote.
    std::optional<std::pair<std::string, BrandDistanceInfo>> cross_brand;
};

struct Verdict {
    bool is_phishing = false;
    Confidence confidence = Confidence::none;
    std::optional<std::string> resolved_brand;
    Evidence evidence;
};

// Yes iff score strictly exceeds the threshold.
UrlVote url_vote(double score, double theta_url);

// Yes with the highest-probability brand when max prob >= theta_logo; the
// brand is still reported as a best guess on a "no".
LogoVote logo_vote(std::span<const Detection> detections, double theta_logo);

// Yes iff the top-1 distance is strictly below theta_sim and, when a
// reference brand is given, the top-1 brand matches it.
SimilarityVote similarity_vote(std::span<const MatchResult> matches, double theta_sim,
                               const std::optional<std::string>& reference_brand);

Verdict combine(const ModelSignals& signals, const CombinerConfig& config);

// {url, is_phishing, confidence, brand, votes:{...}} record.
nlohmann::json verdict_to_json(const std::string& url, const Verdict& verdict);

}  // namespace phishdetect
