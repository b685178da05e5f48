// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/combiner.hpp"

namespace phishdetect {

using nlohmann::json;

std::string confidence_str(Confidence c) {
    switch (c) {
        case Confidence::none: return "none";
        case Confidence::low: return "low";
        case Confidence::medium: return "medium";
        case Confidence::high: return "high";
    }
    return "none";
}

std::optional<Confidence> parse_confidence(std::string_view s) {
    if (s == "none") return Confidence::none;
    if (s == "low") return Confidence::low;
    if (s == "medium") return Confidence::medium;
    if (s == "high") return Confidence::high;
    return std::nullopt;
}

Confidence confidence_for(int affirmative_votes) {
    switch (affirmative_votes) {
        case 0: return Confidence::none;
        case 1: return Confidence::low;
        case 2: return Confidence::medium;
        case 3: return Confidence::high;
        default:
            throw DataError("confidence_for: vote count must lie in [0,3]");
    }
}

UrlVote url_vote(double score, double theta_url) {
    if (!(theta_url > 0.0 && theta_url < 1.0)) {
        throw ConfigError("url_vote: threshold must lie in (0,1)");
    }
    return {score, score > theta_url};
}

LogoVote logo_vote(std::span<const Detection> detections, double theta_logo) {
    LogoVote vote;
    if (detections.empty()) {
        vote.empty = true;
        return vote;
    }
    const Detection* best = &detections[0];
    for (const auto& d : detections) {
        if (d.prob > best->prob) {
            best = &d;
        }
    }
    vote.brand = best->brand;
    vote.prob = best->prob;
    vote.yes = best->prob >= theta_logo;
    return vote;
}

SimilarityVote similarity_vote(std::span<const MatchResult> matches, double theta_sim,
                               const std::optional<std::string>& reference_brand) {
    if (matches.empty()) {
        throw DataError("similarity_vote: no matches");
    }
    const MatchResult& top = matches.front();
    SimilarityVote vote;
    vote.brand = top.brand;
    vote.distance = top.distance;
    vote.rank = top.rank;
    vote.yes = top.distance < theta_sim &&
               (!reference_brand.has_value() || top.brand == *reference_brand);
    return vote;
}

Verdict combine(const ModelSignals& signals, const CombinerConfig& config) {
    Verdict verdict;
    verdict.evidence.url = url_vote(signals.url_score, config.theta_url);
    verdict.evidence.logo = logo_vote(signals.logo_detections, config.theta_logo);

    const std::optional<std::string> reference_brand =
        verdict.evidence.logo.yes ? verdict.evidence.logo.brand : std::nullopt;
    if (signals.similarity_matches.empty()) {
        verdict.evidence.similarity.empty = true;  // neutral no
    } else {
        verdict.evidence.similarity =
            similarity_vote(signals.similarity_matches, config.theta_sim, reference_brand);
    }

    const int votes = (verdict.evidence.url.yes ? 1 : 0) + (verdict.evidence.logo.yes ? 1 : 0) +
                      (verdict.evidence.similarity.yes ? 1 : 0);
    verdict.confidence = confidence_for(votes);
    verdict.is_phishing = votes >= 1;

    if (verdict.evidence.logo.yes) {
        verdict.resolved_brand = verdict.evidence.logo.brand;
    } else if (verdict.evidence.similarity.yes) {
        verdict.resolved_brand = verdict.evidence.similarity.brand;
    }

    // Surface brand disagreement with the logo brand's own distance.
    if (verdict.evidence.logo.yes && !verdict.evidence.similarity.empty &&
        verdict.evidence.similarity.brand != *verdict.evidence.logo.brand &&
        signals.brand_distance) {
        if (auto info = signals.brand_distance(*verdict.evidence.logo.brand)) {
            verdict.evidence.cross_brand = {*verdict.evidence.logo.brand, *info};
        }
    }
    return verdict;
}

json verdict_to_json(const std::string& url, const Verdict& verdict) {
    json votes;
    votes["url"] = {{"score", verdict.evidence.url.score}, {"vote", verdict.evidence.url.yes}};
    json logo = {{"prob", verdict.evidence.logo.prob},
                 {"vote", verdict.evidence.logo.yes},
                 {"empty", verdict.evidence.logo.empty}};
    if (verdict.evidence.logo.brand) {
        logo["brand"] = *verdict.evidence.logo.brand;
    }
    votes["logo"] = logo;
    json sim = {{"vote", verdict.evidence.similarity.yes},
                {"empty", verdict.evidence.similarity.empty}};
    if (!verdict.evidence.similarity.empty) {
        sim["brand"] = verdict.evidence.similarity.brand;
        sim["distance"] = verdict.evidence.similarity.distance;
        sim["rank"] = verdict.evidence.similarity.rank;
    }
    votes["similarity"] = sim;

    json out;
    out["url"] = url;
    out["is_phishing"] = verdict.is_phishing;
    out["confidence"] = confidence_str(verdict.confidence);
    if (verdict.resolved_brand) {
        out["brand"] = *verdict.resolved_brand;
    }
    out["votes"] = votes;
    if (verdict.evidence.cross_brand) {
        out["cross_brand"] = {{"brand", verdict.evidence.cross_brand->first},
                              {"distance", verdict.evidence.cross_brand->second.distance},
                              {"rank", verdict.evidence.cross_brand->second.rank}};
    }
    return out;
}

}  // namespace phishdetect
