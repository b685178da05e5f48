// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "phishdetect/combiner.hpp"

using namespace phishdetect;

namespace {

const BoundingBox kBox = BoundingBox::from_corners(0.4, 0.4, 0.6, 0.6);

// Crafts signals that produce exactly the requested vote triple.
ModelSignals signals_for(bool url_yes, bool logo_yes, bool sim_yes) {
    ModelSignals s;
    s.url = "https://example.test";
    s.url_score = url_yes ? 0.99 : 0.01;
    s.logo_detections = {{kBox, "acme", logo_yes ? 0.9 : 0.1}};
    // Same brand as the logo so the reference-brand condition never flips
    // the similarity vote in these synthetic cases.
    s.similarity_matches = {{"page-1", "acme", sim_yes ? 2.0 : 9.5, 1}};
    return s;
}

int grade_rank(Confidence c) {
    switch (c) {
        case Confidence::none: return 0;
        case Confidence::low: return 1;
        case Confidence::medium: return 2;
        case Confidence::high: return 3;
    }
    return 0;
}

}  // namespace

TEST_CASE("individual votes") {
    SUBCASE("url vote is a strict threshold") {
        CHECK(url_vote(0.999, 0.5).yes);
        CHECK_FALSE(url_vote(0.043, 0.5).yes);
        CHECK_FALSE(url_vote(0.5, 0.5).yes);  // boundary: no
        CHECK_THROWS_AS(url_vote(0.5, 0.0), ConfigError);
    }

    SUBCASE("logo vote keeps the best guess on a no") {
        const std::vector<Detection> dets = {{kBox, "bt", 0.23}, {kBox, "google", 0.11}};
        const LogoVote v = logo_vote(dets, 0.25);
        CHECK_FALSE(v.yes);
        REQUIRE(v.brand.has_value());
        CHECK(*v.brand == "bt");
        CHECK(v.prob == 0.23);
    }

    SUBCASE("logo vote affirms at the inclusive threshold") {
        const std::vector<Detection> dets = {{kBox, "bt", 0.25}};
        CHECK(logo_vote(dets, 0.25).yes);
        const std::vector<Detection> strong = {{kBox, "bt", 0.94}};
        const LogoVote v = logo_vote(strong, 0.25);
        CHECK(v.yes);
        CHECK(*v.brand == "bt");
    }

    SUBCASE("empty detections vote no with no brand") {
        const LogoVote v = logo_vote({}, 0.25);
        CHECK_FALSE(v.yes);
        CHECK(v.empty);
        CHECK_FALSE(v.brand.has_value());
    }

    SUBCASE("similarity vote without a reference brand") {
        const std::vector<MatchResult> matches = {{"p", "bt", 2.3, 1}};
        CHECK(similarity_vote(matches, 8.0, std::nullopt).yes);
        const std::vector<MatchResult> distant = {{"p", "bt", 8.0, 1}};
        CHECK_FALSE(similarity_vote(distant, 8.0, std::nullopt).yes);  // strict
    }

    SUBCASE("similarity vote is brand-conditioned when a reference exists") {
        // Published D1 pattern: top-1 facebook at 3.1, logo says dhl.
        const std::vector<MatchResult> matches = {{"p", "facebook", 3.1, 1}};
        const SimilarityVote v = similarity_vote(matches, 8.0, std::string("dhl"));
        CHECK_FALSE(v.yes);
        CHECK(v.brand == "facebook");
        CHECK(similarity_vote(matches, 8.0, std::string("facebook")).yes);
    }

    SUBCASE("similarity vote rejects empty matches") {
        CHECK_THROWS_AS(similarity_vote({}, 8.0, std::nullopt), DataError);
    }
}

TEST_CASE("published verdict rows reproduce") {
    const CombinerConfig cfg;  // 0.5 / 0.25 / 8.0

    SUBCASE("G1: only similarity affirms, low confidence") {
        ModelSignals s;
        s.url = "https://sites.google.com/view/yaho000/home";
        s.url_score = 0.001;
        s.logo_detections = {{kBox, "bt", 0.23}};
        s.similarity_matches = {{"g-login", "google", 2.4, 1}};
        const Verdict v = combine(s, cfg);
        CHECK(v.is_phishing);
        CHECK(v.confidence == Confidence::low);
        REQUIRE(v.resolved_brand.has_value());
        CHECK(*v.resolved_brand == "google");
    }

    SUBCASE("G2: same shape as G1, low confidence") {
        ModelSignals s;
        s.url = "https://sites.google.com/view/fgjdfghduhdxuxu/home";
        s.url_score = 0.043;
        s.logo_detections = {{kBox, "bt", 0.23}};
        s.similarity_matches = {{"g-login", "google", 2.6, 1}};
        const Verdict v = combine(s, cfg);
        CHECK(v.is_phishing);
        CHECK(v.confidence == Confidence::low);
    }

    SUBCASE("B1: all three affirm, high confidence") {
        ModelSignals s;
        s.url = "https://dfghhgdsdf.weebly.com";
        s.url_score = 0.997;
        s.logo_detections = {{kBox, "bt", 0.94}};
        s.similarity_matches = {{"bt-page", "bt", 1.9, 1}};
        const Verdict v = combine(s, cfg);
        CHECK(v.is_phishing);
        CHECK(v.confidence == Confidence::high);
        CHECK(*v.resolved_brand == "bt");
    }

    SUBCASE("B2: logo and similarity affirm, medium confidence") {
        ModelSignals s;
        s.url = "https://ofifice.weebly.com";
        s.url_score = 0.315;
        s.logo_detections = {{kBox, "bt", 0.98}};
        s.similarity_matches = {{"bt-page", "bt", 2.2, 1}};
        const Verdict v = combine(s, cfg);
        CHECK(v.is_phishing);
        CHECK(v.confidence == Confidence::medium);
        CHECK(*v.resolved_brand == "bt");
    }

    SUBCASE("D1: url and logo affirm, similarity brand disagrees, medium confidence") {
        ModelSignals s;
        s.url = "https://dhmpxmsb6lk.typeform.com/to/h99lvret";
        s.url_score = 0.999;
        s.logo_detections = {{kBox, "dhl", 0.83}};
        s.similarity_matches = {{"fb-page", "facebook", 3.1, 1}};
        s.brand_distance = [](const std::string& brand) -> std::optional<BrandDistanceInfo> {
            if (brand == "dhl") {
                return BrandDistanceInfo{6.92, 147};
            }
            return std::nullopt;
        };
        const Verdict v = combine(s, cfg);
        CHECK(v.is_phishing);
        CHECK(v.confidence == Confidence::medium);
        CHECK(*v.resolved_brand == "dhl");

        // The disagreement is surfaced with the logo brand's own distance.
        REQUIRE(v.evidence.cross_brand.has_value());
        CHECK(v.evidence.cross_brand->first == "dhl");
        CHECK(v.evidence.cross_brand->second.distance == doctest::Approx(6.92));
        CHECK(v.evidence.cross_brand->second.rank == 147);
        CHECK_FALSE(v.evidence.similarity.yes);
    }

    SUBCASE("all-neutral signals: not phishing, confidence none") {
        ModelSignals s;
        s.url = "https://example.com";
        s.url_score = 0.1;
        const Verdict v = combine(s, cfg);
        CHECK_FALSE(v.is_phishing);
        CHECK(v.confidence == Confidence::none);
        CHECK_FALSE(v.resolved_brand.has_value());
        CHECK(v.evidence.logo.empty);
        CHECK(v.evidence.similarity.empty);
    }
}

TEST_CASE("grade depends only on the vote count") {
    const CombinerConfig cfg;
    for (int mask = 0; mask < 8; ++mask) {
        const bool u = mask & 1;
        const bool l = mask & 2;
        const bool m = mask & 4;
        const Verdict v = combine(signals_for(u, l, m), cfg);
        const int votes = static_cast<int>(u) + static_cast<int>(l) + static_cast<int>(m);
        CHECK(v.confidence == confidence_for(votes));
        CHECK(v.is_phishing == (votes >= 1));
        // Confidence is none exactly when not phishing.
        CHECK((v.confidence == Confidence::none) == !v.is_phishing);
    }

    // Permutation invariance: any single yes gives the same grade no
    // matter which model supplied it.
    const Confidence single[] = {
        combine(signals_for(true, false, false), cfg).confidence,
        combine(signals_for(false, true, false), cfg).confidence,
        combine(signals_for(false, false, true), cfg).confidence,
    };
    CHECK(single[0] == single[1]);
    CHECK(single[1] == single[2]);
    const Confidence pairs[] = {
        combine(signals_for(true, true, false), cfg).confidence,
        combine(signals_for(true, false, true), cfg).confidence,
        combine(signals_for(false, true, true), cfg).confidence,
    };
    CHECK(pairs[0] == pairs[1]);
    CHECK(pairs[1] == pairs[2]);
}

TEST_CASE("flipping a vote from no to yes never lowers the grade") {
    const CombinerConfig cfg;
    for (int mask = 0; mask < 8; ++mask) {
        const bool u = mask & 1;
        const bool l = mask & 2;
        const bool m = mask & 4;
        const int before = grade_rank(combine(signals_for(u, l, m), cfg).confidence);
        if (!u) {
            CHECK(grade_rank(combine(signals_for(true, l, m), cfg).confidence) >= before);
        }
        if (!l) {
            CHECK(grade_rank(combine(signals_for(u, true, m), cfg).confidence) >= before);
        }
        if (!m) {
            CHECK(grade_rank(combine(signals_for(u, l, true), cfg).confidence) >= before);
        }
    }
}

TEST_CASE("evidence is lossless") {
    const CombinerConfig cfg;
    ModelSignals s;
    s.url = "https://ofifice.weebly.com";
    s.url_score = 0.315;
    s.logo_detections = {{kBox, "bt", 0.98}, {kBox, "google", 0.4}};
    s.similarity_matches = {{"bt-7", "bt", 2.2, 1}, {"g-1", "google", 5.0, 2}};
    const Verdict v = combine(s, cfg);

    CHECK(v.evidence.url.score == 0.315);
    CHECK_FALSE(v.evidence.url.yes);
    CHECK(*v.evidence.logo.brand == "bt");
    CHECK(v.evidence.logo.prob == 0.98);
    CHECK(v.evidence.logo.yes);
    CHECK(v.evidence.similarity.brand == "bt");
    CHECK(v.evidence.similarity.distance == 2.2);
    CHECK(v.evidence.similarity.rank == 1);
    CHECK(v.evidence.similarity.yes);

    // All three votes are always present in the serialized record.
    const auto j = verdict_to_json(s.url, v);
    CHECK(j.at("url") == s.url);
    CHECK(j.at("is_phishing") == true);
    CHECK(j.at("confidence") == "medium");
    CHECK(j.at("brand") == "bt");
    CHECK(j.at("votes").contains("url"));
    CHECK(j.at("votes").contains("logo"));
    CHECK(j.at("votes").contains("similarity"));
    CHECK(j.at("votes").at("url").at("score") == 0.315);
    CHECK(j.at("votes").at("logo").at("prob") == 0.98);
    CHECK(j.at("votes").at("similarity").at("distance") == 2.2);
    CHECK(j.at("votes").at("similarity").at("rank") == 1);
}

TEST_CASE("confidence helpers") {
    CHECK(confidence_str(Confidence::high) == "high");
    CHECK(parse_confidence("medium") == Confidence::medium);
    CHECK_FALSE(parse_confidence("very-high").has_value());
    CHECK_THROWS_AS(confidence_for(4), DataError);
}
