// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "phishdetect/synth.hpp"
#include "phishdetect/url_model.hpp"

using namespace phishdetect;

namespace {

std::vector<UrlSample> tiny_corpus() {
    std::vector<UrlSample> corpus;
    const char* legit[] = {"https://garden.com/plants", "https://mapleleaf.org",
                           "https://riverstone.net/docs", "https://harborview.com",
                           "https://silverbirch.io/a", "https://meadowbrook.com",
                           "https://willowgrove.org/x", "https://copperfield.net"};
    const char* phish[] = {"https://xkjqzwvb.weebly.com", "https://qqzzxxkkjj.typeform.com/ab3",
                           "https://zzkwqpmvrx.glitch.me", "https://bbxxqqzz99.weebly.com",
                           "https://kjhgfdszxc.webflow.io", "https://qwzxkjvbnm.blogspot.com",
                           "https://zxkvbnqwpm.typeform.com", "https://jjkkqqzz12.weebly.com/z"};
    for (const char* u : legit) corpus.push_back({u, Label::legitimate, "t"});
    for (const char* u : phish) corpus.push_back({u, Label::phishing, "t"});
    return corpus;
}

UrlModelConfig tiny_config() {
    UrlModelConfig cfg;
    cfg.embed_dim = 8;
    cfg.lstm_units = 8;
    cfg.epochs = 2;
    cfg.max_len = 48;
    cfg.validation_split = 0.25;
    cfg.batch_size = 4;
    return cfg;
}

}  // namespace

TEST_CASE("vocabulary construction") {
    SUBCASE("two distinct characters plus pad and oov") {
        const UrlSample corpus[] = {{"ab", Label::legitimate, ""}};
        const auto vocab = CharVocabulary::build(corpus);
        CHECK(vocab.size() == 4);
        CHECK(vocab.index_of('a') != vocab.index_of('b'));
        CHECK(vocab.pad_index() != vocab.oov_index());
    }

    SUBCASE("characters outside the corpus map to oov") {
        const UrlSample corpus[] = {{"ab", Label::legitimate, ""}};
        const auto vocab = CharVocabulary::build(corpus);
        CHECK(vocab.index_of('z') == vocab.oov_index());
        CHECK(vocab.index_of('a') != vocab.oov_index());
    }

    SUBCASE("empty corpus is rejected") {
        CHECK_THROWS_AS(CharVocabulary::build({}), DataError);
    }

    SUBCASE("running-example corpus covers its constituent characters") {
        const UrlSample corpus[] = {
            {"https://sites.google.com/view/yaho000/home", Label::phishing, ""},
            {"https://sites.google.com/view/fgjdfghduhdxuxu/home", Label::phishing, ""},
            {"https://dfghhgdsdf.weebly.com", Label::phishing, ""},
            {"https://ofifice.weebly.com", Label::phishing, ""},
            {"https://dhmpxmsb6lk.typeform.com/to/h99lvret", Label::phishing, ""},
        };
        const auto vocab = CharVocabulary::build(corpus);
        for (char c : std::string(":/.-069bcdefghijklmnoprstuvwxy")) {
            bool present = false;
            for (const auto& s : corpus) {
                present = present || s.url.find(c) != std::string::npos;
            }
            if (present) {
                CHECK(vocab.index_of(c) != vocab.oov_index());
            }
        }
    }

    SUBCASE("byte round-trip preserves the mapping") {
        const UrlSample corpus[] = {{"https://ab9.com", Label::legitimate, ""}};
        const auto vocab = CharVocabulary::build(corpus);
        const auto rebuilt = CharVocabulary::from_bytes(vocab.bytes());
        CHECK(rebuilt.size() == vocab.size());
        for (char c : std::string("https://ab9.comZ")) {
            CHECK(rebuilt.index_of(c) == vocab.index_of(c));
        }
    }
}

TEST_CASE("encode_url fixtures") {
    const UrlSample corpus[] = {{"https://ofifice.weebly.com", Label::phishing, ""}};
    const auto vocab = CharVocabulary::build(corpus);

    SUBCASE("empty string is all padding") {
        const auto idx = encode_url("", vocab, 16);
        CHECK(idx.size() == 16);
        CHECK(std::all_of(idx.begin(), idx.end(),
                          [&](int i) { return i == vocab.pad_index(); }));
    }

    SUBCASE("exact-length url has no padding or truncation") {
        const std::string url = "abcd";
        const auto idx = encode_url(url, vocab, 4);
        CHECK(idx.size() == 4);
        CHECK(std::none_of(idx.begin(), idx.end(),
                           [&](int i) { return i == vocab.pad_index(); }));
    }

    SUBCASE("running example B2 encodes 26 characters and 102 pads") {
        const auto idx = encode_url("https://ofifice.weebly.com", vocab, 128);
        CHECK(idx.size() == 128);
        const long pads = std::count(idx.begin(), idx.end(), vocab.pad_index());
        CHECK(pads == 102);
        for (int i = 0; i < 26; ++i) {
            CHECK(idx[static_cast<std::size_t>(i)] != vocab.pad_index());
        }
    }

    SUBCASE("long urls truncate keeping the head") {
        const auto idx = encode_url("https://ofifice.weebly.com", vocab, 5);
        CHECK(idx.size() == 5);
        CHECK(idx[0] == vocab.index_of('h'));
        CHECK(idx[4] == vocab.index_of('s'));
    }
}

TEST_CASE("variant table pins units and epochs") {
    CHECK(UrlModelConfig::for_variant("original").lstm_units == 16);
    CHECK(UrlModelConfig::for_variant("original").epochs == 3);
    CHECK(UrlModelConfig::for_variant("new-1").lstm_units == 64);
    CHECK(UrlModelConfig::for_variant("new-1").epochs == 3);
    CHECK(UrlModelConfig::for_variant("new-2").lstm_units == 16);
    CHECK(UrlModelConfig::for_variant("new-2").epochs == 6);
    CHECK(UrlModelConfig::for_variant("new-3").lstm_units == 64);
    CHECK(UrlModelConfig::for_variant("new-3").epochs == 6);
    CHECK(UrlModelConfig::for_variant("new-3").embed_dim == 32);
    CHECK(UrlModelConfig::for_variant("new-3").dropout_rate == 0.5);
    CHECK(UrlModelConfig::for_variant("new-3").validation_split == 0.25);
    CHECK_THROWS_AS(UrlModelConfig::for_variant("new-9"), ConfigError);
}

TEST_CASE("zero-initialized model scores one half everywhere") {
    const auto corpus = tiny_corpus();
    const auto vocab = CharVocabulary::build(corpus);
    const UrlModel m = UrlModel::zero_init(tiny_config(), vocab);
    for (const auto& s : corpus) {
        CHECK(m.score(s.url) == doctest::Approx(0.5));
    }
    CHECK(m.score("") == doctest::Approx(0.5));
}

TEST_CASE("training determinism and contracts") {
    const auto corpus = tiny_corpus();

    SUBCASE("single-class dataset is rejected") {
        std::vector<UrlSample> single;
        for (const auto& s : corpus) {
            if (s.label == Label::phishing) single.push_back(s);
        }
        CHECK_THROWS_AS(train_url_model(single, tiny_config(), 1), DataError);
    }

    SUBCASE("fixed seed reproduces losses and parameters bitwise") {
        std::vector<EpochLog> log1, log2;
        UrlModel m1 = train_url_model(corpus, tiny_config(), 5, &log1);
        UrlModel m2 = train_url_model(corpus, tiny_config(), 5, &log2);
        REQUIRE(log1.size() == log2.size());
        for (std::size_t i = 0; i < log1.size(); ++i) {
            CHECK(log1[i].loss == log2[i].loss);
            CHECK(log1[i].accuracy == log2[i].accuracy);
        }
        auto p1 = m1.params();
        auto p2 = m2.params();
        for (std::size_t i = 0; i < p1.size(); ++i) {
            CHECK(std::equal(p1[i].data().begin(), p1[i].data().end(), p2[i].data().begin()));
        }

        // Per-epoch log has one train and one validation record per epoch.
        CHECK(log1.size() == 2 * static_cast<std::size_t>(tiny_config().epochs));
        CHECK(log1[0].split == "train");
        CHECK(log1[1].split == "validation");
    }

    SUBCASE("scoring is dropout-free and repeatable") {
        UrlModel m = train_url_model(corpus, tiny_config(), 5);
        for (const auto& s : corpus) {
            const double a = m.score(s.url);
            const double b = m.score(s.url);
            CHECK(a == b);
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
        }
    }

    SUBCASE("save and load round-trip bitwise once on the float32 grid") {
        UrlModel m = train_url_model(corpus, tiny_config(), 5);
        const auto path = std::filesystem::temp_directory_path() / "phishdetect-url-test.pw";
        m.save(path);
        UrlModel loaded = UrlModel::load(path);
        loaded.save(path);
        UrlModel reloaded = UrlModel::load(path);
        auto p1 = loaded.params();
        auto p2 = reloaded.params();
        for (std::size_t i = 0; i < p1.size(); ++i) {
            CHECK(std::equal(p1[i].data().begin(), p1[i].data().end(), p2[i].data().begin()));
        }
        CHECK(loaded.score(corpus[0].url) == reloaded.score(corpus[0].url));
        std::filesystem::remove(path);
    }
}

TEST_CASE("bin_scores fixtures and properties") {
    SUBCASE("published row scores bin to (2,1,0,2)") {
        const double scores[] = {0.001, 0.043, 0.315, 0.997, 0.999};
        const auto hist = bin_scores(scores);
        CHECK(hist.counts[0] == 2);
        CHECK(hist.counts[1] == 1);
        CHECK(hist.counts[2] == 0);
        CHECK(hist.counts[3] == 2);
    }

    SUBCASE("all zeros land in the lowest bin") {
        const std::vector<double> scores(17, 0.0);
        const auto hist = bin_scores(scores);
        CHECK(hist.counts[0] == 17);
        CHECK(hist.total() == 17);
    }

    SUBCASE("bin boundaries: lower edge inclusive, 1.0 in the top bin") {
        const double scores[] = {0.0, 0.25, 0.5, 0.75, 1.0};
        const auto hist = bin_scores(scores);
        CHECK(hist.counts[0] == 1);
        CHECK(hist.counts[1] == 1);
        CHECK(hist.counts[2] == 1);
        CHECK(hist.counts[3] == 2);
    }

    SUBCASE("10k uniform scores stay within 3 sigma of 2500 per bin") {
        Rng rng(1);
        std::vector<double> scores(10000);
        for (auto& s : scores) s = rng.uniform();
        const auto hist = bin_scores(scores);
        const double sigma = std::sqrt(10000 * 0.25 * 0.75);
        for (long c : hist.counts) {
            CHECK(std::abs(static_cast<double>(c) - 2500.0) <= 3.0 * sigma);
        }
        CHECK(hist.total() == 10000);
    }

    SUBCASE("counts always sum to the input size") {
        Rng rng(2);
        for (int round = 0; round < 20; ++round) {
            std::vector<double> scores(static_cast<std::size_t>(rng.uniform_int(200)));
            for (auto& s : scores) s = rng.uniform();
            CHECK(bin_scores(scores).total() == static_cast<long>(scores.size()));
        }
    }

    SUBCASE("out-of-range scores are rejected") {
        const double bad[] = {1.2};
        CHECK_THROWS_AS(bin_scores(bad), DataError);
        const double worse[] = {-0.1};
        CHECK_THROWS_AS(bin_scores(worse), DataError);
    }
}

TEST_CASE("classify_url threshold rule") {
    CHECK(classify_url(0.997, 0.5) == Label::phishing);
    CHECK(classify_url(0.315, 0.5) == Label::legitimate);
    CHECK(classify_url(0.5, 0.5) == Label::legitimate);  // strict inequality
    CHECK_THROWS_AS(classify_url(0.5, 0.0), ConfigError);
    CHECK_THROWS_AS(classify_url(0.5, 1.0), ConfigError);
}
