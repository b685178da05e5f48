// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "phishdetect/url_model.hpp"
#include "testutil.hpp"

using nlohmann::json;
using testutil::TempDir;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const TempDir& dir, const std::string& args) {
    const std::string out_file = dir.file("cli-stdout.txt").string();
    const std::string err_file = dir.file("cli-stderr.txt").string();
    const std::string cmd =
        std::string(PHISHDETECT_BIN) + " " + args + " >" + out_file + " 2>" + err_file;
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = testutil::read_text(out_file);
    result.err = testutil::read_text(err_file);
    return result;
}

}  // namespace

TEST_CASE("usage errors exit with the config code") {
    TempDir dir;
    CHECK(run_cli(dir, "train url").exit_code == 2);        // missing required --data
    CHECK(run_cli(dir, "no-such-command").exit_code == 2);
    CHECK(run_cli(dir, "--help").exit_code == 0);
}

TEST_CASE("missing dataset path is an io error naming the path") {
    TempDir dir;
    const auto result =
        run_cli(dir, "train url --data " + dir.file("absent.csv").string() + " --out " +
                         dir.file("m.pw").string());
    CHECK(result.exit_code == 3);
    CHECK(result.err.find("absent.csv") != std::string::npos);
}

TEST_CASE("synth outputs are byte-reproducible") {
    TempDir dir;
    const std::string a = dir.file("a.csv").string();
    const std::string b = dir.file("b.csv").string();
    CHECK(run_cli(dir, "synth urls --out " + a + " --per-class 20 --seed 9").exit_code == 0);
    CHECK(run_cli(dir, "synth urls --out " + b + " --per-class 20 --seed 9").exit_code == 0);
    CHECK(testutil::files_equal(a, b));

    CHECK(run_cli(dir, "synth pages --out-dir " + dir.file("p1").string() +
                           " --brands 2 --pages-per-brand 2 --seed 4 --image-size 32")
              .exit_code == 0);
    CHECK(run_cli(dir, "synth pages --out-dir " + dir.file("p2").string() +
                           " --brands 2 --pages-per-brand 2 --seed 4 --image-size 32")
              .exit_code == 0);
    CHECK(testutil::files_equal(dir.file("p1") / "manifest.csv", dir.file("p2") / "manifest.csv"));
    CHECK(testutil::files_equal(dir.file("p1") / "annotations.csv",
                                dir.file("p2") / "annotations.csv"));
    CHECK(testutil::files_equal(dir.file("p1") / "acmebank-0.ppm",
                                dir.file("p2") / "acmebank-0.ppm"));
}

TEST_CASE("url training through the cli") {
    TempDir dir;
    const std::string data = dir.file("urls.csv").string();
    REQUIRE(run_cli(dir, "synth urls --out " + data + " --per-class 16 --seed 5").exit_code == 0);

    SUBCASE("zero epochs writes the initialization, exit 0") {
        const std::string model = dir.file("m0.pw").string();
        const auto result = run_cli(dir, "train url --data " + data + " --out " + model +
                                             " --variant original --epochs 0 --max-len 48");
        CHECK(result.exit_code == 0);
        const auto loaded = phishdetect::UrlModel::load(model);
        CHECK(loaded.config.epochs == 0);
    }

    SUBCASE("same seed twice gives byte-identical archives and logs") {
        const std::string m1 = dir.file("m1.pw").string();
        const std::string m2 = dir.file("m2.pw").string();
        const std::string args = " --data " + data +
                                 " --variant original --epochs 1 --max-len 48 --seed 3";
        CHECK(run_cli(dir, "train url" + args + " --out " + m1).exit_code == 0);
        CHECK(run_cli(dir, "train url" + args + " --out " + m2).exit_code == 0);
        CHECK(testutil::files_equal(m1, m2));
        CHECK(testutil::files_equal(m1 + ".log.jsonl", m2 + ".log.jsonl"));
    }

    SUBCASE("eval url emits per-class histograms whose counts sum to the input") {
        const std::string model = dir.file("m.pw").string();
        REQUIRE(run_cli(dir, "train url --data " + data + " --out " + model +
                                 " --variant original --epochs 1 --max-len 48")
                    .exit_code == 0);
        const std::string out_dir = dir.file("eval").string();
        CHECK(run_cli(dir, "eval url --model " + model + " --data " + data + " --out-dir " +
                               out_dir)
                  .exit_code == 0);
        const std::string hist =
            testutil::read_text(dir.file("eval") / "histogram_phishing.csv");
        CHECK(hist.find("bin,lower,upper,count") != std::string::npos);
        long total = 0;
        std::istringstream lines(hist);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty() || line[0] == '#' || line[0] == 'b') {
                continue;
            }
            total += std::stol(line.substr(line.rfind(',') + 1));
        }
        CHECK(total == 16);
    }
}

TEST_CASE("combine reproduces the five published verdicts") {
    TempDir dir;
    const json signals = json::array({
        {{"url", "https://sites.google.com/view/yaho000/home"},
         {"url_score", 0.001},
         {"logo_detections", {{{"brand", "bt"}, {"prob", 0.23}}}},
         {"similarity_matches", {{{"page_id", "g"}, {"brand", "google"}, {"distance", 2.4}}}}},
        {{"url", "https://sites.google.com/view/fgjdfghduhdxuxu/home"},
         {"url_score", 0.043},
         {"logo_detections", {{{"brand", "bt"}, {"prob", 0.23}}}},
         {"similarity_matches", {{{"page_id", "g"}, {"brand", "google"}, {"distance", 2.6}}}}},
        {{"url", "https://dfghhgdsdf.weebly.com"},
         {"url_score", 0.997},
         {"logo_detections", {{{"brand", "bt"}, {"prob", 0.94}}}},
         {"similarity_matches", {{{"page_id", "b"}, {"brand", "bt"}, {"distance", 1.9}}}}},
        {{"url", "https://ofifice.weebly.com"},
         {"url_score", 0.315},
         {"logo_detections", {{{"brand", "bt"}, {"prob", 0.98}}}},
         {"similarity_matches", {{{"page_id", "b"}, {"brand", "bt"}, {"distance", 2.2}}}}},
        {{"url", "https://dhmpxmsb6lk.typeform.com/to/h99lvret"},
         {"url_score", 0.999},
         {"logo_detections", {{{"brand", "dhl"}, {"prob", 0.83}}}},
         {"similarity_matches",
          {{{"page_id", "f"}, {"brand", "facebook"}, {"distance", 3.1}}}},
         {"brand_distances", {{"dhl", {{"distance", 6.92}, {"rank", 147}}}}}},
    });
    testutil::write_text(dir.file("signals.json"), signals.dump());

    const std::string out = dir.file("verdicts.json").string();
    const auto result = run_cli(dir, "combine --signals " + dir.file("signals.json").string() +
                                         " --out " + out);
    REQUIRE(result.exit_code == 0);
    const json verdicts = json::parse(testutil::read_text(out));
    REQUIRE(verdicts.size() == 5);
    const char* expected[] = {"low", "low", "high", "medium", "medium"};
    for (int i = 0; i < 5; ++i) {
        CHECK(verdicts[static_cast<std::size_t>(i)].at("is_phishing") == true);
        CHECK(verdicts[static_cast<std::size_t>(i)].at("confidence") ==
              expected[static_cast<std::size_t>(i)]);
    }
    CHECK(verdicts[4].at("cross_brand").at("distance") == 6.92);
    CHECK(verdicts[4].at("cross_brand").at("rank") == 147);
}

TEST_CASE("report aggregates verdict files") {
    TempDir dir;
    const auto run = dir.file("run");
    std::filesystem::create_directories(run);

    SUBCASE("five published verdicts count as one high, two medium, two low") {
        const char* grades[] = {"low", "low", "high", "medium", "medium"};
        const char* brands[] = {"google", "google", "bt", "bt", "dhl"};
        for (int i = 0; i < 5; ++i) {
            const json v = {{"url", "https://x" + std::to_string(i)},
                            {"is_phishing", true},
                            {"confidence", grades[i]},
                            {"brand", brands[i]}};
            testutil::write_text(run / ("v" + std::to_string(i) + ".json"), v.dump());
        }
        const auto result = run_cli(dir, "report --run-dir " + run.string());
        CHECK(result.exit_code == 0);
        const std::string csv = testutil::read_text(run / "report.csv");
        CHECK(csv.find("confidence_high,1") != std::string::npos);
        CHECK(csv.find("confidence_medium,2") != std::string::npos);
        CHECK(csv.find("confidence_low,2") != std::string::npos);
        CHECK(csv.find("total,5") != std::string::npos);

        // Per-brand rows sum to the phishing total.
        CHECK(csv.find("brand_google,2") != std::string::npos);
        CHECK(csv.find("brand_bt,2") != std::string::npos);
        CHECK(csv.find("brand_dhl,1") != std::string::npos);
        CHECK(csv.find("phishing,5") != std::string::npos);
    }

    SUBCASE("empty verdict set gives an all-zero summary with exit 0") {
        const auto result = run_cli(dir, "report --run-dir " + run.string());
        CHECK(result.exit_code == 0);
        const std::string csv = testutil::read_text(run / "report.csv");
        CHECK(csv.find("total,0") != std::string::npos);
    }

    SUBCASE("missing run directory is an io error") {
        CHECK(run_cli(dir, "report --run-dir " + dir.file("nope").string()).exit_code == 3);
    }
}

TEST_CASE("detect handles corrupt archives without emitting a verdict") {
    TempDir dir;
    testutil::write_text(dir.file("broken.pw"), "PHISHWEIGHTS 1\nkind url-lstm\nend\nxxxx");
    const auto result = run_cli(dir, "detect --url https://x.test --url-model " +
                                         dir.file("broken.pw").string());
    CHECK(result.exit_code == 4);
    CHECK(result.out.find("is_phishing") == std::string::npos);
}

TEST_CASE("detect with a url alone yields at most low confidence") {
    TempDir dir;
    const std::string data = dir.file("urls.csv").string();
    REQUIRE(run_cli(dir, "synth urls --out " + data + " --per-class 16 --seed 5").exit_code == 0);
    const std::string model = dir.file("m.pw").string();
    REQUIRE(run_cli(dir, "train url --data " + data + " --out " + model +
                             " --variant original --epochs 2 --max-len 48")
                .exit_code == 0);

    const auto result = run_cli(
        dir, "detect --url https://qzxkvbnmrp.weebly.com/x9k2 --url-model " + model);
    REQUIRE(result.exit_code == 0);
    const json verdict = json::parse(result.out);
    const std::string confidence = verdict.at("confidence");
    CHECK((confidence == "low" || confidence == "none"));
    CHECK(verdict.at("votes").at("logo").at("empty") == true);
    CHECK(verdict.at("votes").at("similarity").at("empty") == true);
    CHECK(verdict.contains("note"));
}
