// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface for the phishing-detection pipeline: synthetic
// corpus generation, per-model training and evaluation, gallery builds,
// end-to-end detection, signal-file combination, and run reports.
//
// Exit codes: 0 success, 2 config/usage, 3 I/O, 4 data contract,
// 5 numeric divergence. Detection outcome is data, never an exit status.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "phishdetect/combiner.hpp"
#include "phishdetect/corpus.hpp"
#include "phishdetect/detection_eval.hpp"
#include "phishdetect/logo_model.hpp"
#include "phishdetect/similarity.hpp"
#include "phishdetect/synth.hpp"
#include "phishdetect/url_model.hpp"
#include "phishdetect/weights.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace phishdetect;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitData = 4;
constexpr int kExitDivergence = 5;

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Reproducibility header: resolved command, parameters, and input
// checksums. Rerunning with these values reproduces each output file byte
// for byte (no timestamps, sorted keys).
json make_run_header(const std::string& command, json params,
                     const std::vector<std::pair<std::string, fs::path>>& inputs) {
    json header;
    header["command"] = command;
    header["params"] = std::move(params);
    json in = json::object();
    for (const auto& [name, path] : inputs) {
        in[name] = {{"path", path.string()}, {"checksum", hex64(file_checksum(path))}};
    }
    header["inputs"] = in;
    header["format_version"] = 1;
    return header;
}

std::string csv_header_comment(const json& run_header) {
    return "repro " + run_header.dump();
}

// Thresholds resolved from defaults, then config file, then flags.
struct Thresholds {
    double url = 0.5;
    double logo = 0.25;
    std::optional<double> sim;  // unset: take the gallery's calibrated value
};

struct GlobalOptions {
    std::string config_path;
    Thresholds thresholds;
    std::optional<double> flag_theta_url, flag_theta_logo, flag_theta_sim;

    void resolve() {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                throw IoError("cannot open config file: " + config_path);
            }
            json cfg;
            try {
                in >> cfg;
            } catch (const json::exception& e) {
                throw ConfigError("bad config file " + config_path + ": " + e.what());
            }
            if (cfg.contains("theta_url")) thresholds.url = cfg["theta_url"].get<double>();
            if (cfg.contains("theta_logo")) thresholds.logo = cfg["theta_logo"].get<double>();
            if (cfg.contains("theta_sim")) thresholds.sim = cfg["theta_sim"].get<double>();
        }
        if (flag_theta_url) thresholds.url = *flag_theta_url;
        if (flag_theta_logo) thresholds.logo = *flag_theta_logo;
        if (flag_theta_sim) thresholds.sim = *flag_theta_sim;
    }

    json to_json() const {
        json j;
        j["theta_url"] = thresholds.url;
        j["theta_logo"] = thresholds.logo;
        if (thresholds.sim) j["theta_sim"] = *thresholds.sim;
        return j;
    }
};

void require_exists(const fs::path& path, const char* what) {
    if (!fs::exists(path)) {
        throw IoError(std::string(what) + " does not exist: " + path.string());
    }
}

std::vector<PageSample> load_pages(const fs::path& manifest_path, int input_size,
                                   std::vector<RejectEntry>* rejects_out = nullptr) {
    require_exists(manifest_path, "manifest");
    const Manifest manifest = load_manifest(manifest_path);
    if (rejects_out) {
        *rejects_out = manifest.rejects;
    }
    std::vector<PageSample> pages;
    const fs::path base = manifest_path.parent_path();
    for (const auto& rec : manifest.records) {
        if (rec.kind != "screenshot") {
            continue;
        }
        ImageTensor img = read_ppm(base / rec.payload);
        pages.push_back({rec.id, rec.brand, bilinear_resize(img, input_size, input_size)});
    }
    if (pages.empty()) {
        throw DataError("manifest holds no screenshot records: " + manifest_path.string());
    }
    return pages;
}

void write_rejects_if_any(const fs::path& out, std::span<const RejectEntry> rejects) {
    if (!rejects.empty()) {
        save_rejects(out, rejects);
        std::cerr << rejects.size() << " rejected records itemized in " << out << "\n";
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

void cmd_synth_urls(const fs::path& out, int per_class, std::uint64_t seed) {
    const auto samples = synth_urls(per_class, seed);
    const json header = make_run_header(
        "synth urls", {{"per_class", per_class}, {"seed", seed}}, {});
    save_url_dataset(out, samples, csv_header_comment(header));
    std::cout << "wrote " << samples.size() << " samples to " << out << "\n";
}

void cmd_synth_pages(const fs::path& out_dir, int brand_count, int pages_per_brand,
                     std::uint64_t seed, int image_size) {
    fs::create_directories(out_dir);
    const auto brands = synth_brand_names(brand_count);
    const auto result = synth_pages(brands, pages_per_brand, seed, image_size);

    std::vector<ManifestRecord> records;
    for (const auto& page : result.pages) {
        const std::string file = page.id + ".ppm";
        write_ppm(out_dir / file, page.image);
        records.push_back({page.id, "screenshot", file, Label::legitimate, page.brand, "synth"});
    }
    const json header = make_run_header("synth pages",
                                        {{"brands", brand_count},
                                         {"pages_per_brand", pages_per_brand},
                                         {"seed", seed},
                                         {"image_size", image_size}},
                                        {});
    save_manifest(out_dir / "manifest.csv", records, csv_header_comment(header));
    save_annotations(out_dir / "annotations.csv", result.annotations,
                     csv_header_comment(header));
    std::cout << "wrote " << result.pages.size() << " pages to " << out_dir << "\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void write_epoch_log(const fs::path& path, const json& header, std::span<const EpochLog> log) {
    std::string out = json{{"repro", header}}.dump() + "\n";
    for (const auto& e : log) {
        out += json{{"epoch", e.epoch},
                    {"split", e.split},
                    {"loss", e.loss},
                    {"accuracy", e.accuracy}}
                   .dump() +
               "\n";
    }
    write_file_atomic(path, out);
}

void cmd_train_url(const fs::path& data, const fs::path& out, const std::string& variant,
                   std::optional<int> epochs, std::optional<int> max_len, std::uint64_t seed,
                   const fs::path& log_path) {
    require_exists(data, "dataset");
    UrlModelConfig cfg = UrlModelConfig::for_variant(variant);
    if (epochs) cfg.epochs = *epochs;
    if (max_len) cfg.max_len = *max_len;

    const UrlDataset ds = load_url_dataset(data);
    write_rejects_if_any(out.string() + ".rejects.jsonl", ds.rejects);
    if (ds.duplicates_removed > 0) {
        std::cerr << "deduplicated " << ds.duplicates_removed << " exact-duplicate urls\n";
    }

    std::vector<EpochLog> log;
    const UrlModel model = train_url_model(ds.samples, cfg, seed, &log);
    model.save(out);

    const json header = make_run_header("train url",
                                        {{"variant", variant},
                                         {"epochs", cfg.epochs},
                                         {"max_len", cfg.max_len},
                                         {"seed", seed}},
                                        {{"data", data}});
    write_epoch_log(log_path.empty() ? fs::path(out.string() + ".log.jsonl") : log_path, header,
                    log);
    if (!log.empty()) {
        const auto& last = log.back();
        std::cout << "final " << last.split << " loss " << last.loss << " accuracy "
                  << last.accuracy << "\n";
    }
    std::cout << "wrote model to " << out << "\n";
}

void cmd_train_sim(const fs::path& data, const fs::path& out, int epochs,
                   const std::string& strategy, std::uint64_t seed, const fs::path& log_path) {
    SimilarityConfig cfg;
    std::vector<RejectEntry> rejects;
    const auto pages = load_pages(data, cfg.input_size, &rejects);
    write_rejects_if_any(out.string() + ".rejects.jsonl", rejects);

    const TripletStrategy strat = strategy == "hard-negative" ? TripletStrategy::hard_negative
                                                              : TripletStrategy::uniform;
    std::vector<double> losses;
    SimilarityModel model = SimilarityModel::init(cfg, seed);
    model = train_similarity(model, pages, epochs, seed, strat, &losses);
    model.save(out);

    const json header = make_run_header(
        "train sim", {{"epochs", epochs}, {"strategy", strategy}, {"seed", seed}},
        {{"data", data}});
    std::string log_text = json{{"repro", header}}.dump() + "\n";
    for (std::size_t i = 0; i < losses.size(); ++i) {
        log_text += json{{"epoch", i + 1}, {"split", "train"}, {"loss", losses[i]}}.dump() + "\n";
    }
    write_file_atomic(log_path.empty() ? fs::path(out.string() + ".log.jsonl") : log_path,
                      log_text);
    std::cout << "wrote model to " << out << "\n";
}

std::vector<LogoSample> build_logo_samples(std::span<const PageSample> pages,
                                           const AnnotationSet& annotations,
                                           std::span<const std::string> brands) {
    std::map<std::string, std::vector<LogoTarget>> targets_by_image;
    for (const auto& a : annotations.annotations) {
        const auto it = std::find(brands.begin(), brands.end(), a.brand);
        if (it == brands.end()) {
            throw DataError("annotation brand '" + a.brand + "' missing from the brand list");
        }
        targets_by_image[a.image_id].push_back(
            {static_cast<int>(it - brands.begin()), a.normalized});
    }
    std::vector<LogoSample> samples;
    for (const auto& p : pages) {
        LogoSample s;
        s.id = p.id;
        s.image = p.image;
        auto it = targets_by_image.find(p.id);
        if (it != targets_by_image.end()) {
            s.targets = it->second;
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

void cmd_train_logo(const fs::path& data, const fs::path& annotations_path, const fs::path& out,
                    const fs::path& from_model, int frozen_steps, int full_steps,
                    std::uint64_t seed, const fs::path& log_path) {
    require_exists(annotations_path, "annotations");
    const AnnotationSet annotations = load_annotations(annotations_path);
    write_rejects_if_any(out.string() + ".rejects.jsonl", annotations.rejects);

    std::set<std::string> brand_set;
    for (const auto& a : annotations.annotations) {
        brand_set.insert(a.brand);
    }

    LogoModel model = [&] {
        if (!from_model.empty()) {
            require_exists(from_model, "base model");
            LogoModel base = LogoModel::load(from_model);
            std::vector<std::string> merged = base.config.brands;
            for (const auto& b : brand_set) {
                if (std::find(merged.begin(), merged.end(), b) == merged.end()) {
                    merged.push_back(b);
                }
            }
            return head_surgery(base, merged, seed);
        }
        LogoConfig cfg;
        cfg.brands.assign(brand_set.begin(), brand_set.end());
        cfg.grid.classes = static_cast<int>(cfg.brands.size());
        return LogoModel::init(cfg, seed);
    }();

    const auto pages = load_pages(data, model.config.input_size);
    const auto samples = build_logo_samples(pages, annotations, model.config.brands);

    std::vector<TrainPhase> schedule;
    if (frozen_steps > 0) {
        schedule.push_back({FreezePhase::frozen_backbone, frozen_steps});
    }
    if (full_steps > 0) {
        schedule.push_back({FreezePhase::full, full_steps});
    }
    std::vector<StepLog> log;
    model = train_logo(model, samples, schedule, seed, &log);
    model.save(out);

    const json header = make_run_header("train logo",
                                        {{"frozen_steps", frozen_steps},
                                         {"full_steps", full_steps},
                                         {"seed", seed},
                                         {"from", from_model.string()}},
                                        {{"data", data}, {"annotations", annotations_path}});
    std::string log_text = json{{"repro", header}}.dump() + "\n";
    for (const auto& e : log) {
        log_text += json{{"phase", e.phase_index}, {"step", e.step}, {"loss", e.loss}}.dump() +
                    "\n";
    }
    write_file_atomic(log_path.empty() ? fs::path(out.string() + ".log.jsonl") : log_path,
                      log_text);
    std::cout << "wrote model to " << out << "\n";
}

// ---------------------------------------------------------------------------
// gallery
// ---------------------------------------------------------------------------

void cmd_gallery_build(const fs::path& model_path, const fs::path& data, const fs::path& out) {
    require_exists(model_path, "model archive");
    const SimilarityModel model = SimilarityModel::load(model_path);
    const auto pages = load_pages(data, model.config.input_size);
    BrandGallery gallery = build_gallery(model, pages);
    gallery.save(out);
    std::cout << "gallery of " << gallery.size() << " pages";
    if (gallery.theta_calibrated) {
        std::cout << ", calibrated distance threshold " << *gallery.theta_calibrated
                  << " (reference " << gallery.theta_reference << ")";
    }
    std::cout << "\n"
              << "wrote gallery to " << out << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

void cmd_eval_url(const fs::path& model_path, const fs::path& data, const fs::path& out_dir) {
    require_exists(model_path, "model archive");
    require_exists(data, "dataset");
    fs::create_directories(out_dir);
    const UrlModel model = UrlModel::load(model_path);
    const UrlDataset ds = load_url_dataset(data);

    const json header = make_run_header("eval url", json::object(),
                                        {{"model", model_path}, {"data", data}});
    std::string scores_csv = "# " + csv_header_comment(header) + "\nurl,label,score\n";
    std::map<Label, std::vector<double>> scores;
    for (const auto& s : ds.samples) {
        const double score = model.score(s.url);
        scores[s.label].push_back(score);
        const std::string fields[] = {s.url, label_str(s.label), format_double(score)};
        scores_csv += csv_join(fields) + "\n";
    }
    write_file_atomic(out_dir / "scores.csv", scores_csv);

    const char* edges[] = {"0.00", "0.25", "0.50", "0.75"};
    const char* uppers[] = {"0.25", "0.50", "0.75", "1.00"};
    for (const auto& [label, values] : scores) {
        const ScoreHistogram hist = bin_scores(values);
        std::string csv = "# " + csv_header_comment(header) + "\nbin,lower,upper,count\n";
        for (int b = 0; b < 4; ++b) {
            csv += std::to_string(b) + "," + edges[b] + "," + uppers[b] + "," +
                   std::to_string(hist.counts[static_cast<std::size_t>(b)]) + "\n";
        }
        write_file_atomic(out_dir / ("histogram_" + label_str(label) + ".csv"), csv);
    }
    std::cout << "wrote url evaluation to " << out_dir << "\n";
}

void cmd_eval_sim(const fs::path& model_path, const fs::path& gallery_path, const fs::path& data,
                  const fs::path& out_dir) {
    require_exists(model_path, "model archive");
    require_exists(gallery_path, "gallery archive");
    fs::create_directories(out_dir);
    const SimilarityModel model = SimilarityModel::load(model_path);
    const BrandGallery gallery = BrandGallery::load(gallery_path);
    const auto pages = load_pages(data, model.config.input_size);

    const int ks[] = {1, 5, 10};
    long correct[3] = {0, 0, 0};
    long total = 0;
    for (const auto& page : pages) {
        if (page.brand.empty()) {
            continue;
        }
        total += 1;
        const auto matches = rank_gallery(model.embed(page.image), gallery, 10);
        for (int ki = 0; ki < 3; ++ki) {
            for (const auto& m : matches) {
                if (m.rank <= ks[ki] && m.brand == page.brand) {
                    correct[ki] += 1;
                    break;
                }
            }
        }
    }
    if (total == 0) {
        throw DataError("no branded screenshot records to evaluate");
    }

    const json header = make_run_header(
        "eval sim", json::object(),
        {{"model", model_path}, {"gallery", gallery_path}, {"data", data}});
    std::string csv = "# " + csv_header_comment(header) + "\nk,correct,total,accuracy\n";
    for (int ki = 0; ki < 3; ++ki) {
        csv += std::to_string(ks[ki]) + "," + std::to_string(correct[ki]) + "," +
               std::to_string(total) + "," +
               format_double(static_cast<double>(correct[ki]) / static_cast<double>(total)) +
               "\n";
    }
    write_file_atomic(out_dir / "topk_accuracy.csv", csv);
    std::cout << "top-1 accuracy "
              << static_cast<double>(correct[0]) / static_cast<double>(total) << " over " << total
              << " pages\n"
              << "wrote similarity evaluation to " << out_dir << "\n";
}

void write_logo_eval(const fs::path& out_dir, const json& header,
                     const DetectorEvaluation& eval) {
    std::string pr = "# " + csv_header_comment(header) + "\nbrand,threshold,precision,recall\n";
    for (const auto& [brand, curve] : eval.curves) {
        for (const auto& p : curve.points) {
            const std::string fields[] = {brand, format_double(p.threshold),
                                          format_double(p.precision), format_double(p.recall)};
            pr += csv_join(fields) + "\n";
        }
    }
    write_file_atomic(out_dir / "pr_curve.csv", pr);

    std::string auc_csv = "# " + csv_header_comment(header) + "\nbrand,auc\n";
    for (const auto& [brand, value] : eval.auc_per_brand) {
        const std::string fields[] = {brand, format_double(value)};
        auc_csv += csv_join(fields) + "\n";
    }
    write_file_atomic(out_dir / "auc.csv", auc_csv);
}

void cmd_eval_logo(const fs::path& model_path, const fs::path& data,
                   const fs::path& annotations_path, const fs::path& out_dir,
                   const fs::path& baseline_path, double decode_threshold) {
    require_exists(model_path, "model archive");
    require_exists(annotations_path, "annotations");
    fs::create_directories(out_dir);
    const LogoModel model = LogoModel::load(model_path);
    const AnnotationSet annotations = load_annotations(annotations_path);
    const auto pages = load_pages(data, model.config.input_size);
    const auto samples = build_logo_samples(pages, annotations, model.config.brands);

    std::vector<std::pair<std::string, fs::path>> inputs = {
        {"model", model_path}, {"data", data}, {"annotations", annotations_path}};
    if (!baseline_path.empty()) {
        inputs.push_back({"baseline", baseline_path});
    }
    const json header =
        make_run_header("eval logo", {{"decode_threshold", decode_threshold}}, inputs);

    const DetectorEvaluation eval = evaluate_detector(model, samples, decode_threshold);
    write_logo_eval(out_dir, header, eval);
    std::cout << "mean auc " << eval.mean_auc << " over " << eval.auc_per_brand.size()
              << " brands\n";

    if (!baseline_path.empty()) {
        const LogoModel baseline = LogoModel::load(baseline_path);
        const auto base_samples = build_logo_samples(
            load_pages(data, baseline.config.input_size), annotations, model.config.brands);
        // The baseline may know fewer brands; evaluate it on what it knows.
        std::vector<LogoSample> filtered;
        for (const auto& s : base_samples) {
            LogoSample keep;
            keep.id = s.id;
            keep.image = s.image;
            for (const auto& t : s.targets) {
                const std::string& brand = model.config.brands[static_cast<std::size_t>(t.cls)];
                const auto it = std::find(baseline.config.brands.begin(),
                                          baseline.config.brands.end(), brand);
                if (it != baseline.config.brands.end()) {
                    keep.targets.push_back(
                        {static_cast<int>(it - baseline.config.brands.begin()), t.box});
                }
            }
            filtered.push_back(std::move(keep));
        }
        const DetectorEvaluation base_eval =
            evaluate_detector(baseline, filtered, decode_threshold);
        const AucDelta delta = auc_delta(eval.auc_per_brand, base_eval.auc_per_brand);

        std::string csv = "# " + csv_header_comment(header) + "\nbrand,auc_new,auc_old,delta\n";
        for (const auto& [brand, d] : delta.delta) {
            const std::string fields[] = {brand, format_double(eval.auc_per_brand.at(brand)),
                                          format_double(base_eval.auc_per_brand.at(brand)),
                                          format_double(d)};
            csv += csv_join(fields) + "\n";
        }
        write_file_atomic(out_dir / "auc_delta.csv", csv);

        std::string summary = "# " + csv_header_comment(header) +
                              "\nincreases,decreases,unchanged,mean_increase,mean_decrease\n";
        summary += std::to_string(delta.increases) + "," + std::to_string(delta.decreases) +
                   "," + std::to_string(delta.unchanged) + "," +
                   format_double(delta.mean_increase) + "," +
                   format_double(delta.mean_decrease) + "\n";
        write_file_atomic(out_dir / "auc_delta_summary.csv", summary);
        std::cout << "auc deltas: " << delta.increases << " up, " << delta.decreases
                  << " down\n";
    }
    std::cout << "wrote logo evaluation to " << out_dir << "\n";
}

// ---------------------------------------------------------------------------
// detect / combine / report
// ---------------------------------------------------------------------------

void emit_verdict(const json& record, const fs::path& out) {
    std::cout << record.dump() << "\n";
    if (!out.empty()) {
        write_file_atomic(out, record.dump(2) + "\n");
    }
}

void cmd_detect(const std::string& url, const fs::path& screenshot,
                const fs::path& url_model_path, const fs::path& logo_model_path,
                const fs::path& sim_model_path, const fs::path& gallery_path,
                const GlobalOptions& global, const fs::path& out) {
    require_exists(url_model_path, "url model archive");
    const UrlModel url_model = UrlModel::load(url_model_path);

    ModelSignals signals;
    signals.url = url;
    signals.url_score = url_model.score(url);

    std::vector<std::pair<std::string, fs::path>> inputs = {{"url_model", url_model_path}};
    double theta_sim = global.thresholds.sim.value_or(8.0);
    bool screenshot_missing = screenshot.empty();

    if (!screenshot_missing) {
        require_exists(screenshot, "screenshot");
        const ImageTensor raw_image = read_ppm(screenshot);
        if (!logo_model_path.empty()) {
            require_exists(logo_model_path, "logo model archive");
            const LogoModel logo_model = LogoModel::load(logo_model_path);
            signals.logo_detections =
                logo_model.detect(bilinear_resize(raw_image, logo_model.config.input_size,
                                                  logo_model.config.input_size),
                                  global.thresholds.logo);
            inputs.push_back({"logo_model", logo_model_path});
        }
        if (!sim_model_path.empty() && !gallery_path.empty()) {
            require_exists(sim_model_path, "similarity model archive");
            require_exists(gallery_path, "gallery archive");
            const SimilarityModel sim_model = SimilarityModel::load(sim_model_path);
            auto gallery = std::make_shared<BrandGallery>(BrandGallery::load(gallery_path));
            if (!global.thresholds.sim) {
                theta_sim = gallery->theta_calibrated.value_or(gallery->theta_reference);
            }
            auto embedding = std::make_shared<std::vector<double>>(
                sim_model.embed(bilinear_resize(raw_image, sim_model.config.input_size,
                                                sim_model.config.input_size)));
            signals.similarity_matches =
                rank_gallery(*embedding, *gallery, static_cast<int>(gallery->size()));
            signals.brand_distance =
                [gallery, embedding](const std::string& brand) -> std::optional<BrandDistanceInfo> {
                if (!gallery->has_brand(brand)) {
                    return std::nullopt;
                }
                const auto [distance, rank] = brand_distance(*embedding, *gallery, brand);
                return BrandDistanceInfo{distance, rank};
            };
            inputs.push_back({"sim_model", sim_model_path});
            inputs.push_back({"gallery", gallery_path});
        }
    }

    CombinerConfig combiner_cfg{global.thresholds.url, global.thresholds.logo, theta_sim};
    const Verdict verdict = combine(signals, combiner_cfg);

    json record = verdict_to_json(url, verdict);
    if (screenshot_missing) {
        record["note"] = "no screenshot supplied; logo and similarity votes are neutral";
    }
    json params = global.to_json();
    params["theta_sim"] = theta_sim;
    record["repro"] = make_run_header("detect", params, inputs);
    emit_verdict(record, out);
}

ModelSignals signals_from_json(const json& j) {
    ModelSignals s;
    s.url = j.value("url", "");
    s.url_score = j.at("url_score").get<double>();
    if (j.contains("logo_detections")) {
        for (const auto& d : j.at("logo_detections")) {
            Detection det;
            det.brand = d.at("brand").get<std::string>();
            det.prob = d.at("prob").get<double>();
            if (d.contains("box")) {
                det.box = BoundingBox{d["box"].value("cx", 0.5), d["box"].value("cy", 0.5),
                                      d["box"].value("w", 0.1), d["box"].value("h", 0.1)};
            } else {
                det.box = BoundingBox{0.5, 0.5, 0.1, 0.1};
            }
            s.logo_detections.push_back(std::move(det));
        }
    }
    if (j.contains("similarity_matches")) {
        int rank = 0;
        for (const auto& m : j.at("similarity_matches")) {
            MatchResult match;
            match.page_id = m.value("page_id", "");
            match.brand = m.at("brand").get<std::string>();
            match.distance = m.at("distance").get<double>();
            match.rank = m.value("rank", ++rank);
            rank = match.rank;
            s.similarity_matches.push_back(std::move(match));
        }
    }
    if (j.contains("brand_distances")) {
        const auto table = std::make_shared<std::map<std::string, BrandDistanceInfo>>();
        for (const auto& [brand, info] : j.at("brand_distances").items()) {
            (*table)[brand] = {info.at("distance").get<double>(), info.at("rank").get<int>()};
        }
        s.brand_distance = [table](const std::string& brand) -> std::optional<BrandDistanceInfo> {
            const auto it = table->find(brand);
            if (it == table->end()) {
                return std::nullopt;
            }
            return it->second;
        };
    }
    return s;
}

void cmd_combine(const fs::path& signals_path, const GlobalOptions& global, const fs::path& out) {
    require_exists(signals_path, "signals file");
    std::ifstream in(signals_path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("bad signals file " + signals_path.string() + ": " + e.what());
    }

    const double theta_sim = global.thresholds.sim.value_or(8.0);
    CombinerConfig cfg{global.thresholds.url, global.thresholds.logo, theta_sim};
    json params = global.to_json();
    params["theta_sim"] = theta_sim;
    const json header = make_run_header("combine", params, {{"signals", signals_path}});

    auto run_one = [&](const json& one) {
        const ModelSignals s = signals_from_json(one);
        json record = verdict_to_json(s.url, combine(s, cfg));
        record["repro"] = header;
        return record;
    };

    if (doc.is_array()) {
        json records = json::array();
        for (const auto& one : doc) {
            records.push_back(run_one(one));
        }
        emit_verdict(records, out);
    } else {
        emit_verdict(run_one(doc), out);
    }
}

void cmd_report(const fs::path& run_dir, const fs::path& out_dir) {
    if (!fs::exists(run_dir) || !fs::is_directory(run_dir)) {
        throw IoError("run directory does not exist: " + run_dir.string());
    }
    std::map<std::string, long> by_confidence = {
        {"high", 0}, {"medium", 0}, {"low", 0}, {"none", 0}};
    std::map<std::string, long> phishing_by_brand;
    long total = 0;

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        if (entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    auto consume = [&](const json& record) {
        if (!record.is_object() || !record.contains("is_phishing") ||
            !record.contains("confidence")) {
            return;
        }
        total += 1;
        by_confidence[record.at("confidence").get<std::string>()] += 1;
        if (record.at("is_phishing").get<bool>()) {
            phishing_by_brand[record.value("brand", "(unresolved)")] += 1;
        }
    };
    for (const auto& file : files) {
        std::ifstream in(file);
        json record;
        try {
            in >> record;
        } catch (const json::exception&) {
            continue;  // not a verdict file
        }
        if (record.is_array()) {
            for (const auto& one : record) {
                consume(one);
            }
        } else {
            consume(record);
        }
    }

    long phishing_total = 0;
    for (const auto& [brand, count] : phishing_by_brand) {
        phishing_total += count;
    }

    std::ostringstream text;
    text << "verdicts: " << total << "\n";
    text << "phishing: " << phishing_total << "\n";
    for (const char* grade : {"high", "medium", "low", "none"}) {
        text << "  " << grade << ": " << by_confidence[grade] << "\n";
    }
    text << "per-brand phishing counts:\n";
    for (const auto& [brand, count] : phishing_by_brand) {
        text << "  " << brand << ": " << count << "\n";
    }
    std::cout << text.str();

    const fs::path dest = out_dir.empty() ? run_dir : out_dir;
    fs::create_directories(dest);
    const json header = make_run_header("report", {{"run_dir", run_dir.string()}}, {});
    std::string csv = "# " + csv_header_comment(header) + "\nmetric,value\n";
    csv += "total," + std::to_string(total) + "\n";
    csv += "phishing," + std::to_string(phishing_total) + "\n";
    for (const char* grade : {"high", "medium", "low", "none"}) {
        csv += std::string("confidence_") + grade + "," +
               std::to_string(by_confidence[grade]) + "\n";
    }
    for (const auto& [brand, count] : phishing_by_brand) {
        const std::string fields[] = {"brand_" + brand, std::to_string(count)};
        csv += csv_join(fields) + "\n";
    }
    write_file_atomic(dest / "report.csv", csv);
    write_file_atomic(dest / "report.txt", text.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cloud-phishing detection pipeline: URL, visual-similarity and logo models "
                 "with a graded verdict combiner"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--config", global.config_path, "JSON config file (threshold defaults)");
    app.add_option("--theta-url", global.flag_theta_url, "URL vote threshold");
    app.add_option("--theta-logo", global.flag_theta_logo, "logo vote threshold");
    app.add_option("--theta-sim", global.flag_theta_sim, "similarity distance threshold");

    std::function<void()> action;

    // synth ------------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate synthetic corpora");
    synth->require_subcommand(1);
    {
        auto* urls = synth->add_subcommand("urls", "Synthetic URL dataset");
        auto out = std::make_shared<std::string>("urls.csv");
        auto per_class = std::make_shared<int>(2000);
        auto seed = std::make_shared<std::uint64_t>(7);
        urls->add_option("--out", *out, "output CSV");
        urls->add_option("--per-class", *per_class, "samples per class");
        urls->add_option("--seed", *seed, "RNG seed");
        urls->callback([out, per_class, seed, &action] {
            action = [=] { cmd_synth_urls(*out, *per_class, *seed); };
        });

        auto* pages = synth->add_subcommand("pages", "Synthetic brand pages with logo boxes");
        auto out_dir = std::make_shared<std::string>("pages");
        auto brands = std::make_shared<int>(5);
        auto per_brand = std::make_shared<int>(20);
        auto pseed = std::make_shared<std::uint64_t>(7);
        auto image_size = std::make_shared<int>(64);
        pages->add_option("--out-dir", *out_dir, "output directory");
        pages->add_option("--brands", *brands, "brand count (max 8)");
        pages->add_option("--pages-per-brand", *per_brand, "pages per brand");
        pages->add_option("--seed", *pseed, "RNG seed");
        pages->add_option("--image-size", *image_size, "square page size in pixels");
        pages->callback([out_dir, brands, per_brand, pseed, image_size, &action] {
            action = [=] { cmd_synth_pages(*out_dir, *brands, *per_brand, *pseed, *image_size); };
        });
    }

    // train ------------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train a model");
    train->require_subcommand(1);
    {
        auto* url = train->add_subcommand("url", "Character-level URL scorer");
        auto data = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>("url.pw");
        auto variant = std::make_shared<std::string>("new-3");
        auto epochs = std::make_shared<std::optional<int>>();
        auto max_len = std::make_shared<std::optional<int>>();
        auto seed = std::make_shared<std::uint64_t>(7);
        auto log = std::make_shared<std::string>();
        url->add_option("--data", *data, "url CSV")->required();
        url->add_option("--out", *out, "output weight archive");
        url->add_option("--variant", *variant, "original|new-1|new-2|new-3");
        url->add_option("--epochs", *epochs, "override the variant's epoch count");
        url->add_option("--max-len", *max_len, "encoder length cap");
        url->add_option("--seed", *seed, "RNG seed");
        url->add_option("--log", *log, "training log path (JSONL)");
        url->callback([=, &action] {
            action = [=] { cmd_train_url(*data, *out, *variant, *epochs, *max_len, *seed, *log); };
        });

        auto* sim = train->add_subcommand("sim", "Triplet-embedding page matcher");
        auto sdata = std::make_shared<std::string>();
        auto sout = std::make_shared<std::string>("sim.pw");
        auto sepochs = std::make_shared<int>(15);
        auto strategy = std::make_shared<std::string>("uniform");
        auto sseed = std::make_shared<std::uint64_t>(7);
        auto slog = std::make_shared<std::string>();
        sim->add_option("--data", *sdata, "page manifest CSV")->required();
        sim->add_option("--out", *sout, "output weight archive");
        sim->add_option("--epochs", *sepochs, "training epochs");
        sim->add_option("--strategy", *strategy, "uniform|hard-negative");
        sim->add_option("--seed", *sseed, "RNG seed");
        sim->add_option("--log", *slog, "training log path (JSONL)");
        sim->callback([=, &action] {
            action = [=] { cmd_train_sim(*sdata, *sout, *sepochs, *strategy, *sseed, *slog); };
        });

        auto* logo = train->add_subcommand("logo", "Grid/anchor logo detector");
        auto ldata = std::make_shared<std::string>();
        auto lann = std::make_shared<std::string>();
        auto lout = std::make_shared<std::string>("logo.pw");
        auto lfrom = std::make_shared<std::string>();
        auto frozen = std::make_shared<int>(0);
        auto full = std::make_shared<int>(300);
        auto lseed = std::make_shared<std::uint64_t>(7);
        auto llog = std::make_shared<std::string>();
        logo->add_option("--data", *ldata, "page manifest CSV")->required();
        logo->add_option("--annotations", *lann, "logo annotation CSV")->required();
        logo->add_option("--out", *lout, "output weight archive");
        logo->add_option("--from", *lfrom, "base archive for transfer learning (head surgery)");
        logo->add_option("--frozen-steps", *frozen, "steps with the backbone frozen");
        logo->add_option("--full-steps", *full, "steps with all layers trainable");
        logo->add_option("--seed", *lseed, "RNG seed");
        logo->add_option("--log", *llog, "training log path (JSONL)");
        logo->callback([=, &action] {
            action = [=] {
                cmd_train_logo(*ldata, *lann, *lout, *lfrom, *frozen, *full, *lseed, *llog);
            };
        });
    }

    // gallery ----------------------------------------------------------------
    auto* gallery = app.add_subcommand("gallery", "Brand gallery operations");
    gallery->require_subcommand(1);
    {
        auto* build = gallery->add_subcommand("build", "Embed pages into a brand gallery");
        auto model = std::make_shared<std::string>();
        auto data = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>("gallery.pw");
        build->add_option("--model", *model, "similarity model archive")->required();
        build->add_option("--data", *data, "page manifest CSV")->required();
        build->add_option("--out", *out, "output gallery archive");
        build->callback([=, &action] {
            action = [=] { cmd_gallery_build(*model, *data, *out); };
        });
    }

    // eval -------------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Evaluate a model");
    eval->require_subcommand(1);
    {
        auto* url = eval->add_subcommand("url", "Score histogram per class");
        auto model = std::make_shared<std::string>();
        auto data = std::make_shared<std::string>();
        auto out_dir = std::make_shared<std::string>("eval-url");
        url->add_option("--model", *model, "url model archive")->required();
        url->add_option("--data", *data, "url CSV")->required();
        url->add_option("--out-dir", *out_dir, "output directory");
        url->callback([=, &action] {
            action = [=] { cmd_eval_url(*model, *data, *out_dir); };
        });

        auto* sim = eval->add_subcommand("sim", "Top-k brand match accuracy");
        auto smodel = std::make_shared<std::string>();
        auto sgallery = std::make_shared<std::string>();
        auto sdata = std::make_shared<std::string>();
        auto sout = std::make_shared<std::string>("eval-sim");
        sim->add_option("--model", *smodel, "similarity model archive")->required();
        sim->add_option("--gallery", *sgallery, "gallery archive")->required();
        sim->add_option("--data", *sdata, "page manifest CSV")->required();
        sim->add_option("--out-dir", *sout, "output directory");
        sim->callback([=, &action] {
            action = [=] { cmd_eval_sim(*smodel, *sgallery, *sdata, *sout); };
        });

        auto* logo = eval->add_subcommand("logo", "Per-brand PR curves and AUC");
        auto lmodel = std::make_shared<std::string>();
        auto ldata = std::make_shared<std::string>();
        auto lann = std::make_shared<std::string>();
        auto lout = std::make_shared<std::string>("eval-logo");
        auto baseline = std::make_shared<std::string>();
        auto decode_thr = std::make_shared<double>(0.01);
        logo->add_option("--model", *lmodel, "logo model archive")->required();
        logo->add_option("--data", *ldata, "page manifest CSV")->required();
        logo->add_option("--annotations", *lann, "logo annotation CSV")->required();
        logo->add_option("--out-dir", *lout, "output directory");
        logo->add_option("--baseline", *baseline, "previous model for AUC deltas");
        logo->add_option("--decode-threshold", *decode_thr,
                         "probability floor for the PR sweep");
        logo->callback([=, &action] {
            action = [=] {
                cmd_eval_logo(*lmodel, *ldata, *lann, *lout, *baseline, *decode_thr);
            };
        });
    }

    // detect / combine / report ------------------------------------------------
    {
        auto* detect = app.add_subcommand("detect", "Run the full pipeline on one page");
        auto url = std::make_shared<std::string>();
        auto screenshot = std::make_shared<std::string>();
        auto url_model = std::make_shared<std::string>();
        auto logo_model = std::make_shared<std::string>();
        auto sim_model = std::make_shared<std::string>();
        auto gal = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        detect->add_option("--url", *url, "URL under test")->required();
        detect->add_option("--screenshot", *screenshot, "page screenshot (PPM)");
        detect->add_option("--url-model", *url_model, "url model archive")->required();
        detect->add_option("--logo-model", *logo_model, "logo model archive");
        detect->add_option("--sim-model", *sim_model, "similarity model archive");
        detect->add_option("--gallery", *gal, "gallery archive");
        detect->add_option("--out", *out, "verdict JSON output path");
        detect->callback([=, &global, &action] {
            action = [=, &global] {
                cmd_detect(*url, *screenshot, *url_model, *logo_model, *sim_model, *gal, global,
                           *out);
            };
        });

        auto* combine_cmd = app.add_subcommand("combine", "Fuse recorded signals into verdicts");
        auto signals = std::make_shared<std::string>();
        auto cout_path = std::make_shared<std::string>();
        combine_cmd->add_option("--signals", *signals, "signals JSON (object or array)")
            ->required();
        combine_cmd->add_option("--out", *cout_path, "verdict JSON output path");
        combine_cmd->callback([=, &global, &action] {
            action = [=, &global] { cmd_combine(*signals, global, *cout_path); };
        });

        auto* report = app.add_subcommand("report", "Summarize a directory of verdicts");
        auto run_dir = std::make_shared<std::string>();
        auto out_dir = std::make_shared<std::string>();
        report->add_option("--run-dir", *run_dir, "directory of verdict JSON files")->required();
        report->add_option("--out-dir", *out_dir, "summary output directory");
        report->callback([=, &action] {
            action = [=] { cmd_report(*run_dir, *out_dir); };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        global.resolve();
        if (action) {
            action();
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
