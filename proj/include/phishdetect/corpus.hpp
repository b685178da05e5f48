// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset manifests, annotation records, and deterministic stratified
// splits. Loaders are total over their error contracts: every input line
// parses into a record or lands in an itemized rejects report.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phishdetect/geometry.hpp"

namespace phishdetect {

enum class Label { phishing, legitimate };

std::string label_str(Label label);
std::optional<Label> parse_label(std::string_view token);

struct UrlSample {
    std::string url;
    Label label = Label::legitimate;
    std::string source;
};

struct RejectEntry {
    long line = 0;
    std::string reason;
};

struct UrlDataset {
    std::vector<UrlSample> samples;
    std::vector<RejectEntry> rejects;
    long duplicates_removed = 0;  // exact-string URL dedup, first kept
};

// Corner-form annotation as loaded (pixels), plus the normalized
// center-form box derived from it.
struct GroundTruthAnnotation {
    std::string image_id;
    std::string brand;
    double xmin = 0, ymin = 0, xmax = 0, ymax = 0;  // pixels
    double img_w = 0, img_h = 0;
    BoundingBox normalized;
};

struct AnnotationSet {
    std::vector<GroundTruthAnnotation> annotations;
    std::vector<RejectEntry> rejects;
};

// Generic manifest record ({id, kind, payload, label, brand, source}).
struct ManifestRecord {
    std::string id;
    std::string kind;  // "url" | "screenshot"
    std::string payload;
    Label label = Label::legitimate;
    std::string brand;
    std::string source;
};

struct Manifest {
    std::vector<ManifestRecord> records;
    std::vector<RejectEntry> rejects;
};

// Loaders ---------------------------------------------------------------------

// CSV `url,label,source`; labels must be "phishing" or "legitimate".
UrlDataset load_url_dataset(const std::filesystem::path& path);
void save_url_dataset(const std::filesystem::path& path, std::span<const UrlSample> samples,
                      const std::string& header_comment = "");

// CSV `image_id,brand,xmin,ymin,xmax,ymax,img_w,img_h` (pixels).
AnnotationSet load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path,
                      std::span<const GroundTruthAnnotation> annotations,
                      const std::string& header_comment = "");

// CSV `id,kind,payload,label,brand,source`. Screenshot payload paths are
// resolved relative to the manifest and must exist.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records,
                   const std::string& header_comment = "");

void save_rejects(const std::filesystem::path& path, std::span<const RejectEntry> rejects);

// Splits ----------------------------------------------------------------------

struct SplitSpec {
    double validation_fraction = 0.25;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

// Deterministic stratified partition: validation gets exactly
// floor(n * fraction) items, allocated across strata by largest remainder;
// shuffling uses the spec seed only.
SplitIndices split_indices(std::span<const std::string> strata, const SplitSpec& spec);

std::pair<std::vector<UrlSample>, std::vector<UrlSample>> split_url_dataset(
    std::span<const UrlSample> samples, const SplitSpec& spec);

// CSV helpers (quoted fields, embedded commas/quotes supported) ---------------

std::vector<std::string> csv_split(const std::string& line);
std::string csv_join(std::span<const std::string> fields);

// Atomic file write: temp file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace phishdetect
