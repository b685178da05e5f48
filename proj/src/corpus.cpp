// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <cstdlib>
#include <map>
#include <sstream>
#include <unordered_set>

namespace phishdetect {

std::string label_str(Label label) {
    return label == Label::phishing ? "phishing" : "legitimate";
}

std::optional<Label> parse_label(std::string_view token) {
    if (token == "phishing") return Label::phishing;
    if (token == "legitimate") return Label::legitimate;
    return std::nullopt;
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string csv_join(std::span<const std::string> fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") != std::string::npos) {
            out += '"';
            for (char c : f) {
                if (c == '"') out += '"';
                out += c;
            }
            out += '"';
        } else {
            out += f;
        }
    }
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write file: " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw IoError("failed writing file: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

namespace {

// Reads a CSV file line by line, skipping '#' comments, validating the
// header, and handing data lines (with their 1-based line number) to `fn`.
void for_each_csv_row(const std::filesystem::path& path, const std::string& expected_header,
                      const std::function<void(long, const std::vector<std::string>&)>& fn) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open dataset file: " + path.string());
    }
    std::string line;
    long line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (!saw_header) {
            if (line != expected_header) {
                throw DataError("unexpected header in " + path.string() + ": got '" + line +
                                "', expected '" + expected_header + "'");
            }
            saw_header = true;
            continue;
        }
        fn(line_no, csv_split(line));
    }
    if (!saw_header) {
        throw DataError("missing header in " + path.string());
    }
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

UrlDataset load_url_dataset(const std::filesystem::path& path) {
    UrlDataset ds;
    std::unordered_set<std::string> seen;
    for_each_csv_row(path, "url,label,source", [&](long line_no,
                                                   const std::vector<std::string>& f) {
        if (f.size() != 3) {
            ds.rejects.push_back({line_no, "expected 3 fields, got " + std::to_string(f.size())});
            return;
        }
        if (f[0].empty()) {
            ds.rejects.push_back({line_no, "empty url"});
            return;
        }
        const auto label = parse_label(f[1]);
        if (!label) {
            ds.rejects.push_back({line_no, "unknown label token '" + f[1] + "'"});
            return;
        }
        if (!seen.insert(f[0]).second) {
            ds.duplicates_removed += 1;
            return;
        }
        ds.samples.push_back({f[0], *label, f[2]});
    });
    return ds;
}

void save_url_dataset(const std::filesystem::path& path, std::span<const UrlSample> samples,
                      const std::string& header_comment) {
    std::string out;
    if (!header_comment.empty()) {
        out += "# " + header_comment + "\n";
    }
    out += "url,label,source\n";
    for (const auto& s : samples) {
        const std::string fields[] = {s.url, label_str(s.label), s.source};
        out += csv_join(fields) + "\n";
    }
    write_file_atomic(path, out);
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
    AnnotationSet set;
    for_each_csv_row(
        path, "image_id,brand,xmin,ymin,xmax,ymax,img_w,img_h",
        [&](long line_no, const std::vector<std::string>& f) {
            if (f.size() != 8) {
                set.rejects.push_back(
                    {line_no, "expected 8 fields, got " + std::to_string(f.size())});
                return;
            }
            GroundTruthAnnotation a;
            a.image_id = f[0];
            a.brand = f[1];
            double* nums[] = {&a.xmin, &a.ymin, &a.xmax, &a.ymax, &a.img_w, &a.img_h};
            for (int i = 0; i < 6; ++i) {
                if (!parse_number(f[static_cast<std::size_t>(i) + 2], *nums[i])) {
                    set.rejects.push_back({line_no, "record " + a.image_id +
                                                        ": non-numeric coordinate '" +
                                                        f[static_cast<std::size_t>(i) + 2] + "'"});
                    return;
                }
            }
            if (a.img_w <= 0 || a.img_h <= 0) {
                set.rejects.push_back({line_no, "record " + a.image_id + ": bad image size"});
                return;
            }
            if (!(a.xmin < a.xmax) || !(a.ymin < a.ymax)) {
                set.rejects.push_back(
                    {line_no, "record " + a.image_id + ": inverted or empty box"});
                return;
            }
            if (a.xmin < 0 || a.ymin < 0 || a.xmax > a.img_w || a.ymax > a.img_h) {
                set.rejects.push_back(
                    {line_no, "record " + a.image_id + ": box outside image bounds"});
                return;
            }
            a.normalized = BoundingBox::from_corners(a.xmin / a.img_w, a.ymin / a.img_h,
                                                     a.xmax / a.img_w, a.ymax / a.img_h);
            set.annotations.push_back(std::move(a));
        });
    return set;
}

void save_annotations(const std::filesystem::path& path,
                      std::span<const GroundTruthAnnotation> annotations,
                      const std::string& header_comment) {
    std::string out;
    if (!header_comment.empty()) {
        out += "# " + header_comment + "\n";
    }
    out += "image_id,brand,xmin,ymin,xmax,ymax,img_w,img_h\n";
    for (const auto& a : annotations) {
        const std::string fields[] = {a.image_id,
                                      a.brand,
                                      format_double(a.xmin),
                                      format_double(a.ymin),
                                      format_double(a.xmax),
                                      format_double(a.ymax),
                                      format_double(a.img_w),
                                      format_double(a.img_h)};
        out += csv_join(fields) + "\n";
    }
    write_file_atomic(path, out);
}

Manifest load_manifest(const std::filesystem::path& path) {
    Manifest m;
    std::unordered_set<std::string> ids;
    const std::filesystem::path base = path.parent_path();
    for_each_csv_row(
        path, "id,kind,payload,label,brand,source",
        [&](long line_no, const std::vector<std::string>& f) {
            if (f.size() != 6) {
                m.rejects.push_back(
                    {line_no, "expected 6 fields, got " + std::to_string(f.size())});
                return;
            }
            ManifestRecord rec;
            rec.id = f[0];
            rec.kind = f[1];
            rec.payload = f[2];
            rec.brand = f[4];
            rec.source = f[5];
            if (rec.id.empty() || !ids.insert(rec.id).second) {
                m.rejects.push_back({line_no, "missing or duplicate id '" + rec.id + "'"});
                return;
            }
            if (rec.kind != "url" && rec.kind != "screenshot") {
                m.rejects.push_back({line_no, "unknown kind '" + rec.kind + "'"});
                return;
            }
            const auto label = parse_label(f[3]);
            if (!label) {
                m.rejects.push_back({line_no, "unknown label token '" + f[3] + "'"});
                return;
            }
            rec.label = *label;
            if (rec.kind == "screenshot" &&
                !std::filesystem::exists(base / rec.payload)) {
                m.rejects.push_back(
                    {line_no, "screenshot payload does not exist: " + rec.payload});
                return;
            }
            m.records.push_back(std::move(rec));
        });
    return m;
}

void save_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records,
                   const std::string& header_comment) {
    std::string out;
    if (!header_comment.empty()) {
        out += "# " + header_comment + "\n";
    }
    out += "id,kind,payload,label,brand,source\n";
    for (const auto& r : records) {
        const std::string fields[] = {r.id, r.kind, r.payload, label_str(r.label), r.brand,
                                      r.source};
        out += csv_join(fields) + "\n";
    }
    write_file_atomic(path, out);
}

void save_rejects(const std::filesystem::path& path, std::span<const RejectEntry> rejects) {
    std::string out;
    for (const auto& r : rejects) {
        std::string reason = r.reason;
        // Keep the report line-delimited even if a reason embeds a newline.
        std::replace(reason.begin(), reason.end(), '\n', ' ');
        out += "{\"line\": " + std::to_string(r.line) + ", \"reason\": \"" + reason + "\"}\n";
    }
    write_file_atomic(path, out);
}

SplitIndices split_indices(std::span<const std::string> strata, const SplitSpec& spec) {
    const std::size_t n = strata.size();
    if (n < 2) {
        throw DataError("split requires at least 2 items");
    }
    if (!(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0)) {
        throw DataError("validation fraction must lie in (0,1)");
    }

    const auto target =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.validation_fraction));

    // Group indices per stratum in first-appearance order.
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = groups.try_emplace(strata[i]);
        if (inserted) {
            order.push_back(strata[i]);
        }
        it->second.push_back(i);
    }

    Rng rng(spec.seed);
    struct Alloc {
        std::string key;
        std::size_t take;
        double remainder;
    };
    std::vector<Alloc> allocs;
    std::size_t assigned = 0;
    for (const auto& key : order) {
        const double exact =
            static_cast<double>(groups[key].size()) * spec.validation_fraction;
        const auto take = std::min(static_cast<std::size_t>(std::floor(exact)),
                                   groups[key].size());
        allocs.push_back({key, take, exact - std::floor(exact)});
        assigned += take;
    }
    // Largest-remainder top-up to hit the exact floor(n * fraction) total.
    std::vector<std::size_t> by_remainder(allocs.size());
    for (std::size_t i = 0; i < allocs.size(); ++i) by_remainder[i] = i;
    std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
        return allocs[a].remainder > allocs[b].remainder;
    });
    for (std::size_t k = 0; assigned < target; k = (k + 1) % by_remainder.size()) {
        Alloc& a = allocs[by_remainder[k]];
        if (a.take < groups[a.key].size()) {
            a.take += 1;
            assigned += 1;
        }
    }
    while (assigned > target) {
        for (auto& a : allocs) {
            if (assigned == target) break;
            if (a.take > 0) {
                a.take -= 1;
                assigned -= 1;
            }
        }
    }

    SplitIndices out;
    for (const auto& a : allocs) {
        auto idx = groups[a.key];
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < a.take ? out.validation : out.train).push_back(idx[i]);
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    return out;
}

std::pair<std::vector<UrlSample>, std::vector<UrlSample>> split_url_dataset(
    std::span<const UrlSample> samples, const SplitSpec& spec) {
    std::vector<std::string> strata(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        strata[i] = label_str(samples[i].label);
    }
    const SplitIndices idx = split_indices(strata, spec);
    std::pair<std::vector<UrlSample>, std::vector<UrlSample>> out;
    out.first.reserve(idx.train.size());
    out.second.reserve(idx.validation.size());
    for (auto i : idx.train) out.first.push_back(samples[i]);
    for (auto i : idx.validation) out.second.push_back(samples[i]);
    return out;
}

}  // namespace phishdetect
