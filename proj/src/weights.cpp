// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/weights.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "phishdetect/corpus.hpp"

namespace phishdetect {

namespace {

constexpr int kFormatVersion = 1;

void append_f32_le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float read_f32_le(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

}  // namespace

void save_weights(const std::filesystem::path& path, const std::string& kind,
                  const std::string& config_json, std::span<const NamedTensor> params) {
    std::string payload;
    std::ostringstream header;
    header << "PHISHWEIGHTS " << kFormatVersion << "\n";
    header << "kind " << kind << "\n";
    header << "config " << config_json << "\n";
    header << "params " << params.size() << "\n";

    for (const auto& p : params) {
        if (p.tensor.has_nonfinite_data()) {
            throw DataError("save_weights: parameter '" + p.name + "' contains non-finite values");
        }
        header << "param " << p.name << " " << p.tensor.rank();
        for (int d : p.tensor.shape()) {
            header << " " << d;
        }
        header << " " << payload.size() << " " << p.tensor.size() << "\n";
        for (double v : p.tensor.data()) {
            append_f32_le(payload, static_cast<float>(v));
        }
    }

    header << "payload_bytes " << payload.size() << "\n";
    header << "payload_checksum " << fnv1a64(payload) << "\n";
    header << "end\n";

    write_file_atomic(path, header.str() + payload);
}

WeightArchive load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open weight archive: " + path.string());
    }

    WeightArchive archive;
    std::string line;
    struct ParamMeta {
        std::string name;
        Shape shape;
        std::size_t offset = 0;
        long count = 0;
    };
    std::vector<ParamMeta> metas;
    std::size_t payload_bytes = 0;
    std::uint64_t checksum = 0;
    bool have_end = false;
    long declared_params = -1;

    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "PHISHWEIGHTS") {
            ls >> archive.version;
            if (archive.version != kFormatVersion) {
                throw DataError("weight archive version mismatch in " + path.string() +
                                ": file has " + std::to_string(archive.version) +
                                ", reader supports " + std::to_string(kFormatVersion));
            }
        } else if (tag == "kind") {
            ls >> archive.kind;
        } else if (tag == "config") {
            std::getline(ls, archive.config_json);
            if (!archive.config_json.empty() && archive.config_json.front() == ' ') {
                archive.config_json.erase(0, 1);
            }
        } else if (tag == "params") {
            ls >> declared_params;
        } else if (tag == "param") {
            ParamMeta meta;
            int rank = 0;
            ls >> meta.name >> rank;
            for (int i = 0; i < rank; ++i) {
                int d = 0;
                ls >> d;
                meta.shape.push_back(d);
            }
            ls >> meta.offset >> meta.count;
            if (!ls || rank < 0 || meta.count <= 0) {
                throw DataError("malformed parameter record in " + path.string());
            }
            metas.push_back(std::move(meta));
        } else if (tag == "payload_bytes") {
            ls >> payload_bytes;
        } else if (tag == "payload_checksum") {
            ls >> checksum;
        } else if (tag == "end") {
            have_end = true;
            break;
        } else {
            throw DataError("unknown header tag '" + tag + "' in " + path.string());
        }
    }
    if (archive.version == 0 || !have_end) {
        throw DataError("truncated weight archive header in " + path.string());
    }
    if (declared_params != static_cast<long>(metas.size())) {
        throw DataError("parameter count mismatch in " + path.string());
    }

    std::string payload(payload_bytes, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
    if (static_cast<std::size_t>(in.gcount()) != payload_bytes || in.peek() != EOF) {
        throw DataError("weight archive payload integrity error in " + path.string() +
                        " (length mismatch)");
    }
    if (fnv1a64(payload) != checksum) {
        throw DataError("weight archive payload integrity error in " + path.string() +
                        " (checksum mismatch)");
    }

    for (const auto& meta : metas) {
        if (shape_numel(meta.shape) != meta.count ||
            meta.offset + static_cast<std::size_t>(meta.count) * 4 > payload.size()) {
            throw DataError("parameter '" + meta.name + "' inconsistent with payload in " +
                            path.string());
        }
        std::vector<double> data(static_cast<std::size_t>(meta.count));
        const auto* base = reinterpret_cast<const unsigned char*>(payload.data()) + meta.offset;
        for (long i = 0; i < meta.count; ++i) {
            data[static_cast<std::size_t>(i)] =
                static_cast<double>(read_f32_le(base + static_cast<std::size_t>(i) * 4));
        }
        archive.params.push_back({meta.name, Tensor::from_data(meta.shape, std::move(data))});
    }
    return archive;
}

Tensor require_param(const WeightArchive& archive, const std::string& name, const Shape& shape) {
    for (const auto& p : archive.params) {
        if (p.name == name) {
            if (p.tensor.shape() != shape) {
                throw DataError("parameter '" + name + "' has shape " +
                                shape_str(p.tensor.shape()) + ", architecture expects " +
                                shape_str(shape));
            }
            return p.tensor;
        }
    }
    throw DataError("weight archive is missing parameter '" + name + "'");
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file for checksum: " + path.string());
    }
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64(contents);
}

}  // namespace phishdetect
