// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned weight archive: a structured text header (model kind, config
// echo, named parameter table with byte offsets, payload checksum)
// followed by a packed little-endian float32 payload. Bit-exact across
// platforms; loads fail fast on any mismatch, never yielding a partial
// model.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "phishdetect/tensor.hpp"

namespace phishdetect {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct WeightArchive {
    int version = 1;
    std::string kind;
    std::string config_json;
    std::vector<NamedTensor> params;
};

void save_weights(const std::filesystem::path& path, const std::string& kind,
                  const std::string& config_json, std::span<const NamedTensor> params);

WeightArchive load_weights(const std::filesystem::path& path);

// Lookup with shape validation; throws DataError when absent or mismatched.
Tensor require_param(const WeightArchive& archive, const std::string& name, const Shape& shape);

// Checksum of the full archive file, for reproducibility headers.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace phishdetect
