// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared error types, the deterministic RNG used by every stochastic
// component, and small utilities.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phishdetect {

// Error taxonomy. The CLI maps these onto distinct exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct UnsupportedOpError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct DivergenceError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

// Deterministic RNG (xoshiro256** seeded via splitmix64). Hand-rolled so
// that streams are bit-stable across standard library versions; std
// distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform();
    double uniform(double lo, double hi);

    // Uniform integer in [0, n). n must be positive.
    int uniform_int(int n);

    // Standard normal via Box-Muller; caches the spare draw.
    double normal();
    double normal(double mean, double stddev);

    // Fisher-Yates with this stream (std::shuffle is unspecified).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent child stream; the parent advances once.
    Rng fork();

private:
    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// FNV-1a 64-bit, used for payload checksums in reproducibility headers.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(std::string_view s);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace phishdetect
