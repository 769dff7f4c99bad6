// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace alia {

// SplitMix64 (Steele, Lea & Flood 2014). Chosen over <random> engines and
// distributions because the standard distributions are implementation
// defined; every seeded operation in this project draws from this generator
// through the helpers below so results are identical on every platform.
//
//   state += 0x9e3779b97f4a7c15
//   z = state
//   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//   return z ^ (z >> 31)
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t operator()() { return next(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

    // Uniform integer in [0, bound) by rejection on the top of the range.
    std::uint64_t below(std::uint64_t bound);

    // Uniform double in [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

// Derive an independent stream seed from a base seed and a string key
// (SHA-256 of the pair, first 8 bytes little-endian).
std::uint64_t derive_seed(std::uint64_t base, std::string_view key);

// Indices of a uniform k-subset of [0, n), returned in ascending order.
// Partial Fisher-Yates driven by SplitMix64.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, SplitMix64& rng);

// Same, but in draw order (not sorted).
std::vector<std::size_t> sample_indices_in_draw_order(std::size_t n, std::size_t k, SplitMix64& rng);

}  // namespace alia
