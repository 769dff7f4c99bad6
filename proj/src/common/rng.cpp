// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/rng.hpp"

#include <algorithm>
#include <numeric>

#include "alia/hash.hpp"

namespace alia {

std::uint64_t SplitMix64::below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    // Reject the partial bucket at the top of the 64-bit range.
    const std::uint64_t limit = max() - (max() % bound + 1) % bound;
    std::uint64_t x = next();
    while (x > limit) x = next();
    return x % bound;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view key) {
    Sha256 h;
    h.field(base).field(key);
    const auto d = h.digest();
    std::uint64_t out = 0;
    for (int i = 7; i >= 0; --i) out = (out << 8) | d[static_cast<std::size_t>(i)];
    return out;
}

std::vector<std::size_t> sample_indices_in_draw_order(std::size_t n, std::size_t k, SplitMix64& rng) {
    k = std::min(k, n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, SplitMix64& rng) {
    auto idx = sample_indices_in_draw_order(n, k, rng);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace alia
