// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "alia/error.hpp"
#include "alia/rng.hpp"

namespace alia::data {

Dataset::Dataset(std::vector<ImageRecord> records, std::vector<std::string> classes, std::string superclass)
    : records_(std::move(records)), classes_(std::move(classes)), superclass_(std::move(superclass)) {
    std::unordered_set<std::string> class_set;
    for (const auto& c : classes_) {
        if (!class_set.insert(c).second) throw IntegrityError("duplicate class '" + c + "'");
    }
    std::unordered_map<std::string, const ImageRecord*> by_id;
    by_id.reserve(records_.size());
    for (const auto& r : records_) {
        check_record(r);
        if (!class_set.contains(r.label)) {
            throw IntegrityError("record " + r.id + ": label '" + r.label + "' is not a dataset class");
        }
        if (!by_id.emplace(r.id, &r).second) throw IntegrityError("duplicate record id " + r.id);
    }
    for (const auto& r : records_) {
        if (!r.parent_id) continue;
        auto it = by_id.find(*r.parent_id);
        if (it == by_id.end()) {
            throw IntegrityError("record " + r.id + ": dangling parent_id " + *r.parent_id);
        }
        if (it->second->provenance != Provenance::original) {
            throw IntegrityError("record " + r.id + ": parent " + *r.parent_id + " is not an original image");
        }
    }
}

std::size_t Dataset::class_index(const std::string& label) const {
    auto it = std::find(classes_.begin(), classes_.end(), label);
    if (it == classes_.end()) throw IntegrityError("unknown class '" + label + "'");
    return static_cast<std::size_t>(it - classes_.begin());
}

const ImageRecord* Dataset::find(const std::string& id) const {
    for (const auto& r : records_) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

std::vector<ImageRecord> Dataset::split(Split which) const {
    std::vector<ImageRecord> out;
    for (const auto& r : records_) {
        if (r.split == which) out.push_back(r);
    }
    return out;
}

std::size_t Dataset::count(Split which) const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [&](const ImageRecord& r) { return r.split == which; }));
}

Dataset Dataset::with_records(std::vector<ImageRecord> records) const {
    return Dataset(std::move(records), classes_, superclass_);
}

std::size_t ClassDistribution::total() const {
    std::size_t n = 0;
    for (const auto& [_, c] : counts) n += c;
    return n;
}

std::size_t ClassDistribution::operator[](const std::string& label) const {
    auto it = counts.find(label);
    return it == counts.end() ? 0 : it->second;
}

ClassDistribution class_distribution(const Dataset& dataset, Split split) {
    ClassDistribution dist;
    for (const auto& c : dataset.classes()) dist.counts[c] = 0;
    for (const auto& r : dataset.records()) {
        if (r.split == split) ++dist.counts[r.label];
    }
    return dist;
}

ClassDistribution class_distribution(std::span<const ImageRecord> records) {
    ClassDistribution dist;
    for (const auto& r : records) ++dist.counts[r.label];
    return dist;
}

CellCounts class_domain_distribution(const Dataset& dataset, Split split, const std::string& tag_key) {
    CellCounts cells;
    for (const auto& r : dataset.records()) {
        if (r.split != split) continue;
        auto it = r.domain_tags.find(tag_key);
        if (it == r.domain_tags.end()) continue;
        ++cells[{r.label, it->second}];
    }
    return cells;
}

namespace {

// Picks counts[key] members of each group uniformly without replacement and
// returns the chosen pool positions in ascending order.
template <typename KeyFn>
std::vector<std::size_t> select_per_group(std::span<const ImageRecord> pool,
                                          const std::map<std::string, std::size_t>& counts, std::uint64_t seed,
                                          KeyFn key_of) {
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        auto key = key_of(pool[i]);
        if (key) members[*key].push_back(i);
    }
    std::vector<Deficit> deficits;
    for (const auto& [key, want] : counts) {
        const std::size_t have = members.contains(key) ? members[key].size() : 0;
        if (have < want) deficits.push_back({key, want, have});
    }
    if (!deficits.empty()) throw ShortageError(std::move(deficits));

    std::vector<std::size_t> chosen;
    for (const auto& [key, want] : counts) {
        if (want == 0) continue;
        const auto& group = members[key];
        SplitMix64 rng(derive_seed(seed, key));
        for (auto local : sample_indices(group.size(), want, rng)) chosen.push_back(group[local]);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

}  // namespace

std::vector<ImageRecord> sample_to_match(std::span<const ImageRecord> pool, const ClassDistribution& target,
                                         std::uint64_t seed) {
    auto chosen = select_per_group(pool, target.counts, seed,
                                   [](const ImageRecord& r) { return std::optional<std::string>(r.label); });
    std::vector<ImageRecord> out;
    out.reserve(chosen.size());
    for (auto i : chosen) out.push_back(pool[i]);
    return out;
}

MergeResult merge_augmented(const Dataset& train, std::span<const ImageRecord> augmented) {
    std::unordered_set<std::string> ids;
    for (const auto& r : train.records()) ids.insert(r.id);

    std::vector<ImageRecord> merged = train.records();
    merged.reserve(merged.size() + augmented.size());
    for (const auto& a : augmented) {
        if (a.provenance == Provenance::original) {
            throw PreconditionError("merge_augmented: record " + a.id + " has provenance original");
        }
        if (!ids.insert(a.id).second) throw IntegrityError("merge_augmented: id collision on " + a.id);
        ImageRecord added = a;
        added.split = Split::train;
        merged.push_back(std::move(added));
    }

    MergeResult result;
    const std::size_t base = train.count(Split::train);
    result.expansion_ratio = base == 0 ? 0.0 : static_cast<double>(augmented.size()) / static_cast<double>(base);
    if (result.expansion_ratio < kMinExpansionRatio || result.expansion_ratio > kMaxExpansionRatio) {
        result.warnings.push_back("expansion ratio " + std::to_string(result.expansion_ratio) +
                                  " is outside [0.20, 1.00]");
        spdlog::warn("merge_augmented: {}", result.warnings.back());
    }
    result.dataset = train.with_records(std::move(merged));
    return result;
}

Image crop_preprocess(const Image& image, double top_fraction, double bottom_fraction) {
    if (image.empty()) throw PreconditionError("crop_preprocess: empty image");
    if (!(top_fraction >= 0.0 && top_fraction < 0.5) || !(bottom_fraction >= 0.0 && bottom_fraction < 0.5)) {
        throw PreconditionError("crop_preprocess: fractions must lie in [0, 0.5)");
    }
    // The epsilon absorbs representation error such as 100 * (1 - 0.1 - 0.1)
    // landing just below 80.
    constexpr double eps = 1e-9;
    const int h = image.height;
    const int out_h = static_cast<int>(std::floor(h * (1.0 - top_fraction - bottom_fraction) + eps));
    if (out_h <= 0) throw Error(ErrorCode::degenerate_crop, "crop_preprocess: crop leaves no rows");
    const int start = std::min(static_cast<int>(std::floor(h * top_fraction + eps)), h - out_h);

    Image out(image.width, out_h);
    const std::size_t row_bytes = static_cast<std::size_t>(image.width) * Image::channels;
    std::copy_n(image.pixels.begin() + static_cast<std::ptrdiff_t>(start * row_bytes), out_h * row_bytes,
                out.pixels.begin());
    return out;
}

Dataset build_bias_split(const Dataset& pool, const BiasSplitSpec& spec, std::uint64_t seed, Split out_split) {
    std::map<std::string, std::size_t> counts;
    for (const auto& [cell, n] : spec.cells) counts[cell.first + "/" + cell.second] = n;

    const auto& records = pool.records();
    auto chosen = select_per_group(records, counts, seed, [&](const ImageRecord& r) -> std::optional<std::string> {
        auto it = r.domain_tags.find(spec.tag_key);
        if (it == r.domain_tags.end()) return std::nullopt;
        return r.label + "/" + it->second;
    });

    std::vector<ImageRecord> out;
    out.reserve(chosen.size());
    for (auto i : chosen) {
        ImageRecord r = records[i];
        // Bias splits are drawn from originals; the extra split is by
        // definition real-extra. Ids stay those of the pool record.
        if (r.provenance == Provenance::original || r.provenance == Provenance::real_extra) {
            r.provenance = out_split == Split::extra ? Provenance::real_extra : Provenance::original;
        }
        r.split = out_split;
        out.push_back(std::move(r));
    }
    return pool.with_records(std::move(out));
}

}  // namespace alia::data
