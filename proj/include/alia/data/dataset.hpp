// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alia/data/record.hpp"
#include "alia/image.hpp"

namespace alia::data {

// Immutable once constructed; the constructor enforces the dataset invariants
// (labels in classes, unique ids, parents resolve to originals).
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<ImageRecord> records, std::vector<std::string> classes, std::string superclass);

    const std::vector<ImageRecord>& records() const { return records_; }
    const std::vector<std::string>& classes() const { return classes_; }
    const std::string& superclass() const { return superclass_; }

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    // Index of `label` in classes(); throws IntegrityError when absent.
    std::size_t class_index(const std::string& label) const;
    const ImageRecord* find(const std::string& id) const;

    std::vector<ImageRecord> split(Split which) const;
    std::size_t count(Split which) const;

    // Same classes/superclass, different records.
    Dataset with_records(std::vector<ImageRecord> records) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::vector<ImageRecord> records_;
    std::vector<std::string> classes_;
    std::string superclass_;
};

struct ClassDistribution {
    std::map<std::string, std::size_t> counts;

    std::size_t total() const;
    std::size_t operator[](const std::string& label) const;

    friend bool operator==(const ClassDistribution&, const ClassDistribution&) = default;
};

using CellKey = std::pair<std::string, std::string>;  // (label, domain)
using CellCounts = std::map<CellKey, std::size_t>;

ClassDistribution class_distribution(const Dataset& dataset, Split split);
ClassDistribution class_distribution(std::span<const ImageRecord> records);

// Counts per (label, domain_tags[tag_key]) cell; records without the tag are
// skipped.
CellCounts class_domain_distribution(const Dataset& dataset, Split split, const std::string& tag_key);

// Uniform selection without replacement per class (independent SplitMix64
// stream per class, derived from seed and label). Output keeps pool order.
std::vector<ImageRecord> sample_to_match(std::span<const ImageRecord> pool, const ClassDistribution& target,
                                         std::uint64_t seed);

struct MergeResult {
    Dataset dataset;
    double expansion_ratio = 0.0;
    std::vector<std::string> warnings;
};

inline constexpr double kMinExpansionRatio = 0.20;
inline constexpr double kMaxExpansionRatio = 1.00;

// Appends augmented records to the training split. Expansion outside
// [0.20, 1.00] of the train split is reported as a warning, not an error.
MergeResult merge_augmented(const Dataset& train, std::span<const ImageRecord> augmented);

// Removes the top and bottom bands of rows. Output height is
// floor(h * (1 - top - bottom)); the band starts at row floor(h * top).
Image crop_preprocess(const Image& image, double top_fraction, double bottom_fraction);

struct BiasSplitSpec {
    std::string tag_key = "background";
    CellCounts cells;
};

// Draws exactly spec.cells[(label, domain)] records per cell from the pool
// (any split), relabelled to `out_split`.
Dataset build_bias_split(const Dataset& pool, const BiasSplitSpec& spec, std::uint64_t seed,
                         Split out_split = Split::train);

}  // namespace alia::data
