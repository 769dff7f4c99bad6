// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "alia/data/dataset.hpp"

namespace alia::data {

// Split sizes of the iWildCam subset (train, extra, val, test) and the
// Airbus/Boeing background breakdown, used to build size-faithful fixture
// manifests without the real images.
struct SplitSizes {
    std::size_t train = 0;
    std::size_t extra = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

inline constexpr SplitSizes kIWildCamSplits{6052, 2224, 2826, 8483};
inline constexpr SplitSizes kCubSplits{4994, 1000, 5794, 5794};
inline constexpr SplitSizes kPlanesSplits{409, 357, 358, 707};

const std::vector<std::string>& iwildcam_classes();

// Per-split (label, background) counts for the Airbus/Boeing bias split.
const std::map<Split, CellCounts>& planes_cell_table();

// Largest-remainder apportionment of `total` over `weights` (ties to the
// lower index). Sums to `total` exactly.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights);

// Image-less manifest with the iWildCam split sizes over its 7 classes.
Dataset make_iwildcam_fixture();

// Image-less pool of originals tagged with `background`, large enough to
// draw every split of the planes table (plus `surplus` per cell).
Dataset make_planes_pool(std::size_t surplus = 5);

// Small rendered dataset for end-to-end runs: 3 bird classes, 20 images
// each (train 10, extra 2, val 4, test 4), 16x16 PNGs with a class-coloured
// centre block on a sky or grass background. Writes
//   <dir>/images/*.png, <dir>/manifest.jsonl (+ header), <dir>/dataset.json
// and returns the path of dataset.json.
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, std::uint64_t seed = 7);

// Renders one synthetic image; exposed for tests.
Image render_synthetic_image(const std::string& label, const std::string& background, std::uint64_t seed);

}  // namespace alia::data
