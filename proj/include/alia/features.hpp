// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include "alia/image.hpp"

namespace alia {

// Hand-made image descriptor used by the offline stand-ins for learned
// models: mean RGB of the centre quarter and of the rest, scaled to [0, 1].
// {centre r, g, b, surround r, g, b}
using ColourFeatures = std::array<double, 6>;

ColourFeatures colour_features(const Image& image);

}  // namespace alia
