// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/features.hpp"

#include "alia/error.hpp"

namespace alia {

ColourFeatures colour_features(const Image& image) {
    if (image.empty()) throw PreconditionError("colour_features: empty image");
    ColourFeatures f{};
    double n_centre = 0, n_surround = 0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const bool centre = x >= image.width / 4 && x < image.width * 3 / 4 && y >= image.height / 4 &&
                                y < image.height * 3 / 4;
            const auto* p = image.at(x, y);
            const std::size_t off = centre ? 0 : 3;
            for (std::size_t c = 0; c < 3; ++c) f[off + c] += p[c];
            (centre ? n_centre : n_surround) += 1;
        }
    }
    for (std::size_t c = 0; c < 3; ++c) {
        f[c] = n_centre > 0 ? f[c] / (255.0 * n_centre) : 0.0;
        f[3 + c] = n_surround > 0 ? f[3 + c] / (255.0 * n_surround) : 0.0;
    }
    return f;
}

}  // namespace alia
