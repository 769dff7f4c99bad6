// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

namespace alia::edit {

enum class BackendKind { img2img, instruct_pix2pix, txt2img };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend(std::string_view text);  // "img2img", "instruct-pix2pix", "txt2img"

// Strength means different things per backend and is not unified:
//   img2img           denoising strength, open interval (0, 1)
//   instruct-pix2pix  image guidance, open interval (1, 2)
//   txt2img           unused
// Guidance is the text guidance scale and must be > 0 for every backend.
struct EditParams {
    BackendKind backend = BackendKind::img2img;
    double strength = 0.5;
    double guidance = 7.5;
    std::uint64_t seed = 0;

    friend bool operator==(const EditParams&, const EditParams&) = default;
};

// Throws RangeError naming the offending field.
void validate_params(const EditParams& params);

nlohmann::json params_to_json(const EditParams& params);
EditParams params_from_json(const nlohmann::json& j);

}  // namespace alia::edit
