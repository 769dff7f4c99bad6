// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/edit/params.hpp"

#include <cmath>

#include "alia/error.hpp"

namespace alia::edit {

std::string_view to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::img2img: return "img2img";
        case BackendKind::instruct_pix2pix: return "instruct-pix2pix";
        case BackendKind::txt2img: return "txt2img";
    }
    return "?";
}

BackendKind parse_backend(std::string_view text) {
    if (text == "img2img") return BackendKind::img2img;
    if (text == "instruct-pix2pix") return BackendKind::instruct_pix2pix;
    if (text == "txt2img") return BackendKind::txt2img;
    throw ValidationError("backend", "unknown backend '" + std::string(text) + "'");
}

void validate_params(const EditParams& p) {
    if (!std::isfinite(p.guidance) || p.guidance <= 0.0) {
        throw RangeError("guidance must be > 0, got " + std::to_string(p.guidance));
    }
    switch (p.backend) {
        case BackendKind::img2img:
            if (!(p.strength > 0.0 && p.strength < 1.0)) {
                throw RangeError("img2img strength must lie in (0, 1), got " + std::to_string(p.strength));
            }
            break;
        case BackendKind::instruct_pix2pix:
            if (!(p.strength > 1.0 && p.strength < 2.0)) {
                throw RangeError("instruct-pix2pix strength must lie in (1, 2), got " + std::to_string(p.strength));
            }
            break;
        case BackendKind::txt2img:
            break;
    }
}

nlohmann::json params_to_json(const EditParams& p) {
    return {{"backend", to_string(p.backend)}, {"strength", p.strength}, {"guidance", p.guidance}, {"seed", p.seed}};
}

EditParams params_from_json(const nlohmann::json& j) {
    EditParams p;
    p.backend = parse_backend(j.at("backend").get<std::string>());
    p.strength = j.value("strength", 0.0);
    p.guidance = j.at("guidance").get<double>();
    p.seed = j.value("seed", std::uint64_t{0});
    return p;
}

}  // namespace alia::edit
