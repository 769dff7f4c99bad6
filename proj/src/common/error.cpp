// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/error.hpp"

namespace alia {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::precondition: return "precondition";
        case ErrorCode::malformed_manifest: return "malformed-manifest";
        case ErrorCode::integrity: return "integrity";
        case ErrorCode::shortage: return "shortage";
        case ErrorCode::degenerate_crop: return "degenerate-crop";
        case ErrorCode::range: return "range";
        case ErrorCode::config: return "config";
        case ErrorCode::validation: return "validation";
        case ErrorCode::transport: return "transport";
        case ErrorCode::empty_descriptions: return "empty-descriptions";
        case ErrorCode::missing_class: return "missing-class";
        case ErrorCode::ordering: return "ordering";
        case ErrorCode::conflict: return "conflict";
        case ErrorCode::not_found: return "not-found";
        case ErrorCode::parity: return "parity";
        case ErrorCode::backend: return "backend";
        case ErrorCode::io: return "io";
    }
    return "unknown";
}

namespace {

std::string describe(const std::vector<Deficit>& deficits) {
    std::string msg = "insufficient pool:";
    for (const auto& d : deficits) {
        msg += " " + d.key + " (requested " + std::to_string(d.requested) + ", available " +
               std::to_string(d.available) + ", deficit " + std::to_string(d.missing()) + ")";
    }
    return msg;
}

}  // namespace

ShortageError::ShortageError(std::vector<Deficit> deficits)
    : Error(ErrorCode::shortage, describe(deficits)), deficits_(std::move(deficits)) {}

}  // namespace alia
