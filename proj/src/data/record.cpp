// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/data/record.hpp"

#include "alia/error.hpp"
#include "alia/hash.hpp"

namespace alia::data {

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::extra: return "extra";
    }
    return "train";
}

std::string_view to_string(Provenance provenance) {
    switch (provenance) {
        case Provenance::original: return "original";
        case Provenance::edited: return "edited";
        case Provenance::txt2img: return "txt2img";
        case Provenance::real_extra: return "real-extra";
    }
    return "original";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "val") return Split::val;
    if (text == "test") return Split::test;
    if (text == "extra") return Split::extra;
    throw ValidationError("split", "unknown split '" + std::string(text) + "'");
}

Provenance parse_provenance(std::string_view text) {
    if (text == "original") return Provenance::original;
    if (text == "edited") return Provenance::edited;
    if (text == "txt2img") return Provenance::txt2img;
    if (text == "real-extra") return Provenance::real_extra;
    throw ValidationError("provenance", "unknown provenance '" + std::string(text) + "'");
}

std::string make_record_id(std::string_view pixel_digest, Provenance provenance) {
    Sha256 h;
    h.field(to_string(provenance)).field(pixel_digest);
    return h.hex_digest().substr(0, 32);
}

void check_record(const ImageRecord& r) {
    if (r.id.empty()) throw IntegrityError("record with empty id");
    if (r.label.empty()) throw IntegrityError("record " + r.id + ": empty label");
    const bool edited = r.provenance == Provenance::edited;
    if (r.parent_id.has_value() != edited) {
        throw IntegrityError("record " + r.id + ": parent_id must be set iff provenance is edited");
    }
    const bool generated = edited || r.provenance == Provenance::txt2img;
    if (r.prompt_id.has_value() != generated) {
        throw IntegrityError("record " + r.id + ": prompt_id must be set iff provenance is edited or txt2img");
    }
    if (r.split == Split::extra && r.provenance != Provenance::real_extra) {
        throw IntegrityError("record " + r.id + ": split extra requires provenance real-extra");
    }
    if (r.provenance == Provenance::real_extra && r.split != Split::extra && r.split != Split::train) {
        throw IntegrityError("record " + r.id + ": real-extra records belong to the extra split");
    }
}

}  // namespace alia::data
