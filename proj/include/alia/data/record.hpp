// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace alia::data {

enum class Split { train, val, test, extra };

enum class Provenance { original, edited, txt2img, real_extra };

std::string_view to_string(Split split);
std::string_view to_string(Provenance provenance);
Split parse_split(std::string_view text);            // throws ValidationError
Provenance parse_provenance(std::string_view text);  // throws ValidationError

// One labeled image. `id` is derived from the pixel digest and provenance so
// re-ingesting the same bytes yields the same id.
struct ImageRecord {
    std::string id;
    std::string uri;
    std::string label;
    Split split = Split::train;
    Provenance provenance = Provenance::original;
    std::optional<std::string> parent_id;               // set iff provenance == edited
    std::map<std::string, std::string> domain_tags;     // e.g. background=grass
    std::optional<std::string> prompt_id;               // set iff edited or txt2img

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

std::string make_record_id(std::string_view pixel_digest, Provenance provenance);

// Checks the per-record invariants that do not need the rest of the dataset.
// Records merged into a training set keep provenance real-extra while their
// split becomes train, so real-extra is allowed in {extra, train}.
void check_record(const ImageRecord& record);

}  // namespace alia::data
