// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "alia/data/dataset.hpp"

namespace alia::data {

// Manifest layout:
//
//   <name>.jsonl              one ImageRecord per line, canonical JSON
//                             (sorted keys, optional fields omitted)
//   <name>.jsonl.header.json  {"classes": [...], "format": "alia-manifest/1",
//                              "superclass": "..."}
//
// Without a header the class list is the labels in order of first
// appearance and the superclass is empty.
inline constexpr const char* kManifestFormat = "alia-manifest/1";

std::filesystem::path header_path_for(const std::filesystem::path& manifest);

Dataset load_manifest(const std::filesystem::path& path);
void save_manifest(const Dataset& dataset, const std::filesystem::path& path);

// Parses the record lines and header text directly (header may be empty).
Dataset parse_manifest(const std::string& lines, const std::string& header);

nlohmann::json record_to_json(const ImageRecord& record);
ImageRecord record_from_json(const nlohmann::json& j);  // throws ValidationError
std::string serialize_records(const std::vector<ImageRecord>& records);

// Domain-tag sidecar: {"<record id>": {"background": "grass"}, ...}. Tags are
// human-assigned; records missing from the sidecar keep their existing tags.
Dataset apply_domain_tags(const Dataset& dataset, const std::filesystem::path& sidecar);

}  // namespace alia::data
