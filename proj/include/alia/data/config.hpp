// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "alia/data/dataset.hpp"

namespace alia::data {

struct CropConfig {
    double top = 0.0;
    double bottom = 0.0;
};

// Dataset config file (JSON). Paths are resolved relative to the file.
//
//   {
//     "name": "iwildcam",
//     "manifest": "train.jsonl",
//     "superclass": "animal",
//     "classes": ["background", "cattle", ...],
//     "prefix": "a camera trap photo of an animal",
//     "superclass_in_template": false,
//     "crop": {"top": 0.1, "bottom": 0.1},
//     "domain_tags": "backgrounds.json",
//     "bias_split": {"tag_key": "background",
//                    "cells": [{"label": "Airbus", "domain": "sky", "count": 98}, ...]},
//     "context_manifest": "backgrounds.jsonl",
//     "txt2img_prompt": "a camera trap photo of a { } in the wild."
//   }
struct DatasetConfig {
    std::string name;
    std::filesystem::path manifest;
    std::string superclass;
    std::vector<std::string> classes;
    std::string prefix;
    bool superclass_in_template = true;
    CropConfig crop;
    std::optional<std::filesystem::path> domain_tags;
    std::optional<BiasSplitSpec> bias_split;
    std::optional<std::filesystem::path> context_manifest;
    std::string txt2img_prompt;
};

DatasetConfig parse_dataset_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
DatasetConfig load_dataset_config(const std::filesystem::path& path);
nlohmann::json dataset_config_to_json(const DatasetConfig& config);

}  // namespace alia::data
