// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "alia/data/dataset.hpp"
#include "alia/data/image_source.hpp"
#include "alia/pipeline/run.hpp"

namespace alia::pipeline::detail {

struct StageContext {
    const ArtifactRoot& root;
    const RunState& state;
    Stage stage;
    std::filesystem::path dir;
    data::DatasetConfig dataset_config;
    PipelineConfig config;
};

struct StageOutput {
    std::vector<std::string> artifacts;  // file names under the stage dir
    nlohmann::json result;
    bool needs_review = false;
    nlohmann::json review;
    std::vector<std::string> diagnostics;
};

StageOutput execute(const StageContext& ctx);

data::Dataset load_dataset(const data::DatasetConfig& config);
std::shared_ptr<data::ImageSource> make_image_source(const data::DatasetConfig& config, const ArtifactRoot& root);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// Applies one filter-override action; false when the move is not allowed.
bool apply_override(edit::AugmentationRecord& record, const std::string& action, const std::string& actor,
                    const std::string& timestamp);

}  // namespace alia::pipeline::detail
