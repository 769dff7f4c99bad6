// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "alia/edit/generate.hpp"
#include "alia/filter/filters.hpp"
#include "alia/train/metrics.hpp"
#include "alia/train/experiment.hpp"
#include "alia/train/trainer.hpp"

namespace alia::pipeline {

// Which model implementations a run talks to.
//   stub   - deterministic offline stand-ins
//   replay - recorded transcripts, captions and edits
//   http   - remote services (see prompt/clients.hpp and edit/backend.hpp)
struct BackendConfig {
    std::string kind = "stub";
    std::string llm_url;
    std::string captioner_url;
    std::string editor_url;
    std::optional<std::filesystem::path> transcript;
    std::optional<std::filesystem::path> captions;
    std::optional<std::filesystem::path> edit_replay;
};

struct CaptionStageConfig {
    std::size_t sample = 200;
    unsigned workers = 2;
    double max_failure_ratio = 0.5;
};

struct PromptStageConfig {
    std::optional<std::filesystem::path> templates;
    std::size_t max_descriptions = 10;
};

struct EditStageConfig {
    edit::BackendKind backend = edit::BackendKind::img2img;
    int edits_per_image = 2;
    // Pinning both skips the human choice at select-params.
    std::optional<double> strength;
    std::optional<double> guidance;
    std::string sweep_preset = "full";
    std::size_t sweep_sample = 10;
    std::size_t sweep_seeds = 4;
    std::size_t sweep_description = 0;  // index into the descriptions
    unsigned workers = 4;
    double max_failure_ratio = 0.1;
};

struct TrainStageConfig {
    std::string trainer = "linear-probe";  // or "scripted"
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    int epochs = 200;
    int batch_size = 16;
    bool sweep = false;
    std::vector<double> lr_grid = train::kLearningRateGrid;
    std::vector<double> wd_grid = train::kWeightDecayGrid;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    train::MetricKind metric = train::MetricKind::macro_f1;
    std::vector<train::Variant> variants = {train::Variant::baseline, train::Variant::real, train::Variant::txt2img,
                                            train::Variant::alia, train::Variant::cutmix, train::Variant::randaug};
    std::vector<std::string> ablations;  // "prompt-quality", "quantity", "edit-method"
    std::vector<double> quantity_fractions = train::kQuantityFractions;
    unsigned workers = 1;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    BackendConfig backends;
    CaptionStageConfig caption;
    PromptStageConfig prompts;
    EditStageConfig edit;
    filter::FilterConfig filter;
    TrainStageConfig train;
};

// Unknown keys are rejected; errors are ConfigError with a dotted field path.
PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
nlohmann::json pipeline_config_to_json(const PipelineConfig& config);

}  // namespace alia::pipeline
