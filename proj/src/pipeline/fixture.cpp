// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/content_store.hpp"
#include "alia/data/synthetic.hpp"
#include "alia/pipeline/run.hpp"

namespace alia::pipeline {

FixturePaths write_fixture(const std::filesystem::path& dir, std::uint64_t seed, bool pin_params, bool ablations) {
    std::filesystem::create_directories(dir);
    FixturePaths paths;
    paths.dataset_config = data::write_synthetic_dataset(dir / "data", seed);
    PipelineConfig c;
    c.seed = seed;
    c.caption.sample = 30;
    c.edit.edits_per_image = 2;
    c.edit.sweep_sample = 3;
    c.edit.sweep_seeds = 2;
    if (pin_params) {
        c.edit.strength = 0.4;
        c.edit.guidance = 7.5;
    }
    c.train.epochs = 40;
    if (ablations) c.train.ablations = {"prompt-quality", "quantity", "edit-method"};
    paths.pipeline_config = dir / "pipeline.json";
    write_file_atomic(paths.pipeline_config, pipeline_config_to_json(c).dump(2) + "\n");
    return paths;
}

}  // namespace alia::pipeline
