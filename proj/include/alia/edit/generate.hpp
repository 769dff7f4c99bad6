// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alia/content_store.hpp"
#include "alia/data/dataset.hpp"
#include "alia/data/image_source.hpp"
#include "alia/edit/backend.hpp"
#include "alia/edit/records.hpp"
#include "alia/prompt/descriptions.hpp"

namespace alia::edit {

struct EditRunOptions {
    unsigned workers = 4;            // capped by backend.max_parallelism()
    double max_failure_ratio = 0.1;  // above this the stage throws BackendError
};

// Everything a generation run touches besides the backend.
struct EditContext {
    const data::ImageSource& images;  // originals
    ImageStore& outputs;              // generated images, content addressed
    RecordStore* store = nullptr;     // resume and persistence; optional
};

// The prompt actually sent for a description: the instruction form for
// instruct-pix2pix, the template otherwise, with the class name filled in.
std::string edit_prompt(const prompt::DomainDescription& description, BackendKind backend, const std::string& label);

// For each train image, each description and each replica in
// [0, edits_per_image), one edit with seed edit_seed(params.seed, image,
// prompt, replica). Output order is image, description, replica. Records
// already completed in ctx.store are returned as stored without calling the
// backend; failed ones are retried.
std::vector<AugmentationRecord> generate_edits(const data::Dataset& dataset,
                                               std::span<const prompt::DomainDescription> descriptions,
                                               const EditParams& params, int edits_per_image, EditBackend& backend,
                                               EditContext ctx, const EditRunOptions& options = {});

// Number of edits generate_edits will attempt.
std::size_t planned_edit_count(const data::Dataset& dataset, std::size_t descriptions, int edits_per_image);

// Text-to-image baseline: per class, per_class_count images, cycling
// through the descriptions. Provenance txt2img, no parent.
std::vector<AugmentationRecord> txt2img_generate(std::span<const prompt::DomainDescription> descriptions,
                                                 int per_class_count, std::span<const std::string> classes,
                                                 const EditParams& params, EditBackend& backend, ImageStore& outputs,
                                                 RecordStore* store = nullptr, const EditRunOptions& options = {});

using Cell = std::pair<double, double>;  // (strength, guidance)

struct SweepGrid {
    BackendKind backend = BackendKind::img2img;
    std::string description_id;
    std::vector<double> strengths;
    std::vector<double> guidances;
    std::vector<std::string> sample_image_ids;
    std::vector<std::uint64_t> seeds;
    std::map<Cell, std::vector<std::string>> cells;  // image digests, sample-major then seed
    std::set<Cell> incomplete;

    std::size_t expected_per_cell() const { return sample_image_ids.size() * seeds.size(); }
    bool contains(Cell cell) const;
};

nlohmann::json sweep_to_json(const SweepGrid& grid);
SweepGrid sweep_from_json(const nlohmann::json& j);

enum class SweepPreset { full, strength_axis, guidance_axis };

struct SweepOptions {
    std::vector<double> strengths;
    std::vector<double> guidances;
    std::size_t sample_size = 10;
    std::size_t seed_count = 4;
    std::uint64_t seed = 0;
    unsigned workers = 4;
};

// Defaults: 5x5 full factorial. Img2img strengths {0.1, 0.3, 0.4, 0.6, 0.9},
// instruct-pix2pix {1.1, 1.3, 1.5, 1.7, 1.9}; guidances {5.0, 6.5, 7.5, 9.0,
// 10.5}. The axis presets hold guidance at 7.5 while varying strength, or
// hold strength at 0.4 / 1.3 while varying guidance over {5.0, 7.5, 9.0}.
SweepOptions default_sweep(BackendKind backend, SweepPreset preset = SweepPreset::full);

// Samples images from the train split and edits each with every seed in
// every cell. A backend failure marks the cell incomplete and the sweep goes on.
SweepGrid run_sweep(const data::Dataset& dataset, const prompt::DomainDescription& description, BackendKind backend,
                    const SweepOptions& options, EditBackend& edit_backend, const data::ImageSource& images,
                    ImageStore& outputs);

enum class Chooser { human, config };

struct ParamSelection {
    EditParams params;
    Chooser chooser = Chooser::config;
};

std::string_view to_string(Chooser chooser);

// Throws RangeError when `choice` is not a cell of the grid.
ParamSelection select_params(const SweepGrid& grid, Cell choice, Chooser chooser, std::uint64_t seed = 0);

}  // namespace alia::edit
