// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "alia/content_store.hpp"
#include "alia/data/config.hpp"
#include "alia/edit/generate.hpp"
#include "alia/filter/filters.hpp"
#include "alia/pipeline/config.hpp"
#include "alia/pipeline/manifest.hpp"
#include "alia/prompt/descriptions.hpp"

namespace alia::pipeline {

inline constexpr const char* kArtifactRootEnv = "ALIA_ARTIFACT_ROOT";
inline constexpr const char* kFaultInjectEnv = "ALIA_FAULT_INJECT";

// Layout under the artifact root:
//   store/                      content-addressed images shared by all runs
//   runs/<id>/events.jsonl      the run manifest (event log)
//   runs/<id>/lock              writer lock
//   runs/<id>/stages/<stage>/   stage artifacts and working files
class ArtifactRoot {
public:
    explicit ArtifactRoot(std::filesystem::path root);
    // Explicit path, else $ALIA_ARTIFACT_ROOT, else ./alia-artifacts.
    static ArtifactRoot resolve(const std::optional<std::filesystem::path>& explicit_root = std::nullopt);

    const std::filesystem::path& path() const { return root_; }
    std::filesystem::path run_dir(const std::string& run_id) const { return root_ / "runs" / run_id; }
    std::filesystem::path stage_dir(const std::string& run_id, Stage stage) const;
    std::filesystem::path store_dir() const { return root_ / "store"; }
    ImageStore& store() const { return *store_; }
    std::shared_ptr<ImageStore> shared_store() const { return store_; }

private:
    std::filesystem::path root_;
    std::shared_ptr<ImageStore> store_;
};

// One writer per run, via flock on runs/<id>/lock. Throws Error(conflict)
// when another writer holds it past `wait`.
class WriterLock {
public:
    WriterLock(const std::filesystem::path& lock_file, std::chrono::milliseconds wait = std::chrono::milliseconds{0});
    ~WriterLock();
    WriterLock(const WriterLock&) = delete;
    WriterLock& operator=(const WriterLock&) = delete;

private:
    int fd_ = -1;
};

// Validates both configs (ConfigError naming the field) and creates a run
// with every stage pending. Each call yields a fresh id.
std::string init_run(const ArtifactRoot& root, const std::filesystem::path& dataset_config,
                     const std::filesystem::path& pipeline_config);

std::vector<std::string> list_runs(const ArtifactRoot& root);
// Error(not_found) for an unknown id.
RunState load_run(const ArtifactRoot& root, const std::string& run_id);

struct RunOptions {
    bool resume = false;                      // keep working files of an interrupted attempt
    std::optional<std::string> backend;       // overrides backends.kind
    std::optional<std::filesystem::path> config;  // replaces the pipeline config
};

struct StageOutcome {
    Stage stage = Stage::caption;
    StageState state = StageState::pending;
    bool skipped = false;  // already complete with current inputs
    std::string error;
};

// Runs one stage. Error(ordering) when its upstream is not complete.
// Failures are recorded in the manifest and reported in the outcome.
StageOutcome run_stage(const ArtifactRoot& root, const std::string& run_id, Stage stage,
                       const RunOptions& options = {});
// Runs stages in order until one fails or needs review.
std::vector<StageOutcome> run_all(const ArtifactRoot& root, const std::string& run_id, const RunOptions& options = {});

nlohmann::json status_json(const RunState& state);
std::string status_text(const RunState& state);

// Loads the run's datasets and configs.
data::DatasetConfig run_dataset_config(const RunState& state);
PipelineConfig run_pipeline_config(const RunState& state);

// Views over artifacts with the applicable human decisions applied.
std::vector<prompt::DomainDescription> effective_descriptions(const ArtifactRoot& root, const RunState& state);
edit::SweepGrid load_grid(const ArtifactRoot& root, const RunState& state);
nlohmann::json grid_originals(const ArtifactRoot& root, const RunState& state);  // record id -> digest
std::vector<edit::AugmentationRecord> effective_records(const ArtifactRoot& root, const RunState& state);
std::vector<filter::FilterVerdict> load_verdicts(const ArtifactRoot& root, const RunState& state);

// Validates and records a decision under the writer lock.
//   param-selection      {"strength", "guidance"}
//   prompt-edit          {"descriptions": [{"template", "prefix"?, "instruction_template"?}]}
//   instruction-approval {"description_id", "instruction_template"?}
//   filter-override      {"edit_id", "action": "restore" | "reject" | "confirm"}
// An optional "base" in `request` must match the current base, otherwise
// Error(conflict). Invalid payloads raise ValidationError or RangeError.
Decision apply_decision(const ArtifactRoot& root, const std::string& run_id, DecisionKind kind,
                        const nlohmann::json& payload, const std::string& actor,
                        const std::optional<std::string>& base = std::nullopt);

struct FixturePaths {
    std::filesystem::path dataset_config;
    std::filesystem::path pipeline_config;
};

// Writes the synthetic 3-class dataset under dir/data and a stub-backed
// pipeline config small enough to run end to end in seconds. With
// `pin_params` unset, select-params waits for a human choice.
FixturePaths write_fixture(const std::filesystem::path& dir, std::uint64_t seed = 7, bool pin_params = true,
                           bool ablations = false);

// Current base hash for decisions of `kind`; empty when the stage they act
// on has not produced anything yet.
std::string decision_base(const RunState& state, DecisionKind kind);

}  // namespace alia::pipeline
