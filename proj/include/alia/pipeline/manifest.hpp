// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace alia::pipeline {

enum class Stage { caption, summarize, edit_sweep, select_params, edit, filter, assemble, train, evaluate, report };

inline constexpr std::array<Stage, 10> kStages = {Stage::caption,  Stage::summarize, Stage::edit_sweep,
                                                  Stage::select_params, Stage::edit, Stage::filter,
                                                  Stage::assemble, Stage::train,     Stage::evaluate,
                                                  Stage::report};

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);  // ValidationError("stage")
// The stage this one consumes; nullopt for caption.
std::optional<Stage> upstream(Stage stage);

enum class StageState { pending, running, complete, failed, needs_review };
std::string_view to_string(StageState state);

enum class DecisionKind { param_selection, prompt_edit, filter_override, instruction_approval };
std::string_view to_string(DecisionKind kind);
DecisionKind parse_decision_kind(std::string_view text);  // ValidationError("kind")

// A human decision. `base` is the hash the decision was made against: the
// select-params input hash for param-selection, the summarize content hash
// for prompt edits and instruction approvals, the filter content hash for
// overrides. A decision only applies while its base is current.
struct Decision {
    std::string id;
    DecisionKind kind = DecisionKind::param_selection;
    nlohmann::json payload;
    std::string actor;
    std::string timestamp;
    std::string base;
};

nlohmann::json decision_to_json(const Decision& decision);
Decision decision_from_json(const nlohmann::json& j);

struct StageRecord {
    StageState state = StageState::pending;
    std::string input_hash;                     // of the latest attempt
    std::string content_hash;                   // over the artifacts, once complete
    std::map<std::string, std::string> artifacts;  // file name -> sha256
    nlohmann::json result;                      // small structured output
    nlohmann::json review;                      // open review items
    std::string error;
    std::vector<std::string> diagnostics;
};

// Everything known about a run, folded from its event log.
struct RunState {
    std::string run_id;
    std::string created;
    nlohmann::json dataset_config;
    nlohmann::json pipeline_config;
    std::map<Stage, StageRecord> stages;
    std::vector<Decision> decisions;
    std::size_t events = 0;

    const StageRecord& stage(Stage s) const { return stages.at(s); }

    // Hash a stage's inputs must have for its output to be current:
    // stage name, the config sections it reads, and the upstream output.
    std::string expected_input(Stage s) const;
    // complete/needs-review records whose input is no longer current
    // report pending.
    StageState effective_state(Stage s) const;
    bool stale(Stage s) const;
    // Identity of the stage's output including the human decisions that
    // modify it; empty unless the stage is effectively complete.
    std::string effective_output(Stage s) const;
    // Decisions of the given kinds whose base is `base`, in log order.
    std::vector<Decision> applicable(std::initializer_list<DecisionKind> kinds, const std::string& base) const;
};

// Pure: the same events always give the same state.
RunState fold(std::span<const nlohmann::json> events);

// Config sections a stage reads, with worker counts removed since they do
// not change outputs.
nlohmann::json stage_config_view(Stage s, const nlohmann::json& dataset_config,
                                 const nlohmann::json& pipeline_config);

// Append-only JSON-lines event log. Each event is written with a single
// write; a torn trailing line (crash mid-write) is ignored on read.
class EventLog {
public:
    explicit EventLog(std::filesystem::path path) : path_(std::move(path)) {}
    std::vector<nlohmann::json> read() const;
    // Adds "seq" and "time" and appends.
    void append(nlohmann::json event);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

std::string utc_timestamp();

}  // namespace alia::pipeline
