// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/pipeline/manifest.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>

#include <spdlog/spdlog.h>

#include "alia/error.hpp"
#include "alia/hash.hpp"

namespace alia::pipeline {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 10> kStageNames = {
    "caption", "summarize", "edit-sweep", "select-params", "edit", "filter", "assemble", "train", "evaluate", "report"};

constexpr std::array<std::string_view, 4> kDecisionNames = {"param-selection", "prompt-edit", "filter-override",
                                                            "instruction-approval"};

StageState parse_state(std::string_view text) {
    for (auto s : {StageState::pending, StageState::running, StageState::complete, StageState::failed,
                   StageState::needs_review})
        if (to_string(s) == text) return s;
    throw ValidationError("state", "unknown stage state '" + std::string(text) + "'");
}

void strip_workers(json& j) {
    if (j.is_object()) {
        j.erase("workers");
        for (auto& [k, v] : j.items()) strip_workers(v);
    }
}

json section(const json& j, const char* key) { return j.contains(key) ? j.at(key) : json(); }

}  // namespace

std::string_view to_string(Stage stage) { return kStageNames[static_cast<std::size_t>(stage)]; }

Stage parse_stage(std::string_view text) {
    for (std::size_t i = 0; i < kStageNames.size(); ++i)
        if (kStageNames[i] == text) return kStages[i];
    throw ValidationError("stage", "unknown stage '" + std::string(text) + "'");
}

std::optional<Stage> upstream(Stage stage) {
    if (stage == Stage::caption) return std::nullopt;
    return static_cast<Stage>(static_cast<int>(stage) - 1);
}

std::string_view to_string(StageState state) {
    switch (state) {
        case StageState::pending: return "pending";
        case StageState::running: return "running";
        case StageState::complete: return "complete";
        case StageState::failed: return "failed";
        case StageState::needs_review: return "needs-review";
    }
    return "?";
}

std::string_view to_string(DecisionKind kind) { return kDecisionNames[static_cast<std::size_t>(kind)]; }

DecisionKind parse_decision_kind(std::string_view text) {
    for (std::size_t i = 0; i < kDecisionNames.size(); ++i)
        if (kDecisionNames[i] == text) return static_cast<DecisionKind>(i);
    throw ValidationError("kind", "unknown decision kind '" + std::string(text) + "'");
}

json decision_to_json(const Decision& d) {
    return {{"id", d.id},         {"kind", to_string(d.kind)}, {"payload", d.payload},
            {"actor", d.actor},   {"timestamp", d.timestamp},  {"base", d.base}};
}

Decision decision_from_json(const json& j) {
    Decision d;
    d.id = j.at("id").get<std::string>();
    d.kind = parse_decision_kind(j.at("kind").get<std::string>());
    d.payload = j.value("payload", json::object());
    d.actor = j.value("actor", "");
    d.timestamp = j.value("timestamp", "");
    d.base = j.value("base", "");
    return d;
}

json stage_config_view(Stage s, const json& dataset_config, const json& pipeline_config) {
    json p = pipeline_config;
    strip_workers(p);
    json view = {{"seed", section(p, "seed")}};
    switch (s) {
        case Stage::caption:
            view["dataset"] = dataset_config;
            view["backends"] = section(p, "backends");
            view["caption"] = section(p, "caption");
            break;
        case Stage::summarize:
            view["backends"] = section(p, "backends");
            view["caption"] = section(p, "caption");
            view["prompts"] = section(p, "prompts");
            break;
        case Stage::edit_sweep: {
            json e = section(p, "edit");
            view["backends"] = section(p, "backends");
            view["edit"] = {{"backend", section(e, "backend")},           {"sweep_preset", section(e, "sweep_preset")},
                            {"sweep_sample", section(e, "sweep_sample")}, {"sweep_seeds", section(e, "sweep_seeds")},
                            {"sweep_description", section(e, "sweep_description")}};
            break;
        }
        case Stage::select_params: {
            json e = section(p, "edit");
            view["edit"] = {{"backend", section(e, "backend")},
                            {"strength", section(e, "strength")},
                            {"guidance", section(e, "guidance")}};
            break;
        }
        case Stage::edit:
            view["backends"] = section(p, "backends");
            view["edit"] = section(p, "edit");
            view["ablations"] = section(section(p, "train"), "ablations");
            break;
        case Stage::filter:
            view["filter"] = section(p, "filter");
            view["train"] = section(p, "train");
            break;
        case Stage::assemble: break;
        case Stage::train:
        case Stage::evaluate: view["train"] = section(p, "train"); break;
        case Stage::report: break;
    }
    return view;
}

std::string RunState::expected_input(Stage s) const {
    Sha256 h;
    h.field("stage").field(to_string(s));
    h.field(stage_config_view(s, dataset_config, pipeline_config).dump());
    if (auto up = upstream(s)) h.field(effective_output(*up));
    return h.hex_digest();
}

bool RunState::stale(Stage s) const {
    const auto& r = stage(s);
    if (r.state != StageState::complete && r.state != StageState::needs_review) return false;
    return r.input_hash != expected_input(s);
}

StageState RunState::effective_state(Stage s) const {
    if (stale(s)) return StageState::pending;
    return stage(s).state;
}

std::string RunState::effective_output(Stage s) const {
    if (effective_state(s) != StageState::complete) return {};
    const auto& r = stage(s);
    Sha256 h;
    h.field(r.input_hash).field(r.content_hash);
    if (s == Stage::summarize)
        for (const auto& d : applicable({DecisionKind::prompt_edit, DecisionKind::instruction_approval}, r.content_hash))
            h.field(d.id);
    if (s == Stage::filter)
        for (const auto& d : applicable({DecisionKind::filter_override}, r.content_hash)) h.field(d.id);
    return h.hex_digest();
}

std::vector<Decision> RunState::applicable(std::initializer_list<DecisionKind> kinds, const std::string& base) const {
    std::vector<Decision> out;
    for (const auto& d : decisions) {
        if (d.base != base) continue;
        for (auto k : kinds)
            if (d.kind == k) out.push_back(d);
    }
    return out;
}

RunState fold(std::span<const json> events) {
    RunState state;
    for (auto s : kStages) state.stages[s] = {};
    for (const auto& e : events) {
        ++state.events;
        const std::string type = e.value("type", "");
        if (type == "init") {
            state.run_id = e.at("run").get<std::string>();
            state.created = e.value("time", "");
            state.dataset_config = e.at("dataset_config");
            state.pipeline_config = e.at("pipeline_config");
        } else if (type == "config") {
            state.pipeline_config = e.at("pipeline_config");
        } else if (type == "stage") {
            auto& r = state.stages[parse_stage(e.at("stage").get<std::string>())];
            StageRecord next;
            next.state = parse_state(e.at("state").get<std::string>());
            next.input_hash = e.value("input_hash", "");
            next.content_hash = e.value("content_hash", "");
            if (e.contains("artifacts")) e.at("artifacts").get_to(next.artifacts);
            next.result = e.value("result", json());
            next.review = e.value("review", json());
            next.error = e.value("error", "");
            if (e.contains("diagnostics")) e.at("diagnostics").get_to(next.diagnostics);
            r = std::move(next);
        } else if (type == "decision") {
            Decision d = decision_from_json(e.at("decision"));
            if (d.kind == DecisionKind::param_selection) {
                auto& r = state.stages[Stage::select_params];
                if (r.input_hash == d.base &&
                    (r.state == StageState::needs_review || r.state == StageState::complete)) {
                    r.state = StageState::complete;
                    r.result = d.payload.at("params");
                    r.content_hash = sha256_hex(d.payload.dump());
                    r.review = json();
                }
            }
            state.decisions.push_back(std::move(d));
        }
    }
    return state;
}

std::vector<json> EventLog::read() const {
    std::vector<json> events;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            events.push_back(json::parse(line));
        } catch (const json::parse_error&) {
            spdlog::warn("event log {}: skipping torn line", path_.string());
        }
    }
    return events;
}

void EventLog::append(json event) {
    event["seq"] = read().size();
    event["time"] = utc_timestamp();
    const std::string line = event.dump() + "\n";
    int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot open event log " + path_.string());
    const auto written = ::write(fd, line.data(), line.size());
    ::fsync(fd);
    ::close(fd);
    if (written != static_cast<ssize_t>(line.size())) throw IoError("short write to event log " + path_.string());
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

}  // namespace alia::pipeline
