// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/pipeline/run.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "alia/error.hpp"
#include "alia/hash.hpp"
#include "alia/rng.hpp"
#include "stages.hpp"

namespace alia::pipeline {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

EventLog event_log(const ArtifactRoot& root, const std::string& run_id) {
    return EventLog(root.run_dir(run_id) / "events.jsonl");
}

fs::path lock_path(const ArtifactRoot& root, const std::string& run_id) { return root.run_dir(run_id) / "lock"; }

std::string new_run_id(const std::string& name) {
    std::random_device rd;
    std::uint64_t salt = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::string ts = utc_timestamp();  // 2026-01-02T03:04:05.678Z
    std::string compact;
    for (char c : ts.substr(0, 19))
        if (std::isdigit(static_cast<unsigned char>(c))) compact += c;
    std::string prefix = name.empty() ? "run" : name;
    for (char& c : prefix)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-') c = '-';
    return prefix + "-" + compact.substr(0, 8) + "-" + compact.substr(8) + "-" +
           sha256_hex(std::to_string(salt)).substr(0, 6);
}

std::string hash_artifacts(const std::map<std::string, std::string>& artifacts) {
    Sha256 h;
    for (const auto& [name, digest] : artifacts) h.field(name).field(digest);
    return h.hex_digest();
}

void require_complete(const RunState& state, Stage s, const std::string& what) {
    if (state.effective_state(s) != StageState::complete)
        throw Error(ErrorCode::not_found, what + " is not available until " + std::string(to_string(s)) + " completes");
}

// Applies the pending config changes requested on the command line.
void update_config(const ArtifactRoot& root, const std::string& run_id, const RunState& state,
                   const RunOptions& options) {
    if (!options.config && !options.backend) return;
    json next = state.pipeline_config;
    if (options.config) next = pipeline_config_to_json(load_pipeline_config(fs::absolute(*options.config)));
    if (options.backend) {
        next["backends"]["kind"] = *options.backend;
        parse_pipeline_config(next);  // validates the kind
    }
    if (next != state.pipeline_config) event_log(root, run_id).append({{"type", "config"}, {"pipeline_config", next}});
}

}  // namespace

ArtifactRoot::ArtifactRoot(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_ / "runs");
    store_ = std::make_shared<ImageStore>(root_ / "store");
}

ArtifactRoot ArtifactRoot::resolve(const std::optional<fs::path>& explicit_root) {
    if (explicit_root) return ArtifactRoot(*explicit_root);
    if (const char* env = std::getenv(kArtifactRootEnv); env && *env) return ArtifactRoot(env);
    return ArtifactRoot(fs::current_path() / "alia-artifacts");
}

fs::path ArtifactRoot::stage_dir(const std::string& run_id, Stage stage) const {
    return run_dir(run_id) / "stages" / std::string(to_string(stage));
}

WriterLock::WriterLock(const fs::path& lock_file, std::chrono::milliseconds wait) {
    fd_ = ::open(lock_file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + lock_file.string());
    const auto deadline = std::chrono::steady_clock::now() + wait;
    while (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        if (std::chrono::steady_clock::now() >= deadline) {
            ::close(fd_);
            fd_ = -1;
            throw Error(ErrorCode::conflict, "run is locked by another writer");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
}

WriterLock::~WriterLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

std::string init_run(const ArtifactRoot& root, const fs::path& dataset_config, const fs::path& pipeline_config) {
    auto dcfg = data::load_dataset_config(fs::absolute(dataset_config));
    auto pcfg = load_pipeline_config(fs::absolute(pipeline_config));
    detail::load_dataset(dcfg);  // manifest must load

    std::string id;
    do {
        id = new_run_id(dcfg.name);
    } while (fs::exists(root.run_dir(id)));
    fs::create_directories(root.run_dir(id) / "stages");
    event_log(root, id).append({{"type", "init"},
                                {"run", id},
                                {"dataset_config", data::dataset_config_to_json(dcfg)},
                                {"pipeline_config", pipeline_config_to_json(pcfg)}});
    spdlog::info("initialised run {}", id);
    return id;
}

std::vector<std::string> list_runs(const ArtifactRoot& root) {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root.path() / "runs"))
        if (entry.is_directory() && fs::exists(entry.path() / "events.jsonl")) ids.push_back(entry.path().filename());
    std::sort(ids.begin(), ids.end());
    return ids;
}

RunState load_run(const ArtifactRoot& root, const std::string& run_id) {
    if (run_id.empty() || run_id.find('/') != std::string::npos || run_id.find("..") != std::string::npos ||
        !fs::exists(root.run_dir(run_id) / "events.jsonl"))
        throw Error(ErrorCode::not_found, "unknown run '" + run_id + "'");
    auto events = event_log(root, run_id).read();
    return fold(events);
}

data::DatasetConfig run_dataset_config(const RunState& state) {
    return data::parse_dataset_config(state.dataset_config);
}

PipelineConfig run_pipeline_config(const RunState& state) { return parse_pipeline_config(state.pipeline_config); }

StageOutcome run_stage(const ArtifactRoot& root, const std::string& run_id, Stage stage, const RunOptions& options) {
    load_run(root, run_id);  // existence
    WriterLock lock(lock_path(root, run_id));
    update_config(root, run_id, load_run(root, run_id), options);
    RunState state = load_run(root, run_id);

    StageOutcome outcome;
    outcome.stage = stage;
    if (auto up = upstream(stage); up && state.effective_state(*up) != StageState::complete) {
        throw Error(ErrorCode::ordering, std::string(to_string(stage)) + " needs " + std::string(to_string(*up)) +
                                             " to be complete (it is " +
                                             std::string(to_string(state.effective_state(*up))) + ")");
    }
    const std::string input = state.expected_input(stage);
    const StageState current = state.effective_state(stage);
    if (current == StageState::complete || current == StageState::needs_review) {
        outcome.state = current;
        outcome.skipped = true;
        return outcome;
    }

    const StageRecord& previous = state.stage(stage);
    const fs::path dir = root.stage_dir(run_id, stage);
    const bool keep_work = options.resume && previous.input_hash == input;
    if (!keep_work) fs::remove_all(dir);
    fs::create_directories(dir);

    auto log = event_log(root, run_id);
    log.append({{"type", "stage"}, {"stage", to_string(stage)}, {"state", "running"}, {"input_hash", input}});
    spdlog::info("{}: running{}", to_string(stage), keep_work ? " (resuming)" : "");

    detail::StageOutput out;
    try {
        detail::StageContext ctx{root, state, stage, dir, run_dataset_config(state), run_pipeline_config(state)};
        out = detail::execute(ctx);
    } catch (const std::exception& e) {
        log.append({{"type", "stage"},
                    {"stage", to_string(stage)},
                    {"state", "failed"},
                    {"input_hash", input},
                    {"error", e.what()}});
        spdlog::error("{}: {}", to_string(stage), e.what());
        outcome.state = StageState::failed;
        outcome.error = e.what();
        return outcome;
    }

    std::map<std::string, std::string> artifacts;
    for (const auto& name : out.artifacts) artifacts[name] = sha256_hex(read_file(dir / name));
    json event = {{"type", "stage"},
                  {"stage", to_string(stage)},
                  {"state", out.needs_review ? "needs-review" : "complete"},
                  {"input_hash", input},
                  {"content_hash", hash_artifacts(artifacts)},
                  {"artifacts", artifacts},
                  {"result", out.result},
                  {"diagnostics", out.diagnostics}};
    if (out.needs_review) event["review"] = out.review;
    log.append(event);
    for (const auto& d : out.diagnostics) spdlog::warn("{}: {}", to_string(stage), d);
    outcome.state = out.needs_review ? StageState::needs_review : StageState::complete;
    return outcome;
}

std::vector<StageOutcome> run_all(const ArtifactRoot& root, const std::string& run_id, const RunOptions& options) {
    std::vector<StageOutcome> outcomes;
    RunOptions first = options;
    for (auto s : kStages) {
        auto outcome = run_stage(root, run_id, s, first);
        first.config.reset();
        first.backend.reset();
        outcomes.push_back(outcome);
        if (outcome.state != StageState::complete) break;
    }
    return outcomes;
}

json status_json(const RunState& state) {
    json stages = json::array();
    json review = json::array();
    for (auto s : kStages) {
        const auto& r = state.stage(s);
        const StageState eff = state.effective_state(s);
        stages.push_back({{"stage", to_string(s)},
                          {"state", to_string(eff)},
                          {"recorded_state", to_string(r.state)},
                          {"stale", state.stale(s)},
                          {"input_hash", r.input_hash},
                          {"content_hash", r.content_hash},
                          {"output_hash", state.effective_output(s)},
                          {"artifacts", r.artifacts},
                          {"result", r.result},
                          {"error", r.error},
                          {"diagnostics", r.diagnostics}});
        if (eff == StageState::needs_review) {
            json item = r.review.is_null() ? json::object() : r.review;
            item["stage"] = to_string(s);
            item["base"] = r.input_hash;
            review.push_back(item);
        }
    }
    json decisions = json::array();
    for (const auto& d : state.decisions) decisions.push_back(decision_to_json(d));
    return {{"run", state.run_id},
            {"created", state.created},
            {"dataset", state.dataset_config.value("name", "")},
            {"stages", stages},
            {"review", review},
            {"decisions", decisions}};
}

std::string status_text(const RunState& state) {
    std::ostringstream out;
    out << "run " << state.run_id << " (" << state.dataset_config.value("name", "") << ", created " << state.created
        << ")\n";
    for (auto s : kStages) {
        const auto& r = state.stage(s);
        std::string name(to_string(s));
        std::string st(to_string(state.effective_state(s)));
        out << "  " << name << std::string(15 - std::min<std::size_t>(14, name.size()), ' ') << st;
        if (state.stale(s)) out << " (stale)";
        if (!r.error.empty() && r.state == StageState::failed) out << "  " << r.error;
        if (!r.content_hash.empty() && state.effective_state(s) == StageState::complete)
            out << std::string(14 - std::min<std::size_t>(13, st.size()), ' ') << r.content_hash.substr(0, 12);
        out << "\n";
    }
    for (auto s : kStages)
        if (state.effective_state(s) == StageState::needs_review)
            out << "needs review: " << to_string(s) << " - "
                << state.stage(s).review.value("message", std::string("decision required")) << "\n";
    if (!state.decisions.empty()) out << state.decisions.size() << " decision(s) recorded\n";
    return out.str();
}

std::vector<prompt::DomainDescription> effective_descriptions(const ArtifactRoot& root, const RunState& state) {
    require_complete(state, Stage::summarize, "prompts");
    const auto& r = state.stage(Stage::summarize);
    auto descriptions = prompt::descriptions_from_json(
        detail::read_json(root.stage_dir(state.run_id, Stage::summarize) / "descriptions.json"));
    auto dcfg = run_dataset_config(state);
    for (const auto& d : state.applicable({DecisionKind::prompt_edit, DecisionKind::instruction_approval},
                                          r.content_hash)) {
        if (d.kind == DecisionKind::prompt_edit) {
            descriptions.clear();
            for (const auto& item : d.payload.at("descriptions")) {
                auto desc = prompt::make_description(item.at("template").get<std::string>(),
                                                     item.value("prefix", dcfg.prefix),
                                                     prompt::DescriptionSource::user_provided);
                if (item.contains("instruction_template"))
                    desc.instruction_template = item.at("instruction_template").get<std::string>();
                descriptions.push_back(std::move(desc));
            }
        } else {
            for (auto& desc : descriptions)
                if (desc.id == d.payload.at("description_id").get<std::string>())
                    desc.instruction_template = d.payload.at("instruction_template").get<std::string>();
        }
    }
    return descriptions;
}

edit::SweepGrid load_grid(const ArtifactRoot& root, const RunState& state) {
    require_complete(state, Stage::edit_sweep, "the sweep grid");
    return edit::sweep_from_json(detail::read_json(root.stage_dir(state.run_id, Stage::edit_sweep) / "sweep.json"));
}

json grid_originals(const ArtifactRoot& root, const RunState& state) {
    require_complete(state, Stage::edit_sweep, "the sweep grid");
    return detail::read_json(root.stage_dir(state.run_id, Stage::edit_sweep) / "sweep.json").value("originals", json::object());
}

std::vector<edit::AugmentationRecord> effective_records(const ArtifactRoot& root, const RunState& state) {
    require_complete(state, Stage::filter, "filter results");
    std::vector<edit::AugmentationRecord> records;
    for (const auto& j : detail::read_json(root.stage_dir(state.run_id, Stage::filter) / "records.json"))
        records.push_back(edit::record_from_json(j));
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < records.size(); ++i) index[records[i].edit_id] = i;
    for (const auto& d : state.applicable({DecisionKind::filter_override}, state.stage(Stage::filter).content_hash)) {
        auto it = index.find(d.payload.at("edit_id").get<std::string>());
        if (it == index.end()) continue;
        if (!detail::apply_override(records[it->second], d.payload.at("action").get<std::string>(), d.actor,
                                    d.timestamp))
            spdlog::warn("decision {} no longer applies", d.id);
    }
    return records;
}

std::vector<filter::FilterVerdict> load_verdicts(const ArtifactRoot& root, const RunState& state) {
    require_complete(state, Stage::filter, "filter results");
    std::vector<filter::FilterVerdict> out;
    for (const auto& j : detail::read_json(root.stage_dir(state.run_id, Stage::filter) / "verdicts.json"))
        out.push_back(filter::verdict_from_json(j));
    return out;
}

std::string decision_base(const RunState& state, DecisionKind kind) {
    switch (kind) {
        case DecisionKind::param_selection: {
            auto st = state.effective_state(Stage::select_params);
            if (st != StageState::needs_review && st != StageState::complete) return {};
            return state.stage(Stage::select_params).input_hash;
        }
        case DecisionKind::prompt_edit:
        case DecisionKind::instruction_approval:
            return state.effective_state(Stage::summarize) == StageState::complete
                       ? state.stage(Stage::summarize).content_hash
                       : std::string{};
        case DecisionKind::filter_override:
            return state.effective_state(Stage::filter) == StageState::complete ? state.stage(Stage::filter).content_hash
                                                                                : std::string{};
    }
    return {};
}

namespace {

double number_field(const json& payload, const char* key) {
    if (!payload.is_object() || !payload.contains(key) || !payload.at(key).is_number())
        throw ValidationError(key, std::string(key) + " must be a number");
    return payload.at(key).get<double>();
}

std::string string_field(const json& payload, const char* key) {
    if (!payload.is_object() || !payload.contains(key) || !payload.at(key).is_string())
        throw ValidationError(key, std::string(key) + " must be a string");
    return payload.at(key).get<std::string>();
}

json checked_payload(const ArtifactRoot& root, const RunState& state, DecisionKind kind, const json& payload) {
    auto dcfg = run_dataset_config(state);
    switch (kind) {
        case DecisionKind::param_selection: {
            const double s = number_field(payload, "strength"), g = number_field(payload, "guidance");
            auto grid = load_grid(root, state);
            auto seed = derive_seed(run_pipeline_config(state).seed, "edit");
            auto chosen = edit::select_params(grid, {s, g}, edit::Chooser::human, seed);
            json params = edit::params_to_json(chosen.params);
            params["chooser"] = "human";
            return {{"cell", {s, g}}, {"params", params}};
        }
        case DecisionKind::prompt_edit: {
            if (!payload.is_object() || !payload.contains("descriptions") || !payload.at("descriptions").is_array() ||
                payload.at("descriptions").empty())
                throw ValidationError("descriptions", "descriptions must be a non-empty array");
            json out = json::array();
            std::size_t i = 0;
            for (const auto& item : payload.at("descriptions")) {
                const std::string field = "descriptions[" + std::to_string(i++) + "]";
                if (!item.is_object() || !item.contains("template") || !item.at("template").is_string())
                    throw ValidationError(field + ".template", "template must be a string");
                prompt::DomainDescription desc;
                try {
                    desc = prompt::make_description(item.at("template").get<std::string>(),
                                                    item.value("prefix", dcfg.prefix),
                                                    prompt::DescriptionSource::user_provided);
                    if (item.contains("instruction_template"))
                        desc.instruction_template = item.at("instruction_template").get<std::string>();
                    prompt::check_description(desc, dcfg.classes);
                } catch (const ValidationError& e) {
                    throw ValidationError(field + "." + e.field(), e.what());
                }
                json normalized = {{"template", desc.template_text}, {"prefix", desc.prefix}};
                if (desc.instruction_template) normalized["instruction_template"] = *desc.instruction_template;
                out.push_back(normalized);
            }
            return {{"descriptions", out}};
        }
        case DecisionKind::instruction_approval: {
            const std::string id = string_field(payload, "description_id");
            auto descriptions = effective_descriptions(root, state);
            auto it = std::find_if(descriptions.begin(), descriptions.end(),
                                   [&](const auto& d) { return d.id == id; });
            if (it == descriptions.end()) throw ValidationError("description_id", "no description with id " + id);
            prompt::DomainDescription desc = *it;
            desc.instruction_template = payload.contains("instruction_template")
                                            ? string_field(payload, "instruction_template")
                                            : prompt::to_instruction(*it).template_text;
            prompt::check_description(desc, dcfg.classes);
            return {{"description_id", id}, {"instruction_template", *desc.instruction_template}};
        }
        case DecisionKind::filter_override: {
            const std::string edit_id = string_field(payload, "edit_id");
            const std::string action = string_field(payload, "action");
            if (action != "restore" && action != "reject" && action != "confirm")
                throw ValidationError("action", "action must be restore, reject or confirm");
            auto records = effective_records(root, state);
            auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.edit_id == edit_id; });
            if (it == records.end()) throw Error(ErrorCode::not_found, "no edit " + edit_id);
            auto probe = *it;
            if (!probe.ok() || !detail::apply_override(probe, action, "probe", ""))
                throw ValidationError("action", "cannot " + action + " an edit in status " +
                                                    std::string(edit::to_string(it->status)));
            return {{"edit_id", edit_id}, {"action", action}};
        }
    }
    return payload;
}

}  // namespace

Decision apply_decision(const ArtifactRoot& root, const std::string& run_id, DecisionKind kind, const json& payload,
                        const std::string& actor, const std::optional<std::string>& base) {
    load_run(root, run_id);
    WriterLock lock(lock_path(root, run_id), std::chrono::milliseconds(5000));
    RunState state = load_run(root, run_id);
    const std::string current = decision_base(state, kind);
    if (current.empty()) {
        throw Error(ErrorCode::conflict,
                    std::string(to_string(kind)) + " is not accepted in the run's current state");
    }
    if (base && *base != current)
        throw Error(ErrorCode::conflict, "stale decision: the stage has been re-run since it was viewed");

    Decision d;
    d.kind = kind;
    d.payload = checked_payload(root, state, kind, payload);
    d.actor = actor.empty() ? "human" : actor;
    d.timestamp = utc_timestamp();
    d.base = current;
    Sha256 h;
    h.field(to_string(kind)).field(d.payload.dump()).field(d.actor).field(d.timestamp).field(d.base).field(state.events);
    d.id = h.hex_digest().substr(0, 32);
    event_log(root, run_id).append({{"type", "decision"}, {"decision", decision_to_json(d)}});
    return d;
}

}  // namespace alia::pipeline
