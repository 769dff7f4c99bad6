// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/review/service.hpp"

#include <algorithm>
#include <charconv>

#include <spdlog/spdlog.h>

#include "httplib.h"

#include "alia/error.hpp"
#include "alia/hash.hpp"
#include "alia/prompt/descriptions.hpp"

namespace alia::review {

namespace {

using nlohmann::json;
using pipeline::ArtifactRoot;
using pipeline::DecisionKind;
using pipeline::RunState;
using pipeline::Stage;
using pipeline::StageState;

std::string image_url(const std::string& digest) { return "/images/" + digest; }

json image_ref(const std::string& digest) { return {{"digest", digest}, {"url", image_url(digest)}}; }

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::validation:
        case ErrorCode::range:
        case ErrorCode::config:
        case ErrorCode::empty_descriptions:
        case ErrorCode::missing_class:
            return 422;
        case ErrorCode::conflict:
        case ErrorCode::ordering:
            return 409;
        case ErrorCode::not_found:
            return 404;
        default:
            return 500;
    }
}

Response json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

Response error_body(int status, const std::string& code, const std::string& message, const std::string& field = {}) {
    json body = {{"code", code}, {"message", message}};
    if (!field.empty()) body["field"] = field;
    return json_response(status, body);
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= path.size()) {
        auto end = path.find('/', start);
        if (end == std::string::npos) end = path.size();
        if (end > start) parts.push_back(path.substr(start, end - start));
        start = end + 1;
    }
    return parts;
}

std::optional<std::string> query_value(const std::multimap<std::string, std::string>& query, const std::string& key) {
    auto it = query.find(key);
    if (it == query.end() || it->second.empty()) return std::nullopt;
    return it->second;
}

std::size_t parse_positive(const std::string& text, const std::string& field) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || v == 0)
        throw ValidationError(field, field + " must be a positive integer");
    return v;
}

filter::Stage parse_filter_stage(const std::string& text) {
    for (auto s : {filter::Stage::semantic, filter::Stage::confidence, filter::Stage::knn})
        if (filter::to_string(s) == text) return s;
    throw ValidationError("stage", "unknown filter stage '" + text + "'");
}

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw ValidationError("body", std::string("malformed JSON: ") + e.what());
    }
}

json read_artifact(const ArtifactRoot& root, const RunState& state, Stage stage, const std::string& name) {
    return json::parse(read_file(root.stage_dir(state.run_id, stage) / name));
}

// Status and stage tallies straight from records and verdicts.
struct Tallies {
    std::map<std::string, std::size_t> status;
    std::map<std::string, std::map<std::string, std::size_t>> stage;
};

json tallies_json(const Tallies& t) { return {{"status", t.status}, {"stage", t.stage}}; }

}  // namespace

Response error_response(const std::exception& e) {
    if (const auto* v = dynamic_cast<const ValidationError*>(&e))
        return error_body(422, to_string(v->code()), v->what(), v->field());
    if (const auto* c = dynamic_cast<const ConfigError*>(&e))
        return error_body(422, to_string(c->code()), c->what(), c->field());
    if (const auto* err = dynamic_cast<const Error*>(&e))
        return error_body(status_for(err->code()), to_string(err->code()), err->what());
    return error_body(500, "internal", e.what());
}

json runs_view(const ArtifactRoot& root) {
    json out = json::array();
    for (const auto& id : pipeline::list_runs(root)) {
        auto state = pipeline::load_run(root, id);
        json stages = json::object();
        bool review = false;
        for (auto s : pipeline::kStages) {
            auto st = state.effective_state(s);
            stages[std::string(to_string(s))] = to_string(st);
            review = review || st == StageState::needs_review;
        }
        out.push_back({{"id", id},
                       {"dataset", state.dataset_config.value("name", "")},
                       {"created", state.created},
                       {"stages", stages},
                       {"needs_review", review}});
    }
    return out;
}

json grid_view(const ArtifactRoot& root, const RunState& state) {
    auto grid = pipeline::load_grid(root, state);
    auto originals = pipeline::grid_originals(root, state);
    json orig = json::array();
    for (const auto& id : grid.sample_image_ids) {
        json item = {{"image_id", id}};
        if (originals.contains(id)) item.update(image_ref(originals[id].get<std::string>()));
        orig.push_back(item);
    }
    json cells = json::array();
    const std::size_t seeds = std::max<std::size_t>(1, grid.seeds.size());
    for (double s : grid.strengths) {
        for (double g : grid.guidances) {
            const edit::Cell cell{s, g};
            json images = json::array();
            auto it = grid.cells.find(cell);
            if (it != grid.cells.end()) {
                for (std::size_t i = 0; i < it->second.size(); ++i) {
                    json img = image_ref(it->second[i]);
                    img["sample"] = i / seeds;
                    if (!grid.seeds.empty()) img["seed"] = grid.seeds[i % seeds];
                    images.push_back(img);
                }
            }
            const bool complete = it != grid.cells.end() && !grid.incomplete.count(cell) &&
                                  it->second.size() == grid.expected_per_cell();
            cells.push_back({{"strength", s}, {"guidance", g}, {"complete", complete}, {"count", images.size()},
                             {"images", images}});
        }
    }
    const auto select_state = state.effective_state(Stage::select_params);
    return {{"run", state.run_id},
            {"backend", edit::to_string(grid.backend)},
            {"description_id", grid.description_id},
            {"strengths", grid.strengths},
            {"guidances", grid.guidances},
            {"seeds", grid.seeds},
            {"expected_per_cell", grid.expected_per_cell()},
            {"originals", orig},
            {"cells", cells},
            {"select_params", to_string(select_state)},
            {"selected", select_state == StageState::complete ? state.stage(Stage::select_params).result : json()},
            {"base", pipeline::decision_base(state, DecisionKind::param_selection)}};
}

json prompts_view(const ArtifactRoot& root, const RunState& state) {
    auto descriptions = pipeline::effective_descriptions(root, state);
    auto dcfg = pipeline::run_dataset_config(state);
    auto pcfg = pipeline::run_pipeline_config(state);
    json items = json::array();
    for (const auto& d : descriptions) {
        auto instr = prompt::to_instruction(d);
        json item = {{"id", d.id},
                     {"template", d.template_text},
                     {"prefix", d.prefix},
                     {"source", d.source == prompt::DescriptionSource::user_provided ? "user" : "alia"},
                     {"instruction",
                      {{"template", instr.template_text},
                       {"needs_review", instr.needs_review && !d.instruction_template},
                       {"approved", d.instruction_template.has_value()}}}};
        if (!dcfg.classes.empty()) item["example"] = prompt::instantiate_prompt(d, dcfg.classes.front());
        items.push_back(item);
    }
    return {{"run", state.run_id},
            {"backend", edit::to_string(pcfg.edit.backend)},
            {"classes", dcfg.classes},
            {"descriptions", items},
            {"base", pipeline::decision_base(state, DecisionKind::prompt_edit)}};
}

namespace {

Tallies tally(const std::vector<edit::AugmentationRecord>& records, const std::vector<filter::FilterVerdict>& verdicts) {
    Tallies t;
    for (const auto& r : records) ++t.status[std::string(edit::to_string(r.status))];
    for (const auto& v : verdicts) ++t.stage[std::string(filter::to_string(v.stage))][v.keep ? "kept" : "rejected"];
    return t;
}

}  // namespace

json filters_view(const ArtifactRoot& root, const RunState& state, const FilterQuery& query) {
    std::optional<filter::Stage> stage;
    std::optional<edit::EditStatus> status;
    if (query.stage) stage = parse_filter_stage(*query.stage);
    if (query.status) status = edit::parse_status(*query.status);
    if (query.page == 0) throw ValidationError("page", "page must be a positive integer");
    if (query.page_size == 0 || query.page_size > kMaxPageSize)
        throw ValidationError("page_size", "page_size must lie in [1, " + std::to_string(kMaxPageSize) + "]");

    auto records = pipeline::effective_records(root, state);
    auto verdicts = pipeline::load_verdicts(root, state);
    const auto originals_path = root.stage_dir(state.run_id, Stage::filter) / "originals.json";
    json originals = std::filesystem::exists(originals_path) ? json::parse(read_file(originals_path)) : json::object();
    std::map<std::string, std::vector<const filter::FilterVerdict*>> by_edit;
    for (const auto& v : verdicts) by_edit[v.edit_id].push_back(&v);

    std::vector<const edit::AugmentationRecord*> matching;
    for (const auto& r : records) {
        if (status && r.status != *status) continue;
        if (stage) {
            const auto& vs = by_edit[r.edit_id];
            if (std::none_of(vs.begin(), vs.end(), [&](const auto* v) { return v->stage == *stage; })) continue;
        }
        matching.push_back(&r);
    }
    const std::size_t total = matching.size();
    const std::size_t pages = (total + query.page_size - 1) / query.page_size;
    json items = json::array();
    for (std::size_t i = (query.page - 1) * query.page_size; i < std::min(total, query.page * query.page_size); ++i) {
        const auto& r = *matching[i];
        json rj = edit::record_to_json(r);
        json item = {{"edit_id", r.edit_id},
                     {"label", r.label},
                     {"status", edit::to_string(r.status)},
                     {"prompt", r.prompt},
                     {"params", edit::params_to_json(r.params)},
                     {"audit", rj.value("audit", json::array())}};
        if (r.parent_id) item["parent_id"] = *r.parent_id;
        if (r.error) item["error"] = *r.error;
        if (!r.uri.empty()) item["image"] = image_ref(r.uri);
        if (r.parent_id && originals.contains(*r.parent_id))
            item["original"] = image_ref(originals[*r.parent_id].get<std::string>());
        json vs = json::array();
        for (const auto* v : by_edit[r.edit_id]) vs.push_back(filter::verdict_to_json(*v));
        item["verdicts"] = vs;
        items.push_back(item);
    }
    return {{"run", state.run_id},
            {"total", total},
            {"page", query.page},
            {"page_size", query.page_size},
            {"pages", pages},
            {"tallies", tallies_json(tally(records, verdicts))},
            {"items", items},
            {"base", pipeline::decision_base(state, DecisionKind::filter_override)}};
}

json consistency_view(const ArtifactRoot& root, const RunState& state) {
    json checks = json::array();
    bool consistent = true;
    auto check = [&](const std::string& name, const json& view, const json& recount) {
        const bool ok = view == recount;
        consistent = consistent && ok;
        checks.push_back({{"name", name}, {"view", view}, {"recount", recount}, {"ok", ok}});
    };

    if (state.effective_state(Stage::edit_sweep) == StageState::complete) {
        json raw = read_artifact(root, state, Stage::edit_sweep, "sweep.json");
        std::map<std::string, std::size_t> recount, shown;
        auto key = [](const json& c) {
            return std::to_string(c.at("strength").get<double>()) + "/" + std::to_string(c.at("guidance").get<double>());
        };
        for (const auto& c : raw.at("cells")) recount[key(c)] += c.at("images").size();
        const json view = grid_view(root, state);
        for (const auto& c : view.at("cells"))
            if (c.at("count").get<std::size_t>() > 0 || recount.count(key(c))) shown[key(c)] = c.at("count");
        check("grid.cell_counts", shown, recount);
    }

    if (state.effective_state(Stage::filter) == StageState::complete) {
        // Recount from the raw files, replaying overrides on the stored statuses.
        json raw_records = read_artifact(root, state, Stage::filter, "records.json");
        json raw_verdicts = read_artifact(root, state, Stage::filter, "verdicts.json");
        std::map<std::string, std::string> status, filtered_as;
        std::vector<std::string> order;
        for (const auto& r : raw_records) {
            const auto id = r.at("edit_id").get<std::string>();
            status[id] = r.at("status").get<std::string>();
            if (status[id].rfind("filtered-", 0) == 0) filtered_as[id] = status[id];
            order.push_back(id);
        }
        for (const auto& d : state.applicable({DecisionKind::filter_override}, state.stage(Stage::filter).content_hash)) {
            const auto id = d.payload.at("edit_id").get<std::string>();
            auto it = status.find(id);
            if (it == status.end()) continue;
            const std::string action = d.payload.at("action").get<std::string>();
            std::string& st = it->second;
            if (action == "restore" && st.rfind("filtered-", 0) == 0)
                st = "human-restored";
            else if (action == "restore" && st == "human-rejected")
                st = "kept";
            else if (action == "reject" && st == "kept")
                st = "human-rejected";
            else if (action == "reject" && st == "human-restored" && filtered_as.count(id))
                st = filtered_as[id];
        }
        Tallies recount;
        for (const auto& id : order) ++recount.status[status[id]];
        for (const auto& v : raw_verdicts)
            ++recount.stage[v.at("stage").get<std::string>()][v.at("keep").get<bool>() ? "kept" : "rejected"];

        FilterQuery all;
        all.page_size = 1;
        json view = filters_view(root, state, all);
        check("filters.status_tallies", view.at("tallies").at("status"), recount.status);
        check("filters.stage_tallies", view.at("tallies").at("stage"), recount.stage);
        check("filters.total", view.at("total"), order.size());
        // Per-status queries must add up to the unfiltered total.
        std::size_t summed = 0;
        for (const auto& [name, n] : recount.status) {
            FilterQuery q;
            q.status = name;
            q.page_size = 1;
            summed += filters_view(root, state, q).at("total").get<std::size_t>();
            (void)n;
        }
        check("filters.status_queries", summed, order.size());
    }
    return {{"run", state.run_id}, {"consistent", consistent}, {"checks", checks}};
}

Response dispatch(const ArtifactRoot& root, const std::string& method, const std::string& path,
                  const std::multimap<std::string, std::string>& query, const std::string& body) {
    try {
        const auto parts = split_path(path);
        auto not_allowed = [&] { return error_body(405, "method-not-allowed", method + " is not allowed on " + path); };
        if (parts.size() == 2 && parts[0] == "images") {
            if (method != "GET") return not_allowed();
            std::string digest = parts[1];
            if (digest.size() > 4 && digest.substr(digest.size() - 4) == ".png") digest.resize(digest.size() - 4);
            if (!root.store().contains(digest)) return error_body(404, "not-found", "no image " + digest);
            return {200, "image/png", read_file(root.store().path_for(digest))};
        }
        if (parts.empty() || parts[0] != "runs") return error_body(404, "not-found", "no route for " + path);
        if (parts.size() == 1) {
            if (method != "GET") return not_allowed();
            return json_response(200, runs_view(root));
        }
        if (parts.size() != 3) return error_body(404, "not-found", "no route for " + path);
        const std::string& id = parts[1];
        const std::string& what = parts[2];
        auto state = pipeline::load_run(root, id);

        if (what == "status" && method == "GET") return json_response(200, pipeline::status_json(state));
        if (what == "grid" && method == "GET") return json_response(200, grid_view(root, state));
        if (what == "consistency" && method == "GET") return json_response(200, consistency_view(root, state));
        if (what == "prompts" && method == "GET") return json_response(200, prompts_view(root, state));
        if (what == "prompts" && method == "PUT") {
            json req = parse_body(body);
            if (!req.is_object()) throw ValidationError("body", "expected a JSON object");
            std::optional<std::string> base;
            if (req.contains("base") && req["base"].is_string()) base = req["base"].get<std::string>();
            json payload = {{"descriptions", req.value("descriptions", json())}};
            auto d = pipeline::apply_decision(root, id, DecisionKind::prompt_edit, payload,
                                              req.value("actor", std::string("human")), base);
            json out = prompts_view(root, pipeline::load_run(root, id));
            out["decision"] = pipeline::decision_to_json(d);
            return json_response(200, out);
        }
        if (what == "filters" && method == "GET") {
            FilterQuery q;
            q.stage = query_value(query, "stage");
            q.status = query_value(query, "status");
            if (auto p = query_value(query, "page")) q.page = parse_positive(*p, "page");
            if (auto p = query_value(query, "page_size")) q.page_size = parse_positive(*p, "page_size");
            return json_response(200, filters_view(root, state, q));
        }
        if (what == "decisions" && method == "POST") {
            json req = parse_body(body);
            if (!req.is_object() || !req.contains("kind") || !req["kind"].is_string())
                throw ValidationError("kind", "kind must be a string");
            const auto kind = pipeline::parse_decision_kind(req["kind"].get<std::string>());
            std::optional<std::string> base;
            if (req.contains("base") && !req["base"].is_null()) {
                if (!req["base"].is_string()) throw ValidationError("base", "base must be a string");
                base = req["base"].get<std::string>();
            }
            auto d = pipeline::apply_decision(root, id, kind, req.value("payload", json::object()),
                                              req.value("actor", std::string("human")), base);
            auto after = pipeline::load_run(root, id);
            return json_response(201, {{"decision", pipeline::decision_to_json(d)}, {"status", pipeline::status_json(after)}});
        }
        if (what == "status" || what == "grid" || what == "consistency" || what == "prompts" || what == "filters" ||
            what == "decisions")
            return not_allowed();
        return error_body(404, "not-found", "no route for " + path);
    } catch (const json::exception& e) {
        return error_body(422, "validation", e.what());
    } catch (const std::exception& e) {
        return error_response(e);
    }
}

struct Service::Impl {
    explicit Impl(ArtifactRoot r) : root(std::move(r)) {}
    ArtifactRoot root;
    httplib::Server server;
};

Service::Service(ArtifactRoot root) : impl_(std::make_unique<Impl>(std::move(root))) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        std::multimap<std::string, std::string> query(req.params.begin(), req.params.end());
        auto out = dispatch(impl_->root, req.method, req.path, query, req.body);
        res.status = out.status;
        if (out.content_type == "image/png") res.set_header("Cache-Control", "public, max-age=31536000, immutable");
        res.set_content(out.body, out.content_type);
        spdlog::debug("{} {} -> {}", req.method, req.path, out.status);
    };
    impl_->server.Get(".*", handler);
    impl_->server.Post(".*", handler);
    impl_->server.Put(".*", handler);
    impl_->server.Delete(".*", handler);
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw IoError("cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace alia::review
