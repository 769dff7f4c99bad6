// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/pipeline/config.hpp"

#include <algorithm>
#include <set>

#include "alia/content_store.hpp"
#include "alia/error.hpp"

namespace alia::pipeline {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Reads typed fields out of one JSON object and remembers which keys were
// consumed so leftovers can be reported.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "must be an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <typename T, typename Check>
    void get(const std::string& key, T& out, Check&& check, const char* what) {
        const json* v = find(key);
        if (!v) return;
        try {
            out = v->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(field(key), std::string("must be ") + what);
        }
        if (!check(out)) throw ConfigError(field(key), std::string("must be ") + what);
    }

    template <typename T>
    void get(const std::string& key, T& out, const char* what) {
        get(key, out, [](const T&) { return true; }, what);
    }

    void path(const std::string& key, std::optional<fs::path>& out, const fs::path& base) {
        std::string s;
        get(key, s, "a path string");
        if (!s.empty()) out = fs::path(s).is_absolute() || base.empty() ? fs::path(s) : base / s;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key)) throw ConfigError(field(key), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

bool positive(double v) { return v > 0; }

}  // namespace

PipelineConfig parse_pipeline_config(const json& j, const fs::path& base_dir) {
    PipelineConfig c;
    Section top(j, "");
    top.get("seed", c.seed, "a non-negative integer");

    if (const json* b = top.find("backends")) {
        Section s(*b, "backends");
        s.get("kind", c.backends.kind, [](const std::string& k) { return k == "stub" || k == "replay" || k == "http"; },
              "one of stub, replay, http");
        s.get("llm_url", c.backends.llm_url, "a string");
        s.get("captioner_url", c.backends.captioner_url, "a string");
        s.get("editor_url", c.backends.editor_url, "a string");
        s.path("transcript", c.backends.transcript, base_dir);
        s.path("captions", c.backends.captions, base_dir);
        s.path("edit_replay", c.backends.edit_replay, base_dir);
        s.finish();
    }
    if (const json* v = top.find("caption")) {
        Section s(*v, "caption");
        s.get("sample", c.caption.sample, [](std::size_t n) { return n > 0; }, "a positive integer");
        s.get("workers", c.caption.workers, [](unsigned n) { return n > 0; }, "a positive integer");
        s.get("max_failure_ratio", c.caption.max_failure_ratio, [](double r) { return r >= 0 && r <= 1; },
              "a number in [0, 1]");
        s.finish();
    }
    if (const json* v = top.find("prompts")) {
        Section s(*v, "prompts");
        s.path("templates", c.prompts.templates, base_dir);
        s.get("max_descriptions", c.prompts.max_descriptions, [](std::size_t n) { return n > 0; },
              "a positive integer");
        s.finish();
    }
    if (const json* v = top.find("edit")) {
        Section s(*v, "edit");
        std::string backend;
        s.get("backend", backend, "a string");
        if (!backend.empty()) {
            try {
                c.edit.backend = edit::parse_backend(backend);
            } catch (const Error&) {
                throw ConfigError("edit.backend", "must be img2img or instruct-pix2pix");
            }
            if (c.edit.backend == edit::BackendKind::txt2img)
                throw ConfigError("edit.backend", "must be img2img or instruct-pix2pix");
        }
        s.get("edits_per_image", c.edit.edits_per_image, [](int n) { return n > 0; }, "a positive integer");
        double strength = 0, guidance = 0;
        if (v->contains("strength")) {
            s.get("strength", strength, "a number");
            c.edit.strength = strength;
        }
        if (v->contains("guidance")) {
            s.get("guidance", guidance, positive, "a positive number");
            c.edit.guidance = guidance;
        }
        if (c.edit.strength.has_value() != c.edit.guidance.has_value())
            throw ConfigError("edit.strength", "strength and guidance must be pinned together");
        if (c.edit.strength) {
            try {
                edit::validate_params({c.edit.backend, *c.edit.strength, *c.edit.guidance, 0});
            } catch (const RangeError& e) {
                throw ConfigError("edit.strength", e.what());
            }
        }
        s.get("sweep_preset", c.edit.sweep_preset,
              [](const std::string& p) { return p == "full" || p == "strength-axis" || p == "guidance-axis"; },
              "one of full, strength-axis, guidance-axis");
        s.get("sweep_sample", c.edit.sweep_sample, [](std::size_t n) { return n > 0; }, "a positive integer");
        s.get("sweep_seeds", c.edit.sweep_seeds, [](std::size_t n) { return n > 0; }, "a positive integer");
        s.get("sweep_description", c.edit.sweep_description, "a non-negative integer");
        s.get("workers", c.edit.workers, [](unsigned n) { return n > 0; }, "a positive integer");
        s.get("max_failure_ratio", c.edit.max_failure_ratio, [](double r) { return r >= 0 && r <= 1; },
              "a number in [0, 1]");
        s.finish();
    }
    if (const json* v = top.find("filter")) c.filter = filter::parse_filter_config(*v);
    if (const json* v = top.find("train")) {
        Section s(*v, "train");
        auto& t = c.train;
        s.get("trainer", t.trainer, [](const std::string& n) { return n == "linear-probe" || n == "scripted"; },
              "linear-probe or scripted");
        s.get("learning_rate", t.learning_rate, positive, "a positive number");
        s.get("weight_decay", t.weight_decay, [](double w) { return w >= 0; }, "a non-negative number");
        s.get("epochs", t.epochs, [](int n) { return n > 0; }, "a positive integer");
        s.get("batch_size", t.batch_size, [](int n) { return n > 0; }, "a positive integer");
        s.get("sweep", t.sweep, "a boolean");
        auto non_empty_positive = [](const std::vector<double>& g) {
            return !g.empty() && std::all_of(g.begin(), g.end(), positive);
        };
        s.get("lr_grid", t.lr_grid, non_empty_positive, "a non-empty list of positive numbers");
        s.get("wd_grid", t.wd_grid, non_empty_positive, "a non-empty list of positive numbers");
        s.get("seeds", t.seeds, [](const auto& seeds) { return !seeds.empty(); }, "a non-empty list of integers");
        std::string metric;
        s.get("metric", metric, "a string");
        if (!metric.empty()) {
            try {
                t.metric = train::parse_metric(metric);
            } catch (const Error&) {
                throw ConfigError("train.metric", "must be macro-f1, balanced-accuracy or accuracy");
            }
        }
        std::vector<std::string> variants;
        s.get("variants", variants, "a list of variant names");
        if (v->contains("variants")) {
            t.variants.clear();
            for (const auto& name : variants) t.variants.push_back(train::parse_variant(name));
            if (t.variants.empty()) throw ConfigError("train.variants", "must not be empty");
        }
        s.get("ablations", t.ablations,
              [](const std::vector<std::string>& a) {
                  return std::all_of(a.begin(), a.end(), [](const std::string& n) {
                      return n == "prompt-quality" || n == "quantity" || n == "edit-method";
                  });
              },
              "a list of prompt-quality, quantity, edit-method");
        s.get("quantity_fractions", t.quantity_fractions,
              [](const std::vector<double>& f) {
                  return !f.empty() && std::all_of(f.begin(), f.end(), [](double x) { return x >= 0; });
              },
              "a non-empty list of non-negative numbers");
        s.get("workers", t.workers, [](unsigned n) { return n > 0; }, "a positive integer");
        s.finish();
    }
    top.finish();
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("", path.string() + ": " + e.what());
    }
    return parse_pipeline_config(j, path.parent_path());
}

json pipeline_config_to_json(const PipelineConfig& c) {
    auto opt_path = [](const std::optional<fs::path>& p) { return p ? json(p->string()) : json(""); };
    json backends = {{"kind", c.backends.kind},
                     {"llm_url", c.backends.llm_url},
                     {"captioner_url", c.backends.captioner_url},
                     {"editor_url", c.backends.editor_url},
                     {"transcript", opt_path(c.backends.transcript)},
                     {"captions", opt_path(c.backends.captions)},
                     {"edit_replay", opt_path(c.backends.edit_replay)}};
    json edit = {{"backend", edit::to_string(c.edit.backend)},
                 {"edits_per_image", c.edit.edits_per_image},
                 {"sweep_preset", c.edit.sweep_preset},
                 {"sweep_sample", c.edit.sweep_sample},
                 {"sweep_seeds", c.edit.sweep_seeds},
                 {"sweep_description", c.edit.sweep_description},
                 {"workers", c.edit.workers},
                 {"max_failure_ratio", c.edit.max_failure_ratio}};
    if (c.edit.strength) {
        edit["strength"] = *c.edit.strength;
        edit["guidance"] = *c.edit.guidance;
    }
    std::vector<std::string> variants;
    for (auto v : c.train.variants) variants.emplace_back(train::to_string(v));
    json train = {{"trainer", c.train.trainer},
                  {"learning_rate", c.train.learning_rate},
                  {"weight_decay", c.train.weight_decay},
                  {"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"sweep", c.train.sweep},
                  {"lr_grid", c.train.lr_grid},
                  {"wd_grid", c.train.wd_grid},
                  {"seeds", c.train.seeds},
                  {"metric", train::to_string(c.train.metric)},
                  {"variants", variants},
                  {"ablations", c.train.ablations},
                  {"quantity_fractions", c.train.quantity_fractions},
                  {"workers", c.train.workers}};
    return {{"seed", c.seed},
            {"backends", backends},
            {"caption", {{"sample", c.caption.sample},
                         {"workers", c.caption.workers},
                         {"max_failure_ratio", c.caption.max_failure_ratio}}},
            {"prompts", {{"templates", opt_path(c.prompts.templates)},
                         {"max_descriptions", c.prompts.max_descriptions}}},
            {"edit", edit},
            {"filter", filter::filter_config_to_json(c.filter)},
            {"train", train}};
}

}  // namespace alia::pipeline
