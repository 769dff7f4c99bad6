// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/data/config.hpp"

#include "alia/content_store.hpp"
#include "alia/error.hpp"

namespace alia::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

std::string get_string(const json& j, const char* key, bool required) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (required) throw ConfigError(key, "required field is missing");
        return {};
    }
    if (!it->is_string()) throw ConfigError(key, "must be a string");
    return it->get<std::string>();
}

double get_fraction(const json& j, const char* key, const std::string& field) {
    auto it = j.find(key);
    if (it == j.end()) return 0.0;
    if (!it->is_number()) throw ConfigError(field, "must be a number");
    const double v = it->get<double>();
    if (!(v >= 0.0 && v < 0.5)) throw ConfigError(field, "must lie in [0, 0.5)");
    return v;
}

}  // namespace

DatasetConfig parse_dataset_config(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("", "dataset config must be a JSON object");
    DatasetConfig c;
    c.name = get_string(j, "name", false);
    c.manifest = resolve(base_dir, get_string(j, "manifest", true));
    c.superclass = get_string(j, "superclass", true);
    if (c.superclass.empty()) throw ConfigError("superclass", "must not be empty");
    if (auto it = j.find("classes"); it != j.end()) {
        if (!it->is_array()) throw ConfigError("classes", "must be an array of strings");
        for (const auto& v : *it) {
            if (!v.is_string()) throw ConfigError("classes", "must be an array of strings");
            c.classes.push_back(v.get<std::string>());
        }
    }
    c.prefix = get_string(j, "prefix", false);
    if (c.prefix.empty()) c.prefix = "a photo of a " + c.superclass;
    if (auto it = j.find("superclass_in_template"); it != j.end()) {
        if (!it->is_boolean()) throw ConfigError("superclass_in_template", "must be a boolean");
        c.superclass_in_template = it->get<bool>();
    }
    if (auto it = j.find("crop"); it != j.end()) {
        if (!it->is_object()) throw ConfigError("crop", "must be an object");
        c.crop.top = get_fraction(*it, "top", "crop.top");
        c.crop.bottom = get_fraction(*it, "bottom", "crop.bottom");
    }
    if (auto s = get_string(j, "domain_tags", false); !s.empty()) c.domain_tags = resolve(base_dir, s);
    if (auto s = get_string(j, "context_manifest", false); !s.empty()) c.context_manifest = resolve(base_dir, s);
    c.txt2img_prompt = get_string(j, "txt2img_prompt", false);
    if (auto it = j.find("bias_split"); it != j.end()) {
        BiasSplitSpec spec;
        if (!it->is_object()) throw ConfigError("bias_split", "must be an object");
        spec.tag_key = it->value("tag_key", std::string("background"));
        const auto cells = it->find("cells");
        if (cells == it->end() || !cells->is_array()) throw ConfigError("bias_split.cells", "must be an array");
        for (std::size_t i = 0; i < cells->size(); ++i) {
            const auto& cell = (*cells)[i];
            const std::string field = "bias_split.cells[" + std::to_string(i) + "]";
            if (!cell.is_object() || !cell.contains("label") || !cell.contains("domain") || !cell.contains("count")) {
                throw ConfigError(field, "needs label, domain and count");
            }
            if (!cell["count"].is_number_unsigned()) throw ConfigError(field + ".count", "must be a non-negative integer");
            spec.cells[{cell["label"].get<std::string>(), cell["domain"].get<std::string>()}] =
                cell["count"].get<std::size_t>();
        }
        c.bias_split = std::move(spec);
    }
    return c;
}

DatasetConfig load_dataset_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("", path.string() + ": " + e.what());
    }
    return parse_dataset_config(j, path.parent_path());
}

json dataset_config_to_json(const DatasetConfig& c) {
    json j;
    j["name"] = c.name;
    j["manifest"] = c.manifest.string();
    j["superclass"] = c.superclass;
    j["classes"] = c.classes;
    j["prefix"] = c.prefix;
    j["superclass_in_template"] = c.superclass_in_template;
    j["crop"] = {{"top", c.crop.top}, {"bottom", c.crop.bottom}};
    if (c.domain_tags) j["domain_tags"] = c.domain_tags->string();
    if (c.context_manifest) j["context_manifest"] = c.context_manifest->string();
    if (!c.txt2img_prompt.empty()) j["txt2img_prompt"] = c.txt2img_prompt;
    if (c.bias_split) {
        json cells = json::array();
        for (const auto& [key, n] : c.bias_split->cells) {
            cells.push_back({{"label", key.first}, {"domain", key.second}, {"count", n}});
        }
        j["bias_split"] = {{"tag_key", c.bias_split->tag_key}, {"cells", cells}};
    }
    return j;
}

}  // namespace alia::data
