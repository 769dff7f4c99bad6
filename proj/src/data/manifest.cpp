// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/data/manifest.hpp"

#include <algorithm>
#include <sstream>

#include "alia/content_store.hpp"
#include "alia/error.hpp"

namespace alia::data {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path header_path_for(const fs::path& manifest) { return fs::path(manifest.string() + ".header.json"); }

json record_to_json(const ImageRecord& r) {
    json j;
    j["id"] = r.id;
    j["uri"] = r.uri;
    j["label"] = r.label;
    j["split"] = std::string(to_string(r.split));
    j["provenance"] = std::string(to_string(r.provenance));
    if (r.parent_id) j["parent_id"] = *r.parent_id;
    if (r.prompt_id) j["prompt_id"] = *r.prompt_id;
    if (!r.domain_tags.empty()) j["domain_tags"] = r.domain_tags;
    return j;
}

namespace {

std::string required_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(key, std::string("missing field '") + key + "'");
    if (!it->is_string()) throw ValidationError(key, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ValidationError(key, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

}  // namespace

ImageRecord record_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("", "record must be a JSON object");
    ImageRecord r;
    r.id = required_string(j, "id");
    r.uri = required_string(j, "uri");
    r.label = required_string(j, "label");
    r.split = parse_split(required_string(j, "split"));
    r.provenance = parse_provenance(required_string(j, "provenance"));
    r.parent_id = optional_string(j, "parent_id");
    r.prompt_id = optional_string(j, "prompt_id");
    if (auto it = j.find("domain_tags"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw ValidationError("domain_tags", "domain_tags must be an object");
        for (const auto& [k, v] : it->items()) {
            if (!v.is_string()) throw ValidationError("domain_tags", "domain tag values must be strings");
            r.domain_tags[k] = v.get<std::string>();
        }
    }
    return r;
}

std::string serialize_records(const std::vector<ImageRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

Dataset parse_manifest(const std::string& lines, const std::string& header) {
    std::vector<std::string> classes;
    std::string superclass;
    bool has_header = false;
    if (!header.empty()) {
        json h;
        try {
            h = json::parse(header);
        } catch (const json::parse_error& e) {
            throw ManifestError(0, std::string("header: ") + e.what());
        }
        if (!h.is_object() || !h.contains("classes") || !h["classes"].is_array()) {
            throw ManifestError(0, "header: 'classes' array missing");
        }
        for (const auto& c : h["classes"]) {
            if (!c.is_string()) throw ManifestError(0, "header: class names must be strings");
            classes.push_back(c.get<std::string>());
        }
        superclass = h.value("superclass", "");
        has_header = true;
    }

    std::vector<ImageRecord> records;
    std::istringstream in(lines);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            records.push_back(record_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw ManifestError(line_no, e.what());
        } catch (const ValidationError& e) {
            throw ManifestError(line_no, e.what());
        }
        if (!has_header && std::find(classes.begin(), classes.end(), records.back().label) == classes.end()) {
            classes.push_back(records.back().label);
        }
    }
    return Dataset(std::move(records), std::move(classes), std::move(superclass));
}

Dataset load_manifest(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("manifest not found: " + path.string());
    const auto header = header_path_for(path);
    return parse_manifest(read_file(path), fs::exists(header) ? read_file(header) : std::string{});
}

void save_manifest(const Dataset& dataset, const fs::path& path) {
    json h;
    h["format"] = kManifestFormat;
    h["superclass"] = dataset.superclass();
    h["classes"] = dataset.classes();
    write_file_atomic(header_path_for(path), h.dump(2) + "\n");
    write_file_atomic(path, serialize_records(dataset.records()));
}

Dataset apply_domain_tags(const Dataset& dataset, const fs::path& sidecar) {
    json tags;
    try {
        tags = json::parse(read_file(sidecar));
    } catch (const json::parse_error& e) {
        throw ConfigError("domain_tags", sidecar.string() + ": " + e.what());
    }
    if (!tags.is_object()) throw ConfigError("domain_tags", "sidecar must map record ids to tag objects");
    std::vector<ImageRecord> records = dataset.records();
    for (auto& r : records) {
        auto it = tags.find(r.id);
        if (it == tags.end()) continue;
        for (const auto& [k, v] : it->items()) r.domain_tags[k] = v.get<std::string>();
    }
    return dataset.with_records(std::move(records));
}

}  // namespace alia::data
