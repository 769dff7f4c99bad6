// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/edit/records.hpp"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "alia/content_store.hpp"
#include "alia/error.hpp"
#include "alia/hash.hpp"
#include "alia/rng.hpp"

namespace alia::edit {

using nlohmann::json;

std::string_view to_string(EditStatus s) {
    switch (s) {
        case EditStatus::generated: return "generated";
        case EditStatus::kept: return "kept";
        case EditStatus::filtered_semantic: return "filtered-semantic";
        case EditStatus::filtered_confidence: return "filtered-confidence";
        case EditStatus::filtered_knn: return "filtered-knn";
        case EditStatus::human_rejected: return "human-rejected";
        case EditStatus::human_restored: return "human-restored";
    }
    return "?";
}

EditStatus parse_status(std::string_view text) {
    for (auto s : {EditStatus::generated, EditStatus::kept, EditStatus::filtered_semantic,
                   EditStatus::filtered_confidence, EditStatus::filtered_knn, EditStatus::human_rejected,
                   EditStatus::human_restored}) {
        if (to_string(s) == text) return s;
    }
    throw ValidationError("status", "unknown status '" + std::string(text) + "'");
}

bool is_filtered(EditStatus s) {
    return s == EditStatus::filtered_semantic || s == EditStatus::filtered_confidence || s == EditStatus::filtered_knn;
}

bool is_included(EditStatus s) { return s == EditStatus::kept || s == EditStatus::human_restored; }

bool transition_allowed(EditStatus from, EditStatus to) {
    if (from == EditStatus::generated) return to == EditStatus::kept || is_filtered(to);
    if (is_filtered(from)) return to == EditStatus::human_restored;
    if (from == EditStatus::human_restored) return is_filtered(to);
    if (from == EditStatus::kept) return to == EditStatus::human_rejected;
    if (from == EditStatus::human_rejected) return to == EditStatus::kept;
    return false;
}

void transition(AugmentationRecord& record, EditStatus to, std::string actor, std::string reason,
                std::string timestamp) {
    if (!transition_allowed(record.status, to)) {
        throw ValidationError("status", "edit " + record.edit_id + ": cannot go from " +
                                            std::string(to_string(record.status)) + " to " + std::string(to_string(to)));
    }
    record.audit.push_back({record.status, to, std::move(actor), std::move(reason), std::move(timestamp)});
    record.status = to;
}

std::string make_edit_id(const std::optional<std::string>& parent_id, const std::string& label,
                         const std::string& prompt_id, const EditParams& params, int replica) {
    Sha256 h;
    h.field(parent_id ? "parent:" + *parent_id : "class:" + label).field(prompt_id);
    h.field(to_string(params.backend)).field(json(params.strength).dump()).field(json(params.guidance).dump());
    h.field(params.seed).field(static_cast<std::uint64_t>(replica));
    return h.hex_digest().substr(0, 32);
}

std::uint64_t edit_seed(std::uint64_t base_seed, std::string_view image_id, std::string_view prompt_id, int replica) {
    // Length-prefixed so that no two triples share a key.
    std::string key;
    for (std::string_view part : {image_id, prompt_id}) {
        key += std::to_string(part.size());
        key += ':';
        key += part;
    }
    key += std::to_string(replica);
    return derive_seed(base_seed, key);
}

namespace {

json audit_to_json(const AuditEntry& a) {
    json j = {{"from", to_string(a.from)}, {"to", to_string(a.to)}, {"actor", a.actor}, {"reason", a.reason}};
    if (!a.timestamp.empty()) j["timestamp"] = a.timestamp;
    return j;
}

AuditEntry audit_from_json(const json& j) {
    return {parse_status(j.at("from").get<std::string>()), parse_status(j.at("to").get<std::string>()),
            j.value("actor", ""), j.value("reason", ""), j.value("timestamp", "")};
}

}  // namespace

json record_to_json(const AugmentationRecord& r) {
    json j = {{"edit_id", r.edit_id},
              {"prompt_id", r.prompt_id},
              {"label", r.label},
              {"params", params_to_json(r.params)},
              {"replica", r.replica},
              {"prompt", r.prompt},
              {"uri", r.uri},
              {"provenance", data::to_string(r.provenance)},
              {"status", to_string(r.status)}};
    if (r.parent_id) j["parent_id"] = *r.parent_id;
    if (r.error) j["error"] = *r.error;
    if (!r.audit.empty()) {
        json a = json::array();
        for (const auto& e : r.audit) a.push_back(audit_to_json(e));
        j["audit"] = a;
    }
    return j;
}

AugmentationRecord record_from_json(const json& j) {
    AugmentationRecord r;
    r.edit_id = j.at("edit_id").get<std::string>();
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.label = j.at("label").get<std::string>();
    r.params = params_from_json(j.at("params"));
    r.replica = j.value("replica", 0);
    r.prompt = j.value("prompt", "");
    r.uri = j.value("uri", "");
    r.provenance = data::parse_provenance(j.at("provenance").get<std::string>());
    r.status = parse_status(j.at("status").get<std::string>());
    if (j.contains("parent_id")) r.parent_id = j["parent_id"].get<std::string>();
    if (j.contains("error")) r.error = j["error"].get<std::string>();
    if (j.contains("audit")) {
        for (const auto& a : j["audit"]) r.audit.push_back(audit_from_json(a));
    }
    return r;
}

data::ImageRecord to_image_record(const AugmentationRecord& r) {
    if (!r.ok()) throw PreconditionError("edit " + r.edit_id + " has no image");
    data::ImageRecord out;
    out.id = data::make_record_id(r.uri, r.provenance);
    out.uri = r.uri;
    out.label = r.label;
    out.split = data::Split::train;
    out.provenance = r.provenance;
    out.parent_id = r.parent_id;
    out.prompt_id = r.prompt_id;
    return out;
}

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) return;
    std::istringstream in(read_file(path_));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto r = record_from_json(json::parse(line));
            auto [it, inserted] = index_.emplace(r.edit_id, records_.size());
            if (inserted) {
                records_.push_back(std::move(r));
            } else {
                records_[it->second] = std::move(r);
            }
        } catch (const std::exception& e) {
            spdlog::warn("{}:{}: skipping unreadable record ({})", path_.string(), lineno, e.what());
        }
    }
}

void RecordStore::put(const AugmentationRecord& record) {
    const std::string line = record_to_json(record).dump() + "\n";
    std::lock_guard lock(mutex_);
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    {
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        out.write(line.data(), static_cast<std::streamsize>(line.size()));
        out.flush();
        if (!out) throw IoError("cannot append to " + path_.string());
    }
    auto [it, inserted] = index_.emplace(record.edit_id, records_.size());
    if (inserted) {
        records_.push_back(record);
    } else {
        records_[it->second] = record;
    }
}

std::optional<AugmentationRecord> RecordStore::find(const std::string& edit_id) const {
    std::lock_guard lock(mutex_);
    auto it = index_.find(edit_id);
    if (it == index_.end()) return std::nullopt;
    return records_[it->second];
}

std::vector<AugmentationRecord> RecordStore::all() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t RecordStore::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

}  // namespace alia::edit
