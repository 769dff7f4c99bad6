// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alia/data/record.hpp"
#include "alia/edit/params.hpp"

namespace alia::edit {

enum class EditStatus {
    generated,
    kept,
    filtered_semantic,
    filtered_confidence,
    filtered_knn,
    human_rejected,
    human_restored,
};

std::string_view to_string(EditStatus status);
EditStatus parse_status(std::string_view text);
bool is_filtered(EditStatus status);
// Whether the image ends up in the augmented training set.
bool is_included(EditStatus status);

// Allowed: generated -> kept | filtered-*, filtered-* <-> human-restored,
// kept <-> human-rejected.
bool transition_allowed(EditStatus from, EditStatus to);

struct AuditEntry {
    EditStatus from;
    EditStatus to;
    std::string actor;      // "filter:semantic", "human", ...
    std::string reason;
    std::string timestamp;  // empty for automated stages, to keep outputs reproducible

    friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

struct AugmentationRecord {
    std::string edit_id;
    std::optional<std::string> parent_id;  // unset for txt2img
    std::string prompt_id;
    std::string label;
    EditParams params;
    int replica = 0;
    std::string prompt;  // the instantiated prompt sent to the backend
    std::string uri;     // image digest; empty when the edit failed
    data::Provenance provenance = data::Provenance::edited;
    EditStatus status = EditStatus::generated;
    std::optional<std::string> error;
    std::vector<AuditEntry> audit;

    bool ok() const { return !error && !uri.empty(); }
    friend bool operator==(const AugmentationRecord&, const AugmentationRecord&) = default;
};

// Throws ValidationError(field "status") on a disallowed transition.
void transition(AugmentationRecord& record, EditStatus to, std::string actor, std::string reason,
                std::string timestamp = {});

// edit_id = hash(parent or class, prompt id, backend, strength, guidance,
// replica); the seed is derived from the same inputs so it is not repeated.
std::string make_edit_id(const std::optional<std::string>& parent_id, const std::string& label,
                         const std::string& prompt_id, const EditParams& params, int replica);

// Per-edit seed: hash(base_seed, image id, prompt id, replica).
std::uint64_t edit_seed(std::uint64_t base_seed, std::string_view image_id, std::string_view prompt_id, int replica);

nlohmann::json record_to_json(const AugmentationRecord& record);
AugmentationRecord record_from_json(const nlohmann::json& j);

// Converts a successful, included record into an ImageRecord for the
// augmented dataset (split train, uri = "<digest>").
data::ImageRecord to_image_record(const AugmentationRecord& record);

// Append-only JSON-lines store. Every put() appends the full record as one
// line written with a single call and flushed, so a crash leaves at most one
// torn trailing line, which load skips. The latest line per edit_id wins.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path path);

    const std::filesystem::path& path() const { return path_; }
    void put(const AugmentationRecord& record);
    std::optional<AugmentationRecord> find(const std::string& edit_id) const;
    // Current state of every record, in first-insertion order.
    std::vector<AugmentationRecord> all() const;
    std::size_t size() const;

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<std::string, std::size_t> index_;
    std::vector<AugmentationRecord> records_;
};

}  // namespace alia::edit
