// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alia/data/dataset.hpp"
#include "alia/data/image_source.hpp"
#include "alia/prompt/clients.hpp"

namespace alia::prompt {

// Trim and collapse internal whitespace runs to one space.
std::string normalize_caption(std::string_view caption);

struct CaptionPool {
    std::vector<std::string> captions;                // unique, first-seen order
    std::map<std::string, std::size_t> source_counts; // caption -> occurrences
    bool includes_context_only = false;               // context images were captioned

    // Adds one observed caption (normalised); empty captions are ignored.
    void add(std::string_view caption);
    std::size_t size() const { return captions.size(); }
};

nlohmann::json caption_pool_to_json(const CaptionPool& pool);
CaptionPool caption_pool_from_json(const nlohmann::json& j);

// Captions keyed by record id. Readers run concurrently; each id is written
// once. When backed by a file, every insert is appended as one JSON line so
// an interrupted run resumes with its finished captions.
class CaptionCache {
public:
    CaptionCache() = default;
    explicit CaptionCache(std::filesystem::path file);

    std::optional<std::string> get(const std::string& id) const;
    void put(const std::string& id, const std::string& caption);
    std::size_t size() const;

private:
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::string> entries_;
    std::optional<std::filesystem::path> file_;
};

struct CaptionOptions {
    bool include_train = true;
    double max_failure_ratio = 0.5;
    unsigned workers = 1;
};

struct CaptionFailure {
    std::string record_id;
    std::string message;
};

struct CaptionResult {
    CaptionPool pool;
    std::vector<CaptionFailure> failures;
    std::size_t attempted = 0;
    std::size_t cache_hits = 0;
};

// Captions the train split (unless disabled) and every context image.
// Individual failures are recorded; the call throws BackendError only when
// the failure share exceeds options.max_failure_ratio.
CaptionResult caption_dataset(const data::Dataset& dataset, CaptionerClient& captioner,
                              const data::ImageSource& images, std::span<const data::ImageRecord> context,
                              CaptionCache* cache = nullptr, const CaptionOptions& options = {});

inline constexpr std::size_t kDefaultCaptionSample = 200;

// min(n, |pool|) distinct captions, uniform without replacement, in draw
// order.
std::vector<std::string> sample_captions(const CaptionPool& pool, std::size_t n, std::uint64_t seed);

}  // namespace alia::prompt
