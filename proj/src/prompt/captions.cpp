// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/prompt/captions.hpp"

#include <cctype>
#include <fstream>
#include <mutex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "alia/content_store.hpp"
#include "alia/error.hpp"
#include "alia/parallel.hpp"
#include "alia/rng.hpp"

namespace alia::prompt {

using nlohmann::json;

std::string normalize_caption(std::string_view caption) {
    std::string out;
    out.reserve(caption.size());
    bool pending_space = false;
    for (char c : caption) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

void CaptionPool::add(std::string_view caption) {
    std::string norm = normalize_caption(caption);
    if (norm.empty()) return;
    auto [it, inserted] = source_counts.emplace(norm, 0);
    ++it->second;
    if (inserted) captions.push_back(std::move(norm));
}

json caption_pool_to_json(const CaptionPool& pool) {
    json counts = json::array();
    for (const auto& c : pool.captions) counts.push_back({{"caption", c}, {"count", pool.source_counts.at(c)}});
    return {{"captions", counts}, {"includes_context_only", pool.includes_context_only}};
}

CaptionPool caption_pool_from_json(const json& j) {
    CaptionPool pool;
    for (const auto& e : j.at("captions")) {
        const auto caption = e.at("caption").get<std::string>();
        pool.captions.push_back(caption);
        pool.source_counts[caption] = e.at("count").get<std::size_t>();
    }
    pool.includes_context_only = j.value("includes_context_only", false);
    return pool;
}

CaptionCache::CaptionCache(std::filesystem::path file) : file_(std::move(file)) {
    if (!std::filesystem::exists(*file_)) return;
    std::istringstream in(read_file(*file_));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto j = json::parse(line);
            entries_[j.at("id").get<std::string>()] = j.at("caption").get<std::string>();
        } catch (const json::exception&) {
            // A torn final line from an interrupted run; the caption is redone.
            spdlog::warn("caption cache {}: skipping unreadable line", file_->string());
        }
    }
}

std::optional<std::string> CaptionCache::get(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void CaptionCache::put(const std::string& id, const std::string& caption) {
    std::unique_lock lock(mutex_);
    if (!entries_.emplace(id, caption).second) return;
    if (file_) {
        std::filesystem::create_directories(file_->parent_path());
        std::ofstream out(*file_, std::ios::app | std::ios::binary);
        out << json{{"id", id}, {"caption", caption}}.dump() << '\n';
        out.flush();
    }
}

std::size_t CaptionCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

CaptionResult caption_dataset(const data::Dataset& dataset, CaptionerClient& captioner,
                              const data::ImageSource& images, std::span<const data::ImageRecord> context,
                              CaptionCache* cache, const CaptionOptions& options) {
    std::vector<const data::ImageRecord*> todo;
    if (options.include_train) {
        for (const auto& r : dataset.records()) {
            if (r.split == data::Split::train) todo.push_back(&r);
        }
    }
    for (const auto& r : context) todo.push_back(&r);
    if (todo.empty()) throw PreconditionError("caption_dataset: no train images and no context images");

    std::vector<std::optional<std::string>> captions(todo.size());
    std::vector<std::string> errors(todo.size());
    std::atomic<std::size_t> hits{0};
    parallel_for(todo.size(), options.workers, [&](std::size_t i) {
        const auto& rec = *todo[i];
        if (cache) {
            if (auto hit = cache->get(rec.id)) {
                captions[i] = *hit;
                ++hits;
                return;
            }
        }
        try {
            std::string text = captioner.caption(images.load(rec));
            if (cache) cache->put(rec.id, text);
            captions[i] = std::move(text);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    CaptionResult result;
    result.attempted = todo.size();
    result.cache_hits = hits.load();
    for (std::size_t i = 0; i < todo.size(); ++i) {
        if (captions[i]) {
            result.pool.add(*captions[i]);
        } else {
            result.failures.push_back({todo[i]->id, errors[i]});
        }
    }
    result.pool.includes_context_only = !context.empty();
    const double failure_ratio = static_cast<double>(result.failures.size()) / static_cast<double>(todo.size());
    if (failure_ratio > options.max_failure_ratio) {
        throw BackendError("caption_dataset: " + std::to_string(result.failures.size()) + " of " +
                           std::to_string(todo.size()) + " captions failed");
    }
    for (const auto& f : result.failures) spdlog::warn("caption failed for {}: {}", f.record_id, f.message);
    return result;
}

std::vector<std::string> sample_captions(const CaptionPool& pool, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw PreconditionError("sample_captions: n must be at least 1");
    SplitMix64 rng(seed);
    std::vector<std::string> out;
    for (auto i : sample_indices_in_draw_order(pool.captions.size(), n, rng)) out.push_back(pool.captions[i]);
    return out;
}

}  // namespace alia::prompt
