// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "alia/prompt/clients.hpp"
#include "alia/prompt/descriptions.hpp"

namespace alia::prompt {

// The two dialogue prompts. [CAPTIONS], [PREFIX] and [SUPERCLASS] are
// substituted verbatim. Stored in a prompts file so they can be edited
// without rebuilding:
//   {"summarize": "...", "refine": "..."}
struct PromptTemplates {
    std::string summarize;
    std::string refine;

    static PromptTemplates defaults();
    static PromptTemplates load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

// Captions are sent one per line, each line starting with "- ", between a
// leading and trailing newline.
std::string serialize_captions(std::span<const std::string> captions);

std::string build_summarize_prompt(const PromptTemplates& templates, std::span<const std::string> captions,
                                   const std::string& prefix);
std::string build_refine_prompt(const PromptTemplates& templates, const std::string& superclass);

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
    double multiplier = 2.0;
    // Injected so tests do not sleep.
    std::function<void(std::chrono::milliseconds)> sleep;
};

// Retries TransportError with exponential backoff; other errors propagate.
std::string send_with_retry(LanguageModelClient& llm, const Conversation& conversation, const RetryPolicy& policy);

// First dialogue turn. Appends the user prompt and the reply to
// `conversation` and returns the raw reply.
std::string summarize_captions(std::span<const std::string> captions, const std::string& prefix,
                               LanguageModelClient& llm, Conversation& conversation,
                               const PromptTemplates& templates = PromptTemplates::defaults(),
                               const RetryPolicy& policy = {});

struct RefineOptions {
    std::string superclass;
    std::string prefix;
    std::vector<std::string> classes;
    bool superclass_in_template = true;
    std::size_t max_descriptions = 10;
};

struct RefineResult {
    std::vector<DomainDescription> descriptions;
    std::vector<std::string> diagnostics;
    std::string reply;
};

// Parses a reply into descriptions: one per line, list markers and quotes
// stripped, "{ }" inserted after the article preceding the superclass word
// of the prefix. Lines without that anchor or mentioning a class are dropped
// with a diagnostic. Keeps at most options.max_descriptions, in order.
RefineResult parse_descriptions(const std::string& reply, const RefineOptions& options);

// Second dialogue turn. Throws Error(empty_descriptions) when nothing usable
// comes back.
RefineResult refine_descriptions(Conversation& conversation, const RefineOptions& options,
                                 LanguageModelClient& llm,
                                 const PromptTemplates& templates = PromptTemplates::defaults(),
                                 const RetryPolicy& policy = {});

}  // namespace alia::prompt
