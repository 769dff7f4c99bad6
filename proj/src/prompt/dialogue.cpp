// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/prompt/dialogue.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "alia/content_store.hpp"
#include "alia/error.hpp"

namespace alia::prompt {

using nlohmann::json;

PromptTemplates PromptTemplates::defaults() {
    return {
        "I have a set of image captions that I want to summarize into objective descriptions that describe the "
        "scenes, actions, camera pose, zoom, and other image qualities present. My captions are [CAPTIONS]. I want "
        "the output to be a handful of captions that describe a unique setting, of the form [PREFIX]",
        "Can you modify your response so each caption is agnostic of the type of [SUPERCLASS]. Please output less "
        "than 10 captions which cover the largest breadth of concepts.",
    };
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("prompts", path.string() + ": " + e.what());
    }
    PromptTemplates t = defaults();
    if (j.contains("summarize")) t.summarize = j["summarize"].get<std::string>();
    if (j.contains("refine")) t.refine = j["refine"].get<std::string>();
    if (t.summarize.find("[CAPTIONS]") == std::string::npos) {
        throw ConfigError("summarize", "summarize prompt must contain [CAPTIONS]");
    }
    return t;
}

void PromptTemplates::save(const std::filesystem::path& path) const {
    write_file_atomic(path, json{{"summarize", summarize}, {"refine", refine}}.dump(2) + "\n");
}

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '\''; }

// "1. ", "1) ", "(1) ", "- ", "* ", "• "
std::string strip_marker(std::string s) {
    s = trim(s);
    if (s.rfind("\xE2\x80\xA2", 0) == 0) return trim(s.substr(3));
    if (!s.empty() && (s[0] == '-' || s[0] == '*')) return trim(s.substr(1));
    std::size_t i = 0;
    const bool paren = !s.empty() && s[0] == '(';
    if (paren) ++i;
    const std::size_t digits = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > digits && i < s.size()) {
        if (paren && s[i] == ')') return trim(s.substr(i + 1));
        if (!paren && (s[i] == '.' || s[i] == ')')) return trim(s.substr(i + 1));
    }
    return s;
}

std::string strip_quotes(std::string s) {
    auto strip_one = [&](std::string_view open, std::string_view close) {
        if (s.size() >= open.size() + close.size() && s.rfind(open, 0) == 0 &&
            s.compare(s.size() - close.size(), close.size(), close) == 0) {
            s = trim(s.substr(open.size(), s.size() - open.size() - close.size()));
            return true;
        }
        return false;
    };
    bool changed = true;
    while (changed) {
        changed = strip_one("\"", "\"") || strip_one("\xE2\x80\x9C", "\xE2\x80\x9D") || strip_one("'", "'");
        // A quoted sentence followed by its full stop: "...".
        if (!changed && s.size() > 2 && s.front() == '"' && s.compare(s.size() - 2, 2, "\".") == 0) {
            s = trim(s.substr(1, s.size() - 3));
            changed = true;
        }
    }
    return s;
}

struct Anchor {
    std::string head;        // canonical words before the article, may be empty
    std::string superclass;  // lower-case
};

Anchor split_prefix(const std::string& prefix, const std::string& superclass) {
    const auto w = words(prefix);
    const std::string sc = lower(superclass);
    for (std::size_t i = w.size(); i-- > 1;) {
        if (lower(w[i]) == sc && is_article(lower(w[i - 1]))) {
            std::string head;
            for (std::size_t k = 0; k + 1 < i; ++k) head += (k ? " " : "") + w[k];
            return {head, sc};
        }
    }
    throw ConfigError("prefix", "prefix '" + prefix + "' must end with an article and the superclass '" + superclass + "'");
}

// Matches `text` at `pos` case-insensitively against `word` followed by a
// word boundary; returns the position after the word.
std::optional<std::size_t> match_word(const std::string& text, std::size_t pos, std::string_view word) {
    if (pos + word.size() > text.size()) return std::nullopt;
    if (lower(std::string_view(text).substr(pos, word.size())) != word) return std::nullopt;
    const std::size_t end = pos + word.size();
    if (end < text.size() && is_word_char(text[end])) return std::nullopt;
    return end;
}

std::size_t skip_spaces(const std::string& s, std::size_t pos) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    return pos;
}

// Position just past "<article> <superclass>" at `pos`, if present.
std::optional<std::size_t> match_article_superclass(const std::string& line, std::size_t pos, const std::string& sc) {
    for (std::string_view article : {"an", "a", "the"}) {
        auto after = match_word(line, pos, article);
        if (!after) continue;
        const std::size_t next = skip_spaces(line, *after);
        if (next == *after) continue;
        if (auto end = match_word(line, next, sc)) return end;
    }
    return std::nullopt;
}

}  // namespace

std::string serialize_captions(std::span<const std::string> captions) {
    std::string out = "\n";
    for (const auto& c : captions) out += "- " + c + "\n";
    return out;
}

std::string build_summarize_prompt(const PromptTemplates& templates, std::span<const std::string> captions,
                                   const std::string& prefix) {
    std::string out = templates.summarize;
    // Prefix first so that caption text can never be mistaken for a marker.
    replace_all(out, "[PREFIX]", prefix);
    replace_all(out, "[CAPTIONS]", serialize_captions(captions));
    return out;
}

std::string build_refine_prompt(const PromptTemplates& templates, const std::string& superclass) {
    std::string out = templates.refine;
    replace_all(out, "[SUPERCLASS]", superclass);
    return out;
}

std::string send_with_retry(LanguageModelClient& llm, const Conversation& conversation, const RetryPolicy& policy) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return llm.send(conversation);
        } catch (const TransportError& e) {
            if (attempt >= policy.max_attempts) throw;
            spdlog::warn("language model call failed (attempt {}/{}): {}", attempt, policy.max_attempts, e.what());
            if (policy.sleep) {
                policy.sleep(backoff);
            } else {
                std::this_thread::sleep_for(backoff);
            }
            backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * policy.multiplier));
        }
    }
}

std::string summarize_captions(std::span<const std::string> captions, const std::string& prefix,
                               LanguageModelClient& llm, Conversation& conversation,
                               const PromptTemplates& templates, const RetryPolicy& policy) {
    if (captions.empty()) throw PreconditionError("summarize_captions: no captions");
    conversation.push_back({"user", build_summarize_prompt(templates, captions, prefix)});
    std::string reply = send_with_retry(llm, conversation, policy);
    conversation.push_back({"assistant", reply});
    return reply;
}

RefineResult parse_descriptions(const std::string& reply, const RefineOptions& options) {
    const Anchor anchor = split_prefix(options.prefix, options.superclass);
    const std::string head_lower = lower(anchor.head);
    RefineResult result;
    result.reply = reply;
    std::set<std::string> seen;

    std::istringstream in(reply);
    std::string raw;
    while (std::getline(in, raw)) {
        std::string line = strip_quotes(strip_marker(raw));
        if (line.empty() || line.back() == ':') continue;

        std::optional<std::size_t> tail_start;
        if (!anchor.head.empty() && lower(line).rfind(head_lower, 0) == 0) {
            const std::size_t after_head = skip_spaces(line, anchor.head.size());
            if (after_head > anchor.head.size()) tail_start = match_article_superclass(line, after_head, anchor.superclass);
        }
        if (!tail_start) tail_start = match_article_superclass(line, 0, anchor.superclass);
        if (!tail_start) {
            result.diagnostics.push_back("no '" + options.prefix + "' anchor: " + line);
            continue;
        }
        if (auto cls = find_class_mention(line, options.classes)) {
            result.diagnostics.push_back("mentions class '" + *cls + "': " + line);
            continue;
        }
        std::string text = anchor.head.empty() ? "" : anchor.head + " ";
        text += "a ";
        text += kPlaceholder;
        if (options.superclass_in_template) text += " " + options.superclass;
        text += line.substr(*tail_start);
        if (!seen.insert(lower(text)).second) continue;
        if (result.descriptions.size() >= options.max_descriptions) {
            result.diagnostics.push_back("over the limit of " + std::to_string(options.max_descriptions) + ": " + line);
            continue;
        }
        result.descriptions.push_back(make_description(std::move(text), options.prefix));
    }
    return result;
}

RefineResult refine_descriptions(Conversation& conversation, const RefineOptions& options, LanguageModelClient& llm,
                                 const PromptTemplates& templates, const RetryPolicy& policy) {
    conversation.push_back({"user", build_refine_prompt(templates, options.superclass)});
    std::string reply = send_with_retry(llm, conversation, policy);
    conversation.push_back({"assistant", reply});
    auto result = parse_descriptions(reply, options);
    for (const auto& d : result.diagnostics) spdlog::info("dropped description line: {}", d);
    if (result.descriptions.empty()) {
        throw Error(ErrorCode::empty_descriptions, "the language model reply contained no usable descriptions");
    }
    return result;
}

}  // namespace alia::prompt
