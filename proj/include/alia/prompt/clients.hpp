// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "alia/image.hpp"

namespace alia::prompt {

struct Message {
    std::string role;  // "user" or "assistant"
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

using Conversation = std::vector<Message>;

nlohmann::json conversation_to_json(const Conversation& conversation);
Conversation conversation_from_json(const nlohmann::json& j);

// Stateless chat model: every call carries the whole conversation.
class LanguageModelClient {
public:
    virtual ~LanguageModelClient() = default;
    virtual std::string send(const Conversation& messages) = 0;
};

// Image captioner. Must tolerate concurrent calls.
class CaptionerClient {
public:
    virtual ~CaptionerClient() = default;
    virtual std::string caption(const Image& image) = 0;
};

// Transcript file:
//   {"format": "alia-transcript/1",
//    "turns": [{"prompt": "<user message>", "reply": "<assistant reply>"}, ...]}
// "prompt" is optional; when present and `strict` is set, the outgoing user
// message must match it byte for byte.
class ReplayLanguageModel : public LanguageModelClient {
public:
    ReplayLanguageModel(std::vector<std::pair<std::string, std::string>> turns, bool strict = false);
    static ReplayLanguageModel from_file(const std::filesystem::path& path, bool strict = false);

    std::string send(const Conversation& messages) override;
    std::size_t consumed() const { return next_; }

private:
    std::vector<std::pair<std::string, std::string>> turns_;
    bool strict_;
    std::size_t next_ = 0;
};

// Wraps another client and keeps every (prompt, reply) pair so a live run can
// be turned into a replayable transcript.
class RecordingLanguageModel : public LanguageModelClient {
public:
    explicit RecordingLanguageModel(LanguageModelClient& inner) : inner_(inner) {}
    std::string send(const Conversation& messages) override;
    nlohmann::json transcript() const;

private:
    LanguageModelClient& inner_;
    std::vector<std::pair<std::string, std::string>> turns_;
};

// Deterministic offline model for the synthetic pipeline. The summarize turn
// rewrites each caption's scene phrase onto the requested prefix; the
// refinement turn repeats the distinct lines, numbered, at most nine.
class StubLanguageModel : public LanguageModelClient {
public:
    std::string send(const Conversation& messages) override;
};

// Describes the scene of a synthetic image from its border colour and
// brightness, e.g. "a small red object against a clear blue sky in bright light".
class StubCaptioner : public CaptionerClient {
public:
    std::string caption(const Image& image) override;
};

// Captions looked up by image digest: {"<digest>": "caption", ...}.
class ReplayCaptioner : public CaptionerClient {
public:
    explicit ReplayCaptioner(std::map<std::string, std::string> by_digest) : by_digest_(std::move(by_digest)) {}
    static ReplayCaptioner from_file(const std::filesystem::path& path);
    std::string caption(const Image& image) override;

private:
    std::map<std::string, std::string> by_digest_;
};

// HTTP adapters.
//   language model: POST <path> {"messages": [{"role", "content"}, ...]} -> {"reply": "..."}
//   captioner:      POST <path> {"image": "<base64 png>"}               -> {"caption": "..."}
// Connection failures and 5xx responses raise TransportError.
class HttpLanguageModel : public LanguageModelClient {
public:
    HttpLanguageModel(std::string base_url, std::string path = "/v1/chat");
    std::string send(const Conversation& messages) override;

private:
    std::string base_url_;
    std::string path_;
};

class HttpCaptioner : public CaptionerClient {
public:
    HttpCaptioner(std::string base_url, std::string path = "/v1/caption");
    std::string caption(const Image& image) override;

private:
    std::string base_url_;
    std::string path_;
};

}  // namespace alia::prompt
