// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/prompt/clients.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>

#include "httplib.h"

#include "alia/content_store.hpp"
#include "alia/error.hpp"
#include "alia/hash.hpp"

namespace alia::prompt {

using nlohmann::json;

json conversation_to_json(const Conversation& conversation) {
    json arr = json::array();
    for (const auto& m : conversation) arr.push_back({{"role", m.role}, {"content", m.content}});
    return arr;
}

Conversation conversation_from_json(const json& j) {
    Conversation out;
    for (const auto& m : j) out.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    return out;
}

namespace {

const std::string& last_user_message(const Conversation& messages) {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == "user") return it->content;
    }
    throw PreconditionError("conversation has no user message");
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

}  // namespace

ReplayLanguageModel::ReplayLanguageModel(std::vector<std::pair<std::string, std::string>> turns, bool strict)
    : turns_(std::move(turns)), strict_(strict) {}

ReplayLanguageModel ReplayLanguageModel::from_file(const std::filesystem::path& path, bool strict) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ValidationError("transcript", path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "alia-transcript/1") {
        throw ValidationError("format", path.string() + ": expected alia-transcript/1");
    }
    std::vector<std::pair<std::string, std::string>> turns;
    for (const auto& t : j.at("turns")) turns.emplace_back(t.value("prompt", ""), t.at("reply").get<std::string>());
    return ReplayLanguageModel(std::move(turns), strict);
}

std::string ReplayLanguageModel::send(const Conversation& messages) {
    if (next_ >= turns_.size()) throw BackendError("replay transcript exhausted after " + std::to_string(next_) + " turns");
    const auto& [prompt, reply] = turns_[next_];
    if (strict_ && !prompt.empty() && prompt != last_user_message(messages)) {
        throw BackendError("replay transcript turn " + std::to_string(next_) + ": prompt does not match");
    }
    ++next_;
    return reply;
}

std::string RecordingLanguageModel::send(const Conversation& messages) {
    std::string reply = inner_.send(messages);
    turns_.emplace_back(last_user_message(messages), reply);
    return reply;
}

json RecordingLanguageModel::transcript() const {
    json turns = json::array();
    for (const auto& [p, r] : turns_) turns.push_back({{"prompt", p}, {"reply", r}});
    return {{"format", "alia-transcript/1"}, {"turns", turns}};
}

std::string StubLanguageModel::send(const Conversation& messages) {
    const std::string& prompt = last_user_message(messages);
    const auto form = prompt.find("of the form ");
    if (form != std::string::npos) {
        std::string prefix = trim(prompt.substr(form + 12));
        while (!prefix.empty() && (prefix.back() == '.' || prefix.back() == ':')) prefix.pop_back();
        std::set<std::string> seen;
        std::string reply;
        for (const auto& line : split_lines(prompt)) {
            if (line.rfind("- ", 0) != 0) continue;
            const auto against = line.find(" against ");
            std::string scene = against == std::string::npos ? trim(line.substr(2)) : trim(line.substr(against + 9));
            if (!seen.insert(scene).second) continue;
            reply += prefix + " against " + scene + ".\n";
        }
        return reply;
    }
    // Refinement: repeat the previous answer as a numbered list.
    std::string previous;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == "assistant") {
            previous = it->content;
            break;
        }
    }
    std::string reply;
    std::set<std::string> seen;
    int n = 0;
    for (const auto& line : split_lines(previous)) {
        const auto t = trim(line);
        if (t.empty() || !seen.insert(t).second) continue;
        if (++n > 9) break;
        reply += std::to_string(n) + ". " + t + "\n";
    }
    return reply;
}

namespace {

struct Mean {
    double r = 0, g = 0, b = 0;
};

Mean region_mean(const Image& img, bool border) {
    Mean m;
    std::size_t n = 0;
    const int bw = std::max(1, std::min(img.width, img.height) / 8);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const bool on_border = x < bw || y < bw || x >= img.width - bw || y >= img.height - bw;
            const bool centre = x >= img.width * 3 / 8 && x < img.width * 5 / 8 && y >= img.height * 3 / 8 &&
                                y < img.height * 5 / 8;
            if (border ? !on_border : !centre) continue;
            const auto* p = img.at(x, y);
            m.r += p[0];
            m.g += p[1];
            m.b += p[2];
            ++n;
        }
    }
    if (n > 0) {
        m.r /= static_cast<double>(n);
        m.g /= static_cast<double>(n);
        m.b /= static_cast<double>(n);
    }
    return m;
}

std::string colour_name(const Mean& m) {
    const double hi = std::max({m.r, m.g, m.b});
    const double lo = std::min({m.r, m.g, m.b});
    if (hi - lo < 30) return hi > 170 ? "white" : hi < 70 ? "black" : "grey";
    if (m.r > 150 && m.g > 150 && m.b < 120) return "yellow";
    if (hi == m.r) return "red";
    if (hi == m.g) return "green";
    return "blue";
}

}  // namespace

std::string StubCaptioner::caption(const Image& image) {
    if (image.empty()) throw PreconditionError("cannot caption an empty image");
    const Mean border = region_mean(image, true);
    const Mean centre = region_mean(image, false);
    const std::string bg = colour_name(border);
    std::string scene;
    if (bg == "blue") {
        scene = "a clear blue sky";
    } else if (bg == "green") {
        scene = "a green grassy field";
    } else {
        scene = "a plain " + bg + " background";
    }
    const double luma = 0.299 * border.r + 0.587 * border.g + 0.114 * border.b;
    const std::string light = luma >= 120 ? "in bright light" : "in dim light";
    return "a small " + colour_name(centre) + " object against " + scene + " " + light;
}

ReplayCaptioner ReplayCaptioner::from_file(const std::filesystem::path& path) {
    try {
        return ReplayCaptioner(json::parse(read_file(path)).get<std::map<std::string, std::string>>());
    } catch (const json::exception& e) {
        throw ValidationError("captions", path.string() + ": " + e.what());
    }
}

std::string ReplayCaptioner::caption(const Image& image) {
    const auto digest = image.digest();
    auto it = by_digest_.find(digest);
    if (it == by_digest_.end()) throw BackendError("no recorded caption for image " + digest);
    return it->second;
}

namespace {

json post_json(const std::string& base_url, const std::string& path, const json& body) {
    httplib::Client client(base_url);
    client.set_connection_timeout(10);
    client.set_read_timeout(300);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) throw TransportError(base_url + path + ": " + httplib::to_string(res.error()));
    if (res->status >= 500) throw TransportError(base_url + path + ": HTTP " + std::to_string(res->status));
    if (res->status != 200) throw BackendError(base_url + path + ": HTTP " + std::to_string(res->status) + " " + res->body);
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw BackendError(base_url + path + ": invalid JSON response: " + e.what());
    }
}

}  // namespace

HttpLanguageModel::HttpLanguageModel(std::string base_url, std::string path)
    : base_url_(std::move(base_url)), path_(std::move(path)) {}

std::string HttpLanguageModel::send(const Conversation& messages) {
    auto j = post_json(base_url_, path_, {{"messages", conversation_to_json(messages)}});
    if (!j.contains("reply") || !j["reply"].is_string()) throw BackendError("language model response lacks 'reply'");
    return j["reply"].get<std::string>();
}

HttpCaptioner::HttpCaptioner(std::string base_url, std::string path)
    : base_url_(std::move(base_url)), path_(std::move(path)) {}

std::string HttpCaptioner::caption(const Image& image) {
    const auto png = encode_png(image);
    auto j = post_json(base_url_, path_, {{"image", base64_encode(png)}});
    if (!j.contains("caption") || !j["caption"].is_string()) throw BackendError("captioner response lacks 'caption'");
    return j["caption"].get<std::string>();
}

}  // namespace alia::prompt
