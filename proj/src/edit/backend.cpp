// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/edit/backend.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "httplib.h"

#include "alia/error.hpp"
#include "alia/hash.hpp"
#include "alia/rng.hpp"

namespace alia::edit {

using nlohmann::json;

namespace {

struct Rgb {
    double r, g, b;
};

struct SceneColour {
    std::string_view word;
    Rgb colour;
};

// Checked in order; the first word found in the prompt decides.
constexpr std::array<SceneColour, 14> kSceneColours = {{
    {"dark", {25, 25, 35}},      {"night", {25, 25, 35}},   {"snow", {235, 235, 240}},
    {"water", {40, 90, 160}},    {"lake", {40, 90, 160}},   {"river", {40, 90, 160}},
    {"sky", {135, 180, 235}},    {"flight", {135, 180, 235}}, {"forest", {30, 80, 35}},
    {"grass", {70, 140, 60}},    {"field", {70, 140, 60}},  {"dirt", {140, 110, 70}},
    {"trail", {140, 110, 70}},   {"sand", {200, 180, 130}},
}};

Rgb hashed_colour(std::string_view text) {
    const auto d = Sha256().update(text).digest();
    return {static_cast<double>(d[0]), static_cast<double>(d[1]), static_cast<double>(d[2])};
}

Rgb prompt_tint(const std::string& prompt) {
    std::string lower(prompt);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const auto& s : kSceneColours) {
        if (lower.find(s.word) != std::string::npos) return s.colour;
    }
    return hashed_colour(prompt);
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

bool in_centre(const Image& img, int x, int y) {
    return x >= img.width / 4 && x < img.width * 3 / 4 && y >= img.height / 4 && y < img.height * 3 / 4;
}

}  // namespace

double StubEditBackend::edit_amount(const EditParams& params) {
    double a = 0.0;
    switch (params.backend) {
        case BackendKind::img2img: a = params.strength; break;
        // Higher image guidance keeps more of the input.
        case BackendKind::instruct_pix2pix: a = 2.0 - params.strength; break;
        case BackendKind::txt2img: a = 1.0; break;
    }
    const double g = params.guidance / (params.guidance + 2.5);
    return std::clamp(a * g, 0.0, 1.0);
}

Image StubEditBackend::edit(const Image& image, const std::string& prompt, const EditParams& params) {
    validate_params(params);
    if (params.backend == BackendKind::txt2img) throw BackendError("txt2img backend does not edit images");
    if (image.empty()) throw PreconditionError("cannot edit an empty image");
    const Rgb tint = prompt_tint(prompt);
    const double a = edit_amount(params);
    SplitMix64 rng(derive_seed(params.seed, prompt));
    const double noise = 16.0 * a;
    Image out(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const double w = in_centre(image, x, y) ? a / 2.0 : a;
            const auto* src = image.at(x, y);
            auto* dst = out.at(x, y);
            dst[0] = to_byte((1 - w) * src[0] + w * tint.r + rng.uniform(-noise, noise));
            dst[1] = to_byte((1 - w) * src[1] + w * tint.g + rng.uniform(-noise, noise));
            dst[2] = to_byte((1 - w) * src[2] + w * tint.b + rng.uniform(-noise, noise));
        }
    }
    return out;
}

std::vector<Image> StubEditBackend::generate(const std::string& prompt, const EditParams& params, int count) {
    validate_params(params);
    if (params.backend != BackendKind::txt2img) throw BackendError("generate requires the txt2img backend");
    if (count < 0) throw PreconditionError("count must be non-negative");
    const Rgb bg = prompt_tint(prompt);
    const Rgb fg = hashed_colour("object:" + prompt);
    std::vector<Image> out;
    for (int i = 0; i < count; ++i) {
        SplitMix64 rng(derive_seed(params.seed, prompt + "#" + std::to_string(i)));
        Image img(16, 16);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                const Rgb& c = in_centre(img, x, y) ? fg : bg;
                auto* px = img.at(x, y);
                px[0] = to_byte(c.r + rng.uniform(-12.0, 12.0));
                px[1] = to_byte(c.g + rng.uniform(-12.0, 12.0));
                px[2] = to_byte(c.b + rng.uniform(-12.0, 12.0));
            }
        }
        out.push_back(std::move(img));
    }
    return out;
}

std::string request_key(const std::string& input_digest, const std::string& prompt, const EditParams& params,
                        int index) {
    Sha256 h;
    h.field(input_digest).field(prompt).field(to_string(params.backend));
    h.field(json(params.strength).dump()).field(json(params.guidance).dump()).field(params.seed);
    h.field(static_cast<std::uint64_t>(index));
    return h.hex_digest();
}

ReplayEditBackend::ReplayEditBackend(std::map<std::string, std::string> entries,
                                     std::shared_ptr<const ImageStore> images)
    : entries_(std::move(entries)), images_(std::move(images)) {}

ReplayEditBackend ReplayEditBackend::from_file(const std::filesystem::path& index,
                                               std::shared_ptr<const ImageStore> images) {
    json j;
    try {
        j = json::parse(read_file(index));
    } catch (const json::exception& e) {
        throw ValidationError("replay", index.string() + ": " + e.what());
    }
    if (j.value("format", "") != "alia-edit-replay/1") throw ValidationError("format", "expected alia-edit-replay/1");
    return ReplayEditBackend(j.at("entries").get<std::map<std::string, std::string>>(), std::move(images));
}

Image ReplayEditBackend::lookup(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw BackendError("no recorded output for request " + key);
    return images_->get(it->second);
}

Image ReplayEditBackend::edit(const Image& image, const std::string& prompt, const EditParams& params) {
    return lookup(request_key(image.digest(), prompt, params, 0));
}

std::vector<Image> ReplayEditBackend::generate(const std::string& prompt, const EditParams& params, int count) {
    std::vector<Image> out;
    for (int i = 0; i < count; ++i) out.push_back(lookup(request_key("", prompt, params, i)));
    return out;
}

Image RecordingEditBackend::edit(const Image& image, const std::string& prompt, const EditParams& params) {
    Image out = inner_.edit(image, prompt, params);
    const auto digest = images_->put(out);
    std::lock_guard lock(mutex_);
    entries_[request_key(image.digest(), prompt, params, 0)] = digest;
    return out;
}

std::vector<Image> RecordingEditBackend::generate(const std::string& prompt, const EditParams& params, int count) {
    auto out = inner_.generate(prompt, params, count);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto digest = images_->put(out[i]);
        std::lock_guard lock(mutex_);
        entries_[request_key("", prompt, params, static_cast<int>(i))] = digest;
    }
    return out;
}

void RecordingEditBackend::save_index(const std::filesystem::path& path) const {
    std::lock_guard lock(mutex_);
    write_file_atomic(path, json{{"format", "alia-edit-replay/1"}, {"entries", entries_}}.dump(2) + "\n");
}

HttpEditBackend::HttpEditBackend(std::string base_url, std::string path, unsigned parallelism)
    : base_url_(std::move(base_url)), path_(std::move(path)), parallelism_(std::max(1u, parallelism)) {}

std::vector<Image> HttpEditBackend::call(const Image* image, const std::string& prompt, const EditParams& params,
                                         int count) {
    json body = {{"image", image ? json(base64_encode(encode_png(*image))) : json(nullptr)},
                 {"prompt", prompt},
                 {"backend", to_string(params.backend)},
                 {"strength", params.strength},
                 {"guidance", params.guidance},
                 {"seed", params.seed},
                 {"count", count}};
    httplib::Client client(base_url_);
    client.set_connection_timeout(10);
    client.set_read_timeout(600);
    auto res = client.Post(path_, body.dump(), "application/json");
    const std::string where = base_url_ + path_;
    if (!res) throw TransportError(where + ": " + httplib::to_string(res.error()));
    if (res->status >= 500) throw TransportError(where + ": HTTP " + std::to_string(res->status));
    if (res->status != 200) throw BackendError(where + ": HTTP " + std::to_string(res->status) + " " + res->body);
    std::vector<Image> out;
    try {
        auto j = json::parse(res->body);
        if (j.contains("image")) {
            out.push_back(decode_png(base64_decode(j["image"].get<std::string>())));
        } else {
            for (const auto& s : j.at("images")) out.push_back(decode_png(base64_decode(s.get<std::string>())));
        }
    } catch (const json::exception& e) {
        throw BackendError(where + ": malformed response: " + e.what());
    }
    if (static_cast<int>(out.size()) != count) {
        throw BackendError(where + ": expected " + std::to_string(count) + " images, got " + std::to_string(out.size()));
    }
    return out;
}

Image HttpEditBackend::edit(const Image& image, const std::string& prompt, const EditParams& params) {
    validate_params(params);
    return call(&image, prompt, params, 1).front();
}

std::vector<Image> HttpEditBackend::generate(const std::string& prompt, const EditParams& params, int count) {
    validate_params(params);
    if (count == 0) return {};
    return call(nullptr, prompt, params, count);
}

}  // namespace alia::edit
