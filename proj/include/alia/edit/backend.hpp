// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "alia/content_store.hpp"
#include "alia/edit/params.hpp"
#include "alia/image.hpp"

namespace alia::edit {

class EditBackend {
public:
    virtual ~EditBackend() = default;
    virtual Image edit(const Image& image, const std::string& prompt, const EditParams& params) = 0;
    // txt2img only; other backends throw BackendError.
    virtual std::vector<Image> generate(const std::string& prompt, const EditParams& params, int count) = 0;
    // How many calls may run at once. GPU servers usually want 1.
    virtual unsigned max_parallelism() const { return 1; }
};

// Deterministic procedural editor. The output depends only on the inputs:
// the image is blended toward a tint picked from the prompt (scene words
// such as "sky", "grass", "water", "forest" and "dark" map to fixed colours,
// anything else to a colour hashed from the prompt) by an amount that grows
// with the edit strength, plus seeded noise. The border moves twice as far
// as the centre, so moderate edits change the background and keep the
// object. generate() renders an object on a tinted background.
class StubEditBackend : public EditBackend {
public:
    explicit StubEditBackend(unsigned parallelism = 4) : parallelism_(parallelism) {}
    Image edit(const Image& image, const std::string& prompt, const EditParams& params) override;
    std::vector<Image> generate(const std::string& prompt, const EditParams& params, int count) override;
    unsigned max_parallelism() const override { return parallelism_; }

    // Blend weight applied to the border for these params, in [0, 1].
    static double edit_amount(const EditParams& params);

private:
    unsigned parallelism_;
};

// Key identifying one backend call: input image digest (empty for txt2img),
// prompt, params and output index.
std::string request_key(const std::string& input_digest, const std::string& prompt, const EditParams& params,
                        int index);

// Replays recorded outputs. Index file:
//   {"format": "alia-edit-replay/1", "entries": {"<request key>": "<image digest>", ...}}
// with the images in an ImageStore. A request without an entry throws
// BackendError.
class ReplayEditBackend : public EditBackend {
public:
    ReplayEditBackend(std::map<std::string, std::string> entries, std::shared_ptr<const ImageStore> images);
    static ReplayEditBackend from_file(const std::filesystem::path& index, std::shared_ptr<const ImageStore> images);

    Image edit(const Image& image, const std::string& prompt, const EditParams& params) override;
    std::vector<Image> generate(const std::string& prompt, const EditParams& params, int count) override;
    unsigned max_parallelism() const override { return 8; }

private:
    Image lookup(const std::string& key) const;
    std::map<std::string, std::string> entries_;
    std::shared_ptr<const ImageStore> images_;
};

// Forwards to another backend and records every output for later replay.
class RecordingEditBackend : public EditBackend {
public:
    RecordingEditBackend(EditBackend& inner, std::shared_ptr<ImageStore> images)
        : inner_(inner), images_(std::move(images)) {}
    Image edit(const Image& image, const std::string& prompt, const EditParams& params) override;
    std::vector<Image> generate(const std::string& prompt, const EditParams& params, int count) override;
    unsigned max_parallelism() const override { return inner_.max_parallelism(); }
    void save_index(const std::filesystem::path& path) const;

private:
    EditBackend& inner_;
    std::shared_ptr<ImageStore> images_;
    mutable std::mutex mutex_;
    std::map<std::string, std::string> entries_;
};

// HTTP model server.
//   POST <path> {"image": "<base64 png>" | null, "prompt": "...", "backend": "img2img",
//                "strength": 0.4, "guidance": 5.0, "seed": 123, "count": 1}
//   -> {"image": "<base64 png>"}  or  {"images": ["<base64 png>", ...]}
// Connection failures and 5xx raise TransportError; other non-200 replies
// raise BackendError.
class HttpEditBackend : public EditBackend {
public:
    HttpEditBackend(std::string base_url, std::string path = "/v1/edit", unsigned parallelism = 1);
    Image edit(const Image& image, const std::string& prompt, const EditParams& params) override;
    std::vector<Image> generate(const std::string& prompt, const EditParams& params, int count) override;
    unsigned max_parallelism() const override { return parallelism_; }

private:
    std::vector<Image> call(const Image* image, const std::string& prompt, const EditParams& params, int count);
    std::string base_url_;
    std::string path_;
    unsigned parallelism_;
};

}  // namespace alia::edit
