// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "alia/content_store.hpp"
#include "alia/data/record.hpp"
#include "alia/image.hpp"

namespace alia::data {

// Resolves a record's pixels. Implementations must be safe for concurrent
// calls.
class ImageSource {
public:
    virtual ~ImageSource() = default;
    virtual Image load(const ImageRecord& record) const = 0;
};

// URIs are either a 64-hex content digest (looked up in the image store) or
// a PNG path, relative paths resolved against `base_dir`.
class StoreImageSource : public ImageSource {
public:
    StoreImageSource(std::shared_ptr<const ImageStore> store, std::filesystem::path base_dir = {});
    Image load(const ImageRecord& record) const override;

private:
    std::shared_ptr<const ImageStore> store_;
    std::filesystem::path base_dir_;
};

// Applies crop_preprocess to everything loaded through it.
class CroppingImageSource : public ImageSource {
public:
    CroppingImageSource(std::shared_ptr<const ImageSource> inner, double top, double bottom);
    Image load(const ImageRecord& record) const override;

private:
    std::shared_ptr<const ImageSource> inner_;
    double top_;
    double bottom_;
};

// In-memory source keyed by uri; used by tests and by stages that already
// hold decoded images.
class MemoryImageSource : public ImageSource {
public:
    void add(const std::string& uri, Image image);
    Image load(const ImageRecord& record) const override;

private:
    mutable std::mutex mutex_;
    std::map<std::string, Image> images_;
};

}  // namespace alia::data
