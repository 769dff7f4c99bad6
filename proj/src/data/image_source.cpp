// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/data/image_source.hpp"

#include "alia/data/dataset.hpp"
#include "alia/error.hpp"

namespace alia::data {

namespace {

bool looks_like_digest(const std::string& uri) {
    if (uri.size() != 64) return false;
    for (char c : uri) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
}

}  // namespace

StoreImageSource::StoreImageSource(std::shared_ptr<const ImageStore> store, std::filesystem::path base_dir)
    : store_(std::move(store)), base_dir_(std::move(base_dir)) {}

Image StoreImageSource::load(const ImageRecord& record) const {
    if (store_ && looks_like_digest(record.uri)) return store_->get(record.uri);
    std::filesystem::path p(record.uri);
    if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
    return read_png(p);
}

CroppingImageSource::CroppingImageSource(std::shared_ptr<const ImageSource> inner, double top, double bottom)
    : inner_(std::move(inner)), top_(top), bottom_(bottom) {}

Image CroppingImageSource::load(const ImageRecord& record) const {
    return crop_preprocess(inner_->load(record), top_, bottom_);
}

void MemoryImageSource::add(const std::string& uri, Image image) {
    std::lock_guard lock(mutex_);
    images_[uri] = std::move(image);
}

Image MemoryImageSource::load(const ImageRecord& record) const {
    std::lock_guard lock(mutex_);
    auto it = images_.find(record.uri);
    if (it == images_.end()) throw IoError("no image for uri " + record.uri);
    return it->second;
}

}  // namespace alia::data
