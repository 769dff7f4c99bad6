// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "alia/image.hpp"

namespace alia {

// Lossless, content-addressed image storage: <root>/<digest>.png. Writes go
// to a temporary name and are renamed into place, so a reader never sees a
// partial file.
class ImageStore {
public:
    explicit ImageStore(std::filesystem::path root);

    // Returns the digest (also the storage key).
    std::string put(const Image& image);
    Image get(const std::string& digest) const;
    bool contains(const std::string& digest) const;
    std::filesystem::path path_for(const std::string& digest) const;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
};

// Atomic whole-file write (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace alia
