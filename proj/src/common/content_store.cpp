// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/content_store.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "alia/error.hpp"
#include "alia/hash.hpp"

namespace alia {

namespace fs = std::filesystem;

namespace {

fs::path temp_sibling(const fs::path& path) {
    std::ostringstream suffix;
    suffix << ".tmp." << ::getpid() << "." << std::this_thread::get_id();
    return path.string() + suffix.str();
}

bool is_hex_digest(const std::string& s) {
    if (s.size() != 64) return false;
    for (char c : s) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tmp = temp_sibling(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << contents;
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ImageStore::ImageStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path ImageStore::path_for(const std::string& digest) const { return root_ / (digest + ".png"); }

std::string ImageStore::put(const Image& image) {
    const std::string digest = image.digest();
    const auto path = path_for(digest);
    if (!fs::exists(path)) {
        const auto bytes = encode_png(image);
        write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
    }
    return digest;
}

bool ImageStore::contains(const std::string& digest) const {
    return is_hex_digest(digest) && fs::exists(path_for(digest));
}

Image ImageStore::get(const std::string& digest) const {
    if (!is_hex_digest(digest)) throw IoError("not an image digest: " + digest);
    return read_png(path_for(digest));
}

}  // namespace alia
