// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "alia/error.hpp"
#include "alia/hash.hpp"

namespace alia {

std::string Image::digest() const {
    Sha256 h;
    h.field(static_cast<std::uint64_t>(width)).field(static_cast<std::uint64_t>(height));
    h.update(pixels);
    return h.hex_digest();
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.empty()) throw PreconditionError("encode_png: empty image");
    png_image desc;
    std::memset(&desc, 0, sizeof(desc));
    desc.version = PNG_IMAGE_VERSION;
    desc.width = static_cast<png_uint_32>(image.width);
    desc.height = static_cast<png_uint_32>(image.height);
    desc.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&desc, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
        throw IoError(std::string("encode_png: ") + desc.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&desc, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
        throw IoError(std::string("encode_png: ") + desc.message);
    }
    out.resize(size);
    return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image desc;
    std::memset(&desc, 0, sizeof(desc));
    desc.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size())) {
        throw IoError(std::string("decode_png: ") + desc.message);
    }
    desc.format = PNG_FORMAT_RGB;
    Image img(static_cast<int>(desc.width), static_cast<int>(desc.height));
    if (!png_image_finish_read(&desc, nullptr, img.pixels.data(), 0, nullptr)) {
        png_image_free(&desc);
        throw IoError(std::string("decode_png: ") + desc.message);
    }
    return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Image read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

}  // namespace alia
