// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alia {

// Incremental SHA-256 over OpenSSL's EVP interface.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::span<const std::uint8_t> bytes);
    Sha256& update(std::string_view text);
    // Length-prefixed field, so ("ab","c") and ("a","bc") hash differently.
    Sha256& field(std::string_view text);
    Sha256& field(std::uint64_t value);

    std::vector<std::uint8_t> digest();
    std::string hex_digest();

private:
    struct Impl;
    Impl* impl_;
};

std::string sha256_hex(std::string_view text);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

std::string to_hex(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace alia
