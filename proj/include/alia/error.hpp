// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace alia {

enum class ErrorCode {
    precondition,
    malformed_manifest,
    integrity,
    shortage,
    degenerate_crop,
    range,
    config,
    validation,
    transport,
    empty_descriptions,
    missing_class,
    ordering,
    conflict,
    not_found,
    parity,
    backend,
    io,
};

const char* to_string(ErrorCode code);

// Base of every error thrown by the library. The code is stable and is what
// the HTTP layer and the CLI map to status codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& message) : Error(ErrorCode::precondition, message) {}
};

class ManifestError : public Error {
public:
    ManifestError(std::size_t line, const std::string& message)
        : Error(ErrorCode::malformed_manifest, "manifest line " + std::to_string(line) + ": " + message),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& message) : Error(ErrorCode::integrity, message) {}
};

struct Deficit {
    std::string key;  // class label, or "label/domain" for bias-split cells
    std::size_t requested = 0;
    std::size_t available = 0;

    std::size_t missing() const { return requested - available; }
};

class ShortageError : public Error {
public:
    explicit ShortageError(std::vector<Deficit> deficits);

    const std::vector<Deficit>& deficits() const noexcept { return deficits_; }

private:
    std::vector<Deficit> deficits_;
};

class RangeError : public Error {
public:
    explicit RangeError(const std::string& message) : Error(ErrorCode::range, message) {}
};

// Configuration problems. `field` names the offending key (dotted path) when
// one can be singled out.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(ErrorCode::config, field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& message)
        : Error(ErrorCode::validation, message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Retryable failure talking to a remote model.
class TransportError : public Error {
public:
    explicit TransportError(const std::string& message) : Error(ErrorCode::transport, message) {}
};

class BackendError : public Error {
public:
    explicit BackendError(const std::string& message) : Error(ErrorCode::backend, message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorCode::io, message) {}
};

}  // namespace alia
