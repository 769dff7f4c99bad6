// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "alia/pipeline/run.hpp"

// HTTP review API. There is no authentication: bind it to a loopback
// address or a trusted network only.
namespace alia::review {

// A response body together with its status, as produced by `dispatch`.
struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

// Maps library errors to {status, {code, message, field?}}.
Response error_response(const std::exception& e);

struct FilterQuery {
    std::optional<std::string> stage;   // semantic | confidence | knn
    std::optional<std::string> status;  // an edit status
    std::size_t page = 1;               // 1-based
    std::size_t page_size = 50;
};

inline constexpr std::size_t kMaxPageSize = 1000;

// Read views. Each throws Error(not_found) when the artifacts behind it do
// not exist yet.
nlohmann::json runs_view(const pipeline::ArtifactRoot& root);
nlohmann::json grid_view(const pipeline::ArtifactRoot& root, const pipeline::RunState& state);
nlohmann::json prompts_view(const pipeline::ArtifactRoot& root, const pipeline::RunState& state);
nlohmann::json filters_view(const pipeline::ArtifactRoot& root, const pipeline::RunState& state,
                            const FilterQuery& query);
// Compares the numbers shown by the views with a recount from the raw
// artifacts.
nlohmann::json consistency_view(const pipeline::ArtifactRoot& root, const pipeline::RunState& state);

// Routes a request without going through a socket.
Response dispatch(const pipeline::ArtifactRoot& root, const std::string& method, const std::string& path,
                  const std::multimap<std::string, std::string>& query, const std::string& body);

class Service {
public:
    explicit Service(pipeline::ArtifactRoot root);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds; port 0 picks a free port. Returns the bound port. Throws
    // IoError when the address cannot be bound.
    int bind(const std::string& host, int port);
    // Serves until stop(); call after bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace alia::review
