// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

namespace proofopt::http {

struct Response {
    int status = 0;
    std::string body;
};

/// POSTs `body` as JSON to `base_url` + `path` with a bearer token. Throws
/// `Error(backend_unavailable)` when no response arrives.
Response post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                   const std::string& bearer, std::chrono::seconds timeout);

/// `name` from the environment, or `fallback` when unset or empty.
std::string env_or(const char* name, const std::string& fallback);

}  // namespace proofopt::http
