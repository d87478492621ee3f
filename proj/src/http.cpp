// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "http.hpp"

#include <cstdlib>

#include "httplib.h"
#include "proofopt/error.hpp"

namespace proofopt::http {

Response post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                   const std::string& bearer, std::chrono::seconds timeout) {
    // Split "https://host[:port]/prefix" into the client origin and a path prefix.
    auto scheme_end = base_url.find("://");
    auto host_end = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    std::string origin = base_url.substr(0, host_end);
    std::string prefix = host_end == std::string::npos ? std::string{} : base_url.substr(host_end);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
    auto res = client.Post(prefix + path, headers, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorKind::backend_unavailable,
                    "request to " + origin + " failed: " + httplib::to_string(res.error()));
    }
    return Response{res->status, res->body};
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

}  // namespace proofopt::http
