// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace proofopt {

enum class ErrorKind {
    unbalanced_delimiters,
    empty_proof,
    division_by_zero,
    backend_unavailable,
    timeout,
    protocol_error,
    alignment_error,
    bad_config,
    dimension_mismatch,
    store_missing,
    embedder_unavailable,
    decode_error,
    no_proof_found,
    backend_exhausted,
    rate_limited,
    no_theorems_found,
    ingest_verification_failed,
    empty_dataset,
    not_found,
    io_error,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace proofopt
