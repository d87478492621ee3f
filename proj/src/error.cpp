// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "proofopt/error.hpp"

namespace proofopt {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::unbalanced_delimiters: return "UnbalancedDelimiters";
        case ErrorKind::empty_proof: return "EmptyProof";
        case ErrorKind::division_by_zero: return "DivisionByZero";
        case ErrorKind::backend_unavailable: return "BackendUnavailable";
        case ErrorKind::timeout: return "Timeout";
        case ErrorKind::protocol_error: return "ProtocolError";
        case ErrorKind::alignment_error: return "AlignmentError";
        case ErrorKind::bad_config: return "BadConfig";
        case ErrorKind::dimension_mismatch: return "DimensionMismatch";
        case ErrorKind::store_missing: return "StoreMissing";
        case ErrorKind::embedder_unavailable: return "EmbedderUnavailable";
        case ErrorKind::decode_error: return "DecodeError";
        case ErrorKind::no_proof_found: return "NoProofFound";
        case ErrorKind::backend_exhausted: return "BackendExhausted";
        case ErrorKind::rate_limited: return "RateLimited";
        case ErrorKind::no_theorems_found: return "NoTheoremsFound";
        case ErrorKind::ingest_verification_failed: return "IngestVerificationFailed";
        case ErrorKind::empty_dataset: return "EmptyDataset";
        case ErrorKind::not_found: return "NotFound";
        case ErrorKind::io_error: return "IoError";
    }
    return "Unknown";
}

}  // namespace proofopt
