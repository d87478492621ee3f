// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace proofopt {

struct ProofState {
    std::vector<std::string> goals;  // pretty-printed, hypotheses included

    bool solved() const { return goals.empty(); }
    bool operator==(const ProofState&) const = default;
};

struct Diagnostic {
    std::string message;
    std::size_t line = 0;
    std::size_t col = 0;

    bool operator==(const Diagnostic&) const = default;
};

/// Outcome of checking one proof. `states` holds one entry per counted
/// tactic in preorder and stops early when a tactic fails.
struct VerificationResult {
    std::vector<Diagnostic> errors;
    std::vector<ProofState> states;
    bool solved = false;
    std::chrono::milliseconds elapsed{0};

    /// E(y): error messages, or 1 when the proof is unsolved without any.
    std::size_t error_count() const { return errors.size() + (errors.empty() && !solved ? 1 : 0); }

    std::vector<std::string> error_messages() const;

    /// Equality ignores `elapsed`.
    bool operator==(const VerificationResult& other) const {
        return errors == other.errors && states == other.states && solved == other.solved;
    }
};

bool is_correct(const VerificationResult& result);

void to_json(nlohmann::json& j, const ProofState& s);
void from_json(const nlohmann::json& j, ProofState& s);
void to_json(nlohmann::json& j, const Diagnostic& d);
void from_json(const nlohmann::json& j, Diagnostic& d);
void to_json(nlohmann::json& j, const VerificationResult& r);
void from_json(const nlohmann::json& j, VerificationResult& r);

}  // namespace proofopt
