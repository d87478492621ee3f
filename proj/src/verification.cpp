// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "proofopt/verification.hpp"

namespace proofopt {

std::vector<std::string> VerificationResult::error_messages() const {
    std::vector<std::string> out;
    out.reserve(errors.size());
    for (const auto& e : errors) out.push_back(e.message);
    if (errors.empty() && !solved) out.emplace_back("unsolved goals");
    return out;
}

bool is_correct(const VerificationResult& result) { return result.errors.empty() && result.solved; }

void to_json(nlohmann::json& j, const ProofState& s) { j = nlohmann::json{{"goals", s.goals}}; }

void from_json(const nlohmann::json& j, ProofState& s) {
    s.goals = j.at("goals").get<std::vector<std::string>>();
}

void to_json(nlohmann::json& j, const Diagnostic& d) {
    j = nlohmann::json{{"message", d.message}, {"line", d.line}, {"col", d.col}};
}

void from_json(const nlohmann::json& j, Diagnostic& d) {
    d.message = j.at("message").get<std::string>();
    d.line = j.value("line", std::size_t{0});
    d.col = j.value("col", std::size_t{0});
}

void to_json(nlohmann::json& j, const VerificationResult& r) {
    j = nlohmann::json{{"errors", r.errors},
                       {"states", r.states},
                       {"solved", r.solved},
                       {"elapsed_ms", r.elapsed.count()}};
}

void from_json(const nlohmann::json& j, VerificationResult& r) {
    r.errors = j.value("errors", std::vector<Diagnostic>{});
    r.states = j.value("states", std::vector<ProofState>{});
    r.solved = j.at("solved").get<bool>();
    r.elapsed = std::chrono::milliseconds(j.value("elapsed_ms", std::int64_t{0}));
}

}  // namespace proofopt
