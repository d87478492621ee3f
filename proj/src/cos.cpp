// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "proofopt/cos.hpp"

#include "proofopt/error.hpp"
#include "text_util.hpp"

namespace proofopt {

std::vector<std::string> state_comment_lines(const ProofState& state) {
    if (state.solved()) return {"Goals Solved!"};
    std::vector<std::string> out;
    for (const auto& goal : state.goals) {
        for (auto line : text::split_lines(goal)) out.emplace_back(text::trim_right(line));
    }
    return out;
}

std::string annotate_chain_of_states(const TacticProof& proof, const std::vector<ProofState>& states,
                                     std::size_t indent_unit, std::size_t base_indent) {
    auto total = count_tactics(proof);
    if (states.size() > total) {
        throw Error(ErrorKind::alignment_error, std::to_string(states.size()) + " states for " +
                                                    std::to_string(total) + " tactics");
    }
    std::string out;
    auto emit = [&out](const std::string& line) {
        if (!out.empty()) out += '\n';
        out += line;
    };
    for (const auto& group : layout_proof(proof, indent_unit, base_indent)) {
        for (const auto& line : group.lines) emit(line);
        if (!group.is_tactic || group.last_step >= states.size()) continue;
        std::string pad(group.indent, ' ');
        emit(pad + "/-");
        for (const auto& body : state_comment_lines(states[group.last_step])) {
            emit(body.empty() ? std::string{} : pad + body);
        }
        emit(pad + "-/");
    }
    return out;
}

}  // namespace proofopt
