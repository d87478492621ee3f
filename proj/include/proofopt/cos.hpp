// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "proofopt/proof_model.hpp"
#include "proofopt/verification.hpp"

namespace proofopt {

/// Renders `proof` with a `/- ... -/` block after every tactic line showing
/// the state that line leaves behind. `states` is aligned one per counted
/// tactic in preorder; for `;`-chained lines the state after the last tactic
/// is shown. Lines past the end of `states` stay unannotated. Throws
/// `alignment_error` when there are more states than tactics.
std::string annotate_chain_of_states(const TacticProof& proof, const std::vector<ProofState>& states,
                                     std::size_t indent_unit = 2, std::size_t base_indent = 2);

/// Body lines of one state comment, without the delimiters.
std::vector<std::string> state_comment_lines(const ProofState& state);

}  // namespace proofopt
