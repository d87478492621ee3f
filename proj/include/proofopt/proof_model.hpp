// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace proofopt {

/// How a step is placed relative to the step before it in the same list.
enum class Layout {
    line,        // own line in the enclosing block
    chained,     // same line as the previous sibling, joined with `;`
    bullet,      // opens a focus block (`·` or `.`)
    focus_line,  // own line inside the most recent focus block
};

struct SourceSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// One counted tactic invocation.
///
/// `children` holds both the tactics of a nested `... := by` block and the
/// focus blocks opened by bullets below this step. Continuation lines of a
/// multi-line tactic are stored in `text` with indentation relative to the
/// step's own column, so the step can be re-rendered at any depth.
struct TacticStep {
    std::string text;
    std::vector<TacticStep> children;
    SourceSpan span;
    Layout layout = Layout::line;
    std::string bullet;
    std::vector<std::string> comments;  // comments directly above this step
    std::string trailing_comment;       // `-- ...` after the tactic, with its leading gap
};

struct TacticProof {
    std::vector<TacticStep> steps;
    std::vector<std::string> trailing_comments;
    std::string raw;
};

struct TheoremEntry {
    std::string name;
    std::string statement;  // declaration header up to and including `:= by`
    std::string context;    // file content before the declaration
    TacticProof initial_proof;
    std::string source_path;
};

/// Parses the tactic block following `by`. Throws `Error` with
/// `unbalanced_delimiters` or `empty_proof`.
TacticProof parse_tactic_proof(std::string_view source);

std::size_t count_tactics(const TacticStep& step);
std::size_t count_tactics(const TacticProof& proof);

/// Preorder walk; `depth` is 0 for top-level steps.
void for_each_step(const TacticProof& proof,
                   const std::function<void(const TacticStep&, std::size_t depth)>& fn);

/// True for the body of a `/- ... -/` block that carries a proof state.
bool is_state_comment(std::string_view body);

/// Removes every standalone proof-state comment block. Idempotent.
std::string strip_state_comments(std::string_view source);

/// A rendered source line group: comment lines or one tactic line together
/// with its continuation lines.
struct RenderedLine {
    std::vector<std::string> lines;  // already indented
    std::size_t indent = 0;
    bool is_tactic = false;
    std::size_t last_step = 0;  // preorder index of the last step on the line
};

std::vector<RenderedLine> layout_proof(const TacticProof& proof, std::size_t indent_unit = 2,
                                       std::size_t base_indent = 2);

std::string render_proof(const TacticProof& proof, std::size_t indent_unit = 2,
                         std::size_t base_indent = 2);

/// Trims trailing whitespace on every line and drops blank lines.
std::string normalize_whitespace(std::string_view text);

/// `statement` followed by the rendered proof on the next lines.
std::string render_theorem(const TheoremEntry& entry, const TacticProof& proof);

}  // namespace proofopt
