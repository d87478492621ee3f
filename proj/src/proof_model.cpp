// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "proofopt/proof_model.hpp"

#include <array>
#include <utility>

#include "proofopt/error.hpp"
#include "text_util.hpp"

namespace proofopt {

namespace {

constexpr std::size_t npos = std::string_view::npos;

struct BracketPair {
    std::string_view open;
    std::string_view close;
};

constexpr std::array<BracketPair, 8> kBrackets{{
    {"(", ")"},
    {"[", "]"},
    {"{", "}"},
    {"⟨", "⟩"},
    {"⦃", "⦄"},
    {"⟦", "⟧"},
    {"‹", "›"},
    {"⟪", "⟫"},
}};

struct LexLine {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t depth_start = 0;
    std::size_t depth_end = 0;
    int comment_start = 0;
    int comment_end = 0;
    bool has_code = false;
    std::size_t line_comment = npos;
    std::vector<std::size_t> separators;
};

/// Splits `src` into physical lines while tracking brackets, strings and
/// comments across line breaks.
std::vector<LexLine> lex(std::string_view src) {
    std::vector<LexLine> lines;
    std::vector<std::string_view> closers;
    int comment = 0;
    bool in_string = false;

    LexLine cur;
    cur.begin = 0;
    cur.depth_start = 0;
    bool in_line_comment = false;

    auto finish_line = [&](std::size_t at) {
        cur.end = at;
        cur.depth_end = closers.size();
        cur.comment_end = comment;
        lines.push_back(cur);
        cur = LexLine{};
        cur.begin = at + 1;
        cur.depth_start = closers.size();
        cur.comment_start = comment;
        in_line_comment = false;
    };

    std::size_t i = 0;
    while (i < src.size()) {
        char c = src[i];
        if (c == '\n') {
            finish_line(i);
            ++i;
            continue;
        }
        if (in_line_comment) {
            ++i;
            continue;
        }
        if (in_string) {
            if (c == '\\') {
                i += 2;
                continue;
            }
            if (c == '"') in_string = false;
            ++i;
            continue;
        }
        auto rest = src.substr(i);
        if (comment > 0) {
            if (text::starts_with(rest, "/-")) {
                ++comment;
                i += 2;
            } else if (text::starts_with(rest, "-/")) {
                --comment;
                i += 2;
            } else {
                ++i;
            }
            continue;
        }
        if (text::starts_with(rest, "--")) {
            if (cur.line_comment == npos) cur.line_comment = i;
            in_line_comment = true;
            i += 2;
            continue;
        }
        if (text::starts_with(rest, "/-")) {
            comment = 1;
            i += 2;
            continue;
        }
        if (!text::is_space(c)) cur.has_code = true;
        if (c == '"') {
            in_string = true;
            ++i;
            continue;
        }
        bool matched = false;
        for (const auto& b : kBrackets) {
            if (text::starts_with(rest, b.open)) {
                closers.push_back(b.close);
                i += b.open.size();
                matched = true;
                break;
            }
            if (text::starts_with(rest, b.close)) {
                if (closers.empty() || closers.back() != b.close) {
                    throw Error(ErrorKind::unbalanced_delimiters,
                                "unexpected '" + std::string(b.close) + "' at byte " + std::to_string(i));
                }
                closers.pop_back();
                i += b.close.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (c == ';' && closers.empty()) {
            bool combinator = i > 0 && src[i - 1] == '<' && i + 1 < src.size() && src[i + 1] == '>';
            if (!combinator) cur.separators.push_back(i);
        }
        ++i;
    }
    finish_line(src.size());

    if (in_string) throw Error(ErrorKind::unbalanced_delimiters, "unterminated string literal");
    if (comment > 0) throw Error(ErrorKind::unbalanced_delimiters, "unterminated block comment");
    if (!closers.empty()) {
        throw Error(ErrorKind::unbalanced_delimiters, "missing '" + std::string(closers.back()) + "'");
    }
    return lines;
}

std::string spaces(std::size_t n) { return std::string(n, ' '); }

/// Bytes taken by a focus bullet at the start of `content`, or 0.
std::size_t bullet_bytes(std::string_view content) {
    if (text::starts_with(content, "·")) return 2;
    if (content.size() >= 2 && content[0] == '.' && (content[1] == ' ' || content[1] == '\t')) return 1;
    return 0;
}

bool is_continuation_token(std::string_view content) {
    return content == "_" || text::starts_with(content, "_ ") || text::starts_with(content, "| ") ||
           text::starts_with(content, "<;>");
}

bool is_block_head(std::string_view word) {
    return word == "case" || word == "case'" || word == "next" || word == "conv" || word == "conv_lhs" ||
           word == "conv_rhs";
}

/// True when a tactic line whose code part is `code` is followed by a nested
/// tactic block.
bool opens_block(std::string_view code) {
    code = text::trim(code);
    if (code.empty()) return false;
    if (text::ends_with_word(code, "by")) return true;
    if (text::ends_with(code, "=>")) return is_block_head(text::first_word(code)) || code.front() == '|';
    return false;
}

class ProofBuilder {
public:
    ProofBuilder(std::string_view src, std::vector<LexLine> lines) : src_(src), lines_(std::move(lines)) {}

    TacticProof build() {
        proof_.raw = std::string(src_);
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            i = consume(i);
        }
        if (proof_.steps.empty()) throw Error(ErrorKind::empty_proof, "no tactic found");
        proof_.trailing_comments = std::move(pending_);
        return std::move(proof_);
    }

private:
    struct Frame {
        std::size_t col;
        std::vector<TacticStep>* container;
        TacticStep* anchor;
        bool focus;
    };

    std::string_view line_text(const LexLine& l) const { return src_.substr(l.begin, l.end - l.begin); }

    /// Returns the index of the last physical line consumed.
    std::size_t consume(std::size_t idx) {
        const LexLine& l = lines_[idx];
        auto line = line_text(l);
        if (text::trim(line).empty()) return idx;

        std::size_t ws = text::leading_spaces(line);
        auto content = text::trim_right(line.substr(ws));

        if (l.depth_start > 0 || l.comment_start > 0) {
            continue_last(l, ws);
            return idx;
        }
        if (text::starts_with(content, "--")) {
            pending_.emplace_back(content);
            return idx;
        }
        if (text::starts_with(content, "/-") && !(l.comment_end == 0 && l.has_code)) {
            return collect_block_comment(idx, ws);
        }
        code_line(l, ws);
        return idx;
    }

    std::size_t collect_block_comment(std::size_t idx, std::size_t col) {
        std::string body(text::trim_right(line_text(lines_[idx]).substr(col)));
        while (lines_[idx].comment_end > 0 && idx + 1 < lines_.size()) {
            ++idx;
            auto next = line_text(lines_[idx]);
            std::size_t ws = text::leading_spaces(next);
            auto rest = text::trim_right(next.substr(ws));
            body += '\n';
            if (!rest.empty()) body += spaces(ws > col ? ws - col : 0) + std::string(rest);
        }
        pending_.push_back(std::move(body));
        return idx;
    }

    void continue_last(const LexLine& l, std::size_t ws) {
        if (last_ == nullptr) throw Error(ErrorKind::empty_proof, "continuation line before any tactic");
        auto line = line_text(l);
        auto rest = text::trim_right(line.substr(ws));
        last_->text += '\n';
        if (!rest.empty()) last_->text += spaces(ws > last_col_ ? ws - last_col_ : 0) + std::string(rest);
        last_->span.end = l.end;
        if (l.depth_end == 0 && l.comment_end == 0) last_opens_ = opens_block(code_part(l));
    }

    std::string_view code_part(const LexLine& l) const {
        std::size_t end = l.line_comment == npos ? l.end : l.line_comment;
        return src_.substr(l.begin, end - l.begin);
    }

    void code_line(const LexLine& l, std::size_t ws) {
        auto line = line_text(l);
        auto content = line.substr(ws);
        std::size_t col = ws;

        if (last_ != nullptr && !last_opens_ && (is_continuation_token(content) || col > last_col_)) {
            continue_last(l, ws);
            return;
        }

        if (frames_.empty()) frames_.push_back(Frame{col, &proof_.steps, nullptr, false});

        std::size_t bb = bullet_bytes(content);
        if (last_ != nullptr && last_opens_ && col > last_col_) {
            frames_.push_back(Frame{col, &last_->children, nullptr, false});
        } else {
            while (frames_.size() > 1 && col < frames_.back().col) frames_.pop_back();
        }
        Frame& frame = frames_.back();

        if (bb > 0) {
            std::size_t after = ws + bb;
            while (after < line.size() && (line[after] == ' ' || line[after] == '\t')) ++after;
            std::size_t content_col = col + 1 + (after - ws - bb);
            auto* container = frame.anchor != nullptr ? &frame.anchor->children : frame.container;
            std::string marker(content.substr(0, bb));
            if (!add_segments(l, after, *container, Layout::bullet, marker, content_col)) return;
            frames_.push_back(Frame{content_col, container, &container->back(), true});
            return;
        }

        Layout layout = frame.focus ? Layout::focus_line : Layout::line;
        if (!add_segments(l, ws, *frame.container, layout, {}, col)) return;
        frame.anchor = &frame.container->back();
    }

    /// Splits the code of line `l` from byte `from` (relative to the line)
    /// at `;` separators and appends the non-empty pieces.
    bool add_segments(const LexLine& l, std::size_t from, std::vector<TacticStep>& container, Layout first_layout,
                      const std::string& marker, std::size_t content_col) {
        std::size_t code_end = l.line_comment == npos ? l.end : l.line_comment;
        std::vector<std::pair<std::size_t, std::size_t>> pieces;
        std::size_t start = l.begin + from;
        for (auto sep : l.separators) {
            if (sep < start || sep >= code_end) continue;
            pieces.emplace_back(start, sep);
            start = sep + 1;
        }
        pieces.emplace_back(start, code_end);

        bool first = true;
        for (auto [b, e] : pieces) {
            auto raw = src_.substr(b, e - b);
            auto piece = text::trim(raw);
            if (piece.empty()) continue;
            TacticStep step;
            step.text = std::string(piece);
            std::size_t offset = b + static_cast<std::size_t>(piece.data() - raw.data());
            step.span = SourceSpan{offset, offset + piece.size()};
            if (first) {
                step.layout = first_layout;
                step.bullet = marker;
                step.comments = std::move(pending_);
                pending_.clear();
            } else {
                step.layout = Layout::chained;
            }
            container.push_back(std::move(step));
            first = false;
        }
        if (first) return false;
        if (l.line_comment != npos) {
            auto from_code = container.back().span.end;
            container.back().trailing_comment = std::string(text::trim_right(src_.substr(from_code, l.end - from_code)));
        }
        last_ = &container.back();
        last_col_ = content_col;
        last_opens_ = l.depth_end == 0 && l.comment_end == 0 && opens_block(code_part(l));
        return true;
    }

    std::string_view src_;
    std::vector<LexLine> lines_;
    TacticProof proof_;
    std::vector<Frame> frames_;
    std::vector<std::string> pending_;
    TacticStep* last_ = nullptr;
    std::size_t last_col_ = 0;
    bool last_opens_ = false;
};

class Layouter {
public:
    explicit Layouter(std::size_t unit) : unit_(unit) {}

    void block(const std::vector<TacticStep>& steps, std::size_t by_col, std::size_t bullet_col) {
        std::size_t focus_col = bullet_col + 2;
        std::size_t line_content = by_col;
        bool open_line = false;
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const TacticStep& s = steps[i];
            std::size_t my_index = index_++;
            bool join = s.layout == Layout::chained && open_line && s.comments.empty();
            if (join) {
                auto& line = out_.back();
                auto parts = text::split_lines(s.text);
                line.lines.back() += "; " + std::string(parts.front());
                for (std::size_t p = 1; p < parts.size(); ++p) line.lines.push_back(indent(line_content, parts[p]));
                line.last_step = my_index;
            } else {
                std::size_t col = by_col;
                std::string prefix;
                std::size_t content = by_col;
                if (s.layout == Layout::bullet) {
                    col = bullet_col;
                    prefix = (s.bullet.empty() ? std::string("·") : s.bullet) + " ";
                    content = col + 2;
                } else if (s.layout == Layout::focus_line) {
                    col = focus_col;
                    content = col;
                }
                comments(s.comments, col);
                RenderedLine line;
                line.indent = col;
                line.is_tactic = true;
                line.last_step = my_index;
                auto parts = text::split_lines(s.text);
                line.lines.push_back(spaces(col) + prefix + std::string(parts.front()));
                for (std::size_t p = 1; p < parts.size(); ++p) line.lines.push_back(indent(content, parts[p]));
                out_.push_back(std::move(line));
                line_content = content;
                open_line = true;
            }
            if (!s.trailing_comment.empty()) {
                out_.back().lines.back() += s.trailing_comment;
                open_line = false;
            }
            if (!s.children.empty()) {
                block(s.children, line_content + unit_, line_content);
                open_line = false;
            }
        }
    }

    void comments(const std::vector<std::string>& cs, std::size_t col) {
        for (const auto& c : cs) {
            RenderedLine line;
            line.indent = col;
            for (auto part : text::split_lines(c)) line.lines.push_back(indent(col, part));
            out_.push_back(std::move(line));
        }
    }

    std::vector<RenderedLine> take() { return std::move(out_); }

private:
    static std::string indent(std::size_t col, std::string_view part) {
        if (text::trim(part).empty()) return {};
        return spaces(col) + std::string(part);
    }

    std::size_t unit_;
    std::size_t index_ = 0;
    std::vector<RenderedLine> out_;
};

}  // namespace

TacticProof parse_tactic_proof(std::string_view source) {
    ProofBuilder builder(source, lex(source));
    return builder.build();
}

std::size_t count_tactics(const TacticStep& step) {
    std::size_t n = 1;
    for (const auto& c : step.children) n += count_tactics(c);
    return n;
}

std::size_t count_tactics(const TacticProof& proof) {
    std::size_t n = 0;
    for (const auto& s : proof.steps) n += count_tactics(s);
    return n;
}

namespace {
void walk(const TacticStep& step, std::size_t depth,
          const std::function<void(const TacticStep&, std::size_t)>& fn) {
    fn(step, depth);
    for (const auto& c : step.children) walk(c, depth + 1, fn);
}
}  // namespace

void for_each_step(const TacticProof& proof, const std::function<void(const TacticStep&, std::size_t)>& fn) {
    for (const auto& s : proof.steps) walk(s, 0, fn);
}

bool is_state_comment(std::string_view body) {
    if (text::starts_with(body, "-") || text::starts_with(body, "!")) return false;
    auto trimmed = text::trim(body);
    return trimmed == "Goals Solved!" || trimmed.find("⊢") != npos;
}

std::string strip_state_comments(std::string_view source) {
    std::string out;
    out.reserve(source.size());
    std::size_t copied = 0;
    std::size_t i = 0;
    bool in_string = false;
    bool in_line_comment = false;
    while (i < source.size()) {
        char c = source[i];
        if (c == '\n') {
            in_line_comment = false;
            ++i;
            continue;
        }
        if (in_line_comment) {
            ++i;
            continue;
        }
        if (in_string) {
            if (c == '\\') {
                i += 2;
                continue;
            }
            if (c == '"') in_string = false;
            ++i;
            continue;
        }
        if (c == '"') {
            in_string = true;
            ++i;
            continue;
        }
        auto rest = source.substr(i);
        if (text::starts_with(rest, "--")) {
            in_line_comment = true;
            i += 2;
            continue;
        }
        if (!text::starts_with(rest, "/-")) {
            ++i;
            continue;
        }
        std::size_t open = i;
        int depth = 1;
        std::size_t j = i + 2;
        while (j < source.size() && depth > 0) {
            auto r = source.substr(j);
            if (text::starts_with(r, "/-")) {
                ++depth;
                j += 2;
            } else if (text::starts_with(r, "-/")) {
                --depth;
                j += 2;
            } else {
                ++j;
            }
        }
        if (depth > 0) throw Error(ErrorKind::unbalanced_delimiters, "unterminated block comment");
        std::size_t close = j;  // one past "-/"

        std::size_t line_start = 0;
        if (open > 0) {
            auto nl = source.rfind('\n', open - 1);
            line_start = nl == npos ? 0 : nl + 1;
        }
        std::size_t line_end = source.find('\n', close);
        if (line_end == npos) line_end = source.size();
        bool standalone = text::trim(source.substr(line_start, open - line_start)).empty() &&
                          text::trim(source.substr(close, line_end - close)).empty();
        auto body = source.substr(open + 2, close - 2 - (open + 2));
        if (standalone && is_state_comment(body)) {
            out.append(source.substr(copied, line_start - copied));
            copied = line_end < source.size() ? line_end + 1 : line_end;
            i = copied;
        } else {
            i = close;
        }
    }
    out.append(source.substr(copied));
    return out;
}

std::vector<RenderedLine> layout_proof(const TacticProof& proof, std::size_t indent_unit, std::size_t base_indent) {
    Layouter layouter(indent_unit);
    layouter.block(proof.steps, base_indent, base_indent);
    layouter.comments(proof.trailing_comments, base_indent);
    return layouter.take();
}

std::string render_proof(const TacticProof& proof, std::size_t indent_unit, std::size_t base_indent) {
    std::string out;
    for (const auto& group : layout_proof(proof, indent_unit, base_indent)) {
        for (const auto& line : group.lines) {
            if (!out.empty()) out += '\n';
            out += line;
        }
    }
    return out;
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    for (auto line : text::split_lines(text)) {
        auto t = text::trim_right(line);
        if (text::trim(t).empty()) continue;
        if (!out.empty()) out += '\n';
        out += t;
    }
    return out;
}

std::string render_theorem(const TheoremEntry& entry, const TacticProof& proof) {
    return std::string(text::trim_right(entry.statement)) + "\n" + render_proof(proof);
}

}  // namespace proofopt
