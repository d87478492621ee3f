// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "proofopt/generation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "http.hpp"
#include "proofopt/cos.hpp"
#include "proofopt/error.hpp"
#include "text_util.hpp"

namespace proofopt {

using json = nlohmann::json;

namespace {

std::string format_score(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s(buf);
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s == "-0" ? "0" : s;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

const char* kSystemTemplate =
    "You will be given the proof context (i.e. the lean file contents/imports leading up to the theorem "
    "declaration) wrapped by <CONTEXT>...</CONTEXT>.\n\n"
    "You will be given the previous {num_prev} input/output pairs as well as their metric ({metric}) score "
    "and correctness score, as well as any error messages, for your reference to improve upon. Each of these "
    "previous results will be wrapped with <PREV I=0></PREV I=0>,...,<PREV I={last_prev}></PREV I={last_prev}>, "
    "with I={last_prev} being the most recent result.\n\n"
    "Remember to use lean 4 syntax, which has significant changes from the lean 3 syntax. To assist with the "
    "syntax relating to the current theorem and current error messages, you will be given {num_syntax_docs} "
    "documents to refer to for fixing these syntax issues. Each of these documents will be wrapped with "
    "<SYNTAX_DOC>...</SYNTAX_DOC>.\n\n"
    "You will also receive {num_mathlib_docs} documents relevant to the current theorem to help with "
    "formulating your modified proof. Each of these will be wrapped with <CONTENT_DOC>...</CONTENT_DOC>\n\n"
    "You will also receive {num_examples} examples of input-output pairs of proofs that were optimized for "
    "the {metric} metric. Each of these will be wrapped with <EXAMPLE>...</EXAMPLE>\n\n"
    "{cos}The current theorem will be wrapped in <CURRENT>...</CURRENT>";

std::string wrap(const std::string& tag, const std::string& body) {
    return "<" + tag + ">\n" + body + "\n</" + tag + ">";
}

std::string prev_block(const IterationRecord& rec, std::size_t i, const MetricDef& metric) {
    const auto& out = rec.output;
    std::string body = "Input:\n" + rec.input_proof + "\nOutput:\n" +
                       (out.proof ? out.proof_text() : out.raw_output) + "\n";
    body += "Metric (" + metric.name + ") score: " +
            (out.metric_score ? format_score(*out.metric_score) : std::string("n/a")) + "\n";
    body += std::string("Correct: ") + (out.correct ? "true" : "false") + "\n";
    auto errors = out.error_messages();
    body += "Error messages:";
    if (errors.empty()) body += " none";
    for (const auto& e : errors) body += "\n- " + e;
    std::string tag = "PREV I=" + std::to_string(i);
    return "<" + tag + ">\n" + body + "\n</" + tag + ">";
}

}  // namespace

// ---------------------------------------------------------------- results

std::size_t GenerationResult::error_count() const {
    if (!proof || !verification) return 1;
    return verification->error_count();
}

std::vector<std::string> GenerationResult::error_messages() const {
    if (!failure.empty()) return {failure};
    if (!proof) return {"unparseable output"};
    if (!verification) return {"not verified"};
    return verification->error_messages();
}

std::string GenerationResult::proof_text() const { return proof ? render_proof(*proof) : std::string{}; }

// ---------------------------------------------------------------- prompt

std::string_view to_string(OutputFormat f) {
    switch (f) {
        case OutputFormat::str: return "str";
        case OutputFormat::flat: return "flat";
        case OutputFormat::structured: return "structured";
    }
    return "?";
}

OutputFormat output_format_from_string(std::string_view s) {
    if (s == "str") return OutputFormat::str;
    if (s == "flat") return OutputFormat::flat;
    if (s == "structured") return OutputFormat::structured;
    throw Error(ErrorKind::bad_config, "unknown output format '" + std::string(s) + "'");
}

std::string format_instructions(OutputFormat format) {
    switch (format) {
        case OutputFormat::str:
            return "Output the complete modified theorem, declaration included, in a single ```lean code "
                   "block. Do not include anything else in the code block.";
        case OutputFormat::flat:
            return "Output a JSON object of the form {\"tactics\": [\"tactic 1\", \"tactic 2\", ...]} listing the "
                   "tactics of the modified proof in order, one string per line of the tactic proof. Do not "
                   "include the theorem statement or the leading `by`.";
        case OutputFormat::structured:
            return "Output a JSON object of the form {\"tactics\": [node, ...]} describing the modified proof as "
                   "a tree. A node is either a tactic string, or an object {\"tactic\": [[node, ...], ...]} whose "
                   "single key is a tactic and whose value lists the branches it opens: one list per focused "
                   "goal, or one list holding the nested block when the tactic ends in `by`. Do not include the "
                   "theorem statement or the leading `by`.";
    }
    return {};
}

std::vector<ChatMessage> assemble_prompt(const PromptRequest& request) {
    const auto& m = request.metric;
    const auto& r = request.retrieved;
    std::vector<ChatMessage> out;
    auto push = [&out](const char* role, std::string content) {
        if (!text::trim(content).empty()) out.push_back(ChatMessage{role, std::move(content)});
    };

    push("system", m.system_prompt);

    std::size_t num_prev = request.previous.size();
    std::string fixed = kSystemTemplate;
    fixed = replace_all(fixed, "{num_prev}", std::to_string(num_prev));
    fixed = replace_all(fixed, "{last_prev}", std::to_string(num_prev == 0 ? 0 : num_prev - 1));
    fixed = replace_all(fixed, "{metric}", m.name);
    fixed = replace_all(fixed, "{num_syntax_docs}", std::to_string(r.syntax_docs.size()));
    fixed = replace_all(fixed, "{num_mathlib_docs}", std::to_string(r.library_docs.size()));
    fixed = replace_all(fixed, "{num_examples}", std::to_string(r.examples.size()));
    fixed = replace_all(fixed, "{cos}",
                        request.cos_enabled ? "You will be given the tactic states as comments for reference.\n" : "");
    push("system", fixed);
    push("system", format_instructions(request.output_format));

    for (const auto& d : r.syntax_docs) push("system", wrap("SYNTAX_DOC", d));
    for (const auto& d : r.library_docs) push("system", wrap("CONTENT_DOC", d));
    for (const auto& d : r.examples) push("system", wrap("EXAMPLE", d));

    out.push_back(ChatMessage{"user", wrap("CONTEXT", request.entry.context)});

    for (std::size_t i = 0; i < request.previous.size(); ++i) {
        push("user", prev_block(request.previous[i], i, m));
    }
    push("user", m.user_prompt);

    std::string proof;
    if (request.cos_enabled && !request.current_states.empty()) {
        auto states = request.current_states;
        states.resize(std::min(states.size(), count_tactics(request.current_proof)));
        proof = annotate_chain_of_states(request.current_proof, states);
    } else {
        proof = render_proof(request.current_proof);
    }
    out.push_back(ChatMessage{"user", wrap("CURRENT", std::string(text::trim(request.entry.statement)) + "\n" + proof)});
    return out;
}

// ---------------------------------------------------------------- output parsing

namespace {

// Contents of the first ``` fenced block, if any.
std::optional<std::string> first_fence(const std::string& raw) {
    auto open = raw.find("```");
    if (open == std::string::npos) return std::nullopt;
    auto body = raw.find('\n', open);
    if (body == std::string::npos) return std::nullopt;
    auto close = raw.find("```", body + 1);
    if (close == std::string::npos) close = raw.size();
    return raw.substr(body + 1, close - body - 1);
}

json decode_payload(const std::string& raw) {
    std::string s = first_fence(raw).value_or(raw);
    auto open = s.find_first_of("[{");
    if (open == std::string::npos) throw Error(ErrorKind::no_proof_found, "no JSON payload in output");
    char closer = s[open] == '[' ? ']' : '}';
    auto close = s.rfind(closer);
    if (close == std::string::npos || close < open) throw Error(ErrorKind::decode_error, "unterminated JSON payload");
    try {
        return json::parse(s.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::decode_error, std::string("malformed JSON payload: ") + e.what());
    }
}

json tactic_list(const json& payload) {
    if (payload.is_array()) return payload;
    if (payload.is_object() && payload.contains("tactics")) {
        if (!payload["tactics"].is_array()) throw Error(ErrorKind::decode_error, "'tactics' is not a list");
        return payload["tactics"];
    }
    if (payload.is_object() && payload.size() == 1) return json::array({payload});
    throw Error(ErrorKind::decode_error, "payload is not a tactic list");
}

void indent_into(const std::string& text, const std::string& first_prefix, const std::string& rest_prefix,
                 std::vector<std::string>& out) {
    bool first = true;
    for (auto line : text::split_lines(text)) {
        out.push_back((first ? first_prefix : rest_prefix) + std::string(line));
        first = false;
    }
}

void render_nodes(const json& nodes, std::vector<std::string>& out);

void render_node(const json& node, std::vector<std::string>& out) {
    if (node.is_string()) {
        auto s = node.get<std::string>();
        if (text::trim(s).empty()) throw Error(ErrorKind::decode_error, "empty tactic");
        indent_into(s, "", "", out);
        return;
    }
    if (!node.is_object() || node.size() != 1) throw Error(ErrorKind::decode_error, "tree node must be a string or a single-key object");
    auto it = node.begin();
    const std::string& tactic = it.key();
    if (text::trim(tactic).empty()) throw Error(ErrorKind::decode_error, "empty tactic");
    out.push_back(tactic);
    json branches = it.value();
    if (!branches.is_array()) throw Error(ErrorKind::decode_error, "branches of '" + tactic + "' must be a list");
    bool nested = text::ends_with_word(text::trim_right(tactic), "by");
    for (const auto& branch : branches) {
        json items = branch.is_array() ? branch : json::array({branch});
        std::vector<std::string> sub;
        render_nodes(items, sub);
        if (sub.empty()) throw Error(ErrorKind::decode_error, "empty branch under '" + tactic + "'");
        for (std::size_t i = 0; i < sub.size(); ++i) {
            std::string prefix = nested ? "  " : (i == 0 ? "· " : "  ");
            out.push_back(sub[i].empty() ? std::string{} : prefix + sub[i]);
        }
    }
}

void render_nodes(const json& nodes, std::vector<std::string>& out) {
    if (!nodes.is_array()) throw Error(ErrorKind::decode_error, "expected a list of tactics");
    for (const auto& n : nodes) render_node(n, out);
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string s;
    for (const auto& l : lines) {
        if (!s.empty()) s += '\n';
        s += l;
    }
    return s;
}

const std::set<std::string, std::less<>>& tactic_words() {
    static const std::set<std::string, std::less<>> words{
        "intro", "intros", "rintro", "exact", "exact?", "apply", "refine", "refine'", "use", "exists",
        "constructor", "cases", "rcases", "obtain", "induction", "have", "show", "calc", "let", "set",
        "simp", "simp_all", "simpa", "dsimp", "rw", "rwa", "erw", "nth_rewrite", "unfold", "change", "linarith",
        "nlinarith", "norm_num", "ring", "ring_nf", "omega", "aesop", "ext", "funext", "specialize",
        "left", "right", "exfalso", "contradiction", "assumption", "trivial", "rfl", "decide", "field_simp",
        "positivity", "by_contra", "by_cases", "push_neg", "congr", "gcongr", "subst", "tauto", "conv",
        "all_goals", "any_goals", "first", "repeat", "try", "next", "case", "sorry", "filter_upwards", "symm",
        "trans", "split", "injection", "interval_cases", "fin_cases", "choose", "lift", "norm_cast",
        "push_cast", "exact_mod_cast", "apply_fun", "contrapose", "contrapose!", "by_contra!", "push_neg",
        "generalize", "revert", "clear", "rename_i", "nofun", "absurd", "bound", "continuity", "measurability",
        "·", "."};
    return words;
}

bool starts_with_tactic(std::string_view line) {
    auto t = text::trim(line);
    if (t.empty()) return false;
    auto word = text::first_word(t);
    if (word.empty()) {
        // Bullets and punctuation-led tactics.
        return text::starts_with(t, "· ") || text::starts_with(t, ". ");
    }
    return tactic_words().count(word) > 0;
}

std::string longest_tactic_run(const std::string& raw) {
    auto lines = text::split_lines(raw);
    std::size_t best_begin = 0;
    std::size_t best_len = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!starts_with_tactic(lines[i])) continue;
        std::size_t base = text::leading_spaces(lines[i]);
        std::size_t j = i + 1;
        while (j < lines.size() && !text::trim(lines[j]).empty() &&
               (starts_with_tactic(lines[j]) || text::leading_spaces(lines[j]) > base)) {
            ++j;
        }
        if (j - i > best_len) {
            best_begin = i;
            best_len = j - i;
        }
        i = j - 1;
    }
    if (best_len == 0) throw Error(ErrorKind::no_proof_found, "no tactic block in output");
    std::vector<std::string> run;
    for (std::size_t k = best_begin; k < best_begin + best_len; ++k) run.emplace_back(lines[k]);
    return join_lines(run);
}

}  // namespace

std::string render_structured(const json& nodes) {
    std::vector<std::string> lines;
    render_nodes(nodes, lines);
    if (lines.empty()) throw Error(ErrorKind::no_proof_found, "empty tactic tree");
    return join_lines(lines);
}

std::string parse_model_output(const std::string& raw, OutputFormat format) {
    switch (format) {
        case OutputFormat::flat: {
            auto list = tactic_list(decode_payload(raw));
            std::vector<std::string> lines;
            for (const auto& t : list) {
                if (!t.is_string()) throw Error(ErrorKind::decode_error, "flat payload must hold only strings");
                if (!text::trim(t.get<std::string>()).empty()) lines.push_back(t.get<std::string>());
            }
            if (lines.empty()) throw Error(ErrorKind::no_proof_found, "empty tactic list");
            return join_lines(lines);
        }
        case OutputFormat::structured:
            return render_structured(tactic_list(decode_payload(raw)));
        case OutputFormat::str: {
            if (auto fence = first_fence(raw)) {
                std::string body = *fence;
                if (auto by = body.find(":= by"); by != std::string::npos) body = body.substr(by + 5);
                auto t = text::trim(body);
                if (text::starts_with(t, "by") && (t.size() == 2 || text::is_space(t[2]))) {
                    body = std::string(t.substr(2));
                }
                if (!text::trim(body).empty()) return std::string(text::trim_right(body));
            }
            return longest_tactic_run(raw);
        }
    }
    throw Error(ErrorKind::no_proof_found, "unknown output format");
}

// ---------------------------------------------------------------- backends

ScriptedGenerator::ScriptedGenerator(std::vector<Response> responses) : default_(std::move(responses)) {}

namespace {

std::vector<ScriptedGenerator::Response> parse_responses(const json& list) {
    if (!list.is_array()) throw Error(ErrorKind::bad_config, "script responses must be a list");
    std::vector<ScriptedGenerator::Response> out;
    for (const auto& r : list) {
        if (r.is_string()) {
            out.push_back({r.get<std::string>(), 0});
        } else if (r.is_object()) {
            out.push_back({r.at("text").get<std::string>(), r.value("rate_limited", std::size_t{0})});
        } else {
            throw Error(ErrorKind::bad_config, "script response must be a string or an object");
        }
    }
    return out;
}

}  // namespace

ScriptedGenerator ScriptedGenerator::from_json(const json& doc) {
    ScriptedGenerator g;
    try {
        if (doc.is_array()) {
            g.default_ = parse_responses(doc);
            return g;
        }
        if (doc.contains("default")) g.default_ = parse_responses(doc["default"]);
        if (doc.contains("theorems")) {
            for (const auto& [name, list] : doc["theorems"].items()) g.by_theorem_[name] = parse_responses(list);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::bad_config, std::string("bad generator script: ") + e.what());
    }
    return g;
}

ScriptedGenerator ScriptedGenerator::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::bad_config, "cannot read generator script " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::bad_config, path.string() + ": " + e.what());
    }
}

void ScriptedGenerator::set_for_theorem(const std::string& name, std::vector<Response> responses) {
    by_theorem_[name] = std::move(responses);
}

std::string ScriptedGenerator::complete(const GeneratorCall& call) {
    ++calls_;
    auto it = by_theorem_.find(call.theorem);
    const auto& list = it != by_theorem_.end() ? it->second : default_;
    if (list.empty()) throw Error(ErrorKind::backend_unavailable, "generator script has no responses");
    const auto& r = list[call.ordinal % list.size()];
    if (call.attempt < r.rate_limited) throw Error(ErrorKind::rate_limited, "scripted rate limit");
    ++completions_;
    return r.text;
}

ChatApiGenerator::ChatApiGenerator(std::string model, double temperature)
    : model_(std::move(model)), temperature_(temperature) {}

std::string ChatApiGenerator::complete(const GeneratorCall& call) {
    auto key = http::env_or("OPENAI_API_KEY", "");
    if (key.empty()) throw Error(ErrorKind::backend_unavailable, "OPENAI_API_KEY is not set");
    auto base = http::env_or("OPENAI_BASE_URL", "https://api.openai.com/v1");
    json messages = json::array();
    for (const auto& m : call.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body{{"model", model_}, {"messages", messages}, {"temperature", temperature_}};
    if (call.json_mode) body["response_format"] = {{"type", "json_object"}};

    auto res = http::post_json(base, "/chat/completions", body, key, std::chrono::seconds(300));
    if (res.status == 429 || res.status >= 500) {
        throw Error(ErrorKind::rate_limited, "HTTP " + std::to_string(res.status));
    }
    if (res.status != 200) {
        throw Error(ErrorKind::backend_unavailable, "chat request returned HTTP " + std::to_string(res.status) + ": " +
                                                        res.body.substr(0, 200));
    }
    try {
        return json::parse(res.body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::protocol_error, std::string("bad chat response: ") + e.what());
    }
}

std::string complete_with_backoff(GeneratorBackend& backend, GeneratorCall call, const BackoffPolicy& policy,
                                  std::uint64_t seed, const Sleeper& sleeper) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + call.ordinal);
    for (std::size_t attempt = 0;; ++attempt) {
        call.attempt = attempt;
        try {
            return backend.complete(call);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::rate_limited) throw;
            if (attempt >= policy.max_retries) {
                throw Error(ErrorKind::backend_exhausted,
                            "still rate limited after " + std::to_string(policy.max_retries) + " retries");
            }
        }
        double hi = static_cast<double>(policy.base.count()) * std::ldexp(1.0, static_cast<int>(attempt));
        std::uniform_real_distribution<double> delay(0.0, hi);
        auto wait = std::chrono::milliseconds(static_cast<std::int64_t>(delay(rng)));
        if (sleeper) {
            sleeper(wait);
        } else {
            std::this_thread::sleep_for(wait);
        }
    }
}

GenerationResult generate_candidate(const GenerationContext& ctx, const PromptRequest& request,
                                    std::uint64_t ordinal) {
    if (!ctx.backend || !ctx.verifier) throw Error(ErrorKind::bad_config, "generation context is incomplete");
    GeneratorCall call{assemble_prompt(request), request.entry.name, ordinal, 0,
                       request.output_format != OutputFormat::str};
    GenerationResult result;
    result.raw_output = complete_with_backoff(*ctx.backend, std::move(call), ctx.backoff, ctx.seed, ctx.sleeper);
    try {
        auto source = parse_model_output(result.raw_output, request.output_format);
        result.proof = parse_tactic_proof(strip_state_comments(source));
    } catch (const Error& e) {
        switch (e.kind()) {
            case ErrorKind::decode_error:
            case ErrorKind::no_proof_found:
            case ErrorKind::unbalanced_delimiters:
            case ErrorKind::empty_proof:
                result.proof.reset();
                return result;
            default:
                throw;
        }
    }
    result.verification = ctx.verifier->verify(request.entry, *result.proof);
    result.correct = is_correct(*result.verification);
    result.metric_score = score(request.metric, *result.proof, *result.verification);
    if (result.correct) {
        result.improvement = improvement(request.metric, ctx.baseline_score, *result.metric_score, true);
    }
    return result;
}

}  // namespace proofopt
