// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "proofopt/metrics.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "proofopt/error.hpp"
#include "text_util.hpp"

namespace proofopt {

double score_length(const TacticProof& proof) { return static_cast<double>(count_tactics(proof)); }

bool is_explicitly_typed_have(std::string_view step_text) {
    auto t = text::trim(step_text);
    if (!text::starts_with(t, "have") || t.size() < 5 || !text::is_space(t[4])) return false;
    t = text::trim(t.substr(4));

    std::size_t n = 0;
    while (n < t.size() && !text::is_space(t[n]) && t[n] != ':' && t[n] != '(' && t[n] != '{' &&
           t[n] != '[') {
        ++n;
    }
    if (n == 0) return false;
    auto ident = t.substr(0, n);
    if (text::starts_with(ident, "⟨")) return false;

    int depth = 0;
    bool typed = false;
    for (std::size_t i = n; i < t.size(); ++i) {
        char c = t[i];
        if (c == '(' || c == '[' || c == '{') {
            ++depth;
        } else if (c == ')' || c == ']' || c == '}') {
            --depth;
        } else if (text::starts_with(t.substr(i), "⟨")) {
            ++depth;
        } else if (text::starts_with(t.substr(i), "⟩")) {
            --depth;
        } else if (c == ':' && depth == 0) {
            bool assign = i + 1 < t.size() && t[i + 1] == '=';
            if (assign) return typed;
            typed = true;
        }
    }
    return false;
}

double score_readability(const TacticProof& proof) {
    std::size_t total = 0;
    std::size_t typed = 0;
    for_each_step(proof, [&](const TacticStep& s, std::size_t) {
        ++total;
        if (is_explicitly_typed_have(s.text)) ++typed;
    });
    if (total == 0) return 0.0;
    return 100.0 * static_cast<double>(typed) / static_cast<double>(total);
}

double score_completion(const VerificationResult& verification) {
    return static_cast<double>(verification.error_count());
}

double score(const MetricDef& metric, const TacticProof& proof, const VerificationResult& verification) {
    switch (metric.scorer) {
        case Scorer::length: return score_length(proof);
        case Scorer::readability: return score_readability(proof);
        case Scorer::completion: return score_completion(verification);
    }
    return 0.0;
}

double improvement(const MetricDef& metric, double y0_score, double y_score, bool correct) {
    if (!correct) return 0.0;
    double delta = metric.direction == Direction::minimize ? y0_score - y_score : y_score - y0_score;
    if (metric.improvement_kind == ImprovementKind::difference) return delta;
    if (y0_score == 0.0) {
        throw Error(ErrorKind::division_by_zero, "metric '" + metric.name + "' has a zero baseline score");
    }
    return delta / y0_score * 100.0;
}

ScoreReport make_score_report(const MetricDef& metric, double y0_score, double y_score, bool correct) {
    ScoreReport r;
    r.raw_score = y_score;
    r.correct = correct;
    r.improvement = improvement(metric, y0_score, y_score, correct);
    r.nonzero_improvement = correct && r.improvement != 0.0;
    return r;
}

MetricDef length_metric() {
    MetricDef m;
    m.name = "length";
    m.direction = Direction::minimize;
    m.improvement_kind = ImprovementKind::percent_change;
    m.scorer = Scorer::length;
    m.system_prompt =
        "You are an AI assistant who shortens Lean 4 proofs while ensuring their correctness. "
        "You will aim to reduce the number of lines of the tactic proof while ensuring that it properly "
        "compiles in Lean 4.";
    m.user_prompt =
        "Shorten the current theorem (wrapped in <CURRENT>...</CURRENT>) to be as short in length"
        "—measured in the number of lines of the proof—as possible, while also ensuring that the "
        "output is still syntactically correct.";
    m.example_store_id = "length";
    return m;
}

MetricDef readability_metric() {
    MetricDef m;
    m.name = "readability";
    m.direction = Direction::maximize;
    m.improvement_kind = ImprovementKind::difference;
    m.scorer = Scorer::readability;
    m.system_prompt =
        "You are an AI assistant who rewrites Lean 4 proofs to be more readable while ensuring their "
        "correctness. We measure readablity by considering the ratio of the number of explicitly typed "
        "have tactics against the total number of tactics in the proof, as this is proportional to whether "
        "a proof is declarative in style, and thus, readable.";
    m.user_prompt =
        "Rewrite the current theorem (wrapped in <CURRENT>...</CURRENT>) so it is more readable and "
        "declarative and modular.";
    m.example_store_id = "readability";
    return m;
}

MetricDef completion_metric() {
    MetricDef m;
    m.name = "completion";
    m.direction = Direction::minimize;
    m.improvement_kind = ImprovementKind::difference;
    m.scorer = Scorer::completion;
    m.system_prompt =
        "You are an AI assistant who automatically solves Lean 4 proofs (as in, generates the tactic proof) "
        "and ensures its correctness. You will receive a Lean 4 proof you must modify to eliminate any "
        "errors so that it compiles correctly and eliminate any \"sorry\"s with full proofs.";
    m.user_prompt =
        "Rewrite the current theorem (wrapped in <CURRENT>...</CURRENT>) so it is a formal, complete, and "
        "correct Lean 4 proof by filling in its tactic proof.";
    m.example_store_id = "completion";
    return m;
}

std::string_view to_string(Direction d) { return d == Direction::minimize ? "minimize" : "maximize"; }

std::string_view to_string(Scorer s) {
    switch (s) {
        case Scorer::length: return "length";
        case Scorer::readability: return "readability";
        case Scorer::completion: return "completion";
    }
    return "length";
}

namespace {

void validate(const MetricDef& m) {
    if (m.name.empty()) throw Error(ErrorKind::bad_config, "metric without a name");
    if (text::trim(m.system_prompt).empty() || text::trim(m.user_prompt).empty()) {
        throw Error(ErrorKind::bad_config, "metric '" + m.name + "' needs non-empty prompts");
    }
}

Scorer parse_scorer(const std::string& s) {
    if (s == "length") return Scorer::length;
    if (s == "readability") return Scorer::readability;
    if (s == "completion") return Scorer::completion;
    throw Error(ErrorKind::bad_config, "unknown scorer '" + s + "'");
}

MetricDef parse_metric(const nlohmann::json& j) {
    MetricDef m;
    m.name = j.at("name").get<std::string>();
    auto dir = j.value("direction", std::string("minimize"));
    if (dir != "minimize" && dir != "maximize") throw Error(ErrorKind::bad_config, "bad direction '" + dir + "'");
    m.direction = dir == "minimize" ? Direction::minimize : Direction::maximize;
    m.scorer = parse_scorer(j.value("scorer", m.name));
    auto kind = j.value("improvement", std::string("difference"));
    if (kind != "difference" && kind != "percent_change") {
        throw Error(ErrorKind::bad_config, "bad improvement kind '" + kind + "'");
    }
    m.improvement_kind = kind == "difference" ? ImprovementKind::difference : ImprovementKind::percent_change;
    m.system_prompt = j.value("system_prompt", std::string{});
    m.user_prompt = j.value("user_prompt", std::string{});
    m.example_store_id = j.value("example_store", m.name);
    return m;
}

}  // namespace

MetricRegistry MetricRegistry::builtin() {
    MetricRegistry r;
    r.add(length_metric());
    r.add(readability_metric());
    r.add(completion_metric());
    return r;
}

MetricRegistry MetricRegistry::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io_error, "cannot read metric registry " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::bad_config, path.string() + ": " + e.what());
    }
    auto r = builtin();
    std::set<std::string> seen;
    try {
        for (const auto& item : doc.at("metrics")) {
            auto m = parse_metric(item);
            validate(m);
            if (!seen.insert(m.name).second) throw Error(ErrorKind::bad_config, "duplicate metric '" + m.name + "'");
            r.metrics_[m.name] = std::move(m);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::bad_config, path.string() + ": " + e.what());
    }
    return r;
}

void MetricRegistry::add(MetricDef metric) {
    validate(metric);
    if (contains(metric.name)) throw Error(ErrorKind::bad_config, "duplicate metric '" + metric.name + "'");
    auto name = metric.name;
    metrics_.emplace(std::move(name), std::move(metric));
}

const MetricDef& MetricRegistry::get(std::string_view name) const {
    auto it = metrics_.find(name);
    if (it == metrics_.end()) throw Error(ErrorKind::not_found, "unknown metric '" + std::string(name) + "'");
    return it->second;
}

bool MetricRegistry::contains(std::string_view name) const { return metrics_.find(name) != metrics_.end(); }

std::vector<std::string> MetricRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : metrics_) out.push_back(k);
    return out;
}

}  // namespace proofopt
