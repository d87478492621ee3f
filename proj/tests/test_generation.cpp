// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>

#include "doctest.h"
#include "prompt_fixture.hpp"
#include "proofopt/error.hpp"
#include "proofopt/generation.hpp"
#include "test_support.hpp"

using namespace proofopt;
using json = nlohmann::json;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::not_found;
}

PromptRequest minimal_request() {
    PromptRequest req;
    req.metric = length_metric();
    req.entry.name = "t";
    req.entry.context = "import Mathlib";
    req.entry.statement = "example : True := by";
    req.current_proof = parse_tactic_proof("trivial");
    req.cos_enabled = false;
    return req;
}

TheoremEntry fig1_entry() {
    auto src = testing::fixture("figures/fig1_original.lean");
    auto decl = src.find("lemma lemma0");
    auto by = src.find(":= by");
    TheoremEntry e;
    e.name = "lemma0";
    e.context = src.substr(0, decl);
    e.statement = src.substr(decl, by + 5 - decl);
    e.initial_proof = parse_tactic_proof(src.substr(by + 5));
    return e;
}

std::string fence(const std::string& body) { return "Here is the shorter proof:\n```lean\n" + body + "\n```\nDone."; }

}  // namespace

TEST_CASE("minimal prompt has the six fixed messages in order") {
    auto msgs = assemble_prompt(minimal_request());
    REQUIRE(msgs.size() == 6);
    std::vector<std::string> roles;
    for (const auto& m : msgs) roles.push_back(m.role);
    CHECK(roles == std::vector<std::string>{"system", "system", "system", "user", "user", "user"});
    CHECK(msgs[0].content == length_metric().system_prompt);
    CHECK(msgs[1].content.find("wrapped by <CONTEXT>...</CONTEXT>") != std::string::npos);
    CHECK(msgs[1].content.find("previous 0 input/output pairs") != std::string::npos);
    CHECK(msgs[1].content.find("tactic states as comments") == std::string::npos);
    CHECK(msgs[2].content == format_instructions(OutputFormat::flat));
    CHECK(msgs[3].content == "<CONTEXT>\nimport Mathlib\n</CONTEXT>");
    CHECK(msgs[4].content == length_metric().user_prompt);
    CHECK(msgs[5].content == "<CURRENT>\nexample : True := by\n  trivial\n</CURRENT>");
    CHECK(assemble_prompt(minimal_request()) == msgs);
}

TEST_CASE("empty metric prompts are left out") {
    auto req = minimal_request();
    req.metric.system_prompt.clear();
    req.metric.user_prompt.clear();
    CHECK(assemble_prompt(req).size() == 4);
}

TEST_CASE("chain of states puts state comments into CURRENT") {
    auto req = testing::full_prompt_request();
    auto msgs = assemble_prompt(req);
    const auto& current = msgs.back().content;
    CHECK(current.rfind("<CURRENT>\nexample : s ∩ t ∪ s ∩ u ⊆ s ∩ (t ∪ u) := by\n", 0) == 0);
    CHECK(current.find("Goals Solved!") != std::string::npos);
    CHECK(current.find("⊢ x ∈ s ∩ (t ∪ u)") != std::string::npos);
    CHECK(msgs[1].content.find("You will be given the tactic states as comments for reference.") != std::string::npos);

    req.cos_enabled = false;
    auto plain = assemble_prompt(req).back().content;
    CHECK(plain.find("/-") == std::string::npos);
}

TEST_CASE("one previous iteration gives exactly one PREV block with its errors") {
    auto req = minimal_request();
    IterationRecord rec;
    rec.input_proof = "  trivial";
    rec.output.proof = parse_tactic_proof("simp");
    VerificationResult v;
    v.errors.push_back(Diagnostic{"simp made no progress", 1, 0});
    rec.output.verification = v;
    rec.output.metric_score = 1;
    req.previous.push_back(rec);
    auto msgs = assemble_prompt(req);
    std::size_t prev = 0;
    for (const auto& m : msgs) {
        if (m.content.rfind("<PREV I=", 0) == 0) {
            ++prev;
            CHECK(m.role == "user");
            CHECK(m.content.rfind("<PREV I=0>\n", 0) == 0);
            CHECK(m.content.find("- simp made no progress") != std::string::npos);
            CHECK(m.content.find("Correct: false") != std::string::npos);
            CHECK(m.content.find("Metric (length) score: 1") != std::string::npos);
            CHECK(m.content.substr(m.content.size() - 11) == "</PREV I=0>");
        }
    }
    CHECK(prev == 1);
}

TEST_CASE("fully populated prompt matches the golden file") {
    auto msgs = assemble_prompt(testing::full_prompt_request());
    json got = json::array();
    for (const auto& m : msgs) got.push_back({{"role", m.role}, {"content", m.content}});
    auto golden_path = testing::fixture_dir() / "golden/prompt_full.json";
    if (std::getenv("PROOFOPT_UPDATE_GOLDEN")) std::ofstream(golden_path) << got.dump(2) << "\n";
    auto golden = json::parse(testing::read_file(golden_path));
    CHECK(got == golden);
}

TEST_CASE("flat payloads") {
    CHECK(parse_model_output(R"(["intro x","exact h"])", OutputFormat::flat) == "intro x\nexact h");
    CHECK(parse_model_output("Sure!\n```json\n{\"tactics\": [\"intro x\", \"exact h\"]}\n```", OutputFormat::flat) ==
          "intro x\nexact h");
    CHECK(kind_of([] { parse_model_output(R"(["intro x", 3])", OutputFormat::flat); }) == ErrorKind::decode_error);
    CHECK(kind_of([] { parse_model_output(R"(["intro x", )", OutputFormat::flat); }) == ErrorKind::decode_error);
    CHECK(kind_of([] { parse_model_output("I have no idea.", OutputFormat::flat); }) == ErrorKind::no_proof_found);
    CHECK(kind_of([] { parse_model_output("[]", OutputFormat::flat); }) == ErrorKind::no_proof_found);
}

TEST_CASE("structured payloads render as focus blocks") {
    auto src = parse_model_output(R"({"constructor": [["exact xs"], ["exact xt"]]})", OutputFormat::structured);
    CHECK(src == "constructor\n· exact xs\n· exact xt");
    auto p = parse_tactic_proof(src);
    CHECK(count_tactics(p) == 3);
    REQUIRE(p.steps.size() == 1);
    CHECK(p.steps[0].children.size() == 2);

    auto nested = parse_model_output(
        R"({"tactics": ["intro x", {"have h : x = x := by": [["rfl"]]}, {"constructor": [["left", "exact h"], ["simp"]]}]})",
        OutputFormat::structured);
    CHECK(nested == "intro x\nhave h : x = x := by\n  rfl\nconstructor\n· left\n  exact h\n· simp");
    auto q = parse_tactic_proof(nested);
    CHECK(count_tactics(q) == 7);
    CHECK(q.steps[1].children.size() == 1);

    CHECK(kind_of([] { parse_model_output(R"([{"a": 1}])", OutputFormat::structured); }) == ErrorKind::decode_error);
    CHECK(kind_of([] { parse_model_output(R"([{"a": [[]]}])", OutputFormat::structured); }) == ErrorKind::decode_error);
}

TEST_CASE("str payloads") {
    CHECK(parse_model_output(fence("  intro x\n  exact h"), OutputFormat::str) == "  intro x\n  exact h");
    CHECK(parse_model_output("```lean\ntheorem foo : P := by\n  simp\n```", OutputFormat::str) == "\n  simp");
    CHECK(parse_model_output("Try this.\n\n  intro x\n  exact\n    h\nThat should work.", OutputFormat::str) ==
          "  intro x\n  exact\n    h");
    CHECK(kind_of([] { parse_model_output("No proof here, sorry about that.", OutputFormat::str); }) ==
          ErrorKind::no_proof_found);
}

TEST_CASE("scripted generator cycles and keys on theorem names") {
    auto g = ScriptedGenerator::from_json(json::parse(R"({"default": ["a", {"text": "b", "rate_limited": 1}],
                                                          "theorems": {"special": ["s"]}})"));
    GeneratorCall c;
    c.ordinal = 0;
    CHECK(g.complete(c) == "a");
    c.ordinal = 2;
    CHECK(g.complete(c) == "a");
    c.ordinal = 1;
    CHECK(kind_of([&] { g.complete(c); }) == ErrorKind::rate_limited);
    c.attempt = 1;
    CHECK(g.complete(c) == "b");
    c.theorem = "special";
    CHECK(g.complete(c) == "s");
    CHECK(g.calls() == 5);
    CHECK(g.completions() == 4);
    CHECK(kind_of([] { ScriptedGenerator().complete(GeneratorCall{}); }) == ErrorKind::backend_unavailable);
}

TEST_CASE("rate limited twice then success makes exactly three calls") {
    ScriptedGenerator g({{"ok", 2}});
    std::vector<std::chrono::milliseconds> waits;
    BackoffPolicy policy;
    auto out = complete_with_backoff(g, GeneratorCall{}, policy, 42, [&](auto d) { waits.push_back(d); });
    CHECK(out == "ok");
    CHECK(g.calls() == 3);
    REQUIRE(waits.size() == 2);
    CHECK(waits[0].count() <= 1000);
    CHECK(waits[1].count() <= 2000);
}

TEST_CASE("backoff delays stay within the exponential envelope and give up after max retries") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        ScriptedGenerator g({{"never", 100}});
        std::vector<std::chrono::milliseconds> waits;
        BackoffPolicy policy{std::chrono::milliseconds(10), 6};
        CHECK(kind_of([&] { complete_with_backoff(g, GeneratorCall{}, policy, seed, [&](auto d) { waits.push_back(d); }); }) ==
              ErrorKind::backend_exhausted);
        CHECK(g.calls() == 7);
        REQUIRE(waits.size() == 6);
        for (std::size_t r = 0; r < waits.size(); ++r) {
            CHECK(waits[r].count() >= 0);
            CHECK(waits[r].count() <= 10 * (1 << r));
        }
    }
}

TEST_CASE("non-throttle errors are not retried") {
    ScriptedGenerator empty;
    CHECK(kind_of([&] { complete_with_backoff(empty, GeneratorCall{}, BackoffPolicy{}, 0, [](auto) {}); }) ==
          ErrorKind::backend_unavailable);
    CHECK(empty.calls() == 1);
}

TEST_CASE("candidate for the Fig. 1 optimized proof is correct with score 6") {
    auto entry = fig1_entry();
    auto optimized = testing::fixture("figures/fig1_optimized_proof.lean");
    MockVerifier mock;
    mock.add_correct(entry.statement, optimized);
    std::vector<std::unique_ptr<VerifierBackend>> backends;
    backends.push_back(std::make_unique<MockVerifier>(std::move(mock)));
    Verifier verifier(std::move(backends), {});
    ScriptedGenerator g({{fence(optimized), 0}, {"Sorry, I cannot do that.", 0}});

    GenerationContext ctx;
    ctx.backend = &g;
    ctx.verifier = &verifier;
    ctx.baseline_score = 12;
    ctx.sleeper = [](auto) {};

    PromptRequest req;
    req.metric = length_metric();
    req.entry = entry;
    req.current_proof = entry.initial_proof;
    req.output_format = OutputFormat::str;

    auto good = generate_candidate(ctx, req, 0);
    CHECK(good.correct);
    REQUIRE(good.metric_score.has_value());
    CHECK(*good.metric_score == 6);
    CHECK(good.improvement == 50.0);
    CHECK(good.error_count() == 0);

    auto bad = generate_candidate(ctx, req, 1);
    CHECK_FALSE(bad.correct);
    CHECK_FALSE(bad.proof.has_value());
    CHECK(bad.error_count() == 1);
    CHECK(bad.error_messages() == std::vector<std::string>{"unparseable output"});
    CHECK(bad.improvement == 0);
}
