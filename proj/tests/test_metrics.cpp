// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "proofopt/error.hpp"
#include "proofopt/metrics.hpp"
#include "test_support.hpp"

using namespace proofopt;

namespace {

TacticProof fig1_original() {
    return parse_tactic_proof(testing::body_after_by(testing::fixture("figures/fig1_original.lean")));
}

VerificationResult solved_result() {
    VerificationResult r;
    r.solved = true;
    r.states = {ProofState{}};
    return r;
}

}  // namespace

TEST_CASE("length scores") {
    CHECK(score_length(fig1_original()) == 12.0);
    CHECK(score_length(parse_tactic_proof(testing::fixture("figures/fig1_optimized_proof.lean"))) == 6.0);
    CHECK(score_length(parse_tactic_proof("sorry")) == 1.0);
}

TEST_CASE("explicitly typed have detection") {
    CHECK(is_explicitly_typed_have("have h : a = b := by"));
    CHECK(is_explicitly_typed_have("have h: a = b := rfl"));
    CHECK(is_explicitly_typed_have("have h (x : ℕ) : x = x := fun _ => rfl"));
    CHECK(is_explicitly_typed_have("have h2' : Classical.choose (h1 x).exists = y :=\n  h1u _ _"));
    CHECK_FALSE(is_explicitly_typed_have("have h4 := Classical.choose_spec (h1 y).exists"));
    CHECK_FALSE(is_explicitly_typed_have("have : a = b := rfl"));
    CHECK_FALSE(is_explicitly_typed_have("have ⟨x, hx⟩ : ∃ x, p x := h"));
    CHECK_FALSE(is_explicitly_typed_have("have h : a = b"));
    CHECK_FALSE(is_explicitly_typed_have("haveI : Fact p := ⟨hp⟩"));
    CHECK_FALSE(is_explicitly_typed_have("exact h"));
}

TEST_CASE("readability of Fig. 4 against the manual-count oracle") {
    auto original = parse_tactic_proof(testing::body_after_by(testing::fixture("figures/fig4_original.lean")));
    CHECK(score_readability(original) == 0.0);

    auto oracle = nlohmann::json::parse(testing::fixture("figures/fig4_readability_oracle.json"));
    double typed = 0;
    double total = 0;
    for (const auto& s : oracle["steps"]) {
        total += 1;
        if (s["typed"].get<bool>()) typed += 1;
    }
    REQUIRE(total == 11);
    REQUIRE(typed == 2);
    double expected = 100.0 * typed / total;

    auto optimized = parse_tactic_proof(testing::fixture("figures/fig4_optimized_proof.lean"));
    CHECK(count_tactics(optimized) == 11);
    CHECK(score_readability(optimized) == doctest::Approx(expected).epsilon(0.0001));
    CHECK(std::abs(score_readability(optimized) - 18.18) < 0.01);
}

TEST_CASE("readability of a single typed have is 100") {
    CHECK(score_readability(parse_tactic_proof("have h : 1 = 1 := rfl")) == 100.0);
}

TEST_CASE("completion counts errors") {
    CHECK(score_completion(solved_result()) == 0.0);
    VerificationResult sorry_result;
    sorry_result.errors = {Diagnostic{"declaration uses 'sorry'", 1, 2}};
    CHECK(score_completion(sorry_result) >= 1.0);
    VerificationResult two;
    two.errors = {Diagnostic{"unsolved goals", 1, 0}, Diagnostic{"unsolved goals", 3, 0}};
    CHECK(score_completion(two) == 2.0);
    VerificationResult unsolved;
    CHECK(score_completion(unsolved) == 1.0);
}

TEST_CASE("improvement formulas") {
    auto len = length_metric();
    auto read = readability_metric();
    auto comp = completion_metric();
    CHECK(improvement(len, 12, 6, true) == 50.0);
    CHECK(improvement(len, 12, 6, false) == 0.0);
    CHECK(improvement(read, 0, 100.0 * 2 / 11, true) == doctest::Approx(18.1818).epsilon(1e-4));
    CHECK(improvement(read, 0, 50, false) == 0.0);
    CHECK(improvement(comp, 1, 0, true) == 1.0);
    CHECK(improvement(len, 10, 12, true) == -20.0);
    CHECK_THROWS_AS(improvement(len, 0, 1, true), Error);
    try {
        improvement(len, 0, 1, true);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::division_by_zero);
    }
}

TEST_CASE("identity rewrite gains nothing and incorrect outputs gain nothing") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> score(0.5, 200.0);
    for (const auto& m : {length_metric(), readability_metric(), completion_metric()}) {
        for (int i = 0; i < 200; ++i) {
            double s = score(rng);
            double t = score(rng);
            CHECK(improvement(m, s, s, true) == 0.0);
            CHECK(improvement(m, s, t, false) == 0.0);
            auto report = make_score_report(m, s, t, false);
            CHECK(report.improvement == 0.0);
            CHECK_FALSE(report.nonzero_improvement);
        }
    }
}

TEST_CASE("readability bounds and monotonicity under deleting non-have steps") {
    std::mt19937 rng(5);
    const char* pool[] = {"have h : a = a := rfl", "simp", "exact h", "have h2 := foo", "rw [x]", "ring"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> lines;
        std::size_t n = 1 + rng() % 9;
        for (std::size_t i = 0; i < n; ++i) lines.push_back(pool[rng() % 6]);
        auto build = [](const std::vector<std::string>& ls) {
            std::string s;
            for (const auto& l : ls) s += l + "\n";
            return parse_tactic_proof(s);
        };
        auto p = build(lines);
        double r = score_readability(p);
        CHECK(r >= 0.0);
        CHECK(r <= 100.0);
        CHECK(score_length(p) >= 1.0);
        for (std::size_t i = 0; i < lines.size() && lines.size() > 1; ++i) {
            if (is_explicitly_typed_have(lines[i])) continue;
            auto fewer = lines;
            fewer.erase(fewer.begin() + static_cast<long>(i));
            auto q = build(fewer);
            CHECK(score_readability(q) >= r);
            CHECK(score_length(q) == score_length(p) - 1);
        }
    }
}

TEST_CASE("metric registry from a configuration file") {
    auto dir = testing::temp_dir("metrics");
    auto path = dir / "metrics.json";
    {
        std::ofstream out(path);
        out << R"({"metrics": [{"name": "brevity", "direction": "minimize", "scorer": "length",
                   "improvement": "difference", "system_prompt": "Be brief.", "user_prompt": "Shorten it.",
                   "example_store": "length"}]})";
    }
    auto reg = MetricRegistry::from_file(path);
    CHECK(reg.contains("length"));
    CHECK(reg.contains("brevity"));
    const auto& b = reg.get("brevity");
    CHECK(b.scorer == Scorer::length);
    CHECK(improvement(b, 12, 6, true) == 6.0);
    CHECK_THROWS_AS(reg.get("nope"), Error);

    {
        std::ofstream out(path);
        out << R"({"metrics": [{"name": "x", "system_prompt": "", "user_prompt": "u"}]})";
    }
    CHECK_THROWS_AS(MetricRegistry::from_file(path), Error);
    {
        std::ofstream out(path);
        out << R"({"metrics": [{"name": "x", "scorer": "length", "system_prompt": "s", "user_prompt": "u"},
                               {"name": "x", "scorer": "length", "system_prompt": "s", "user_prompt": "u"}]})";
    }
    CHECK_THROWS_AS(MetricRegistry::from_file(path), Error);

    auto builtin = MetricRegistry::builtin();
    CHECK_THROWS_AS(builtin.add(length_metric()), Error);
}
