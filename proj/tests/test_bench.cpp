// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <random>

#include "bench_support.hpp"
#include "doctest.h"
#include "proofopt/error.hpp"

using namespace proofopt;
using testing::fenced;
using testing::proof_with;

namespace {

using Resp = ScriptedGenerator::Response;

// Direct re-computation of the four measures.
Aggregates recompute(const std::vector<BenchRow>& rows) {
    Aggregates a;
    a.count = rows.size();
    std::vector<double> imps, nonzero;
    std::size_t ok = 0;
    for (const auto& r : rows) {
        imps.push_back(r.correct ? r.improvement : 0);
        if (r.correct) ++ok;
        if (r.correct && r.improvement != 0) nonzero.push_back(r.improvement);
    }
    double s = 0;
    for (double v : imps) s += v;
    a.improvement_mean = s / rows.size();
    double z = 0;
    for (double v : nonzero) z += v;
    a.nonempty_improvement_mean = nonzero.empty() ? 0 : z / nonzero.size();
    a.accuracy_pct = 100.0 * ok / rows.size();
    a.improved_accuracy_pct = 100.0 * nonzero.size() / rows.size();
    return a;
}

bool close(const Aggregates& a, const Aggregates& b) {
    auto eq = [](double x, double y) { return std::abs(x - y) < 1e-9; };
    return a.count == b.count && eq(a.improvement_mean, b.improvement_mean) &&
           eq(a.nonempty_improvement_mean, b.nonempty_improvement_mean) && eq(a.accuracy_pct, b.accuracy_pct) &&
           eq(a.improved_accuracy_pct, b.improved_accuracy_pct);
}

const char* kThreeDecls = R"(import Mathlib.Tactic

open Nat

/-- doc -/
@[simp] theorem add_zero' (n : Nat) : n + 0 = n := by
  simp

def double (n : Nat) : Nat := 2 * n

lemma two_steps (a b : Nat)
    (h : a = b) : b = a := by
  subst h
  rfl
example : True := by
  trivial
)";

}  // namespace

TEST_CASE("parse_lean_source splits tactic declarations") {
    auto entries = parse_lean_source(kThreeDecls, "x.lean", "ds");
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].theorem.name == "add_zero'");
    CHECK(entries[1].theorem.name == "two_steps");
    CHECK(entries[2].theorem.name == "example_15");
    CHECK(entries[0].theorem.statement == "@[simp] theorem add_zero' (n : Nat) : n + 0 = n := by");
    CHECK(entries[1].theorem.statement == "lemma two_steps (a b : Nat)\n    (h : a = b) : b = a := by");
    CHECK(count_tactics(entries[1].theorem.initial_proof) == 2);
    CHECK(count_tactics(entries[2].theorem.initial_proof) == 1);
    CHECK(entries[0].theorem.context.find("/-- doc -/") != std::string::npos);
    CHECK(entries[1].theorem.context.find("def double") != std::string::npos);
    CHECK(entries[1].theorem.source_path == "x.lean");
    CHECK(entries[1].dataset_id == "ds");
    CHECK_FALSE(entries[1].marker_offset);
}

TEST_CASE("a PROOF START marker moves the lines above it into the statement") {
    auto src = testing::fixture("figures/fig1_original.lean");
    auto entries = parse_lean_source(src, "fig1.lean");
    REQUIRE(entries.size() == 1);
    const auto& e = entries[0];
    CHECK(e.theorem.name == "lemma0");
    REQUIRE(e.marker_offset);
    CHECK(src.compare(*e.marker_offset, 16, "  -- PROOF START") == 0);
    CHECK(e.theorem.statement.size() > 14);
    CHECK(e.theorem.statement.substr(e.theorem.statement.size() - 14) == "-- PROOF START");
    CHECK(count_tactics(e.theorem.initial_proof) == 12);
    CHECK(render_proof(e.theorem.initial_proof).find("PROOF START") == std::string::npos);
}

TEST_CASE("load_dataset walks directories in order and honours a manifest") {
    auto ten = load_dataset(testing::dataset_dir("ten"), nullptr);
    REQUIRE(ten.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(ten[i].theorem.name == "ten_" + std::to_string(i));
    CHECK(ten[0].dataset_id == "ten");
    CHECK(ten[7].theorem.source_path == "part_b.lean");

    auto dir = testing::temp_dir("bench_manifest");
    std::filesystem::copy(testing::dataset_dir("three/three.lean"), dir / "three.lean");
    std::ofstream(dir / "manifest.json") << R"({"dataset_id": "picked", "files": {"three.lean": ["three_2"]}})";
    auto picked = load_dataset(dir, nullptr);
    REQUIRE(picked.size() == 1);
    CHECK(picked[0].theorem.name == "three_2");
    CHECK(picked[0].dataset_id == "picked");

    std::ofstream(dir / "manifest.json") << R"({"files": {"three.lean": ["nope"]}})";
    CHECK_THROWS_AS(load_dataset(dir, nullptr), Error);

    auto single = load_dataset(testing::dataset_dir("three/three.lean"), nullptr);
    CHECK(single.size() == 3);
}

TEST_CASE("load_dataset errors") {
    try {
        load_dataset(testing::dataset_dir("empty"), nullptr);
        FAIL("expected NoTheoremsFound");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::no_theorems_found);
    }
    CHECK_THROWS_AS(load_dataset(testing::dataset_dir("missing"), nullptr), Error);

    testing::DatasetWorld world(testing::dataset_dir("three"));
    world.mock = MockVerifier();
    world.mock.add_correct("", render_proof(world.dataset[1].theorem.initial_proof));
    auto verifier = world.verifier();
    try {
        load_dataset(testing::dataset_dir("three"), verifier.get());
        FAIL("expected IngestVerificationFailed");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ingest_verification_failed);
        std::string msg = e.what();
        CHECK(msg.find("three_0") != std::string::npos);
        CHECK(msg.find("three_2") != std::string::npos);
        CHECK(msg.find("three_1") == std::string::npos);
    }
    CHECK(load_dataset(testing::dataset_dir("three"), verifier.get(), LoadOptions{false}).size() == 3);
}

TEST_CASE("performance measures: worked example") {
    auto a = compute_performance_metrics(testing::worked_example_rows());
    CHECK(a.improvement_mean == doctest::Approx(20.0));
    CHECK(a.nonempty_improvement_mean == doctest::Approx(40.0));
    CHECK(a.accuracy_pct == doctest::Approx(75.0));
    CHECK(a.improved_accuracy_pct == doctest::Approx(50.0));
    CHECK(a.count == 4);
    CHECK_THROWS_AS(compute_performance_metrics({}), Error);
}

TEST_CASE("performance measures agree with a direct recomputation") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<BenchRow> rows(1 + rng() % 20);
        for (auto& r : rows) {
            r.correct = rng() % 3 != 0;
            int k = static_cast<int>(rng() % 7);
            r.improvement = r.correct && k > 2 ? (k - 3) * 12.5 : 0.0;
            r.improved = r.correct && r.improvement != 0;
        }
        CHECK(close(compute_performance_metrics(rows), recompute(rows)));
    }
}

TEST_CASE("an always-failing generator keeps every input proof") {
    testing::DatasetWorld world(testing::dataset_dir("ten"));
    auto verifier = world.verifier();
    ScriptedGenerator gen({Resp{"I could not find a proof."}});
    auto env = testing::mock_env(gen, *verifier, SamplerConfig::refinement(2, 1, true, SamplerConfig::best_of_n(2)));
    auto report = run_benchmark(world.dataset, env, 4);
    CHECK(report.aggregates.accuracy_pct == 100.0);
    CHECK(report.aggregates.improved_accuracy_pct == 0.0);
    CHECK(report.aggregates.improvement_mean == 0.0);
    CHECK(gen.calls() == 40);
    for (const auto& r : report.rows) {
        CHECK(r.fell_back);
        CHECK(r.generations == 4);
    }
}

TEST_CASE("one improved entry out of three") {
    testing::DatasetWorld world(testing::dataset_dir("three"));
    auto half = proof_with(2, "h");
    world.mock.add_correct("", half);
    auto verifier = world.verifier();
    ScriptedGenerator gen({Resp{"no"}});
    gen.set_for_theorem("three_0", {Resp{fenced(half)}});
    auto report = run_benchmark(world.dataset, testing::mock_env(gen, *verifier, SamplerConfig::single()), 2);
    CHECK(report.rows[0].improvement == 50.0);
    CHECK(report.rows[0].final_score == 2);
    CHECK(report.rows[0].baseline_score == 4);
    CHECK(report.aggregates.improvement_mean == doctest::Approx(50.0 / 3));
    CHECK(report.aggregates.nonempty_improvement_mean == 50.0);
    CHECK(report.aggregates.accuracy_pct == 100.0);
    CHECK(report.aggregates.improved_accuracy_pct == doctest::Approx(100.0 / 3));
    CHECK(format_aggregates_table({report}).find("16.67") != std::string::npos);
}

TEST_CASE("end to end: the second of three candidates is the optimized Fig. 1 proof") {
    testing::DatasetWorld world(testing::dataset_dir("fig1"));
    auto optimized = testing::fixture("figures/fig1_optimized_proof.lean");
    world.mock.add_correct("", optimized);
    auto verifier = world.verifier();
    ScriptedGenerator gen({Resp{"nothing useful"}, Resp{fenced(optimized)}, Resp{fenced(proof_with(3, "bad"))}});
    auto report = run_benchmark(world.dataset, testing::mock_env(gen, *verifier, SamplerConfig::best_of_n(3)), 1);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].improvement == 50.0);
    CHECK(normalize_whitespace(report.rows[0].final_proof) == normalize_whitespace(optimized));
    CHECK(report.aggregates.accuracy_pct == 100.0);
    CHECK(report.aggregates.improved_accuracy_pct == 100.0);
}

TEST_CASE("reports are byte-reproducible across runs and concurrency levels") {
    testing::DatasetWorld world(testing::dataset_dir("ten"));
    world.mock.add_correct("", proof_with(2, "w"));
    auto verifier = world.verifier();
    auto run = [&](std::size_t concurrency, const std::string& name) {
        ScriptedGenerator gen({Resp{"no"}, Resp{fenced(proof_with(2, "w"))}, Resp{fenced(proof_with(9, "z"))}});
        auto report = run_benchmark(world.dataset, testing::mock_env(gen, *verifier, SamplerConfig::best_of_n(3)),
                                    concurrency);
        auto dir = testing::temp_dir(name);
        write_report(report, dir);
        return dir;
    };
    auto a = run(1, "bench_repro_a");
    auto b = run(6, "bench_repro_b");
    for (auto f : {"rows.json", "rows.csv", "aggregates.json", "table.txt", "config.json"}) {
        CHECK_MESSAGE(testing::read_file(a / f) == testing::read_file(b / f), f);
    }
    CHECK(std::filesystem::exists(a / "timing.json"));
    auto rows = nlohmann::json::parse(testing::read_file(a / "rows.json"));
    CHECK(rows.size() == 10);
    CHECK(rows[0]["name"] == "ten_0");
}

TEST_CASE("ablation grids expand and rank variants") {
    auto grid = load_ablation_grid(nlohmann::json::parse(R"({"groups": [
        {"name": "examples", "variants": [
            {"label": "0", "overrides": {"examples": 0}},
            {"label": "1", "overrides": {"examples": 1}},
            {"label": "3", "overrides": {"examples": 3}},
            {"label": "5", "overrides": {"examples": 5}},
            {"label": "10", "overrides": {"examples": 10}}]},
        {"name": "format", "vary": {"output_format": ["str", "flat", "structured"], "cos": [true, false]}}]})"));
    REQUIRE(grid.size() == 2);
    CHECK(grid[0].variants.size() == 5);
    REQUIRE(grid[1].variants.size() == 6);
    CHECK(grid[1].variants[0].label == "cos=true,output_format=str");

    testing::DatasetWorld world(testing::dataset_dir("three"));
    auto verifier = world.verifier();
    ScriptedGenerator gen({Resp{"no"}});
    auto env = testing::mock_env(gen, *verifier, SamplerConfig::single());
    auto results = run_ablation(grid, world.dataset, env, 2);
    REQUIRE(results.size() == 2);
    CHECK(results[0].reports.size() == 5);
    CHECK(results[1].reports.size() == 6);
    CHECK(results[0].reports[0].label == "0");  // all tie, order is stable

    auto dir = testing::temp_dir("bench_ablation");
    write_ablation(results, dir);
    CHECK(std::filesystem::exists(dir / "format" / "cos=false_output_format=flat" / "rows.json"));
    auto summary = nlohmann::json::parse(testing::read_file(dir / "summary.json"));
    CHECK(summary[1]["order"].size() == 6);
    CHECK(testing::read_file(dir / "examples" / "table.txt").find("* 0") != std::string::npos);
}

TEST_CASE("ablation chaining carries the winner forward") {
    testing::DatasetWorld world(testing::dataset_dir("three"));
    world.mock.add_correct("", proof_with(1, "one"));
    auto verifier = world.verifier();
    ScriptedGenerator gen({Resp{"no"}, Resp{fenced(proof_with(1, "one"))}, Resp{"no"}});
    auto env = testing::mock_env(gen, *verifier, SamplerConfig::single());
    auto grid = load_ablation_grid(nlohmann::json::parse(R"({"groups": [
        {"name": "sampler", "variants": [
            {"label": "single", "overrides": {"sampler": {"kind": "single"}}},
            {"label": "best3", "overrides": {"sampler": {"kind": "best_of_n", "n": 3}}}]},
        {"name": "cos", "vary": {"cos": [false, true]}}]})"));
    auto chained = run_ablation(grid, world.dataset, env, 1, true);
    CHECK(chained[0].reports[0].label == "best3");
    CHECK(chained[0].reports[0].aggregates.improved_accuracy_pct == 100.0);
    CHECK(chained[0].winner_overrides["sampler"]["n"] == 3);
    for (const auto& r : chained[1].reports) CHECK(r.config.sampler.calls() == 3);

    auto unchained = run_ablation(grid, world.dataset, env, 1, false);
    for (const auto& r : unchained[1].reports) CHECK(r.config.sampler.calls() == 1);
}

TEST_CASE("overrides replace top-level keys and reject unknown ones") {
    RunConfig base;
    auto c = apply_overrides(base, nlohmann::json::parse(R"({"mmr_lambda": 0.7, "sampler": {"kind": "single"}})"));
    CHECK(c.mmr_lambda == 0.7);
    CHECK(c.sampler.calls() == 1);
    CHECK(c.counts.examples == base.counts.examples);
    CHECK_THROWS_AS(apply_overrides(base, nlohmann::json::parse(R"({"temperature": 2})")), Error);
    CHECK_THROWS_AS(load_ablation_grid(nlohmann::json::parse(R"({"groups": [{"name": "x"}]})")), Error);
}

TEST_CASE("splice_proof swaps only the tactic block") {
    std::string src = kThreeDecls;
    auto entries = parse_lean_source(src, "x.lean");
    auto spliced = splice_proof(src, entries[1], parse_tactic_proof("exact h.symm"));
    CHECK(spliced.find("  exact h.symm\n\nexample : True := by") != std::string::npos);
    CHECK(spliced.find("subst h") == std::string::npos);
    auto again = parse_lean_source(spliced, "x.lean");
    REQUIRE(again.size() == 3);
    CHECK(again[1].theorem.statement == entries[1].theorem.statement);
    CHECK(count_tactics(again[2].theorem.initial_proof) == 1);

    auto fig1 = testing::fixture("figures/fig1_original.lean");
    auto e = parse_lean_source(fig1, "fig1.lean").at(0);
    auto opt = parse_tactic_proof(testing::fixture("figures/fig1_optimized_proof.lean"));
    auto out = splice_proof(fig1, e, opt);
    CHECK(out.find("-- PROOF START\n") != std::string::npos);
    CHECK(count_tactics(parse_lean_source(out, "fig1.lean").at(0).theorem.initial_proof) == 6);
}
