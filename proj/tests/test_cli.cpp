// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "proofopt/proof_model.hpp"
#include "test_support.hpp"

namespace {

struct Run {
    int status = -1;
    std::string output;  // stdout and stderr
};

std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

Run run(const std::string& args) {
    std::string cmd = quote(PROOFOPT_CLI) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.output.append(buf, n);
    int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string cli(const std::string& name) { return quote((testing::fixture_dir() / "cli" / name).string()); }

std::string mock_flags(const std::string& fixtures = "mock_verifier.json") {
    return "--mock --no-retrieval --script " + cli("script.json") + " --fixtures " + cli(fixtures) + " --config " +
           cli("best_of_3.json");
}

}  // namespace

TEST_CASE("optimize on Fig. 1 reports 12 to 6 and writes the .opt file") {
    auto dir = testing::temp_dir("cli_optimize");
    std::filesystem::copy(testing::fixture_dir() / "figures/fig1_original.lean", dir / "fig1.lean");
    auto r = run("optimize " + quote((dir / "fig1.lean").string()) + " --decl lemma0 " + mock_flags());
    INFO(r.output);
    CHECK(r.status == 0);
    CHECK(r.output.find("12 → 6, improvement 50.0%") != std::string::npos);
    auto opt = testing::read_file(dir / "fig1.lean.opt");
    CHECK(opt.find("rw [h1u' _ ((h2 _ _).mpr h1e)]") != std::string::npos);
    CHECK(opt.find("have hxw") == std::string::npos);
    CHECK(opt.rfind("import Mathlib.Tactic", 0) == 0);
}

TEST_CASE("optimize rejects an unknown declaration with exit 2") {
    auto r = run("optimize " + quote((testing::fixture_dir() / "figures/fig1_original.lean").string()) +
                 " --decl missing " + mock_flags());
    CHECK(r.status == 2);
    CHECK(r.output.find("missing") != std::string::npos);
}

TEST_CASE("completion metric replaces sorry") {
    auto dir = testing::temp_dir("cli_sorry");
    std::filesystem::copy(testing::fixture_dir() / "cli/sorry.lean", dir / "sorry.lean");
    auto r = run("--metric completion optimize " + quote((dir / "sorry.lean").string()) + " " + mock_flags());
    INFO(r.output);
    CHECK(r.status == 0);
    auto opt = testing::read_file(dir / "sorry.lean.opt");
    CHECK(opt.find("sorry") == opt.find("add_zero_sorry") + 9);  // only the name remains
    CHECK(opt.find("  simp\n") != std::string::npos);
}

TEST_CASE("annotate reproduces the Fig. 2 right panel") {
    auto r = run("annotate " + cli("fig2.lean") + " --mock --fixtures " + cli("fig2_verifier.json"));
    INFO(r.output);
    CHECK(r.status == 0);
    auto proof = r.output.substr(r.output.find(":= by\n") + 6);
    CHECK(proofopt::normalize_whitespace(proof) ==
          proofopt::normalize_whitespace(testing::fixture("figures/fig2_right.lean")));
}

TEST_CASE("annotate with an unreachable checker exits 3") {
    auto r = run("annotate " + cli("fig2.lean") + " --backend-cmd /nonexistent/checker");
    CHECK(r.status == 3);
}

TEST_CASE("missing verifier configuration is an input error") {
    auto r = run("annotate " + cli("fig2.lean") + " --backend-cmd ''");
    if (std::getenv("PROOFOPT_VERIFIER") == nullptr) CHECK(r.status == 2);
}

TEST_CASE("score prints tactic counts and candidate improvement") {
    auto r = run("score " + quote((testing::fixture_dir() / "figures/fig1_original.lean").string()) +
                 " --mock --fixtures " + cli("mock_verifier.json") + " --proof " +
                 quote((testing::fixture_dir() / "figures/fig1_optimized_proof.lean").string()));
    INFO(r.output);
    REQUIRE(r.status == 0);
    auto j = nlohmann::json::parse(r.output);
    CHECK(j["tactics"] == 12);
    CHECK(j["correct"] == true);
    CHECK(j["candidate"]["tactics"] == 6);
    CHECK(j["candidate"]["improvement"] == 50.0);
}

TEST_CASE("bench prints the four aggregate columns and writes a report") {
    auto out = testing::temp_dir("cli_bench");
    auto r = run("bench " + quote((testing::fixture_dir() / "datasets/ten").string()) + " " +
                 mock_flags("ten_verifier.json") + " -o " + quote(out.string()));
    INFO(r.output);
    CHECK(r.status == 0);
    for (auto col : {"Improvement", "Nonempty Improvement", "Accuracy", "Improved Acc."}) {
        CHECK(r.output.find(col) != std::string::npos);
    }
    CHECK(r.output.find("100.00%") != std::string::npos);
    for (auto f : {"rows.json", "rows.csv", "aggregates.json", "table.txt", "config.json", "timing.json"}) {
        CHECK(std::filesystem::exists(out / f));
    }
}

TEST_CASE("bench --ablate over five example counts writes five reports") {
    auto out = testing::temp_dir("cli_ablate");
    auto r = run("bench " + quote((testing::fixture_dir() / "datasets/ten").string()) + " " +
                 mock_flags("ten_verifier.json") + " --ablate " + cli("examples_grid.json") + " -o " +
                 quote(out.string()));
    INFO(r.output);
    CHECK(r.status == 0);
    std::size_t reports = 0;
    for (const auto& e : std::filesystem::directory_iterator(out / "examples")) reports += e.is_directory();
    CHECK(reports == 5);
}

TEST_CASE("bench input failures exit 2") {
    CHECK(run("bench /nonexistent/dataset " + mock_flags()).status == 2);
    auto r = run("bench " + quote((testing::fixture_dir() / "datasets/ten").string()) + " " + mock_flags());
    CHECK(r.status == 2);
    CHECK(r.output.find("IngestVerificationFailed") != std::string::npos);
    CHECK(run("bench").status == 2);
    CHECK(run("--help").status == 0);
}

TEST_CASE("index builds stores that optimize can use") {
    auto root = testing::temp_dir("cli_index");
    std::filesystem::create_directories(root / "docs");
    std::filesystem::create_directories(root / "examples/length");
    std::ofstream(root / "docs/tactics.md") << "# simp\nUse simp to simplify.\n\n# omega\nLinear arithmetic.\n";
    std::ofstream(root / "docs/lib.lean") << "theorem foo : 1 = 1 := by\n  rfl\n";
    std::ofstream(root / "examples/length/a.before.lean") << "  intro x\n  exact x\n";
    std::ofstream(root / "examples/length/a.after.lean") << "  exact id\n";
    auto r = run("index --docs " + quote((root / "docs").string()) + " --examples " +
                 quote((root / "examples").string()) + " -o " + quote((root / "store").string()));
    INFO(r.output);
    REQUIRE(r.status == 0);
    CHECK(r.output.find("examples/length: 1 pairs") != std::string::npos);

    std::filesystem::copy(testing::fixture_dir() / "figures/fig1_original.lean", root / "fig1.lean");
    auto opt = run("optimize " + quote((root / "fig1.lean").string()) + " --mock --script " + cli("script.json") +
                   " --fixtures " + cli("mock_verifier.json") + " --config " + cli("best_of_3.json") + " --index " +
                   quote((root / "store").string()));
    INFO(opt.output);
    CHECK(opt.status == 0);
    CHECK(opt.output.find("12 → 6") != std::string::npos);

    auto missing = run("optimize " + quote((root / "fig1.lean").string()) + " --mock --fixtures " +
                       cli("mock_verifier.json"));
    CHECK(missing.status == 2);
    CHECK(missing.output.find("--index") != std::string::npos);
}
