// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proofopt/metrics.hpp"
#include "proofopt/proof_model.hpp"
#include "proofopt/sampling.hpp"
#include "proofopt/verifier.hpp"

namespace proofopt {

struct DatasetEntry {
    TheoremEntry theorem;
    std::string dataset_id;
    std::optional<std::size_t> marker_offset;  // byte offset of "-- PROOF START" in the source
    SourceSpan proof_span;                     // bytes of the tactic block in the source
};

/// `source` with the tactic block of `entry` replaced by `proof`.
std::string splice_proof(const std::string& source, const DatasetEntry& entry, const TacticProof& proof);

/// Splits Lean source into tactic-proof declarations (`theorem`, `lemma`,
/// `example`, `def`) in file order. Each entry's context is everything
/// before its declaration. With a `-- PROOF START` line inside the proof,
/// the proof begins after it and the lines above it join the statement.
std::vector<DatasetEntry> parse_lean_source(const std::string& source, const std::string& source_path,
                                            const std::string& dataset_id = {});

struct LoadOptions {
    bool require_correct = true;  // verify every initial proof at ingestion
};

/// Loads `root` (a `.lean` file or a directory of them, sorted by path). An
/// optional `manifest.json` in the directory,
/// `{"dataset_id": ..., "files": {"a.lean": ["decl", ...]}}`, selects
/// declarations. Throws `no_theorems_found`, `not_found` for a manifest
/// entry that does not exist, and `ingest_verification_failed` listing
/// every entry whose initial proof does not check.
std::vector<DatasetEntry> load_dataset(const std::filesystem::path& root, Verifier* verifier,
                                       LoadOptions options = {});

struct BenchRow {
    std::string name;
    double baseline_score = 0.0;
    double final_score = 0.0;
    double improvement = 0.0;
    bool correct = false;
    bool improved = false;  // correct with nonzero improvement
    bool fell_back = false;
    std::size_t generations = 0;
    std::string failure;
    std::string final_proof;
};

struct Aggregates {
    double improvement_mean = 0.0;
    double nonempty_improvement_mean = 0.0;
    double accuracy_pct = 0.0;
    double improved_accuracy_pct = 0.0;
    std::size_t count = 0;

    bool operator==(const Aggregates&) const = default;
};

/// The four benchmark measures. Throws `empty_dataset`.
Aggregates compute_performance_metrics(const std::vector<BenchRow>& rows);

struct BenchmarkReport {
    std::string label;
    std::string metric;
    RunConfig config;
    std::vector<BenchRow> rows;
    Aggregates aggregates;
    std::chrono::milliseconds wall{0};
};

/// Optimizes every entry, up to `concurrency` at a time. Failures are
/// recorded in their rows; the run itself never aborts.
BenchmarkReport run_benchmark(const std::vector<DatasetEntry>& dataset, const SamplerEnv& env,
                              std::size_t concurrency, const std::string& label = "run");

/// Writes rows.json, rows.csv, aggregates.json, table.txt, config.json and
/// timing.json. Everything except timing.json is reproducible under mocks.
void write_report(const BenchmarkReport& report, const std::filesystem::path& dir);

/// Aligned table with one line per labelled report.
std::string format_aggregates_table(const std::vector<BenchmarkReport>& reports,
                                    std::optional<std::size_t> winner = std::nullopt);

struct AblationVariant {
    std::string label;
    nlohmann::json overrides;  // top-level RunConfig keys to replace
};

struct AblationGroup {
    std::string name;
    std::vector<AblationVariant> variants;
};

/// Reads `{"groups": [{"name", "variants": [{"label", "overrides"}]}]}`. A
/// group may give `"vary": {"key": [values...]}` instead, which expands to
/// the cartesian product of the listed values.
std::vector<AblationGroup> load_ablation_grid(const nlohmann::json& doc);

RunConfig apply_overrides(const RunConfig& base, const nlohmann::json& overrides);

struct AblationResult {
    std::string group;
    std::vector<BenchmarkReport> reports;  // sorted by mean improvement, best first
    std::size_t winner = 0;
    nlohmann::json winner_overrides;
};

/// Runs every group in order. With `chain`, each group starts from the
/// previous group's winning configuration.
std::vector<AblationResult> run_ablation(const std::vector<AblationGroup>& groups,
                                         const std::vector<DatasetEntry>& dataset, const SamplerEnv& base_env,
                                         std::size_t concurrency, bool chain = true);

void write_ablation(const std::vector<AblationResult>& results, const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const BenchRow& r);
void to_json(nlohmann::json& j, const Aggregates& a);

}  // namespace proofopt
