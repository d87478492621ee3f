// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "proofopt/proof_model.hpp"
#include "proofopt/verification.hpp"

namespace proofopt {

enum class Direction { minimize, maximize };

/// How the score delta between the input and a rewrite is reported.
enum class ImprovementKind {
    percent_change,  // relative change, in percent of the input score
    difference,      // absolute change
};

/// Built-in scoring functions a metric definition can point at.
enum class Scorer { length, readability, completion };

struct MetricDef {
    std::string name;
    Direction direction = Direction::minimize;
    ImprovementKind improvement_kind = ImprovementKind::difference;
    Scorer scorer = Scorer::length;
    std::string system_prompt;
    std::string user_prompt;
    std::string example_store_id;
};

struct ScoreReport {
    double raw_score = 0.0;
    double improvement = 0.0;
    bool correct = false;
    bool nonzero_improvement = false;
};

/// Number of tactic invocations.
double score_length(const TacticProof& proof);

/// Percentage of tactic invocations that are explicitly typed `have`s.
double score_readability(const TacticProof& proof);

/// Error count of a checked proof; 0 means complete and correct.
double score_completion(const VerificationResult& verification);

/// Matches `have <ident> <binders> : <type> := ...`.
bool is_explicitly_typed_have(std::string_view step_text);

double score(const MetricDef& metric, const TacticProof& proof, const VerificationResult& verification);

/// Improvement of `y_score` over `y0_score`, positive when better in the
/// metric's direction and 0 for incorrect outputs. Throws
/// `division_by_zero` for a percent metric with a zero baseline.
double improvement(const MetricDef& metric, double y0_score, double y_score, bool correct);

ScoreReport make_score_report(const MetricDef& metric, double y0_score, double y_score, bool correct);

MetricDef length_metric();
MetricDef readability_metric();
MetricDef completion_metric();

class MetricRegistry {
public:
    /// Registry holding length, readability and completion.
    static MetricRegistry builtin();

    /// Adds metrics from a JSON file on top of the built-ins.
    static MetricRegistry from_file(const std::filesystem::path& path);

    void add(MetricDef metric);
    const MetricDef& get(std::string_view name) const;
    bool contains(std::string_view name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, MetricDef, std::less<>> metrics_;
};

std::string_view to_string(Direction d);
std::string_view to_string(Scorer s);

}  // namespace proofopt
