// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "proofopt/generation.hpp"
#include "proofopt/retrieval.hpp"

namespace proofopt {

/// Recursive sampler description: a single generation, or best-of-n /
/// refinement over an inner sampler (a single generation when absent).
struct SamplerConfig {
    enum class Kind { single, best_of_n, refinement };

    Kind kind = Kind::single;
    std::size_t n = 1;
    std::size_t prev_num = 1;  // refinement only
    bool keep_best = true;     // refinement only
    std::shared_ptr<const SamplerConfig> inner;

    static SamplerConfig single();
    static SamplerConfig best_of_n(std::size_t n, SamplerConfig inner = single());
    static SamplerConfig refinement(std::size_t n, std::size_t prev_num, bool keep_best,
                                    SamplerConfig inner = single());

    /// Generator calls one run issues.
    std::size_t calls() const;

    /// Throws `bad_config` for n = 0 or more than two nested levels.
    void validate() const;
};

void to_json(nlohmann::json& j, const SamplerConfig& c);
void from_json(const nlohmann::json& j, SamplerConfig& c);

/// Everything configurable about one optimization run.
struct RunConfig {
    OutputFormat output_format = OutputFormat::flat;
    bool cos_enabled = true;
    bool retrieval_enabled = true;
    RetrievalCounts counts{10, 3, 3};
    double mmr_lambda = 0.5;
    SamplerConfig sampler = SamplerConfig::refinement(5, 1, true, SamplerConfig::best_of_n(3));
    BackoffPolicy backoff;
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, RunConfig& c);

/// The selection function S: correctness first, then the larger
/// improvement, then fewer errors. Exact ties keep `y`.
const GenerationResult& compare_candidates(const GenerationResult& y, const GenerationResult& y_prime);

/// Shared pieces of a sampling run.
struct SamplerEnv {
    GenerationContext generation;  // baseline_score is filled in by run_sampler
    const Retriever* retriever = nullptr;
    RunConfig config;
    MetricDef metric;
};

/// Executes sampler trees for one theorem. Generator calls carry ordinals
/// assigned from the tree shape, so concurrent branches stay reproducible.
class Sampler {
public:
    Sampler(const SamplerEnv& env, const TheoremEntry& entry, double baseline_score);

    GenerationResult run(const SamplerConfig& config, const TacticProof& input,
                         const std::vector<IterationRecord>& previous, std::uint64_t ordinal_base = 0);

    /// Leaf generations attempted so far.
    std::size_t generations() const { return generations_.load(); }

private:
    GenerationResult leaf(const TacticProof& input, const std::vector<IterationRecord>& previous,
                          std::uint64_t ordinal);
    GenerationResult best_of_n(const SamplerConfig& config, const TacticProof& input,
                               const std::vector<IterationRecord>& previous, std::uint64_t ordinal_base);
    GenerationResult refinement(const SamplerConfig& config, const TacticProof& input,
                                const std::vector<IterationRecord>& previous, std::uint64_t ordinal_base);

    const SamplerEnv& env_;
    const TheoremEntry& entry_;
    GenerationContext context_;
    std::atomic<std::size_t> generations_{0};
};

struct SamplerOutcome {
    GenerationResult result;  // always the returned proof, input included
    double baseline_score = 0.0;
    bool fell_back = false;
    std::size_t generations = 0;
    std::string failure;  // sampler-level error absorbed by the fallback
};

/// Runs `env.config.sampler` on `entry`. When no correct proof comes out the
/// input proof is returned with improvement 0.
SamplerOutcome run_sampler(const SamplerEnv& env, const TheoremEntry& entry);

}  // namespace proofopt
