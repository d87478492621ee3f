// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "proofopt/sampling.hpp"

#include <exception>
#include <future>

#include "proofopt/error.hpp"

namespace proofopt {

using json = nlohmann::json;

// ---------------------------------------------------------------- config

SamplerConfig SamplerConfig::single() { return SamplerConfig{}; }

SamplerConfig SamplerConfig::best_of_n(std::size_t n, SamplerConfig inner) {
    SamplerConfig c;
    c.kind = Kind::best_of_n;
    c.n = n;
    c.inner = std::make_shared<const SamplerConfig>(std::move(inner));
    return c;
}

SamplerConfig SamplerConfig::refinement(std::size_t n, std::size_t prev_num, bool keep_best, SamplerConfig inner) {
    SamplerConfig c;
    c.kind = Kind::refinement;
    c.n = n;
    c.prev_num = prev_num;
    c.keep_best = keep_best;
    c.inner = std::make_shared<const SamplerConfig>(std::move(inner));
    return c;
}

std::size_t SamplerConfig::calls() const {
    if (kind == Kind::single) return 1;
    return n * (inner ? inner->calls() : 1);
}

void SamplerConfig::validate() const {
    std::size_t depth = 0;
    for (const SamplerConfig* c = this; c && c->kind != Kind::single; c = c->inner.get()) {
        if (c->n == 0) throw Error(ErrorKind::bad_config, "sampler n must be at least 1");
        if (++depth > 2) throw Error(ErrorKind::bad_config, "samplers nest at most two levels deep");
    }
}

namespace {

std::string_view kind_name(SamplerConfig::Kind k) {
    switch (k) {
        case SamplerConfig::Kind::single: return "single";
        case SamplerConfig::Kind::best_of_n: return "best_of_n";
        case SamplerConfig::Kind::refinement: return "refinement";
    }
    return "?";
}

}  // namespace

void to_json(json& j, const SamplerConfig& c) {
    j = json{{"kind", kind_name(c.kind)}};
    if (c.kind == SamplerConfig::Kind::single) return;
    j["n"] = c.n;
    if (c.kind == SamplerConfig::Kind::refinement) {
        j["prev_num"] = c.prev_num;
        j["keep_best"] = c.keep_best;
    }
    j["inner"] = c.inner ? json(*c.inner) : json{{"kind", "single"}};
}

void from_json(const json& j, SamplerConfig& c) {
    auto kind = j.value("kind", std::string("single"));
    SamplerConfig inner = j.contains("inner") ? j.at("inner").get<SamplerConfig>() : SamplerConfig::single();
    if (kind == "single") {
        c = SamplerConfig::single();
    } else if (kind == "best_of_n") {
        c = SamplerConfig::best_of_n(j.at("n").get<std::size_t>(), std::move(inner));
    } else if (kind == "refinement") {
        c = SamplerConfig::refinement(j.at("n").get<std::size_t>(), j.value("prev_num", std::size_t{1}),
                                      j.value("keep_best", true), std::move(inner));
    } else {
        throw Error(ErrorKind::bad_config, "unknown sampler kind '" + kind + "'");
    }
    c.validate();
}

void to_json(json& j, const RunConfig& c) {
    j = json{{"output_format", to_string(c.output_format)},
             {"cos", c.cos_enabled},
             {"retrieval", c.retrieval_enabled},
             {"examples", c.counts.examples},
             {"syntax_docs", c.counts.syntax_docs},
             {"library_docs", c.counts.library_docs},
             {"mmr_lambda", c.mmr_lambda},
             {"sampler", c.sampler},
             {"backoff_base_ms", c.backoff.base.count()},
             {"max_retries", c.backoff.max_retries},
             {"seed", c.seed}};
}

void from_json(const json& j, RunConfig& c) {
    try {
        if (j.contains("output_format")) c.output_format = output_format_from_string(j["output_format"].get<std::string>());
        c.cos_enabled = j.value("cos", c.cos_enabled);
        c.retrieval_enabled = j.value("retrieval", c.retrieval_enabled);
        c.counts.examples = j.value("examples", c.counts.examples);
        c.counts.syntax_docs = j.value("syntax_docs", c.counts.syntax_docs);
        c.counts.library_docs = j.value("library_docs", c.counts.library_docs);
        c.mmr_lambda = j.value("mmr_lambda", c.mmr_lambda);
        if (j.contains("sampler")) c.sampler = j["sampler"].get<SamplerConfig>();
        c.backoff.base = std::chrono::milliseconds(j.value("backoff_base_ms", c.backoff.base.count()));
        c.backoff.max_retries = j.value("max_retries", c.backoff.max_retries);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::bad_config, std::string("bad run configuration: ") + e.what());
    }
    if (c.mmr_lambda < 0 || c.mmr_lambda > 1) throw Error(ErrorKind::bad_config, "mmr_lambda must lie in [0, 1]");
}

// ---------------------------------------------------------------- selection

const GenerationResult& compare_candidates(const GenerationResult& y, const GenerationResult& y_prime) {
    if (y.correct != y_prime.correct) return y.correct ? y : y_prime;
    if (y.correct) return y_prime.improvement > y.improvement ? y_prime : y;
    return y_prime.error_count() < y.error_count() ? y_prime : y;
}

// ---------------------------------------------------------------- sampler

Sampler::Sampler(const SamplerEnv& env, const TheoremEntry& entry, double baseline_score)
    : env_(env), entry_(entry), context_(env.generation) {
    context_.baseline_score = baseline_score;
}

GenerationResult Sampler::run(const SamplerConfig& config, const TacticProof& input,
                              const std::vector<IterationRecord>& previous, std::uint64_t ordinal_base) {
    switch (config.kind) {
        case SamplerConfig::Kind::single: return leaf(input, previous, ordinal_base);
        case SamplerConfig::Kind::best_of_n: return best_of_n(config, input, previous, ordinal_base);
        case SamplerConfig::Kind::refinement: return refinement(config, input, previous, ordinal_base);
    }
    throw Error(ErrorKind::bad_config, "unknown sampler kind");
}

GenerationResult Sampler::leaf(const TacticProof& input, const std::vector<IterationRecord>& previous,
                               std::uint64_t ordinal) {
    ++generations_;
    const auto& cfg = env_.config;
    PromptRequest req;
    req.metric = env_.metric;
    req.entry = entry_;
    req.current_proof = input;
    req.cos_enabled = cfg.cos_enabled;
    req.output_format = cfg.output_format;
    req.previous = previous;

    bool use_retrieval = cfg.retrieval_enabled && env_.retriever;
    if (cfg.cos_enabled || use_retrieval) {
        auto checked = context_.verifier->verify(entry_, input);
        req.current_states = checked.states;
        if (use_retrieval) {
            auto errors = checked.error_messages();
            if (!previous.empty()) {
                auto last = previous.back().output.error_messages();
                errors.insert(errors.end(), last.begin(), last.end());
            }
            req.retrieved = env_.retriever->retrieve(entry_, render_proof(input), errors, env_.metric, cfg.counts,
                                                     cfg.mmr_lambda);
        }
    }
    return generate_candidate(context_, req, ordinal);
}

GenerationResult Sampler::best_of_n(const SamplerConfig& config, const TacticProof& input,
                                    const std::vector<IterationRecord>& previous, std::uint64_t ordinal_base) {
    const SamplerConfig inner = config.inner ? *config.inner : SamplerConfig::single();
    const std::uint64_t stride = inner.calls();
    std::vector<std::future<GenerationResult>> branches;
    for (std::size_t i = 0; i < config.n; ++i) {
        branches.push_back(std::async(std::launch::async, [this, &inner, &input, &previous, ordinal_base, stride, i] {
            return run(inner, input, previous, ordinal_base + i * stride);
        }));
    }
    std::optional<GenerationResult> best;
    std::exception_ptr first_error;
    for (auto& f : branches) {
        try {
            auto r = f.get();
            best = best ? compare_candidates(*best, r) : r;
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (!best) std::rethrow_exception(first_error);
    return *best;
}

GenerationResult Sampler::refinement(const SamplerConfig& config, const TacticProof& input,
                                     const std::vector<IterationRecord>& previous, std::uint64_t ordinal_base) {
    const SamplerConfig inner = config.inner ? *config.inner : SamplerConfig::single();
    const std::uint64_t stride = inner.calls();
    std::vector<IterationRecord> records = previous;
    std::optional<GenerationResult> best;
    std::optional<GenerationResult> last;
    std::exception_ptr first_error;
    bool any_result = false;
    TacticProof current = input;

    for (std::size_t i = 0; i < config.n; ++i) {
        std::size_t keep = std::min(config.prev_num, records.size());
        std::vector<IterationRecord> forwarded(records.end() - static_cast<std::ptrdiff_t>(keep), records.end());
        GenerationResult out;
        try {
            out = run(inner, current, forwarded, ordinal_base + i * stride);
            any_result = true;
        } catch (const std::exception& e) {
            if (!first_error) first_error = std::current_exception();
            out = GenerationResult{};
            out.failure = e.what();
        }
        records.push_back(IterationRecord{render_proof(current), out, records.size()});
        best = best ? compare_candidates(*best, out) : out;
        last = out;

        const GenerationResult& next = config.keep_best ? *best : out;
        if (next.proof) current = *next.proof;
    }
    if (!any_result) std::rethrow_exception(first_error);
    return config.keep_best ? *best : *last;
}

// ---------------------------------------------------------------- entry point

SamplerOutcome run_sampler(const SamplerEnv& env, const TheoremEntry& entry) {
    if (!env.generation.verifier) throw Error(ErrorKind::bad_config, "sampler needs a verifier");
    SamplerOutcome outcome;
    auto input_check = env.generation.verifier->verify(entry, entry.initial_proof);
    outcome.baseline_score = score(env.metric, entry.initial_proof, input_check);

    Sampler sampler(env, entry, outcome.baseline_score);
    try {
        env.config.sampler.validate();
        outcome.result = sampler.run(env.config.sampler, entry.initial_proof, {}, 0);
    } catch (const std::exception& e) {
        outcome.failure = e.what();
        outcome.result = GenerationResult{};
    }
    outcome.generations = sampler.generations();

    if (!outcome.result.correct) {
        GenerationResult fallback;
        fallback.proof = entry.initial_proof;
        fallback.verification = input_check;
        fallback.metric_score = outcome.baseline_score;
        fallback.correct = is_correct(input_check);
        fallback.improvement = 0.0;
        outcome.result = std::move(fallback);
        outcome.fell_back = true;
    }
    return outcome;
}

}  // namespace proofopt
