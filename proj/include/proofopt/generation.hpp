// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proofopt/metrics.hpp"
#include "proofopt/proof_model.hpp"
#include "proofopt/retrieval.hpp"
#include "proofopt/verification.hpp"
#include "proofopt/verifier.hpp"

namespace proofopt {

enum class OutputFormat { str, flat, structured };

struct ChatMessage {
    std::string role;  // "system" or "user"
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct GenerationResult {
    std::string raw_output;
    std::optional<TacticProof> proof;  // absent when the output did not parse
    std::optional<VerificationResult> verification;
    std::optional<double> metric_score;
    double improvement = 0.0;  // against the original input proof; 0 unless correct
    bool correct = false;
    std::string failure;  // set when generation itself failed (backend error)

    /// E(y); an unparseable output counts as one error.
    std::size_t error_count() const;
    std::vector<std::string> error_messages() const;
    std::string proof_text() const;
};

/// One finished refinement step, as shown to later steps.
struct IterationRecord {
    std::string input_proof;
    GenerationResult output;
    std::size_t index = 0;
};

struct PromptRequest {
    MetricDef metric;
    TheoremEntry entry;
    TacticProof current_proof;
    std::vector<ProofState> current_states;  // used when cos_enabled
    bool cos_enabled = true;
    OutputFormat output_format = OutputFormat::flat;
    Retrieved retrieved;
    std::vector<IterationRecord> previous;  // oldest first
};

std::vector<ChatMessage> assemble_prompt(const PromptRequest& request);

/// Instructions describing the expected payload for `format`.
std::string format_instructions(OutputFormat format);

/// Extracts a tactic block from model output. Throws `decode_error` for a
/// malformed flat/structured payload and `no_proof_found` when nothing
/// usable is present.
std::string parse_model_output(const std::string& raw, OutputFormat format);

/// Renders a structured payload: a list of nodes, each a tactic string or a
/// single-key object `{tactic: [[branch...], ...]}`. Branches become focus
/// bullets, or a nested block when the tactic ends in `by`.
std::string render_structured(const nlohmann::json& nodes);

struct GeneratorCall {
    std::vector<ChatMessage> messages;
    std::string theorem;       // entry name, lets scripted backends key on it
    std::uint64_t ordinal = 0;  // position of this call within the run
    std::size_t attempt = 0;    // retry number for this ordinal
    bool json_mode = false;
};

class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    /// Throws `rate_limited` for a retryable throttle signal.
    virtual std::string complete(const GeneratorCall& call) = 0;
    virtual std::string id() const = 0;
};

/// Replays canned responses. The script is
/// `{"default": [...], "theorems": {"<name>": [...]}}` where each response is
/// a string or `{"text": "...", "rate_limited": k}` (the first k attempts
/// are throttled). Call `ordinal` selects the response, cycling at the end.
class ScriptedGenerator : public GeneratorBackend {
public:
    struct Response {
        std::string text;
        std::size_t rate_limited = 0;
    };

    ScriptedGenerator() = default;
    explicit ScriptedGenerator(std::vector<Response> responses);
    ScriptedGenerator(ScriptedGenerator&& other) noexcept
        : default_(std::move(other.default_)), by_theorem_(std::move(other.by_theorem_)) {}

    static ScriptedGenerator from_json(const nlohmann::json& doc);
    static ScriptedGenerator from_file(const std::filesystem::path& path);

    void set_for_theorem(const std::string& name, std::vector<Response> responses);

    std::string complete(const GeneratorCall& call) override;
    std::string id() const override { return "scripted"; }

    /// Every attempt, throttled ones included.
    std::size_t calls() const { return calls_.load(); }
    /// Attempts that returned text.
    std::size_t completions() const { return completions_.load(); }

private:
    std::vector<Response> default_;
    std::map<std::string, std::vector<Response>> by_theorem_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> completions_{0};
};

/// Chat completions endpoint of an OpenAI-compatible API. Key from
/// `OPENAI_API_KEY`, endpoint from `OPENAI_BASE_URL`.
class ChatApiGenerator : public GeneratorBackend {
public:
    explicit ChatApiGenerator(std::string model = "gpt-4o", double temperature = 1.0);

    std::string complete(const GeneratorCall& call) override;
    std::string id() const override { return "chat:" + model_; }

private:
    std::string model_;
    double temperature_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Randomized exponential backoff: before retry r the caller sleeps a
/// uniform delay in [0, base * 2^r].
struct BackoffPolicy {
    std::chrono::milliseconds base{1000};
    std::size_t max_retries = 6;
};

/// Calls `backend`, retrying throttled attempts. Throws `backend_exhausted`
/// once `max_retries` retries are used up.
std::string complete_with_backoff(GeneratorBackend& backend, GeneratorCall call, const BackoffPolicy& policy,
                                  std::uint64_t seed, const Sleeper& sleeper);

/// Everything a candidate needs besides the prompt.
struct GenerationContext {
    GeneratorBackend* backend = nullptr;
    Verifier* verifier = nullptr;
    BackoffPolicy backoff;
    std::uint64_t seed = 0;
    Sleeper sleeper;              // defaults to std::this_thread::sleep_for
    double baseline_score = 0.0;  // metric score of the original input proof
};

/// Prompts, parses, verifies and scores one candidate. Unparseable output
/// yields `correct = false` with the single error "unparseable output".
GenerationResult generate_candidate(const GenerationContext& ctx, const PromptRequest& request,
                                    std::uint64_t ordinal);

std::string_view to_string(OutputFormat f);
OutputFormat output_format_from_string(std::string_view s);

}  // namespace proofopt
