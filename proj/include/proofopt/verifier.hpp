// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

#include "proofopt/proof_model.hpp"
#include "proofopt/verification.hpp"

namespace proofopt {

/// One check sent to a proof assistant.
struct CheckRequest {
    std::string context;
    std::string statement;
    std::string proof;  // rendered tactic block
};

class VerifierBackend {
public:
    virtual ~VerifierBackend() = default;

    /// Throws `Error` with `backend_unavailable`, `timeout` or `protocol_error`.
    virtual VerificationResult check(const CheckRequest& request, std::chrono::milliseconds timeout) = 0;

    /// Distinguishes cache entries produced by different backends.
    virtual std::string id() const = 0;
};

/// Deterministic stand-in for a proof assistant.
///
/// Answers from a fixture table keyed by (statement, proof text). Unknown
/// proofs containing `sorry` get a sorry error; any other unknown proof is
/// reported incorrect with a single error.
class MockVerifier : public VerifierBackend {
public:
    MockVerifier() = default;
    MockVerifier(const MockVerifier& other) : table_(other.table_) {}
    MockVerifier(MockVerifier&& other) noexcept : table_(std::move(other.table_)) {}
    MockVerifier& operator=(MockVerifier other) noexcept {
        table_ = std::move(other.table_);
        return *this;
    }

    /// Loads `{"entries": [{"statement", "proof", "result" | "correct"}]}`.
    static MockVerifier from_file(const std::filesystem::path& path);
    static MockVerifier from_json(const nlohmann::json& doc);

    /// Registers a canned result. An empty statement matches any statement.
    void add(const std::string& statement, const std::string& proof, VerificationResult result);

    /// Registers `proof` as correct with synthesized states, one per tactic.
    void add_correct(const std::string& statement, const std::string& proof);

    VerificationResult check(const CheckRequest& request, std::chrono::milliseconds timeout) override;
    std::string id() const override { return "mock"; }

    std::size_t calls() const { return calls_.load(); }

private:
    static std::string proof_key(const std::string& proof);
    static std::string statement_key(const std::string& statement);

    std::map<std::pair<std::string, std::string>, VerificationResult> table_;
    std::atomic<std::size_t> calls_{0};
};

/// Client for an external checker speaking line-delimited JSON over the
/// child's standard streams.
///
///   -> {"cmd":"handshake","protocol":1}
///   <- {"ok":true,"protocol":1}
///   -> {"cmd":"check","id":N,"context":...,"statement":...,"proof":...}
///   <- {"id":N,"errors":[{"message","line","col","severity"}],
///       "states":[{"goals":[...]}],"solved":bool}
///
/// Only messages with severity "error" (the default) are kept; a
/// "declaration uses 'sorry'" message always counts as an error.
class ReplBackend : public VerifierBackend {
public:
    explicit ReplBackend(std::string command);
    ~ReplBackend() override;

    ReplBackend(const ReplBackend&) = delete;
    ReplBackend& operator=(const ReplBackend&) = delete;

    VerificationResult check(const CheckRequest& request, std::chrono::milliseconds timeout) override;
    std::string id() const override { return "repl:" + command_; }

    static constexpr int kProtocolVersion = 1;

private:
    void start(std::chrono::milliseconds timeout);
    void stop();
    void write_line(const std::string& line);
    std::string read_line(std::chrono::steady_clock::time_point deadline);

    std::string command_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::uint64_t next_id_ = 1;
};

/// Parses one checker response line. Throws `protocol_error`.
VerificationResult parse_check_response(const std::string& line, std::uint64_t expected_id);

/// On-disk content-addressed store: one JSON file per key.
class ResultCache {
public:
    explicit ResultCache(std::filesystem::path dir);

    std::optional<VerificationResult> get(const std::string& key);
    void put(const std::string& key, const VerificationResult& result);

    const std::filesystem::path& dir() const { return dir_; }

    static std::string key(const std::string& backend_id, const CheckRequest& request);

private:
    std::filesystem::path path_for(const std::string& key) const;

    std::filesystem::path dir_;
    std::mutex mutex_;
    std::map<std::string, VerificationResult> memory_;
};

struct VerifierOptions {
    std::chrono::milliseconds timeout{60000};
    std::optional<std::filesystem::path> cache_dir;
};

/// Pool of backends plus the result cache. Safe for concurrent use; each
/// backend serves one request at a time.
class Verifier {
public:
    Verifier(std::vector<std::unique_ptr<VerifierBackend>> backends, VerifierOptions options);

    /// Builds a pool of `size` backends from `factory`.
    static Verifier pooled(const std::function<std::unique_ptr<VerifierBackend>()>& factory, std::size_t size,
                           VerifierOptions options);

    /// Checks `proof` for `entry`. A timeout is reported as a single
    /// "timeout" error rather than thrown.
    VerificationResult verify(const TheoremEntry& entry, const TacticProof& proof);
    VerificationResult verify(const CheckRequest& request);

    std::size_t cache_hits() const { return cache_hits_.load(); }

private:
    VerifierBackend& acquire();
    void release(VerifierBackend& backend);

    std::vector<std::unique_ptr<VerifierBackend>> backends_;
    std::vector<VerifierBackend*> idle_;
    std::mutex pool_mutex_;
    std::condition_variable pool_cv_;
    VerifierOptions options_;
    std::unique_ptr<ResultCache> cache_;
    std::string backend_id_;
    std::atomic<std::size_t> cache_hits_{0};
};

/// Creates the check request for `proof` in the setting of `entry`.
CheckRequest make_check_request(const TheoremEntry& entry, const TacticProof& proof);

}  // namespace proofopt
