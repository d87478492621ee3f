// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: optimize, annotate, score, index, bench.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "proofopt/bench.hpp"
#include "proofopt/cos.hpp"
#include "proofopt/error.hpp"
#include "proofopt/generation.hpp"
#include "proofopt/metrics.hpp"
#include "proofopt/retrieval.hpp"
#include "proofopt/sampling.hpp"
#include "proofopt/verifier.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace proofopt;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitBackend = 3;

bool is_backend_error(ErrorKind k) {
    switch (k) {
        case ErrorKind::backend_unavailable:
        case ErrorKind::timeout:
        case ErrorKind::protocol_error:
        case ErrorKind::embedder_unavailable:
        case ErrorKind::backend_exhausted:
        case ErrorKind::rate_limited: return true;
        default: return false;
    }
}

struct Options {
    std::string metric = "length";
    std::string metrics_file;
    std::string config_file;
    bool mock = false;
    std::string script;
    std::string fixtures;
    std::string backend_cmd;
    std::size_t concurrency = 4;
    std::optional<std::uint64_t> seed;
    bool no_retrieval = false;
    std::string index_dir;
    std::string embedder = "hashing";
    std::string model = "gpt-4o";
    double temperature = 1.0;
    unsigned timeout_ms = 60000;
    std::string cache_dir;
};

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::not_found, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Up to two decimals, trailing zeros dropped.
std::string show(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s = buf;
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s;
}

std::shared_ptr<Embedder> make_embedder(const std::string& choice) {
    if (choice == "hashing") return std::make_shared<HashingEmbedder>();
    // remote:<model>:<dimension>
    if (choice.rfind("remote:", 0) == 0) {
        auto rest = choice.substr(7);
        auto colon = rest.rfind(':');
        if (colon == std::string::npos) throw Error(ErrorKind::bad_config, "expected remote:<model>:<dimension>");
        return std::make_shared<RemoteEmbedder>(rest.substr(0, colon), std::stoul(rest.substr(colon + 1)));
    }
    throw Error(ErrorKind::bad_config, "unknown embedder '" + choice + "'");
}

/// Everything a command needs to run the pipeline.
class Runtime {
public:
    explicit Runtime(const Options& o) : options_(o) {
        auto registry = o.metrics_file.empty() ? MetricRegistry::builtin() : MetricRegistry::from_file(o.metrics_file);
        if (!registry.contains(o.metric)) throw Error(ErrorKind::bad_config, "unknown metric '" + o.metric + "'");
        metric_ = registry.get(o.metric);
        if (!o.config_file.empty()) {
            try {
                config_ = json::parse(read_text(o.config_file)).get<RunConfig>();
            } catch (const json::parse_error& e) {
                throw Error(ErrorKind::bad_config, o.config_file + ": " + e.what());
            }
        }
        if (o.seed) config_.seed = *o.seed;
        if (o.no_retrieval) config_.retrieval_enabled = false;
    }

    const MetricDef& metric() const { return metric_; }
    const RunConfig& config() const { return config_; }

    Verifier& verifier() {
        if (verifier_) return *verifier_;
        VerifierOptions vo;
        vo.timeout = std::chrono::milliseconds(options_.timeout_ms);
        if (!options_.cache_dir.empty()) vo.cache_dir = options_.cache_dir;
        std::size_t pool = std::max<std::size_t>(1, options_.concurrency);
        if (options_.mock) {
            auto mock = options_.fixtures.empty() ? MockVerifier() : MockVerifier::from_file(options_.fixtures);
            std::vector<std::unique_ptr<VerifierBackend>> backends;
            for (std::size_t i = 0; i < pool; ++i) backends.push_back(std::make_unique<MockVerifier>(mock));
            verifier_ = std::make_unique<Verifier>(std::move(backends), vo);
        } else {
            std::string cmd = options_.backend_cmd;
            if (cmd.empty()) {
                if (const char* env = std::getenv("PROOFOPT_VERIFIER")) cmd = env;
            }
            if (cmd.empty()) {
                throw Error(ErrorKind::bad_config,
                            "no verifier configured: pass --backend-cmd, set PROOFOPT_VERIFIER or use --mock");
            }
            std::vector<std::unique_ptr<VerifierBackend>> backends;
            for (std::size_t i = 0; i < pool; ++i) backends.push_back(std::make_unique<ReplBackend>(cmd));
            verifier_ = std::make_unique<Verifier>(std::move(backends), vo);
        }
        return *verifier_;
    }

    SamplerEnv env() {
        if (!generator_) {
            if (options_.mock) {
                generator_ = std::make_unique<ScriptedGenerator>(
                    options_.script.empty() ? ScriptedGenerator() : ScriptedGenerator::from_file(options_.script));
            } else {
                generator_ = std::make_unique<ChatApiGenerator>(options_.model, options_.temperature);
            }
        }
        if (config_.retrieval_enabled && !retriever_) {
            if (options_.index_dir.empty()) {
                throw Error(ErrorKind::bad_config,
                            "retrieval is enabled but no --index was given (or pass --no-retrieval)");
            }
            retriever_ = Retriever::open(options_.index_dir, make_embedder(options_.embedder), config_.mmr_lambda);
        }
        SamplerEnv env;
        env.generation.backend = generator_.get();
        env.generation.verifier = &verifier();
        env.generation.backoff = config_.backoff;
        env.generation.seed = config_.seed;
        env.retriever = retriever_ ? &*retriever_ : nullptr;
        env.config = config_;
        env.metric = metric_;
        return env;
    }

private:
    Options options_;
    MetricDef metric_;
    RunConfig config_;
    std::unique_ptr<Verifier> verifier_;
    std::unique_ptr<GeneratorBackend> generator_;
    std::optional<Retriever> retriever_;
};

DatasetEntry find_declaration(const std::string& source, const std::string& path, const std::string& decl) {
    auto entries = parse_lean_source(source, path);
    for (auto& e : entries) {
        if (e.theorem.name == decl) return e;
    }
    if (decl.empty() && entries.size() == 1) return entries.front();
    std::string known;
    for (const auto& e : entries) known += (known.empty() ? "" : ", ") + e.theorem.name;
    throw Error(ErrorKind::not_found, "declaration '" + decl + "' not found in " + path +
                                          (known.empty() ? "" : " (found: " + known + ")"));
}

int cmd_optimize(const Options& o, const std::string& file, const std::string& decl, const std::string& out) {
    auto source = read_text(file);
    auto entry = find_declaration(source, file, decl);
    Runtime rt(o);
    auto outcome = run_sampler(rt.env(), entry.theorem);
    const auto& r = outcome.result;

    auto target = out.empty() ? file + ".opt" : out;
    std::ofstream(target, std::ios::binary)
        << splice_proof(source, entry, r.proof.value_or(entry.theorem.initial_proof));

    double final_score = r.metric_score.value_or(outcome.baseline_score);
    std::string unit = rt.metric().improvement_kind == ImprovementKind::percent_change ? "%" : "";
    char imp[64];
    std::snprintf(imp, sizeof(imp), "%.1f", r.improvement);
    std::cout << show(outcome.baseline_score) << " → " << show(final_score) << ", improvement " << imp << unit
              << "\n";
    if (outcome.fell_back) std::cout << "no correct rewrite found; kept the input proof\n";
    std::cout << "wrote " << target << "\n";
    if (!outcome.failure.empty()) {
        std::cerr << "warning: " << outcome.failure << "\n";
        // A run that never reached the generator is a backend failure, not a
        // legitimately unimproved proof.
        for (auto k : {ErrorKind::backend_unavailable, ErrorKind::backend_exhausted, ErrorKind::timeout,
                       ErrorKind::protocol_error, ErrorKind::embedder_unavailable}) {
            if (outcome.failure.rfind(std::string(to_string(k)) + ":", 0) == 0) return kExitBackend;
        }
    }
    return 0;
}

int cmd_annotate(const Options& o, const std::string& file, const std::string& decl) {
    auto source = read_text(file);
    auto entry = find_declaration(source, file, decl);
    Runtime rt(o);
    auto checked = rt.verifier().verify(entry.theorem, entry.theorem.initial_proof);
    if (checked.states.empty() && !checked.errors.empty() && checked.errors.front().message == "timeout") {
        throw Error(ErrorKind::timeout, "verifier timed out");
    }
    std::cout << entry.theorem.statement << "\n"
              << annotate_chain_of_states(entry.theorem.initial_proof, checked.states) << "\n";
    return 0;
}

int cmd_score(const Options& o, const std::string& file, const std::string& decl, const std::string& proof_file) {
    auto source = read_text(file);
    auto entry = find_declaration(source, file, decl);
    Runtime rt(o);
    auto& verifier = rt.verifier();
    auto base_check = verifier.verify(entry.theorem, entry.theorem.initial_proof);
    double base = score(rt.metric(), entry.theorem.initial_proof, base_check);
    json out{{"declaration", entry.theorem.name},
             {"metric", rt.metric().name},
             {"score", base},
             {"tactics", count_tactics(entry.theorem.initial_proof)},
             {"correct", is_correct(base_check)},
             {"errors", base_check.error_messages()}};
    if (!proof_file.empty()) {
        auto candidate = parse_tactic_proof(strip_state_comments(read_text(proof_file)));
        auto check = verifier.verify(entry.theorem, candidate);
        double s = score(rt.metric(), candidate, check);
        auto report = make_score_report(rt.metric(), base, s, is_correct(check));
        out["candidate"] = json{{"score", s},
                                {"tactics", count_tactics(candidate)},
                                {"correct", report.correct},
                                {"improvement", report.improvement},
                                {"errors", check.error_messages()}};
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_index(const Options& o, const std::string& docs, const std::string& examples, const std::string& out) {
    auto embedder = make_embedder(o.embedder);
    auto summary = build_index(docs, examples, out, *embedder);
    std::cout << "syntax chunks: " << summary.syntax_chunks << "\n"
              << "library chunks: " << summary.library_chunks << "\n";
    for (const auto& [id, n] : summary.example_pairs) std::cout << "examples/" << id << ": " << n << " pairs\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_bench(const Options& o, const std::string& dataset_path, const std::string& out, const std::string& grid,
              bool chain, const std::string& label) {
    Runtime rt(o);
    LoadOptions lo;
    lo.require_correct = rt.metric().scorer != Scorer::completion;
    auto dataset = load_dataset(dataset_path, &rt.verifier(), lo);
    auto env = rt.env();
    if (grid.empty()) {
        auto report = run_benchmark(dataset, env, o.concurrency, label);
        write_report(report, out);
        std::cout << format_aggregates_table({report});
    } else {
        auto groups = load_ablation_grid(json::parse(read_text(grid)));
        auto results = run_ablation(groups, dataset, env, o.concurrency, chain);
        write_ablation(results, out);
        for (const auto& res : results) {
            std::cout << "[" << res.group << "]\n" << format_aggregates_table(res.reports, res.winner) << "\n";
        }
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rewrite Lean tactic proofs to optimize a metric."};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--metric", o.metric, "Metric name (length, readability, completion, or from --metrics)");
    app.add_option("--metrics", o.metrics_file, "JSON file with additional metric definitions");
    app.add_option("--config", o.config_file, "Run configuration JSON");
    app.add_flag("--mock", o.mock, "Use a scripted generator and a fixture verifier (offline)");
    app.add_option("--script", o.script, "Generator script for --mock");
    app.add_option("--fixtures", o.fixtures, "Verifier fixtures for --mock");
    app.add_option("--backend-cmd", o.backend_cmd, "Verifier command (default: $PROOFOPT_VERIFIER)");
    app.add_option("--concurrency", o.concurrency, "Parallel theorems and verifier processes")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", o.seed, "Overrides the configured seed");
    app.add_flag("--no-retrieval", o.no_retrieval, "Disable retrieval augmentation");
    app.add_option("--index", o.index_dir, "Retrieval store directory built by `index`");
    app.add_option("--embedder", o.embedder, "hashing or remote:<model>:<dimension>");
    app.add_option("--model", o.model, "Chat model name");
    app.add_option("--temperature", o.temperature, "Sampling temperature");
    app.add_option("--timeout-ms", o.timeout_ms, "Per-check verifier timeout");
    app.add_option("--cache", o.cache_dir, "Verification result cache directory");

    std::string file, decl, out, bench_out = "bench_report", proof_file, docs, examples, dataset, grid, label = "run";
    bool no_chain = false;

    auto* optimize = app.add_subcommand("optimize", "Optimize one declaration and write <file>.opt");
    optimize->add_option("file", file, "Lean source")->required();
    optimize->add_option("--decl", decl, "Declaration name");
    optimize->add_option("-o,--out", out, "Output path");

    auto* annotate = app.add_subcommand("annotate", "Print a declaration with its proof states");
    annotate->add_option("file", file, "Lean source")->required();
    annotate->add_option("--decl", decl, "Declaration name");

    auto* score_cmd = app.add_subcommand("score", "Score a declaration's proof, or a candidate against it");
    score_cmd->add_option("file", file, "Lean source")->required();
    score_cmd->add_option("--decl", decl, "Declaration name");
    score_cmd->add_option("--proof", proof_file, "Candidate tactic block");

    auto* index = app.add_subcommand("index", "Build retrieval stores");
    index->add_option("--docs", docs, "Directory of *.md syntax docs and *.lean library sources")->required();
    index->add_option("--examples", examples, "Directory with one subdirectory per example store")->required();
    index->add_option("-o,--out", out, "Store directory")->required();

    auto* bench = app.add_subcommand("bench", "Run a benchmark or an ablation over a dataset");
    bench->add_option("dataset", dataset, "Lean file or directory")->required();
    bench->add_option("-o,--out", bench_out, "Report directory")->capture_default_str();
    bench->add_option("--ablate", grid, "Ablation grid JSON");
    bench->add_flag("--no-chain", no_chain, "Start every ablation group from the base configuration");
    bench->add_option("--label", label, "Row label in the table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (*optimize) return cmd_optimize(o, file, decl, out);
        if (*annotate) return cmd_annotate(o, file, decl);
        if (*score_cmd) return cmd_score(o, file, decl, proof_file);
        if (*index) return cmd_index(o, docs, examples, out);
        if (*bench) return cmd_bench(o, dataset, bench_out, grid, !no_chain, label);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_backend_error(e.kind()) ? kExitBackend : kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
