// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proofopt/metrics.hpp"
#include "proofopt/proof_model.hpp"

namespace proofopt {

enum class ChunkKind { syntax_doc, library_doc, example_pair };

struct Chunk {
    std::string text;
    std::string source;      // file the chunk came from
    std::size_t offset = 0;  // byte offset of `text` in that file
    ChunkKind kind = ChunkKind::syntax_doc;

    bool operator==(const Chunk&) const = default;
};

struct ChunkParams {
    std::size_t max_chunk = 1000;
    std::size_t overlap = 200;
};

/// Splits at markdown headers; sections longer than `max_chunk` are cut into
/// windows that overlap by exactly `overlap` characters, ending at a
/// paragraph break when one falls in the second half of the window.
/// Throws `bad_config` when `overlap >= max_chunk`.
std::vector<Chunk> chunk_markdown(std::string_view doc, ChunkParams params = {}, const std::string& source = {});

/// Same as `chunk_markdown` but splits at lines starting with `theorem`,
/// `lemma`, `example` or `def`.
std::vector<Chunk> chunk_theorem_corpus(std::string_view doc, ChunkParams params = {},
                                        const std::string& source = {});

class Embedder {
public:
    virtual ~Embedder() = default;
    /// Throws `embedder_unavailable` when the provider cannot be reached.
    virtual std::vector<float> embed(std::string_view text) = 0;
    virtual std::string id() const = 0;
    virtual std::size_t dimension() const = 0;
};

/// Offline embedder: feature-hashed character n-grams, L2-normalized.
class HashingEmbedder : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dimension = 256, std::size_t ngram = 3);

    std::vector<float> embed(std::string_view text) override;
    std::string id() const override;
    std::size_t dimension() const override { return dimension_; }

private:
    std::size_t dimension_;
    std::size_t ngram_;
};

/// Embeddings endpoint of an OpenAI-compatible API. Reads the key from
/// `OPENAI_API_KEY` and the endpoint from `OPENAI_BASE_URL`.
class RemoteEmbedder : public Embedder {
public:
    RemoteEmbedder(std::string model, std::size_t dimension);

    std::vector<float> embed(std::string_view text) override;
    std::string id() const override { return "remote:" + model_; }
    std::size_t dimension() const override { return dimension_; }

private:
    std::string model_;
    std::size_t dimension_;
};

struct StoreEntry {
    Chunk chunk;
    std::vector<float> vector;
};

/// Embedded chunks. On disk: `manifest.json`, `vectors.bin` (little-endian
/// float32, row-major) and `chunks.jsonl`.
class VectorStore {
public:
    VectorStore() = default;
    VectorStore(std::string embedder_id, std::size_t dimension, ChunkParams params);

    static VectorStore build(const std::vector<Chunk>& chunks, Embedder& embedder, ChunkParams params = {});

    /// Throws `store_missing` when `dir` holds no store.
    static VectorStore load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;

    /// Throws `dimension_mismatch`.
    void add(Chunk chunk, std::vector<float> vector);

    const std::vector<StoreEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t dimension() const { return dimension_; }
    const std::string& embedder_id() const { return embedder_id_; }
    const ChunkParams& params() const { return params_; }

private:
    std::string embedder_id_;
    std::size_t dimension_ = 0;
    ChunkParams params_;
    std::vector<StoreEntry> entries_;
};

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b);

/// Greedy Maximum Marginal Relevance over `candidates`; returns indices in
/// selection order. Ties go to the lower index. Throws
/// `dimension_mismatch` or `bad_config` (lambda outside [0, 1]).
std::vector<std::size_t> mmr_select_indices(const std::vector<float>& query,
                                            const std::vector<std::vector<float>>& candidates, std::size_t k,
                                            double lambda);

std::vector<Chunk> mmr_select(const std::vector<float>& query, const VectorStore& store, std::size_t k,
                              double lambda = 0.5);

/// A before/after rewrite illustrating one metric.
struct ExamplePair {
    std::string metric;
    std::string before;
    std::string after;
};

/// Reads `<name>.before.lean` / `<name>.after.lean` pairs from `dir`, sorted
/// by name. Both sides must parse as tactic proofs.
std::vector<ExamplePair> load_example_pairs(const std::filesystem::path& dir, const std::string& metric);

/// Text shown to the generator for an example.
std::string format_example(const ExamplePair& pair);

struct RetrievalCounts {
    std::size_t examples = 10;
    std::size_t syntax_docs = 3;
    std::size_t library_docs = 3;
};

struct Retrieved {
    std::vector<std::string> examples;
    std::vector<std::string> syntax_docs;
    std::vector<std::string> library_docs;
};

/// Index layout under one root: `syntax/`, `library/` and
/// `examples/<store id>/`, each a `VectorStore`.
struct IndexSummary {
    std::size_t syntax_chunks = 0;
    std::size_t library_chunks = 0;
    std::map<std::string, std::size_t> example_pairs;
};

/// Builds every store. `docs_dir` supplies `*.md` syntax docs and `*.lean`
/// library sources; each subdirectory of `examples_dir` is one example
/// store named after the directory.
IndexSummary build_index(const std::filesystem::path& docs_dir, const std::filesystem::path& examples_dir,
                         const std::filesystem::path& out_dir, Embedder& embedder, ChunkParams params = {});

class Retriever {
public:
    Retriever(std::shared_ptr<Embedder> embedder, double lambda = 0.5);

    /// Loads whichever stores exist under `root`.
    static Retriever open(const std::filesystem::path& root, std::shared_ptr<Embedder> embedder,
                          double lambda = 0.5);

    void set_syntax_store(VectorStore store) { syntax_ = std::move(store); }
    void set_library_store(VectorStore store) { library_ = std::move(store); }
    void set_example_store(const std::string& id, VectorStore store) { examples_[id] = std::move(store); }

    /// Library docs are queried with statement + proof, syntax docs with
    /// statement + context + errors, examples with the statement against
    /// the metric's example store. Throws `store_missing` when a nonzero
    /// count needs an absent store. `lambda` overrides the MMR trade-off
    /// given at construction.
    Retrieved retrieve(const TheoremEntry& entry, const std::string& proof_text,
                       const std::vector<std::string>& errors, const MetricDef& metric,
                       const RetrievalCounts& counts, std::optional<double> lambda = std::nullopt) const;

private:
    std::vector<std::string> query(const VectorStore* store, const std::string& what,
                                   const std::string& text, std::size_t k, double lambda) const;

    std::shared_ptr<Embedder> embedder_;
    double lambda_;
    std::optional<VectorStore> syntax_;
    std::optional<VectorStore> library_;
    std::map<std::string, VectorStore> examples_;
};

std::string_view to_string(ChunkKind kind);

}  // namespace proofopt
