// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "proofopt/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "http.hpp"
#include "proofopt/error.hpp"
#include "text_util.hpp"

namespace proofopt {

using json = nlohmann::json;

namespace {

bool is_markdown_header(std::string_view line) {
    std::size_t n = 0;
    while (n < line.size() && line[n] == '#') ++n;
    return n >= 1 && n <= 6 && n < line.size() && line[n] == ' ';
}

bool is_declaration_start(std::string_view line) {
    for (std::string_view kw : {"theorem", "lemma", "example", "def"}) {
        if (text::starts_with(line, kw) && (line.size() == kw.size() || text::is_space(line[kw.size()]))) {
            return true;
        }
    }
    return false;
}

template <typename IsBoundary>
std::vector<std::size_t> section_starts(std::string_view doc, IsBoundary is_boundary, bool track_fences) {
    std::vector<std::size_t> starts{0};
    bool in_fence = false;
    std::size_t pos = 0;
    while (pos < doc.size()) {
        auto nl = doc.find('\n', pos);
        auto end = nl == std::string_view::npos ? doc.size() : nl;
        auto line = doc.substr(pos, end - pos);
        if (track_fences && text::starts_with(line, "```")) {
            in_fence = !in_fence;
        } else if (!in_fence && pos > 0 && is_boundary(line)) {
            starts.push_back(pos);
        }
        pos = end + 1;
    }
    return starts;
}

void window(std::string_view doc, std::size_t begin, std::size_t end, const ChunkParams& p, const std::string& source,
            ChunkKind kind, std::vector<Chunk>& out) {
    std::size_t start = begin;
    for (;;) {
        std::size_t stop = std::min(start + p.max_chunk, end);
        if (stop < end) {
            // Prefer a paragraph break in the back half of the window.
            std::size_t floor = start + std::max(p.max_chunk / 2, p.overlap + 1);
            auto para = doc.rfind("\n\n", stop - 2);
            if (para != std::string_view::npos && para + 2 > floor && para + 2 <= stop) stop = para + 2;
        }
        out.push_back(Chunk{std::string(doc.substr(start, stop - start)), source, start, kind});
        if (stop >= end) break;
        start = stop - p.overlap;
    }
}

std::vector<Chunk> chunk_sections(std::string_view doc, const std::vector<std::size_t>& starts,
                                  const ChunkParams& p, const std::string& source, ChunkKind kind) {
    if (p.overlap >= p.max_chunk) {
        throw Error(ErrorKind::bad_config, "chunk overlap must be smaller than the chunk size");
    }
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        std::size_t b = starts[i];
        std::size_t e = i + 1 < starts.size() ? starts[i + 1] : doc.size();
        if (text::trim(doc.substr(b, e - b)).empty()) continue;
        window(doc, b, e, p, source, kind, out);
    }
    return out;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void normalize(std::vector<float>& v) {
    double norm = 0;
    for (float x : v) norm += static_cast<double>(x) * x;
    if (norm == 0) return;
    norm = std::sqrt(norm);
    for (float& x : v) x = static_cast<float>(x / norm);
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::io_error, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir, std::string_view suffix) {
    std::vector<std::filesystem::path> out;
    if (dir.empty() || !std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && text::ends_with(e.path().filename().string(), suffix)) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::string_view to_string(ChunkKind kind) {
    switch (kind) {
        case ChunkKind::syntax_doc: return "syntax_doc";
        case ChunkKind::library_doc: return "library_doc";
        case ChunkKind::example_pair: return "example_pair";
    }
    return "?";
}

NLOHMANN_JSON_SERIALIZE_ENUM(ChunkKind, {{ChunkKind::syntax_doc, "syntax_doc"},
                                         {ChunkKind::library_doc, "library_doc"},
                                         {ChunkKind::example_pair, "example_pair"}})

std::vector<Chunk> chunk_markdown(std::string_view doc, ChunkParams params, const std::string& source) {
    return chunk_sections(doc, section_starts(doc, is_markdown_header, true), params, source,
                          ChunkKind::syntax_doc);
}

std::vector<Chunk> chunk_theorem_corpus(std::string_view doc, ChunkParams params, const std::string& source) {
    return chunk_sections(doc, section_starts(doc, is_declaration_start, false), params, source,
                          ChunkKind::library_doc);
}

// ---------------------------------------------------------------- embedders

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::size_t ngram) : dimension_(dimension), ngram_(ngram) {
    if (dimension_ == 0 || ngram_ == 0) throw Error(ErrorKind::bad_config, "embedder dimension and n-gram must be positive");
}

std::string HashingEmbedder::id() const {
    return "hashing-n" + std::to_string(ngram_) + "-d" + std::to_string(dimension_);
}

std::vector<float> HashingEmbedder::embed(std::string_view text) {
    std::string lowered(text);
    for (char& c : lowered) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    std::vector<float> v(dimension_, 0.0f);
    auto add = [&](std::string_view gram) {
        auto h = fnv1a(gram);
        v[h % dimension_] += (h >> 63) ? -1.0f : 1.0f;
    };
    if (lowered.size() < ngram_) {
        if (!lowered.empty()) add(lowered);
    } else {
        for (std::size_t i = 0; i + ngram_ <= lowered.size(); ++i) add(std::string_view(lowered).substr(i, ngram_));
    }
    normalize(v);
    return v;
}

RemoteEmbedder::RemoteEmbedder(std::string model, std::size_t dimension)
    : model_(std::move(model)), dimension_(dimension) {}

std::vector<float> RemoteEmbedder::embed(std::string_view text) {
    auto key = http::env_or("OPENAI_API_KEY", "");
    if (key.empty()) throw Error(ErrorKind::embedder_unavailable, "OPENAI_API_KEY is not set");
    auto base = http::env_or("OPENAI_BASE_URL", "https://api.openai.com/v1");
    json body{{"model", model_}, {"input", std::string(text)}, {"dimensions", dimension_}};
    http::Response res;
    try {
        res = http::post_json(base, "/embeddings", body, key, std::chrono::seconds(60));
    } catch (const Error& e) {
        throw Error(ErrorKind::embedder_unavailable, e.what());
    }
    if (res.status != 200) {
        throw Error(ErrorKind::embedder_unavailable, "embeddings request returned HTTP " + std::to_string(res.status));
    }
    try {
        auto v = json::parse(res.body).at("data").at(0).at("embedding").get<std::vector<float>>();
        if (v.size() != dimension_) throw Error(ErrorKind::dimension_mismatch, "embedding has wrong dimension");
        normalize(v);
        return v;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::embedder_unavailable, std::string("bad embeddings response: ") + e.what());
    }
}

// ---------------------------------------------------------------- store

VectorStore::VectorStore(std::string embedder_id, std::size_t dimension, ChunkParams params)
    : embedder_id_(std::move(embedder_id)), dimension_(dimension), params_(params) {}

void VectorStore::add(Chunk chunk, std::vector<float> vector) {
    if (vector.size() != dimension_) {
        throw Error(ErrorKind::dimension_mismatch, "vector of dimension " + std::to_string(vector.size()) +
                                                       " in a store of dimension " + std::to_string(dimension_));
    }
    entries_.push_back(StoreEntry{std::move(chunk), std::move(vector)});
}

VectorStore VectorStore::build(const std::vector<Chunk>& chunks, Embedder& embedder, ChunkParams params) {
    VectorStore store(embedder.id(), embedder.dimension(), params);
    for (const auto& c : chunks) store.add(c, embedder.embed(c.text));
    return store;
}

static_assert(std::endian::native == std::endian::little, "vectors.bin is written in host byte order");

void VectorStore::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    {
        std::ofstream chunks(dir / "chunks.jsonl", std::ios::binary);
        for (const auto& e : entries_) {
            chunks << json{{"text", e.chunk.text},
                           {"source", e.chunk.source},
                           {"offset", e.chunk.offset},
                           {"kind", e.chunk.kind}}
                          .dump()
                   << '\n';
        }
    }
    {
        std::ofstream vectors(dir / "vectors.bin", std::ios::binary);
        for (const auto& e : entries_) {
            vectors.write(reinterpret_cast<const char*>(e.vector.data()),
                          static_cast<std::streamsize>(e.vector.size() * sizeof(float)));
        }
    }
    // The manifest goes last so a half-written store is never loadable.
    std::ofstream manifest(dir / "manifest.json");
    manifest << json{{"format", 1},
                     {"embedder_id", embedder_id_},
                     {"dimension", dimension_},
                     {"max_chunk", params_.max_chunk},
                     {"overlap", params_.overlap},
                     {"count", entries_.size()}}
                    .dump(2)
             << '\n';
    if (!manifest) throw Error(ErrorKind::io_error, "cannot write store in " + dir.string());
}

VectorStore VectorStore::load(const std::filesystem::path& dir) {
    auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
        throw Error(ErrorKind::store_missing, "no vector store at " + dir.string());
    }
    try {
        auto m = json::parse(read_text(manifest_path));
        VectorStore store(m.at("embedder_id").get<std::string>(), m.at("dimension").get<std::size_t>(),
                          ChunkParams{m.at("max_chunk").get<std::size_t>(), m.at("overlap").get<std::size_t>()});
        auto count = m.at("count").get<std::size_t>();
        std::ifstream chunks(dir / "chunks.jsonl", std::ios::binary);
        std::ifstream vectors(dir / "vectors.bin", std::ios::binary);
        std::string line;
        for (std::size_t i = 0; i < count; ++i) {
            if (!std::getline(chunks, line)) throw Error(ErrorKind::io_error, "truncated chunks.jsonl");
            auto j = json::parse(line);
            Chunk c{j.at("text"), j.at("source"), j.at("offset"), j.at("kind").get<ChunkKind>()};
            std::vector<float> v(store.dimension());
            vectors.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
            if (!vectors) throw Error(ErrorKind::io_error, "truncated vectors.bin");
            store.add(std::move(c), std::move(v));
        }
        return store;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io_error, "corrupt store at " + dir.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- MMR

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) throw Error(ErrorKind::dimension_mismatch, "vectors differ in dimension");
    double dot = 0;
    double na = 0;
    double nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::size_t> mmr_select_indices(const std::vector<float>& query,
                                            const std::vector<std::vector<float>>& candidates, std::size_t k,
                                            double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw Error(ErrorKind::bad_config, "MMR lambda must lie in [0, 1]");
    const std::size_t n = candidates.size();
    std::vector<double> relevance(n);
    for (std::size_t i = 0; i < n; ++i) relevance[i] = cosine_similarity(query, candidates[i]);

    std::vector<std::size_t> picked;
    std::vector<bool> used(n, false);
    // max similarity of each candidate to anything picked so far
    std::vector<double> redundancy(n, -std::numeric_limits<double>::infinity());
    while (picked.size() < std::min(k, n)) {
        std::size_t best = n;
        double best_score = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            double s = picked.empty() ? relevance[i] : lambda * relevance[i] - (1.0 - lambda) * redundancy[i];
            if (best == n || s > best_score) {
                best = i;
                best_score = s;
            }
        }
        used[best] = true;
        picked.push_back(best);
        for (std::size_t i = 0; i < n; ++i) {
            if (!used[i]) redundancy[i] = std::max(redundancy[i], cosine_similarity(candidates[i], candidates[best]));
        }
    }
    return picked;
}

std::vector<Chunk> mmr_select(const std::vector<float>& query, const VectorStore& store, std::size_t k,
                              double lambda) {
    if (query.size() != store.dimension() && store.size() > 0) {
        throw Error(ErrorKind::dimension_mismatch, "query dimension " + std::to_string(query.size()) +
                                                       " against store dimension " +
                                                       std::to_string(store.dimension()));
    }
    std::vector<std::vector<float>> vectors;
    vectors.reserve(store.size());
    for (const auto& e : store.entries()) vectors.push_back(e.vector);
    std::vector<Chunk> out;
    for (auto i : mmr_select_indices(query, vectors, k, lambda)) out.push_back(store.entries()[i].chunk);
    return out;
}

// ---------------------------------------------------------------- examples and index

std::vector<ExamplePair> load_example_pairs(const std::filesystem::path& dir, const std::string& metric) {
    std::vector<ExamplePair> out;
    const std::string suffix = ".before.lean";
    for (const auto& before : sorted_files(dir, suffix)) {
        auto name = before.filename().string();
        auto after = dir / (name.substr(0, name.size() - suffix.size()) + ".after.lean");
        if (!std::filesystem::exists(after)) throw Error(ErrorKind::bad_config, "no matching " + after.string());
        ExamplePair pair{metric, read_text(before), read_text(after)};
        for (const auto& [path, src] : {std::pair{before, pair.before}, std::pair{after, pair.after}}) {
            auto by = src.find(":= by");
            auto body = by == std::string::npos ? src : src.substr(by + 5);
            try {
                parse_tactic_proof(strip_state_comments(body));
            } catch (const Error& e) {
                throw Error(ErrorKind::bad_config, path.string() + " is not a tactic proof: " + e.what());
            }
        }
        out.push_back(std::move(pair));
    }
    return out;
}

std::string format_example(const ExamplePair& pair) {
    return "Input:\n" + std::string(text::trim(pair.before)) + "\n\nOutput:\n" + std::string(text::trim(pair.after));
}

IndexSummary build_index(const std::filesystem::path& docs_dir, const std::filesystem::path& examples_dir,
                         const std::filesystem::path& out_dir, Embedder& embedder, ChunkParams params) {
    IndexSummary summary;
    auto collect = [&](std::string_view suffix, auto chunker) {
        std::vector<Chunk> chunks;
        for (const auto& f : sorted_files(docs_dir, suffix)) {
            auto more = chunker(read_text(f), params, f.filename().string());
            chunks.insert(chunks.end(), more.begin(), more.end());
        }
        return chunks;
    };
    auto syntax = collect(".md", chunk_markdown);
    auto library = collect(".lean", chunk_theorem_corpus);
    if (!syntax.empty()) VectorStore::build(syntax, embedder, params).save(out_dir / "syntax");
    if (!library.empty()) VectorStore::build(library, embedder, params).save(out_dir / "library");
    summary.syntax_chunks = syntax.size();
    summary.library_chunks = library.size();

    if (!examples_dir.empty() && std::filesystem::is_directory(examples_dir)) {
        std::vector<std::filesystem::path> dirs;
        for (const auto& e : std::filesystem::directory_iterator(examples_dir)) {
            if (e.is_directory()) dirs.push_back(e.path());
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) {
            auto id = d.filename().string();
            VectorStore store(embedder.id(), embedder.dimension(), params);
            for (const auto& pair : load_example_pairs(d, id)) {
                store.add(Chunk{format_example(pair), id, 0, ChunkKind::example_pair}, embedder.embed(pair.before));
            }
            store.save(out_dir / "examples" / id);
            summary.example_pairs[id] = store.size();
        }
    }
    return summary;
}

// ---------------------------------------------------------------- retriever

Retriever::Retriever(std::shared_ptr<Embedder> embedder, double lambda)
    : embedder_(std::move(embedder)), lambda_(lambda) {
    if (!embedder_) throw Error(ErrorKind::embedder_unavailable, "no embedder configured");
}

Retriever Retriever::open(const std::filesystem::path& root, std::shared_ptr<Embedder> embedder, double lambda) {
    Retriever r(std::move(embedder), lambda);
    auto load_checked = [&](const std::filesystem::path& dir) {
        auto store = VectorStore::load(dir);
        if (store.embedder_id() != r.embedder_->id()) {
            throw Error(ErrorKind::bad_config, dir.string() + " was built with embedder " + store.embedder_id() +
                                                   ", not " + r.embedder_->id());
        }
        return store;
    };
    if (std::filesystem::exists(root / "syntax" / "manifest.json")) r.syntax_ = load_checked(root / "syntax");
    if (std::filesystem::exists(root / "library" / "manifest.json")) r.library_ = load_checked(root / "library");
    if (std::filesystem::is_directory(root / "examples")) {
        for (const auto& e : std::filesystem::directory_iterator(root / "examples")) {
            if (std::filesystem::exists(e.path() / "manifest.json")) {
                r.examples_[e.path().filename().string()] = load_checked(e.path());
            }
        }
    }
    return r;
}

std::vector<std::string> Retriever::query(const VectorStore* store, const std::string& what,
                                          const std::string& text, std::size_t k, double lambda) const {
    if (k == 0) return {};
    if (!store) throw Error(ErrorKind::store_missing, "no " + what + " store loaded");
    std::vector<std::string> out;
    for (auto& c : mmr_select(embedder_->embed(text), *store, k, lambda)) out.push_back(std::move(c.text));
    return out;
}

Retrieved Retriever::retrieve(const TheoremEntry& entry, const std::string& proof_text,
                              const std::vector<std::string>& errors, const MetricDef& metric,
                              const RetrievalCounts& counts, std::optional<double> lambda) const {
    Retrieved out;
    const double l = lambda.value_or(lambda_);
    out.library_docs = query(library_ ? &*library_ : nullptr, "library", entry.statement + "\n" + proof_text, counts.library_docs, l);

    std::string syntax_query = entry.statement + "\n" + entry.context;
    for (const auto& e : errors) syntax_query += "\n" + e;
    out.syntax_docs = query(syntax_ ? &*syntax_ : nullptr, "syntax", syntax_query, counts.syntax_docs, l);

    auto id = metric.example_store_id.empty() ? metric.name : metric.example_store_id;
    auto it = examples_.find(id);
    const VectorStore* examples = it == examples_.end() ? nullptr : &it->second;
    out.examples = query(examples, "example (" + id + ")", entry.statement, counts.examples, l);
    return out;
}

}  // namespace proofopt
