// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "proofopt/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "proofopt/error.hpp"
#include "text_util.hpp"

namespace proofopt {

using json = nlohmann::json;

// ---------------------------------------------------------------- ingestion

namespace {

struct Line {
    std::size_t begin;
    std::size_t end;  // excluding the newline
};

std::vector<Line> line_table(const std::string& s) {
    std::vector<Line> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto nl = s.find('\n', pos);
        auto end = nl == std::string::npos ? s.size() : nl;
        out.push_back(Line{pos, end});
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return out;
}

// Keyword of a declaration starting at column 0, after any modifiers.
std::optional<std::pair<std::string, std::string_view>> declaration_keyword(std::string_view line) {
    static const std::set<std::string, std::less<>> modifiers{"private", "protected", "noncomputable", "nonrec",
                                                              "unsafe", "partial"};
    if (line.empty() || text::is_space(line[0])) return std::nullopt;
    std::string_view rest = line;
    for (;;) {
        if (text::starts_with(rest, "@[")) {
            auto close = rest.find(']');
            if (close == std::string_view::npos) return std::nullopt;
            rest = text::trim(rest.substr(close + 1));
            continue;
        }
        auto word = text::first_word(rest);
        if (modifiers.count(word)) {
            rest = text::trim(rest.substr(word.size()));
            continue;
        }
        if (word == "theorem" || word == "lemma" || word == "example" || word == "def") {
            return std::make_pair(word, text::trim(rest.substr(word.size())));
        }
        return std::nullopt;
    }
}

std::size_t find_by(const std::string& s, std::size_t from, std::size_t limit) {
    for (auto p = s.find(":= by", from); p != std::string::npos && p < limit; p = s.find(":= by", p + 1)) {
        auto after = p + 5;
        if (after == s.size() || text::is_space(s[after])) return p;
    }
    return std::string::npos;
}

}  // namespace

std::vector<DatasetEntry> parse_lean_source(const std::string& source, const std::string& source_path,
                                            const std::string& dataset_id) {
    auto lines = line_table(source);
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view l(source.data() + lines[i].begin, lines[i].end - lines[i].begin);
        if (declaration_keyword(l)) starts.push_back(i);
    }

    std::vector<DatasetEntry> out;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        std::size_t li = starts[k];
        std::size_t decl = lines[li].begin;
        std::size_t next_decl = k + 1 < starts.size() ? lines[starts[k + 1]].begin : source.size();
        auto by = find_by(source, decl, next_decl);
        if (by == std::string::npos) continue;  // term-mode declaration

        std::string_view first(source.data() + lines[li].begin, lines[li].end - lines[li].begin);
        auto [keyword, rest] = *declaration_keyword(first);
        std::string name = keyword == "example" ? "example_" + std::to_string(li + 1)
                                                : std::string(rest.substr(0, rest.find_first_of(" \t({[:")));

        // The proof runs until the next non-blank line at column 0.
        std::size_t body_begin = by + 5;
        std::size_t body_end = source.size();
        for (const auto& l : lines) {
            if (l.begin <= body_begin || l.begin == l.end) continue;
            if (!text::is_space(source[l.begin])) {
                body_end = l.begin;
                break;
            }
        }

        DatasetEntry e;
        e.dataset_id = dataset_id;
        e.theorem.name = name;
        e.theorem.source_path = source_path;
        e.theorem.context = source.substr(0, decl);
        std::size_t proof_begin = body_begin;
        for (const auto& l : lines) {
            if (l.begin < body_begin || l.begin >= body_end) continue;
            if (text::trim(std::string_view(source.data() + l.begin, l.end - l.begin)) == "-- PROOF START") {
                e.marker_offset = l.begin;
                proof_begin = std::min(l.end + 1, body_end);
                break;
            }
        }
        e.proof_span = SourceSpan{proof_begin, body_end};
        e.theorem.statement = std::string(text::trim_right(source.substr(decl, proof_begin - decl)));
        try {
            e.theorem.initial_proof =
                parse_tactic_proof(strip_state_comments(source.substr(proof_begin, body_end - proof_begin)));
        } catch (const Error& err) {
            throw Error(err.kind(), source_path + ": " + name + ": " + err.what());
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::string splice_proof(const std::string& source, const DatasetEntry& entry, const TacticProof& proof) {
    const auto& span = entry.proof_span;
    if (span.end > source.size() || span.begin > span.end) {
        throw Error(ErrorKind::bad_config, "proof span lies outside the source");
    }
    std::string head = source.substr(0, span.begin);
    // The tactic block starts on its own line.
    if (!head.empty() && head.back() != '\n') head = std::string(text::trim_right(head)) + "\n";
    std::string tail = source.substr(span.end);
    std::string body = render_proof(proof) + "\n";
    if (!tail.empty()) body += "\n";
    return head + body + tail;
}

namespace {

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::io_error, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::vector<DatasetEntry> load_dataset(const std::filesystem::path& root, Verifier* verifier, LoadOptions options) {
    namespace fs = std::filesystem;
    if (!fs::exists(root)) throw Error(ErrorKind::not_found, "dataset path " + root.string() + " does not exist");

    std::vector<fs::path> files;
    std::string dataset_id = root.stem().string();
    std::optional<json> selection;
    if (fs::is_directory(root)) {
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (e.is_regular_file() && e.path().extension() == ".lean") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (fs::exists(root / "manifest.json")) {
            try {
                auto manifest = json::parse(read_text(root / "manifest.json"));
                dataset_id = manifest.value("dataset_id", dataset_id);
                if (manifest.contains("files")) selection = manifest["files"];
            } catch (const json::exception& e) {
                throw Error(ErrorKind::bad_config, "bad dataset manifest: " + std::string(e.what()));
            }
        }
    } else {
        files.push_back(root);
    }

    std::vector<DatasetEntry> entries;
    for (const auto& f : files) {
        auto rel = fs::is_directory(root) ? fs::relative(f, root).generic_string() : f.filename().string();
        if (selection && !selection->contains(rel)) continue;
        auto parsed = parse_lean_source(read_text(f), rel, dataset_id);
        if (!selection) {
            entries.insert(entries.end(), parsed.begin(), parsed.end());
            continue;
        }
        for (const auto& wanted : (*selection)[rel]) {
            auto name = wanted.get<std::string>();
            auto it = std::find_if(parsed.begin(), parsed.end(), [&](const auto& e) { return e.theorem.name == name; });
            if (it == parsed.end()) {
                throw Error(ErrorKind::not_found, "manifest lists " + rel + ": " + name + ", which does not exist");
            }
            entries.push_back(*it);
        }
    }
    if (entries.empty()) {
        throw Error(ErrorKind::no_theorems_found, "no tactic-proof declarations under " + root.string());
    }

    if (verifier && options.require_correct) {
        std::string offenders;
        for (const auto& e : entries) {
            auto r = verifier->verify(e.theorem, e.theorem.initial_proof);
            if (is_correct(r)) continue;
            auto msgs = r.error_messages();
            offenders += "\n  " + e.theorem.source_path + ": " + e.theorem.name + ": " +
                         (msgs.empty() ? std::string("unsolved") : msgs.front());
        }
        if (!offenders.empty()) {
            throw Error(ErrorKind::ingest_verification_failed, "initial proofs do not verify:" + offenders);
        }
    }
    return entries;
}

// ---------------------------------------------------------------- measures

Aggregates compute_performance_metrics(const std::vector<BenchRow>& rows) {
    if (rows.empty()) throw Error(ErrorKind::empty_dataset, "no rows to aggregate");
    Aggregates a;
    a.count = rows.size();
    double total = 0;
    double nonzero_total = 0;
    std::size_t nonzero = 0;
    std::size_t correct = 0;
    for (const auto& r : rows) {
        double imp = r.correct ? r.improvement : 0.0;
        total += imp;
        if (r.correct) ++correct;
        if (r.correct && imp != 0.0) {
            nonzero_total += imp;
            ++nonzero;
        }
    }
    const double n = static_cast<double>(rows.size());
    a.improvement_mean = total / n;
    a.nonempty_improvement_mean = nonzero == 0 ? 0.0 : nonzero_total / static_cast<double>(nonzero);
    a.accuracy_pct = 100.0 * static_cast<double>(correct) / n;
    a.improved_accuracy_pct = 100.0 * static_cast<double>(nonzero) / n;
    return a;
}

// ---------------------------------------------------------------- runs

BenchmarkReport run_benchmark(const std::vector<DatasetEntry>& dataset, const SamplerEnv& env,
                              std::size_t concurrency, const std::string& label) {
    auto started = std::chrono::steady_clock::now();
    BenchmarkReport report;
    report.label = label;
    report.metric = env.metric.name;
    report.config = env.config;
    report.rows.resize(dataset.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < dataset.size(); i = next++) {
            const auto& entry = dataset[i].theorem;
            BenchRow& row = report.rows[i];
            row.name = entry.name;
            try {
                auto outcome = run_sampler(env, entry);
                const auto& r = outcome.result;
                row.baseline_score = outcome.baseline_score;
                row.final_score = r.metric_score.value_or(outcome.baseline_score);
                row.correct = r.correct;
                row.improvement = r.correct ? r.improvement : 0.0;
                row.improved = r.correct && row.improvement != 0.0;
                row.fell_back = outcome.fell_back;
                row.generations = outcome.generations;
                row.failure = outcome.failure;
                row.final_proof = r.proof_text();
            } catch (const std::exception& e) {
                row.correct = false;
                row.failure = e.what();
            }
        }
    };
    std::size_t workers = std::max<std::size_t>(1, std::min(concurrency, dataset.size()));
    std::vector<std::thread> threads;
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    if (!report.rows.empty()) report.aggregates = compute_performance_metrics(report.rows);
    report.wall = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    return report;
}

void to_json(json& j, const BenchRow& r) {
    j = json{{"name", r.name},
             {"baseline_score", r.baseline_score},
             {"final_score", r.final_score},
             {"improvement", r.improvement},
             {"correct", r.correct},
             {"improved", r.improved},
             {"fell_back", r.fell_back},
             {"generations", r.generations},
             {"failure", r.failure},
             {"final_proof", r.final_proof}};
}

void to_json(json& j, const Aggregates& a) {
    j = json{{"improvement", a.improvement_mean},
             {"nonempty_improvement", a.nonempty_improvement_mean},
             {"accuracy_pct", a.accuracy_pct},
             {"improved_accuracy_pct", a.improved_accuracy_pct},
             {"count", a.count}};
}

namespace {

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw Error(ErrorKind::io_error, "cannot write " + p.string());
}

std::string safe_name(const std::string& label) {
    std::string out;
    for (char c : label) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-' || c == '=';
        out += ok ? c : '_';
    }
    return out.empty() ? "_" : out;
}

}  // namespace

std::string format_aggregates_table(const std::vector<BenchmarkReport>& reports, std::optional<std::size_t> winner) {
    std::vector<std::vector<std::string>> cells{
        {"Config", "Improvement", "Nonempty Improvement", "Accuracy", "Improved Acc."}};
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& a = reports[i].aggregates;
        std::string label = (winner && *winner == i ? "* " : "") + reports[i].label;
        cells.push_back({label, fixed2(a.improvement_mean), fixed2(a.nonempty_improvement_mean),
                         fixed2(a.accuracy_pct) + "%", fixed2(a.improved_accuracy_pct) + "%"});
    }
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], text::columns(row[c]));
    }
    std::string out;
    for (const auto& row : cells) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::string pad(width[c] - text::columns(row[c]), ' ');
            line += c == 0 ? row[c] + pad : "  " + pad + row[c];
        }
        out += std::string(text::trim_right(line)) + "\n";
    }
    return out;
}

void write_report(const BenchmarkReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "rows.json", json(report.rows).dump(2) + "\n");
    write_file(dir / "aggregates.json", json(report.aggregates).dump(2) + "\n");
    write_file(dir / "table.txt", format_aggregates_table({report}));
    write_file(dir / "config.json",
               json{{"label", report.label}, {"metric", report.metric}, {"config", report.config}}.dump(2) + "\n");

    std::string csv = "name,baseline_score,final_score,improvement,correct,improved,fell_back,generations\n";
    for (const auto& r : report.rows) {
        csv += csv_field(r.name) + "," + fixed2(r.baseline_score) + "," + fixed2(r.final_score) + "," +
               fixed2(r.improvement) + "," + (r.correct ? "true" : "false") + "," + (r.improved ? "true" : "false") +
               "," + (r.fell_back ? "true" : "false") + "," + std::to_string(r.generations) + "\n";
    }
    write_file(dir / "rows.csv", csv);
    write_file(dir / "timing.json", json{{"wall_ms", report.wall.count()}}.dump(2) + "\n");
}

// ---------------------------------------------------------------- ablation

std::vector<AblationGroup> load_ablation_grid(const json& doc) {
    std::vector<AblationGroup> groups;
    try {
        for (const auto& g : doc.at("groups")) {
            AblationGroup group;
            group.name = g.at("name").get<std::string>();
            if (g.contains("variants")) {
                for (const auto& v : g["variants"]) {
                    group.variants.push_back(AblationVariant{v.at("label").get<std::string>(), v.at("overrides")});
                }
            }
            if (g.contains("vary")) {
                std::vector<AblationVariant> product{AblationVariant{"", json::object()}};
                for (const auto& [key, values] : g["vary"].items()) {
                    std::vector<AblationVariant> next;
                    for (const auto& base : product) {
                        for (const auto& v : values) {
                            auto variant = base;
                            variant.overrides[key] = v;
                            std::string shown = v.is_string() ? v.get<std::string>() : v.dump();
                            variant.label += (variant.label.empty() ? "" : ",") + key + "=" + shown;
                            next.push_back(std::move(variant));
                        }
                    }
                    product = std::move(next);
                }
                group.variants.insert(group.variants.end(), product.begin(), product.end());
            }
            if (group.variants.empty()) {
                throw Error(ErrorKind::bad_config, "ablation group '" + group.name + "' is empty");
            }
            groups.push_back(std::move(group));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::bad_config, std::string("bad ablation grid: ") + e.what());
    }
    return groups;
}

RunConfig apply_overrides(const RunConfig& base, const json& overrides) {
    json j = base;
    for (const auto& [key, value] : overrides.items()) {
        if (!j.contains(key)) throw Error(ErrorKind::bad_config, "unknown configuration key '" + key + "'");
        j[key] = value;
    }
    return j.get<RunConfig>();
}

std::vector<AblationResult> run_ablation(const std::vector<AblationGroup>& groups,
                                         const std::vector<DatasetEntry>& dataset, const SamplerEnv& base_env,
                                         std::size_t concurrency, bool chain) {
    std::vector<AblationResult> results;
    RunConfig base = base_env.config;
    for (const auto& group : groups) {
        std::vector<std::pair<BenchmarkReport, json>> runs;
        for (const auto& variant : group.variants) {
            SamplerEnv env = base_env;
            env.config = apply_overrides(base, variant.overrides);
            // Settings mirrored in the generation context follow the variant.
            if (env.config.seed != base_env.config.seed) env.generation.seed = env.config.seed;
            if (env.config.backoff.base != base_env.config.backoff.base ||
                env.config.backoff.max_retries != base_env.config.backoff.max_retries) {
                env.generation.backoff = env.config.backoff;
            }
            runs.emplace_back(run_benchmark(dataset, env, concurrency, variant.label), variant.overrides);
        }
        std::stable_sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
            return a.first.aggregates.improvement_mean > b.first.aggregates.improvement_mean;
        });
        AblationResult result;
        result.group = group.name;
        result.winner = 0;
        result.winner_overrides = runs.front().second;
        for (auto& r : runs) result.reports.push_back(std::move(r.first));
        if (chain) base = result.reports.front().config;
        results.push_back(std::move(result));
    }
    return results;
}

void write_ablation(const std::vector<AblationResult>& results, const std::filesystem::path& dir) {
    json summary = json::array();
    for (const auto& res : results) {
        auto group_dir = dir / safe_name(res.group);
        json order = json::array();
        for (const auto& r : res.reports) {
            write_report(r, group_dir / safe_name(r.label));
            order.push_back(r.label);
        }
        write_file(group_dir / "table.txt", format_aggregates_table(res.reports, res.winner));
        summary.push_back({{"group", res.group},
                           {"order", order},
                           {"winner", res.reports.at(res.winner).label},
                           {"winner_overrides", res.winner_overrides}});
    }
    std::filesystem::create_directories(dir);
    write_file(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace proofopt
