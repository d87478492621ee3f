// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "proofopt/verifier.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "proofopt/error.hpp"
#include "text_util.hpp"

extern char** environ;

namespace proofopt {

using json = nlohmann::json;

CheckRequest make_check_request(const TheoremEntry& entry, const TacticProof& proof) {
    return CheckRequest{entry.context, entry.statement, render_proof(proof)};
}

// ---------------------------------------------------------------- mock

std::string MockVerifier::proof_key(const std::string& proof) {
    std::string stripped;
    try {
        stripped = strip_state_comments(proof);
    } catch (const Error&) {
        return normalize_whitespace(proof);
    }
    try {
        return normalize_whitespace(render_proof(parse_tactic_proof(stripped)));
    } catch (const Error&) {
        return normalize_whitespace(stripped);
    }
}

std::string MockVerifier::statement_key(const std::string& statement) {
    std::string out;
    bool space = false;
    for (char c : text::trim(statement)) {
        if (text::is_space(c)) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += c;
    }
    return out;
}

void MockVerifier::add(const std::string& statement, const std::string& proof, VerificationResult result) {
    table_[{statement_key(statement), proof_key(proof)}] = std::move(result);
}

void MockVerifier::add_correct(const std::string& statement, const std::string& proof) {
    auto parsed = parse_tactic_proof(strip_state_comments(proof));
    std::size_t n = count_tactics(parsed);
    std::string target = std::string(text::trim(statement));
    if (text::ends_with(target, ":= by")) target = std::string(text::trim(target.substr(0, target.size() - 5)));
    VerificationResult r;
    r.solved = true;
    for (std::size_t i = 0; i + 1 < n; ++i) r.states.push_back(ProofState{{"⊢ " + target}});
    r.states.push_back(ProofState{});
    add(statement, proof, std::move(r));
}

MockVerifier MockVerifier::from_json(const json& doc) {
    MockVerifier mock;
    try {
        for (const auto& e : doc.at("entries")) {
            auto statement = e.value("statement", std::string{});
            auto proof = e.at("proof").get<std::string>();
            if (e.contains("result")) {
                mock.add(statement, proof, e.at("result").get<VerificationResult>());
            } else if (e.value("correct", false)) {
                mock.add_correct(statement, proof);
            } else {
                VerificationResult r;
                for (const auto& msg : e.value("errors", std::vector<std::string>{"error"})) {
                    r.errors.push_back(Diagnostic{msg, 1, 0});
                }
                mock.add(statement, proof, std::move(r));
            }
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::bad_config, std::string("mock fixtures: ") + ex.what());
    }
    return mock;
}

MockVerifier MockVerifier::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::backend_unavailable, "cannot read mock fixtures " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& ex) {
        throw Error(ErrorKind::bad_config, path.string() + ": " + ex.what());
    }
}

namespace {

bool mentions_sorry(const std::string& proof) {
    std::size_t pos = 0;
    while ((pos = proof.find("sorry", pos)) != std::string::npos) {
        bool left = pos == 0 || !text::is_ident_char(proof[pos - 1]);
        bool right = pos + 5 >= proof.size() || !text::is_ident_char(proof[pos + 5]);
        if (left && right) return true;
        pos += 5;
    }
    return false;
}

}  // namespace

VerificationResult MockVerifier::check(const CheckRequest& request, std::chrono::milliseconds) {
    ++calls_;
    auto pk = proof_key(request.proof);
    auto it = table_.find({statement_key(request.statement), pk});
    if (it == table_.end()) it = table_.find({std::string{}, pk});
    if (it != table_.end()) return it->second;

    VerificationResult r;
    if (mentions_sorry(request.proof)) {
        r.errors.push_back(Diagnostic{"declaration uses 'sorry'", 1, 0});
    } else {
        r.errors.push_back(Diagnostic{"mock: proof not in fixture table", 1, 0});
    }
    return r;
}

// ---------------------------------------------------------------- repl

namespace {

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

ReplBackend::ReplBackend(std::string command) : command_(std::move(command)) { ignore_sigpipe(); }

ReplBackend::~ReplBackend() { stop(); }

void ReplBackend::stop() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        int status = 0;
        ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
    buffer_.clear();
}

void ReplBackend::start(std::chrono::milliseconds timeout) {
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
        throw Error(ErrorKind::backend_unavailable, std::string("pipe: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
    posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

    std::string sh = "/bin/sh";
    std::string flag = "-c";
    std::string cmd = "exec " + command_;
    char* argv[] = {sh.data(), flag.data(), cmd.data(), nullptr};
    int rc = posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        pid_ = -1;
        throw Error(ErrorKind::backend_unavailable, "cannot start '" + command_ + "': " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);

    try {
        write_line(json{{"cmd", "handshake"}, {"protocol", kProtocolVersion}}.dump());
        auto line = read_line(std::chrono::steady_clock::now() + timeout);
        auto reply = json::parse(line);
        if (!reply.value("ok", false)) throw Error(ErrorKind::backend_unavailable, "handshake refused: " + line);
    } catch (const json::exception& e) {
        stop();
        throw Error(ErrorKind::backend_unavailable, std::string("handshake failed: ") + e.what());
    } catch (const Error& e) {
        stop();
        if (e.kind() == ErrorKind::backend_unavailable) throw;
        throw Error(ErrorKind::backend_unavailable, std::string("handshake failed: ") + e.what());
    }
}

void ReplBackend::write_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
        auto n = ::write(to_child_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorKind::backend_unavailable, "checker process closed its input");
        }
        off += static_cast<std::size_t>(n);
    }
}

std::string ReplBackend::read_line(std::chrono::steady_clock::time_point deadline) {
    for (;;) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) throw Error(ErrorKind::timeout, "no response from checker");
        pollfd pfd{from_child_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorKind::backend_unavailable, std::string("poll: ") + std::strerror(errno));
        }
        if (rc == 0) continue;
        char chunk[4096];
        auto n = ::read(from_child_, chunk, sizeof(chunk));
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw Error(ErrorKind::backend_unavailable, "checker process exited");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

VerificationResult parse_check_response(const std::string& line, std::uint64_t expected_id) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::protocol_error, std::string("malformed response: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("solved") || !doc["solved"].is_boolean()) {
        throw Error(ErrorKind::protocol_error, "response lacks 'solved'");
    }
    if (doc.contains("id") && doc["id"] != expected_id) {
        throw Error(ErrorKind::protocol_error, "response id does not match request");
    }
    VerificationResult r;
    try {
        r.solved = doc["solved"].get<bool>();
        for (const auto& m : doc.value("errors", json::array())) {
            auto severity = m.value("severity", std::string("error"));
            auto d = m.get<Diagnostic>();
            bool sorry = d.message.find("declaration uses 'sorry'") != std::string::npos;
            if (severity == "error" || sorry) r.errors.push_back(std::move(d));
        }
        r.states = doc.value("states", std::vector<ProofState>{});
    } catch (const json::exception& e) {
        throw Error(ErrorKind::protocol_error, std::string("malformed response: ") + e.what());
    }
    if (!r.errors.empty()) r.solved = false;
    return r;
}

VerificationResult ReplBackend::check(const CheckRequest& request, std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    if (pid_ <= 0) start(timeout);
    auto id = next_id_++;
    json msg{{"cmd", "check"},
             {"id", id},
             {"context", request.context},
             {"statement", request.statement},
             {"proof", request.proof}};
    try {
        write_line(msg.dump());
        return parse_check_response(read_line(deadline), id);
    } catch (const Error& e) {
        // A late or garbled reply would desynchronize the stream; restart lazily.
        stop();
        throw;
    }
}

// ---------------------------------------------------------------- cache

ResultCache::ResultCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::string ResultCache::key(const std::string& backend_id, const CheckRequest& request) {
    std::string material;
    for (const auto* part : {&backend_id, &request.context, &request.statement, &request.proof}) {
        material += std::to_string(part->size());
        material += ':';
        material += *part;
    }
    return text::sha256_hex(material);
}

std::filesystem::path ResultCache::path_for(const std::string& key) const { return dir_ / (key + ".json"); }

std::optional<VerificationResult> ResultCache::get(const std::string& key) {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    if (dir_.empty()) return std::nullopt;
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    try {
        auto r = json::parse(in).get<VerificationResult>();
        memory_[key] = r;
        return r;
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

void ResultCache::put(const std::string& key, const VerificationResult& result) {
    std::lock_guard lock(mutex_);
    memory_[key] = result;
    if (dir_.empty()) return;
    auto final_path = path_for(key);
    auto tmp = final_path;
    tmp += ".tmp" + std::to_string(::getpid()) + "_" +
           std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp);
        if (!out) throw Error(ErrorKind::io_error, "cannot write cache file " + tmp.string());
        out << json(result).dump();
    }
    std::filesystem::rename(tmp, final_path);
}

// ---------------------------------------------------------------- pool

Verifier::Verifier(std::vector<std::unique_ptr<VerifierBackend>> backends, VerifierOptions options)
    : backends_(std::move(backends)), options_(std::move(options)) {
    if (backends_.empty()) throw Error(ErrorKind::bad_config, "verifier pool needs at least one backend");
    for (auto& b : backends_) idle_.push_back(b.get());
    backend_id_ = backends_.front()->id();
    cache_ = std::make_unique<ResultCache>(options_.cache_dir.value_or(std::filesystem::path{}));
}

Verifier Verifier::pooled(const std::function<std::unique_ptr<VerifierBackend>()>& factory, std::size_t size,
                          VerifierOptions options) {
    std::vector<std::unique_ptr<VerifierBackend>> backends;
    for (std::size_t i = 0; i < std::max<std::size_t>(size, 1); ++i) backends.push_back(factory());
    return Verifier(std::move(backends), std::move(options));
}

VerifierBackend& Verifier::acquire() {
    std::unique_lock lock(pool_mutex_);
    pool_cv_.wait(lock, [this] { return !idle_.empty(); });
    auto* b = idle_.back();
    idle_.pop_back();
    return *b;
}

void Verifier::release(VerifierBackend& backend) {
    {
        std::lock_guard lock(pool_mutex_);
        idle_.push_back(&backend);
    }
    pool_cv_.notify_one();
}

VerificationResult Verifier::verify(const TheoremEntry& entry, const TacticProof& proof) {
    return verify(make_check_request(entry, proof));
}

VerificationResult Verifier::verify(const CheckRequest& request) {
    auto key = ResultCache::key(backend_id_, request);
    if (auto hit = cache_->get(key)) {
        ++cache_hits_;
        return *hit;
    }
    auto& backend = acquire();
    struct Release {
        Verifier* self;
        VerifierBackend* b;
        ~Release() { self->release(*b); }
    } guard{this, &backend};

    auto started = std::chrono::steady_clock::now();
    VerificationResult result;
    try {
        result = backend.check(request, options_.timeout);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::timeout) throw;
        result = VerificationResult{};
        result.errors.push_back(Diagnostic{"timeout", 0, 0});
        result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
        return result;
    }
    result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    cache_->put(key, result);
    return result;
}

}  // namespace proofopt
