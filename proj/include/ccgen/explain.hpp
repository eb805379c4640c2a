#pragma once

// Explanation distillation: teacher prompt, reply sanitation, a persistent
// cache keyed by (x, y, teacher) and the explained-corpus builder.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <httplib.h>

#include "ccgen/core.hpp"
#include "ccgen/dataset.hpp"
#include "ccgen/io.hpp"
#include "ccgen/serialize.hpp"

namespace ccgen {

inline std::string teacher_prompt(std::string_view x, std::string_view y) {
    return "Explain why one product is purchased with the other product.\n\n Q: Why are " + std::string(y) +
           " purchased with " + std::string(x) + "?\n A:";
}

inline std::string mock_explanation(std::string_view x, std::string_view y) {
    return std::string(y) + " are used together with " + std::string(x) + " because " + std::string(y) +
           " support the primary function of " + std::string(x) + ".";
}

/// Cuts the reply at its first blank line, drops serial markers and sequence
/// boundary tokens, and collapses whitespace. An empty result is an error.
inline std::string sanitize_reply(std::string_view reply) {
    std::string s(reply);
    std::size_t cut = std::string::npos;
    for (std::size_t nl = s.find('\n'); nl != std::string::npos; nl = s.find('\n', nl + 1)) {
        std::size_t j = nl + 1;
        while (j < s.size() && s[j] != '\n' && is_space(s[j])) ++j;
        if (j < s.size() && s[j] == '\n' && !trim(std::string_view(s).substr(0, nl)).empty()) {
            cut = nl;
            break;
        }
    }
    if (cut != std::string::npos) s.resize(cut);
    for (auto tok : {kSos, kEos})
        for (auto p = s.find(tok); p != std::string::npos; p = s.find(tok)) s.replace(p, tok.size(), " ");
    // removing one marker can expose another ("1) 2)"), so rescan until clean
    for (;;) {
        int number = 0;
        std::size_t len = 0;
        const auto at = detail::find_marker(s, 0, &number, &len);
        if (at == std::string::npos) break;
        s.replace(at, len, " ");
    }
    s = normalize_surface(s);
    while (!s.empty() && s.back() == ':') s = normalize_surface(s.substr(0, s.size() - 1));
    if (s.empty()) throw DataError("teacher reply is empty after sanitation");
    return s;
}

// ---------------------------------------------------------------------------
// teachers

class Teacher {
public:
    virtual ~Teacher() = default;
    virtual std::string id() const = 0;
    /// Raw (unsanitized) explanation for why y is purchased with x.
    virtual std::string explain(const std::string& x, const std::string& y) = 0;
};

class MockTeacher : public Teacher {
public:
    std::string id() const override { return "mock"; }
    std::string explain(const std::string& x, const std::string& y) override {
        ++calls_;
        return mock_explanation(x, y);
    }
    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::atomic<std::size_t> calls_{0};
};

struct TeacherEndpoint {
    std::string base_url;
    std::string path = "/v1/completions";
    std::string token_env = "CCGEN_TEACHER_TOKEN";
    double timeout_s = 30.0;
    int max_retries = 2;
    std::size_t max_in_flight = 4;
    int max_tokens = 64;
    double temperature = 0.0;
    std::string teacher_id = "http";

    void validate() const {
        if (base_url.empty()) throw ConfigError("teacher URL is empty", "teacher.url");
        if (!(timeout_s > 0)) throw ConfigError("timeout must be positive", "teacher.timeout_s");
        if (max_retries < 0) throw ConfigError("retries must be >= 0", "teacher.max_retries");
        if (max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1", "teacher.max_in_flight");
    }
};

struct TransportResponse {
    int status = 0;
    std::string body;
};

/// Single POST of a JSON body. Throws RuntimeError on connection failure.
class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportResponse post(const std::string& path, const std::string& body,
                                   const std::map<std::string, std::string>& headers) = 0;
};

class HttpTransport : public Transport {
public:
    HttpTransport(std::string base_url, double timeout_s) : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

    TransportResponse post(const std::string& path, const std::string& body,
                           const std::map<std::string, std::string>& headers) override {
        httplib::Client cli(base_url_);
        const auto secs = static_cast<time_t>(timeout_s_);
        const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = cli.Post(path, h, body, "application/json");
        if (!res) throw RuntimeError("request to " + base_url_ + path + " failed: " + httplib::to_string(res.error()));
        return {res->status, res->body};
    }

private:
    std::string base_url_;
    double timeout_s_;
};

/// Generic completion endpoint: POST {prompt, max_tokens, temperature},
/// reply {text}. Retries transport failures and 5xx replies.
class HttpTeacher : public Teacher {
public:
    HttpTeacher(TeacherEndpoint ep, std::shared_ptr<Transport> transport = nullptr)
        : ep_(std::move(ep)), transport_(std::move(transport)) {
        ep_.validate();
        if (!transport_) transport_ = std::make_shared<HttpTransport>(ep_.base_url, ep_.timeout_s);
    }

    std::string id() const override { return ep_.teacher_id; }

    std::string explain(const std::string& x, const std::string& y) override {
        const json req = {{"prompt", teacher_prompt(x, y)}, {"max_tokens", ep_.max_tokens}, {"temperature", ep_.temperature}};
        std::map<std::string, std::string> headers;
        if (const char* tok = std::getenv(ep_.token_env.c_str()); tok && *tok)
            headers["Authorization"] = std::string("Bearer ") + tok;
        const std::string who = "(" + x + ", " + y + ")";
        std::string last;
        for (int attempt = 0; attempt <= ep_.max_retries; ++attempt) {
            TransportResponse res;
            try {
                res = transport_->post(ep_.path, req.dump(), headers);
            } catch (const RuntimeError& e) {
                last = e.what();
                continue;
            }
            if (res.status >= 500) {
                last = "HTTP " + std::to_string(res.status);
                continue;
            }
            if (res.status != 200) throw RuntimeError("teacher rejected " + who + ": HTTP " + std::to_string(res.status));
            json j;
            try {
                j = json::parse(res.body);
            } catch (const json::parse_error&) {
                throw DataError("malformed teacher reply for " + who + ": not JSON");
            }
            if (!j.is_object() || !j.contains("text") || !j.at("text").is_string())
                throw DataError("malformed teacher reply for " + who + ": missing string field 'text'");
            return j.at("text").get<std::string>();
        }
        throw RuntimeError("teacher unreachable for " + who + " after " + std::to_string(ep_.max_retries + 1) +
                           " attempts: " + last);
    }

    const TeacherEndpoint& endpoint() const noexcept { return ep_; }

private:
    TeacherEndpoint ep_;
    std::shared_ptr<Transport> transport_;
};

// ---------------------------------------------------------------------------
// cache

/// Append-only JSON-lines store of sanitized explanations. Thread-safe; the
/// first entry written for a key wins.
class ExplanationCache {
public:
    ExplanationCache() = default;

    /// Backed by `path`; existing entries are loaded, new ones appended.
    explicit ExplanationCache(std::string path) : path_(std::move(path)) {
        if (std::filesystem::exists(path_)) {
            for_each_jsonl(path_, [&](const json& j, std::size_t line) {
                try {
                    entries_.emplace(Key{j.at("x").get<std::string>(), j.at("y").get<std::string>(),
                                         j.at("teacher_id").get<std::string>()},
                                     j.at("explanation").get<std::string>());
                } catch (const json::exception&) {
                    throw DataError(path_ + ":" + std::to_string(line) + ": malformed cache entry");
                }
            });
        }
    }

    std::optional<std::string> get(const std::string& x, const std::string& y, const std::string& teacher) const {
        std::lock_guard lock(mu_);
        auto it = entries_.find({x, y, teacher});
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void put(const std::string& x, const std::string& y, const std::string& teacher, const std::string& text) {
        std::lock_guard lock(mu_);
        if (!entries_.emplace(Key{x, y, teacher}, text).second) return;
        if (path_.empty()) return;
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        out << json{{"x", x}, {"y", y}, {"teacher_id", teacher}, {"explanation", text}}.dump() << "\n";
        if (!out) throw RuntimeError("cannot append to explanation cache '" + path_ + "'");
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return entries_.size();
    }

private:
    using Key = std::tuple<std::string, std::string, std::string>;
    std::string path_;
    mutable std::mutex mu_;
    std::map<Key, std::string> entries_;
};

struct DistillStats {
    std::atomic<std::size_t> teacher_calls{0};
    std::atomic<std::size_t> cache_hits{0};
};

/// Cache first; on a miss asks the teacher, sanitizes and stores the reply.
inline std::string query_teacher(Teacher& teacher, const std::string& x, const std::string& y, ExplanationCache& cache,
                                 DistillStats* stats = nullptr) {
    if (auto hit = cache.get(x, y, teacher.id())) {
        if (stats) ++stats->cache_hits;
        return *hit;
    }
    if (stats) ++stats->teacher_calls;
    std::string text;
    try {
        text = sanitize_reply(teacher.explain(x, y));
    } catch (const DataError& e) {
        throw DataError("teacher reply for (" + x + ", " + y + "): " + e.what());
    }
    cache.put(x, y, teacher.id(), text);
    return text;
}

/// One explanation-augmented line per concept in `ids`. Missing pairs are
/// fetched with at most `max_in_flight` concurrent teacher requests; the
/// first failure is rethrown after in-flight requests finish.
inline std::vector<std::string> build_explained_corpus(const Dataset& d, const std::vector<ConceptId>& ids,
                                                       Teacher& teacher, ExplanationCache& cache,
                                                       std::size_t max_in_flight = 4, const Grammar& g = {},
                                                       DistillStats* stats = nullptr) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (auto x : ids)
        for (const auto& y : d.target_surfaces(x)) pairs.emplace_back(d.concepts.at(x).surface, y);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex fail_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next++;
            if (i >= pairs.size()) return;
            {
                std::lock_guard lock(fail_mu);
                if (failure) return;
            }
            try {
                query_teacher(teacher, pairs[i].first, pairs[i].second, cache, stats);
            } catch (...) {
                std::lock_guard lock(fail_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(max_in_flight, pairs.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<std::string> lines;
    for (auto x : ids) {
        const auto& xs = d.concepts.at(x).surface;
        auto targets = d.target_surfaces(x);
        std::vector<std::string> expl;
        for (const auto& y : targets) expl.push_back(*cache.get(xs, y, teacher.id()));
        lines.push_back(encode_with_explanations(xs, targets, expl, g).text);
    }
    return lines;
}

inline std::vector<std::string> read_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!trim(line).empty()) lines.push_back(line);
    if (lines.empty()) throw DataError("corpus '" + path + "' is empty");
    return lines;
}

inline void write_corpus(const std::string& path, const std::vector<std::string>& lines) {
    write_text_file(path, join(lines, "\n") + "\n");
}

}  // namespace ccgen
