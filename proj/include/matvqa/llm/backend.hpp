#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/llm/types.hpp"

namespace matvqa::llm {

class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse complete(const ChatRequest &request) = 0;
};

using BackendPtr = std::shared_ptr<Backend>;

/// Answers from per-tag responders. Responders run under a mutex, so they may
/// keep state (counters, scripted sequences).
class ScriptedBackend : public Backend {
public:
    using Responder = std::function<std::string(const ChatRequest &)>;

    ScriptedBackend &on(std::string tag, std::string fixed) {
        return on(std::move(tag), [fixed = std::move(fixed)](const ChatRequest &) { return fixed; });
    }

    ScriptedBackend &on(std::string tag, Responder responder) {
        std::lock_guard lock(m_mutex);
        m_responders[std::move(tag)] = std::move(responder);
        return *this;
    }

    ScriptedBackend &otherwise(Responder responder) {
        std::lock_guard lock(m_mutex);
        m_fallback = std::move(responder);
        return *this;
    }

    ChatResponse complete(const ChatRequest &request) override {
        validate(request);
        std::lock_guard lock(m_mutex);
        ++m_calls[request.tag];
        auto it = m_responders.find(request.tag);
        if(it != m_responders.end()) return {it->second(request), {}, 0, json::object()};
        if(m_fallback) return {m_fallback(request), {}, 0, json::object()};
        throw Error(ErrorCode::config, "scripted backend has no response for tag '" + request.tag + "'");
    }

    std::size_t calls(const std::string &tag) const {
        std::lock_guard lock(m_mutex);
        auto it = m_calls.find(tag);
        return it == m_calls.end() ? 0 : it->second;
    }

private:
    mutable std::mutex m_mutex;
    std::map<std::string, Responder> m_responders;
    Responder m_fallback;
    std::map<std::string, std::size_t> m_calls;
};

struct TranscriptEntry {
    std::string request_hash;
    ChatRequest request;
    ChatResponse response;
    std::string timestamp;

    bool operator==(const TranscriptEntry &) const = default;
};

inline void to_json(json &j, const TranscriptEntry &e) {
    j = json{{"request_hash", e.request_hash},
             {"request", e.request},
             {"response", e.response},
             {"timestamp", e.timestamp}};
}

inline void from_json(const json &j, TranscriptEntry &e) {
    e.request_hash = j.at("request_hash").get<std::string>();
    e.request = j.at("request").get<ChatRequest>();
    e.response = j.at("response").get<ChatResponse>();
    e.timestamp = j.value("timestamp", "");
}

/// Returns recorded responses keyed by request hash. Misses are hard errors
/// unless a fallback backend is given.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(const std::vector<TranscriptEntry> &entries, BackendPtr fallback = nullptr)
        : m_fallback(std::move(fallback)) {
        for(const auto &e : entries) m_responses.emplace(e.request_hash, e.response);
    }

    ChatResponse complete(const ChatRequest &request) override {
        auto hash = request_hash(request);
        auto it = m_responses.find(hash);
        if(it != m_responses.end()) {
            ++m_hits;
            return it->second;
        }
        if(m_fallback) return m_fallback->complete(request);
        throw Error(ErrorCode::replay_miss,
                    "replay: no transcript entry for request " + hash + " (tag '" + request.tag + "')");
    }

    std::size_t size() const { return m_responses.size(); }
    std::size_t hits() const { return m_hits.load(); }

private:
    std::unordered_map<std::string, ChatResponse> m_responses;
    BackendPtr m_fallback;
    std::atomic<std::size_t> m_hits{0};
};

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    auto t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Append-only, thread-safe list of transcript entries.
class Transcript {
public:
    void append(TranscriptEntry entry) {
        std::lock_guard lock(m_mutex);
        m_entries.push_back(std::move(entry));
    }

    std::vector<TranscriptEntry> entries() const {
        std::lock_guard lock(m_mutex);
        return m_entries;
    }

private:
    mutable std::mutex m_mutex;
    std::vector<TranscriptEntry> m_entries;
};

/// Forwards to `inner` and records every exchange.
class RecordingBackend : public Backend {
public:
    RecordingBackend(BackendPtr inner, std::shared_ptr<Transcript> transcript)
        : m_inner(std::move(inner)), m_transcript(std::move(transcript)) {}

    ChatResponse complete(const ChatRequest &request) override {
        auto response = m_inner->complete(request);
        m_transcript->append({request_hash(request), request, response, utc_timestamp()});
        return response;
    }

private:
    BackendPtr m_inner;
    std::shared_ptr<Transcript> m_transcript;
};

/// Counts calls that reach the wrapped backend.
class CountingBackend : public Backend {
public:
    explicit CountingBackend(BackendPtr inner) : m_inner(std::move(inner)) {}

    ChatResponse complete(const ChatRequest &request) override {
        ++m_count;
        return m_inner->complete(request);
    }

    std::size_t count() const { return m_count.load(); }

private:
    BackendPtr m_inner;
    std::atomic<std::size_t> m_count{0};
};

/// Retries RetryableError up to retry_limit total attempts with linear backoff.
/// The final error carries the number of attempts made.
class RetryingBackend : public Backend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    RetryingBackend(BackendPtr inner, std::size_t retry_limit = 3,
                    std::chrono::milliseconds backoff = std::chrono::milliseconds(500),
                    Sleeper sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
        : m_inner(std::move(inner)), m_limit(std::max<std::size_t>(retry_limit, 1)), m_backoff(backoff),
          m_sleep(std::move(sleep)) {}

    ChatResponse complete(const ChatRequest &request) override {
        for(std::size_t attempt = 1;; ++attempt) {
            try {
                return m_inner->complete(request);
            } catch(const RetryableError &e) {
                if(attempt >= m_limit) throw RetryableError(e.what(), attempt);
                if(m_sleep) m_sleep(m_backoff * static_cast<int>(attempt));
            }
        }
    }

private:
    BackendPtr m_inner;
    std::size_t m_limit;
    std::chrono::milliseconds m_backoff;
    Sleeper m_sleep;
};

} // namespace matvqa::llm
