#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/jsonl.hpp"

namespace matvqa::llm {

enum class Role { system, user, assistant };

inline std::string_view to_string(Role r) {
    switch(r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

inline Role role_from_string(std::string_view s) {
    if(s == "system") return Role::system;
    if(s == "user") return Role::user;
    if(s == "assistant") return Role::assistant;
    throw ParseError("unknown message role '" + std::string(s) + "'");
}

struct Message {
    Role role{Role::user};
    std::string text;

    bool operator==(const Message &) const = default;
};

/// Image passed by content hash; bytes are resolved at send time.
struct Attachment {
    std::string sha256;
    std::string media_type;

    bool operator==(const Attachment &) const = default;
};

struct Sampling {
    double temperature{0.0};
    int max_tokens{1024};
    std::optional<std::uint64_t> seed;

    bool operator==(const Sampling &) const = default;
};

struct ChatRequest {
    std::string model_id;
    std::vector<Message> messages;
    std::vector<Attachment> attachments;
    Sampling sampling;
    /// Agent role or pipeline step that issued the request ("evaluator",
    /// "rewriter", ...). Scripted backends dispatch on it.
    std::string tag;

    bool operator==(const ChatRequest &) const = default;
};

struct Usage {
    std::int64_t prompt_tokens{0};
    std::int64_t completion_tokens{0};

    bool operator==(const Usage &) const = default;
};

struct ChatResponse {
    std::string text;
    Usage usage;
    std::int64_t latency_ms{0};
    json provider_meta = json::object();

    bool operator==(const ChatResponse &) const = default;
};

inline void validate(const ChatRequest &request) {
    bool has_user = false;
    for(const auto &m : request.messages) has_user = has_user || m.role == Role::user;
    require(has_user, "chat request needs at least one user message");
    require(!request.model_id.empty(), "chat request needs a model id");
    for(const auto &a : request.attachments)
        require(a.sha256.size() == 64, "attachment hash must be a sha256 hex digest");
}

inline void to_json(json &j, const ChatRequest &r) {
    json messages = json::array();
    for(const auto &m : r.messages) messages.push_back({{"role", to_string(m.role)}, {"text", m.text}});
    json attachments = json::array();
    for(const auto &a : r.attachments) attachments.push_back({{"sha256", a.sha256}, {"media_type", a.media_type}});
    json sampling{{"temperature", r.sampling.temperature}, {"max_tokens", r.sampling.max_tokens}};
    sampling["seed"] = r.sampling.seed ? json(*r.sampling.seed) : json(nullptr);
    j = json{{"model_id", r.model_id}, {"messages", messages}, {"attachments", attachments},
             {"sampling", sampling},   {"tag", r.tag}};
}

inline void from_json(const json &j, ChatRequest &r) {
    r.model_id = j.at("model_id").get<std::string>();
    r.messages.clear();
    for(const auto &m : j.at("messages"))
        r.messages.push_back({role_from_string(m.at("role").get<std::string>()), m.at("text").get<std::string>()});
    r.attachments.clear();
    for(const auto &a : j.at("attachments"))
        r.attachments.push_back({a.at("sha256").get<std::string>(), a.value("media_type", "")});
    const auto &s = j.at("sampling");
    r.sampling.temperature = s.at("temperature").get<double>();
    r.sampling.max_tokens = s.at("max_tokens").get<int>();
    r.sampling.seed.reset();
    if(s.contains("seed") && !s.at("seed").is_null()) r.sampling.seed = s.at("seed").get<std::uint64_t>();
    r.tag = j.value("tag", "");
}

inline void to_json(json &j, const ChatResponse &r) {
    j = json{{"text", r.text},
             {"usage", {{"prompt_tokens", r.usage.prompt_tokens}, {"completion_tokens", r.usage.completion_tokens}}},
             {"latency_ms", r.latency_ms},
             {"provider_meta", r.provider_meta}};
}

inline void from_json(const json &j, ChatResponse &r) {
    r.text = j.at("text").get<std::string>();
    r.usage.prompt_tokens = j.at("usage").value("prompt_tokens", std::int64_t{0});
    r.usage.completion_tokens = j.at("usage").value("completion_tokens", std::int64_t{0});
    r.latency_ms = j.value("latency_ms", std::int64_t{0});
    r.provider_meta = j.value("provider_meta", json::object());
}

/// Canonical bytes of a request: compact JSON, keys sorted.
inline std::string canonical_serialization(const ChatRequest &r) {
    return canonical_dump(json(r));
}

inline std::string request_hash(const ChatRequest &r) {
    return sha256_hex(canonical_serialization(r));
}

/// Convenience constructor: optional system prompt plus one user message.
inline ChatRequest make_request(std::string model_id, std::string tag, std::string system_prompt,
                                std::string user_text, double temperature = 0.0) {
    ChatRequest r;
    r.model_id = std::move(model_id);
    r.tag = std::move(tag);
    if(!system_prompt.empty()) r.messages.push_back({Role::system, std::move(system_prompt)});
    r.messages.push_back({Role::user, std::move(user_text)});
    r.sampling.temperature = temperature;
    return r;
}

} // namespace matvqa::llm
