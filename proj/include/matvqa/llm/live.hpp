#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <regex>
#include <string>

#include "httplib.h"
#include "matvqa/common/error.hpp"
#include "matvqa/common/rate_limit.hpp"
#include "matvqa/llm/backend.hpp"

namespace matvqa::llm {

/// Resolves an attachment hash to (bytes, media type).
using BlobResolver = std::function<std::optional<std::pair<std::string, std::string>>(const std::string &sha256)>;

/// An OpenAI-compatible chat-completions endpoint.
struct ProviderConfig {
    std::string name = "openai";
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    double requests_per_second = 0; // 0 = unlimited
    int timeout_seconds = 120;
};

inline void from_json(const json &j, ProviderConfig &p) {
    p.name = j.value("name", p.name);
    p.base_url = j.value("base_url", p.base_url);
    p.path = j.value("path", p.path);
    p.api_key_env = j.value("api_key_env", p.api_key_env);
    p.requests_per_second = j.value("requests_per_second", p.requests_per_second);
    p.timeout_seconds = j.value("timeout_seconds", p.timeout_seconds);
}

inline std::string base64(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()),
                            reinterpret_cast<const unsigned char *>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

/// Request body in the OpenAI chat-completions shape. Images go on the last
/// user message as data URLs.
inline json provider_payload(const ChatRequest &request, const BlobResolver &resolve) {
    json messages = json::array();
    std::size_t last_user = 0;
    for(std::size_t i = 0; i < request.messages.size(); ++i)
        if(request.messages[i].role == Role::user) last_user = i;
    for(std::size_t i = 0; i < request.messages.size(); ++i) {
        const auto &m = request.messages[i];
        if(i == last_user && !request.attachments.empty()) {
            json content = json::array({{{"type", "text"}, {"text", m.text}}});
            for(const auto &a : request.attachments) {
                auto blob = resolve ? resolve(a.sha256) : std::nullopt;
                if(!blob) throw Error(ErrorCode::missing_figure, "attachment " + a.sha256 + " does not resolve");
                auto media = a.media_type.empty() ? blob->second : a.media_type;
                content.push_back({{"type", "image_url"},
                                   {"image_url", {{"url", "data:" + media + ";base64," + base64(blob->first)}}}});
            }
            messages.push_back({{"role", to_string(m.role)}, {"content", content}});
        } else {
            messages.push_back({{"role", to_string(m.role)}, {"content", m.text}});
        }
    }
    json body{{"model", request.model_id},
              {"messages", messages},
              {"temperature", request.sampling.temperature},
              {"max_tokens", request.sampling.max_tokens}};
    if(request.sampling.seed) body["seed"] = *request.sampling.seed;
    return body;
}

class LiveBackend : public Backend {
public:
    LiveBackend(ProviderConfig provider, BlobResolver resolver)
        : m_provider(std::move(provider)), m_resolver(std::move(resolver)),
          m_limiter(std::make_shared<TokenBucket>(1.0, m_provider.requests_per_second)) {
        const char *key = std::getenv(m_provider.api_key_env.c_str());
        if(key) m_api_key = key;
    }

    ChatResponse complete(const ChatRequest &request) override {
        validate(request);
        if(m_api_key.empty())
            throw Error(ErrorCode::config, "provider " + m_provider.name + ": environment variable " +
                                               m_provider.api_key_env + " is not set");
        auto payload = provider_payload(request, m_resolver);
        m_limiter->acquire();
        httplib::Client client(m_provider.base_url);
        client.set_read_timeout(m_provider.timeout_seconds, 0);
        client.set_bearer_token_auth(m_api_key);
        auto start = std::chrono::steady_clock::now();
        auto res = client.Post(m_provider.path, payload.dump(), "application/json");
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        if(!res) throw RetryableError(m_provider.name + ": " + httplib::to_string(res.error()));
        if(res->status == 401 || res->status == 403)
            throw Error(ErrorCode::config, m_provider.name + ": authentication failed (HTTP " +
                                               std::to_string(res->status) + ")");
        if(res->status == 429 || res->status >= 500)
            throw RetryableError(m_provider.name + ": HTTP " + std::to_string(res->status));
        if(res->status != 200)
            throw Error(ErrorCode::network, m_provider.name + ": HTTP " + std::to_string(res->status) + ": " + res->body);
        json body;
        try {
            body = json::parse(res->body);
        } catch(const json::parse_error &e) {
            throw Error(ErrorCode::parse, m_provider.name + ": unparseable response: " + e.what());
        }
        ChatResponse out;
        const auto &content = body.at("choices").at(0).at("message").at("content");
        out.text = content.is_string() ? content.get<std::string>() : std::string{};
        if(body.contains("usage")) {
            out.usage.prompt_tokens = body["usage"].value("prompt_tokens", std::int64_t{0});
            out.usage.completion_tokens = body["usage"].value("completion_tokens", std::int64_t{0});
        }
        out.latency_ms = elapsed.count();
        out.provider_meta = {{"provider", m_provider.name}, {"id", body.value("id", "")}};
        if(body.contains("model")) out.provider_meta["model"] = body["model"];
        return out;
    }

private:
    ProviderConfig m_provider;
    BlobResolver m_resolver;
    std::shared_ptr<TokenBucket> m_limiter;
    std::string m_api_key;
};

} // namespace matvqa::llm
