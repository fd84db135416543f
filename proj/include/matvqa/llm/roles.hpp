#pragma once

#include <map>
#include <string>
#include <vector>

#include "matvqa/common/jsonl.hpp"
#include "matvqa/llm/backend.hpp"

namespace matvqa::llm {

/// Agent roles used across the pipeline. Each is a request tag with its own
/// model and sampling settings.
namespace roles {
inline constexpr const char *generator = "generator"; // chain extraction and question drafting
inline constexpr const char *evaluator = "evaluator";
inline constexpr const char *rewriter = "rewriter";
inline constexpr const char *checker = "checker";
inline constexpr const char *reflector = "reflector";
} // namespace roles

struct RoleConfig {
    std::string model_id;
    double temperature{0.0};
    int max_tokens{1024};

    bool operator==(const RoleConfig &) const = default;
};

struct RoleMap {
    std::map<std::string, RoleConfig> roles;

    static RoleMap defaults(const std::string &model_id = "gpt-4o") {
        RoleMap m;
        m.roles[roles::generator] = {model_id, 0.7, 2048};
        m.roles[roles::evaluator] = {model_id, 0.0, 1024};
        m.roles[roles::checker] = {model_id, 0.0, 256};
        m.roles[roles::rewriter] = {model_id, 0.7, 1024};
        m.roles[roles::reflector] = {model_id, 0.7, 512};
        return m;
    }

    const RoleConfig &at(const std::string &role) const {
        auto it = roles.find(role);
        if(it == roles.end()) throw Error(ErrorCode::config, "no model configured for role '" + role + "'");
        return it->second;
    }
};

inline void to_json(json &j, const RoleMap &m) {
    j = json::object();
    for(const auto &[name, cfg] : m.roles)
        j[name] = {{"model", cfg.model_id}, {"temperature", cfg.temperature}, {"max_tokens", cfg.max_tokens}};
}

/// Missing roles and fields keep their defaults.
inline void from_json(const json &j, RoleMap &m) {
    m = RoleMap::defaults();
    for(const auto &[name, cfg] : j.items()) {
        auto &slot = m.roles[name];
        slot.model_id = cfg.value("model", slot.model_id);
        slot.temperature = cfg.value("temperature", slot.temperature);
        slot.max_tokens = cfg.value("max_tokens", slot.max_tokens);
    }
}

/// A backend plus the role map: what every agent step talks to.
struct Gateway {
    BackendPtr backend;
    RoleMap roles = RoleMap::defaults();

    ChatRequest request(const std::string &role, const std::string &system_prompt, const std::string &user_text,
                        std::vector<Attachment> attachments = {}) const {
        const auto &cfg = roles.at(role);
        auto r = make_request(cfg.model_id, role, system_prompt, user_text, cfg.temperature);
        r.sampling.max_tokens = cfg.max_tokens;
        r.attachments = std::move(attachments);
        return r;
    }

    ChatResponse ask(const std::string &role, const std::string &system_prompt, const std::string &user_text,
                     std::vector<Attachment> attachments = {}) const {
        return backend->complete(request(role, system_prompt, user_text, std::move(attachments)));
    }
};

} // namespace matvqa::llm
