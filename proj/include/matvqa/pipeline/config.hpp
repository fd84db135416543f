#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/llm/roles.hpp"
#include "matvqa/mcq/types.hpp"
#include "matvqa/refine/agents.hpp"

namespace matvqa::pipeline {

struct PipelineConfig {
    std::string corpus;  // corpus store directory
    std::string lexicon; // component lexicon file
    llm::RoleMap roles = llm::RoleMap::defaults();
    std::size_t max_iterations = 3;
    std::size_t rewrite_budget = 3;
    std::size_t option_count = mcq::kDefaultOptions;
    std::uint64_t shuffle_seed = 1;
    std::uint64_t sampling_seed = 1;
    bool language_stage = true;
    bool caption_stage = true;
    std::vector<mcq::TaskType> tasks{mcq::kAllTasks.begin(), mcq::kAllTasks.end()};
    refine::CheckerMode checker = refine::CheckerMode::llm;
    double checker_threshold = 0.6;
    double theta = 0.35;
    std::size_t top_k = 3;
    std::size_t context_window = 1;
    double diversity_cap = 0.8;
    double review_fraction = 0.2;
    std::size_t workers = 4;

    /// Relative paths resolve against the directory of the config file.
    std::filesystem::path base_dir;

    std::filesystem::path corpus_path() const { return resolve(corpus); }
    std::filesystem::path lexicon_path() const { return resolve(lexicon); }

private:
    std::filesystem::path resolve(const std::string &p) const {
        std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    }
};

inline void to_json(json &j, const PipelineConfig &c) {
    json tasks = json::array();
    for(auto t : c.tasks) tasks.push_back(mcq::to_string(t));
    j = json{{"corpus", c.corpus},
             {"lexicon", c.lexicon},
             {"roles", c.roles},
             {"T", c.max_iterations},
             {"rewrite_budget", c.rewrite_budget},
             {"option_count", c.option_count},
             {"seeds", {{"shuffle", c.shuffle_seed}, {"sampling", c.sampling_seed}}},
             {"stages", {{"language", c.language_stage}, {"caption", c.caption_stage}}},
             {"tasks", tasks},
             {"checker", c.checker == refine::CheckerMode::llm ? "llm" : "deterministic"},
             {"checker_threshold", c.checker_threshold},
             {"theta", c.theta},
             {"top_k", c.top_k},
             {"context_window", c.context_window},
             {"diversity_cap", c.diversity_cap},
             {"review_fraction", c.review_fraction},
             {"workers", c.workers}};
}

/// Unknown keys are config errors, so a typo cannot silently fall back to a
/// default.
inline PipelineConfig config_from_json(const json &j) {
    static const std::set<std::string> known = {"corpus", "lexicon", "roles", "T", "rewrite_budget", "option_count",
                                                "seeds", "stages", "tasks", "checker", "checker_threshold", "theta",
                                                "top_k", "context_window", "diversity_cap", "review_fraction", "workers"};
    if(!j.is_object()) throw Error(ErrorCode::config, "config must be a JSON object");
    for(const auto &[key, _] : j.items())
        if(!known.contains(key)) throw Error(ErrorCode::config, "unknown config key '" + key + "'");
    PipelineConfig c;
    try {
        c.corpus = j.value("corpus", c.corpus);
        c.lexicon = j.value("lexicon", c.lexicon);
        if(j.contains("roles")) c.roles = j["roles"].get<llm::RoleMap>();
        c.max_iterations = j.value("T", c.max_iterations);
        c.rewrite_budget = j.value("rewrite_budget", c.rewrite_budget);
        c.option_count = j.value("option_count", c.option_count);
        if(j.contains("seeds")) {
            c.shuffle_seed = j["seeds"].value("shuffle", c.shuffle_seed);
            c.sampling_seed = j["seeds"].value("sampling", c.sampling_seed);
        }
        if(j.contains("stages")) {
            c.language_stage = j["stages"].value("language", c.language_stage);
            c.caption_stage = j["stages"].value("caption", c.caption_stage);
        }
        if(j.contains("tasks")) {
            c.tasks.clear();
            for(const auto &t : j["tasks"]) c.tasks.push_back(mcq::task_from_string(t.get<std::string>()));
        }
        auto checker = j.value("checker", std::string("llm"));
        if(checker == "llm") c.checker = refine::CheckerMode::llm;
        else if(checker == "deterministic") c.checker = refine::CheckerMode::deterministic;
        else throw Error(ErrorCode::config, "checker must be 'llm' or 'deterministic'");
        c.checker_threshold = j.value("checker_threshold", c.checker_threshold);
        c.theta = j.value("theta", c.theta);
        c.top_k = j.value("top_k", c.top_k);
        c.context_window = j.value("context_window", c.context_window);
        c.diversity_cap = j.value("diversity_cap", c.diversity_cap);
        c.review_fraction = j.value("review_fraction", c.review_fraction);
        c.workers = j.value("workers", c.workers);
    } catch(const json::exception &e) {
        throw Error(ErrorCode::config, std::string("config: ") + e.what());
    } catch(const ParseError &e) {
        throw Error(ErrorCode::config, std::string("config: ") + e.what());
    }
    return c;
}

inline PipelineConfig load_config(const std::filesystem::path &path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch(const json::parse_error &e) {
        throw Error(ErrorCode::config, path.string() + ": " + e.what());
    }
    auto c = config_from_json(j);
    c.base_dir = path.parent_path();
    return c;
}

/// Throws a config error naming the first invalid field.
inline void validate(const PipelineConfig &c) {
    auto fail = [](const std::string &m) { throw Error(ErrorCode::config, m); };
    if(c.corpus.empty() || !std::filesystem::is_directory(c.corpus_path()))
        fail("corpus directory '" + c.corpus_path().string() + "' does not exist");
    if(c.lexicon.empty() || !std::filesystem::is_regular_file(c.lexicon_path()))
        fail("lexicon file '" + c.lexicon_path().string() + "' does not exist");
    if(c.max_iterations < 1) fail("T must be >= 1");
    if(c.rewrite_budget < 1) fail("rewrite_budget must be >= 1");
    if(c.option_count < mcq::kMinOptions || c.option_count > mcq::kMaxOptions) fail("option_count must be in [2, 10]");
    if(c.tasks.empty()) fail("at least one task type must be enabled");
    if(!(c.checker_threshold >= 0 && c.checker_threshold <= 1)) fail("checker_threshold must be in [0, 1]");
    if(!(c.theta > 0 && c.theta <= 1)) fail("theta must be in (0, 1]");
    if(c.top_k < 1) fail("top_k must be >= 1");
    if(!(c.review_fraction > 0 && c.review_fraction <= 1)) fail("review_fraction must be in (0, 1]");
    if(c.workers < 1) fail("workers must be >= 1");
    for(const char *role : {llm::roles::generator, llm::roles::evaluator, llm::roles::rewriter, llm::roles::checker,
                            llm::roles::reflector})
        c.roles.at(role);
}

/// First 16 hex digits of the hash of the canonical config.
/// Worker count is left out: it changes scheduling, never output.
inline std::string config_digest(const PipelineConfig &c) {
    auto j = json(c);
    j.erase("workers");
    return sha256_hex(canonical_dump(j)).substr(0, 16);
}

} // namespace matvqa::pipeline
