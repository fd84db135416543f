#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/common/text.hpp"

namespace matvqa::mcq {

enum class TaskType { causal, comparative, quantitative, hypothetical };

inline constexpr std::array<TaskType, 4> kAllTasks = {TaskType::causal, TaskType::comparative,
                                                      TaskType::quantitative, TaskType::hypothetical};

inline std::string_view to_string(TaskType t) {
    switch(t) {
        case TaskType::causal: return "causal";
        case TaskType::comparative: return "comparative";
        case TaskType::quantitative: return "quantitative";
        case TaskType::hypothetical: return "hypothetical";
    }
    return "causal";
}

/// Short column label used in score tables.
inline std::string_view short_label(TaskType t) {
    switch(t) {
        case TaskType::causal: return "Caus";
        case TaskType::comparative: return "Comp";
        case TaskType::quantitative: return "Quan";
        case TaskType::hypothetical: return "Hypo";
    }
    return "?";
}

inline TaskType task_from_string(std::string_view s) {
    for(auto t : kAllTasks)
        if(s == to_string(t)) return t;
    throw ParseError("unknown task type '" + std::string(s) + "'");
}

enum class Stage { raw, lang_removed, caption_removed };

inline constexpr std::array<Stage, 3> kAllStages = {Stage::raw, Stage::lang_removed, Stage::caption_removed};

inline std::string_view to_string(Stage s) {
    switch(s) {
        case Stage::raw: return "raw";
        case Stage::lang_removed: return "lang_removed";
        case Stage::caption_removed: return "caption_removed";
    }
    return "raw";
}

inline std::optional<Stage> parse_stage(std::string_view s) {
    for(auto st : kAllStages)
        if(s == to_string(st)) return st;
    return std::nullopt;
}

inline Stage stage_from_string(std::string_view s) {
    auto st = parse_stage(s);
    if(!st) throw Error(ErrorCode::usage, "unknown stage '" + std::string(s) + "'");
    return *st;
}

/// Display label used in ablation tables.
inline std::string_view stage_label(Stage s) {
    switch(s) {
        case Stage::raw: return "Raw";
        case Stage::lang_removed: return "Lan.Rem";
        case Stage::caption_removed: return "Cap.Rem";
    }
    return "?";
}

inline constexpr std::size_t kMinOptions = 2;
inline constexpr std::size_t kMaxOptions = 10;
inline constexpr std::size_t kDefaultOptions = 4;

struct MCQItem {
    std::string item_id;
    TaskType task{TaskType::causal};
    std::string stem;
    std::vector<std::string> options;
    std::size_t answer_index{1}; // 1-based
    std::string figure_id;
    std::string chain_id;
    Stage stage{Stage::raw};
    std::optional<std::string> lineage; // parent item id
    std::optional<std::uint64_t> shuffle_seed;

    // Provenance carried along so evaluation and review need no corpus lookup
    // beyond image bytes.
    std::string paper_id;
    std::string image_hash;
    std::string image_media_type;
    std::string caption;
    std::string chain_summary;

    const std::string &correct_option() const { return options.at(answer_index - 1); }
    bool operator==(const MCQItem &) const = default;
};

inline std::string normalize_option(std::string_view s) {
    std::string out;
    for(const auto &t : text::tokenize(s)) out += (out.empty() ? "" : " ") + t;
    return out;
}

/// Throws construction errors for any broken item invariant.
inline void check_item(const MCQItem &item) {
    auto fail = [&](const std::string &msg) { throw Error(ErrorCode::construction, "item " + item.item_id + ": " + msg); };
    if(item.options.size() < kMinOptions || item.options.size() > kMaxOptions)
        fail("option count " + std::to_string(item.options.size()) + " outside [2, 10]");
    if(item.answer_index < 1 || item.answer_index > item.options.size()) fail("answer index out of range");
    if(text::trim(item.stem).empty()) fail("empty stem");
    std::set<std::string> seen;
    for(const auto &o : item.options) {
        auto n = normalize_option(o);
        if(n.empty()) fail("empty option");
        if(!seen.insert(n).second) fail("duplicate option '" + o + "'");
    }
}

/// Content address: invariant under option order, so shuffling keeps the id.
inline std::string compute_item_id(const MCQItem &item) {
    auto sorted = item.options;
    std::sort(sorted.begin(), sorted.end());
    json key{{"chain_id", item.chain_id},   {"figure_id", item.figure_id}, {"task", to_string(item.task)},
             {"stem", item.stem},           {"options", sorted},           {"correct", item.correct_option()},
             {"stage", to_string(item.stage)}, {"lineage", item.lineage ? json(*item.lineage) : json(nullptr)}};
    return sha256_hex(canonical_dump(key)).substr(0, 16);
}

inline void to_json(json &j, const MCQItem &i) {
    j = json{{"item_id", i.item_id},
             {"task", to_string(i.task)},
             {"stem", i.stem},
             {"options", i.options},
             {"answer_index", i.answer_index},
             {"figure_id", i.figure_id},
             {"chain_id", i.chain_id},
             {"stage", to_string(i.stage)},
             {"lineage", i.lineage ? json(*i.lineage) : json(nullptr)},
             {"shuffle_seed", i.shuffle_seed ? json(*i.shuffle_seed) : json(nullptr)},
             {"paper_id", i.paper_id},
             {"image_hash", i.image_hash},
             {"image_media_type", i.image_media_type},
             {"caption", i.caption},
             {"chain_summary", i.chain_summary}};
}

inline void from_json(const json &j, MCQItem &i) {
    i.item_id = j.at("item_id").get<std::string>();
    i.task = task_from_string(j.at("task").get<std::string>());
    i.stem = j.at("stem").get<std::string>();
    i.options = j.at("options").get<std::vector<std::string>>();
    i.answer_index = j.at("answer_index").get<std::size_t>();
    i.figure_id = j.value("figure_id", "");
    i.chain_id = j.value("chain_id", "");
    i.stage = stage_from_string(j.at("stage").get<std::string>());
    i.lineage.reset();
    if(j.contains("lineage") && !j["lineage"].is_null()) i.lineage = j["lineage"].get<std::string>();
    i.shuffle_seed.reset();
    if(j.contains("shuffle_seed") && !j["shuffle_seed"].is_null()) i.shuffle_seed = j["shuffle_seed"].get<std::uint64_t>();
    i.paper_id = j.value("paper_id", "");
    i.image_hash = j.value("image_hash", "");
    i.image_media_type = j.value("image_media_type", "");
    i.caption = j.value("caption", "");
    i.chain_summary = j.value("chain_summary", "");
}

} // namespace matvqa::mcq
