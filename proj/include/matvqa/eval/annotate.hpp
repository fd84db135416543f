#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/eval/run.hpp"
#include "matvqa/llm/backend.hpp"

namespace matvqa::eval {

enum class ErrorTag { visual_perception, material_knowledge, reasoning_judgement };

inline constexpr std::array<ErrorTag, 3> kAllErrorTags = {ErrorTag::visual_perception, ErrorTag::material_knowledge,
                                                          ErrorTag::reasoning_judgement};

inline std::string_view to_string(ErrorTag t) {
    switch(t) {
        case ErrorTag::visual_perception: return "visual_perception";
        case ErrorTag::material_knowledge: return "material_knowledge";
        case ErrorTag::reasoning_judgement: return "reasoning_judgement";
    }
    return "?";
}

inline ErrorTag error_tag_from_string(std::string_view s) {
    for(auto t : kAllErrorTags)
        if(s == to_string(t)) return t;
    throw Error(ErrorCode::usage, "unknown error tag '" + std::string(s) + "'");
}

struct Annotation {
    std::string run_id;
    std::string item_id;
    ErrorTag tag{ErrorTag::visual_perception};
    std::string annotator;
    std::string note;
    std::string timestamp;
};

inline void to_json(json &j, const Annotation &a) {
    j = json{{"run_id", a.run_id}, {"item_id", a.item_id},   {"tag", to_string(a.tag)},
             {"annotator", a.annotator}, {"note", a.note}, {"timestamp", a.timestamp}};
}

inline void from_json(const json &j, Annotation &a) {
    a.run_id = j.at("run_id").get<std::string>();
    a.item_id = j.at("item_id").get<std::string>();
    a.tag = error_tag_from_string(j.at("tag").get<std::string>());
    a.annotator = j.value("annotator", "");
    a.note = j.value("note", "");
    a.timestamp = j.value("timestamp", "");
}

/// Appends a manual error tag. Only incorrect, scored records may be tagged.
inline Annotation annotate_error(const EvalRun &run, const std::string &item_id, ErrorTag tag,
                                 const std::string &annotator, const std::string &note,
                                 const std::filesystem::path &log) {
    auto it = std::find_if(run.records.begin(), run.records.end(),
                           [&](const EvalRecord &r) { return r.item_id == item_id; });
    if(it == run.records.end())
        throw Error(ErrorCode::not_found, "run " + run.run_id + " has no record for item " + item_id);
    if(it->skipped) throw Error(ErrorCode::validation, "item " + item_id + " was skipped, not scored");
    if(it->correct) throw Error(ErrorCode::validation, "item " + item_id + " was answered correctly; only errors can be tagged");
    require(!annotator.empty(), "annotate_error: annotator id required");
    Annotation a{run.run_id, item_id, tag, annotator, note, llm::utc_timestamp()};
    append_jsonl(log, json(a));
    return a;
}

inline std::vector<Annotation> read_annotations(const std::filesystem::path &log) {
    std::vector<Annotation> out;
    for(const auto &j : read_jsonl(log)) out.push_back(j.get<Annotation>());
    return out;
}

/// Counts per tag for one run. A later annotation of the same item supersedes
/// an earlier one, so each annotated error lands in exactly one bucket.
inline std::map<ErrorTag, std::size_t> error_summary(const EvalRun &run, const std::vector<Annotation> &log) {
    std::map<std::string, ErrorTag> latest;
    for(const auto &a : log)
        if(a.run_id == run.run_id) latest[a.item_id] = a.tag;
    std::map<ErrorTag, std::size_t> counts;
    for(auto t : kAllErrorTags) counts[t] = 0;
    for(const auto &[item, tag] : latest) ++counts[tag];
    return counts;
}

} // namespace matvqa::eval
