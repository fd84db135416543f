#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/llm/types.hpp"
#include "matvqa/mcq/types.hpp"

namespace matvqa::eval {

/// Options as "1. ...\n2. ..." in stored order.
inline std::string numbered_options(const std::vector<std::string> &options) {
    std::string out;
    for(std::size_t i = 0; i < options.size(); ++i)
        out += (i ? "\n" : "") + std::to_string(i + 1) + ". " + options[i];
    return out;
}

/// Chain-of-thought prompt with {{image}}, {{question}} and {{options}} slots.
struct PromptTemplate {
    std::string version = "cot-v1";
    std::string body = "{{image}}\n"
                       "Question: {{question}}\n"
                       "Options:\n"
                       "{{options}}\n"
                       "\n"
                       "Answer the preceding multiple choice question. The last line of your response should be "
                       "of the following format: 'The answer is N' (without quotes) where N is the number of the "
                       "correct option. Think step by step before answering.";
    std::string image_marker = "<image 1>";

    std::string render(const mcq::MCQItem &item) const {
        std::string out = body;
        auto fill = [&](const std::string &slot, const std::string &value) {
            for(auto pos = out.find(slot); pos != std::string::npos; pos = out.find(slot, pos + value.size()))
                out.replace(pos, slot.size(), value);
        };
        fill("{{image}}", image_marker);
        fill("{{question}}", item.stem);
        fill("{{options}}", numbered_options(item.options));
        if(out.find("{{") != std::string::npos)
            throw Error(ErrorCode::config, "prompt template " + version + " has an unknown slot");
        return out;
    }
};

inline PromptTemplate load_template(const std::filesystem::path &path) {
    auto j = json::parse(read_file(path));
    PromptTemplate t;
    t.version = j.at("version").get<std::string>();
    t.body = j.at("body").get<std::string>();
    t.image_marker = j.value("image_marker", t.image_marker);
    return t;
}

using FigureCheck = std::function<bool(const std::string &sha256)>;

/// One user message with the rendered prompt and the item's figure attached.
/// Throws missing_figure if the image hash does not resolve.
inline llm::ChatRequest build_prompt(const mcq::MCQItem &item, const PromptTemplate &tmpl,
                                     const std::string &model_id, const FigureCheck &figure_exists,
                                     const llm::Sampling &sampling = {}) {
    if(item.image_hash.empty() || !figure_exists || !figure_exists(item.image_hash))
        throw Error(ErrorCode::missing_figure, "item " + item.item_id + ": figure '" + item.image_hash +
                                                   "' does not resolve");
    llm::ChatRequest r;
    r.model_id = model_id;
    r.tag = "eval";
    r.messages.push_back({llm::Role::user, tmpl.render(item)});
    r.attachments.push_back({item.image_hash, item.image_media_type.empty() ? "image/png" : item.image_media_type});
    r.sampling = sampling;
    return r;
}

} // namespace matvqa::eval
