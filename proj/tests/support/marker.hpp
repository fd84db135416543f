#pragma once

#include <memory>
#include <string>
#include <vector>

#include "matvqa/eval/extract.hpp"
#include "matvqa/llm/backend.hpp"
#include "matvqa/llm/roles.hpp"
#include "matvqa/mcq/format.hpp"
#include "matvqa/refine/agents.hpp"

namespace matvqa::testing {

// Shortcut fixture. Stems carry text markers (TXTCUE) and caption-dependency
// markers (CAPCUE). The scripted evaluator answers correctly iff the marker
// for its mode is present; the scripted rewriter strips one marker per call.
inline constexpr const char *kTextMarker = "TXTCUE";
inline constexpr const char *kCaptionMarker = "CAPCUE";

inline std::size_t count_of(const std::string &s, const std::string &needle) {
    std::size_t n = 0;
    for(auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
    return n;
}

inline std::string strip_one(std::string s, const std::string &needle) {
    auto pos = s.find(needle);
    if(pos == std::string::npos) return s;
    s.erase(pos, needle.size());
    auto sp = s.find("  ");
    if(sp != std::string::npos) s.erase(sp, 1);
    return s;
}

inline bool caption_mode(const std::string &prompt) { return prompt.rfind("Figure caption:", 0) == 0; }

inline std::string user_text(const llm::ChatRequest &r) {
    for(const auto &m : r.messages)
        if(m.role == llm::Role::user) return m.text;
    return {};
}

/// Options whose text starts with "Right" are correct.
inline std::size_t right_option(const std::string &prompt) {
    std::size_t n = 0;
    for(const auto &line : text::split(prompt, '\n')) {
        if(line.size() > 3 && std::isdigit(static_cast<unsigned char>(line[0])) && line.substr(1, 2) == ". ") {
            ++n;
            if(line.substr(3).rfind("Right", 0) == 0) return n;
        }
    }
    return 0;
}

inline std::shared_ptr<llm::ScriptedBackend> marker_backend() {
    auto b = std::make_shared<llm::ScriptedBackend>();
    b->on(llm::roles::evaluator, [](const llm::ChatRequest &r) {
        auto prompt = user_text(r);
        auto stem = prompt.substr(prompt.find("Question:"));
        stem = stem.substr(0, stem.find('\n'));
        bool cue = caption_mode(prompt) ? count_of(stem, kCaptionMarker) > 0 : count_of(stem, kTextMarker) > 0;
        auto right = right_option(prompt);
        auto pick = cue ? right : (right == 1 ? 2 : 1);
        return "Reasoning from the wording.\nThe answer is " + std::to_string(pick);
    });
    b->on(llm::roles::reflector, "Remove the marker the reasoning relied on.");
    b->on(llm::roles::rewriter, [](const llm::ChatRequest &r) {
        auto prompt = user_text(r);
        auto block = refine::item_block_in(prompt);
        bool text_stage = prompt.find("cannot be inferred from the text alone") != std::string::npos;
        block->stem = strip_one(block->stem, text_stage ? kTextMarker : kCaptionMarker);
        return mcq::format_block(*block);
    });
    b->on(llm::roles::checker, "PASS");
    return b;
}

/// Twenty raw items with 1-3 text markers and 1-2 caption markers each.
inline std::vector<mcq::MCQItem> marker_items() {
    std::vector<mcq::MCQItem> out;
    for(std::size_t i = 0; i < 20; ++i) {
        mcq::MCQItem item;
        item.task = mcq::kAllTasks[i % 4];
        std::string stem = "Question " + std::to_string(i) + " about the figure";
        for(std::size_t k = 0; k < 1 + i % 3; ++k) stem += std::string(" ") + kTextMarker;
        for(std::size_t k = 0; k < 1 + i % 2; ++k) stem += std::string(" ") + kCaptionMarker;
        item.stem = stem + "?";
        item.options = {"Right answer " + std::to_string(i), "Wrong answer alpha", "Wrong answer beta",
                        "Wrong answer gamma"};
        item.answer_index = 1 + i % 4;
        std::swap(item.options[0], item.options[item.answer_index - 1]);
        item.figure_id = "fig" + std::to_string(i);
        item.chain_id = "p/fig" + std::to_string(i);
        item.paper_id = "p";
        item.image_hash = std::string(64, 'c');
        item.caption = "Caption of figure " + std::to_string(i);
        item.item_id = mcq::compute_item_id(item);
        out.push_back(std::move(item));
    }
    return out;
}

} // namespace matvqa::testing
