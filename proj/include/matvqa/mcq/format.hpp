#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matvqa/common/text.hpp"
#include "matvqa/mcq/types.hpp"

namespace matvqa::mcq {

/// Question text, its correct answer, and candidate wrong answers.
struct Draft {
    std::string stem;
    std::string correct;
    std::vector<std::string> distractors;

    bool operator==(const Draft &) const = default;
};

// Plain-text block exchanged with generator and rewriter agents:
//   QUESTION: ...
//   ANSWER: ...
//   DISTRACTOR: ...   (repeated)

inline std::string format_block(const Draft &d) {
    std::string out = "QUESTION: " + d.stem + "\nANSWER: " + d.correct + "\n";
    for(const auto &x : d.distractors) out += "DISTRACTOR: " + x + "\n";
    return out;
}

inline Draft draft_of(const MCQItem &item) {
    Draft d{item.stem, item.correct_option(), {}};
    for(std::size_t i = 0; i < item.options.size(); ++i)
        if(i + 1 != item.answer_index) d.distractors.push_back(item.options[i]);
    return d;
}

/// Parses the block format. Returns nullopt when QUESTION or ANSWER is missing.
/// Continuation lines extend the preceding field.
inline std::optional<Draft> parse_block(std::string_view s) {
    Draft d;
    bool have_q = false;
    bool have_a = false;
    std::string *last = nullptr;
    for(const auto &raw : text::split(s, '\n')) {
        auto line = text::trim(raw);
        if(line.empty()) continue;
        auto field = [&](std::string_view key) -> std::optional<std::string> {
            if(!text::starts_with_icase(line, key)) return std::nullopt;
            return text::trim(line.substr(key.size()));
        };
        if(auto v = field("QUESTION:")) {
            d.stem = *v;
            have_q = true;
            last = &d.stem;
        } else if(auto v = field("ANSWER:")) {
            d.correct = *v;
            have_a = true;
            last = &d.correct;
        } else if(auto v = field("DISTRACTOR:")) {
            d.distractors.push_back(*v);
            last = &d.distractors.back();
        } else if(last) {
            *last += " " + line;
        }
    }
    if(!have_q || !have_a || text::trim(d.stem).empty() || text::trim(d.correct).empty()) return std::nullopt;
    return d;
}

} // namespace matvqa::mcq
