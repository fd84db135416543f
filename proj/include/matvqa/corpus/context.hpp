#pragma once

#include <algorithm>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/text.hpp"
#include "matvqa/corpus/types.hpp"

namespace matvqa::corpus {

struct ContextResult {
    std::vector<ContextSnippet> snippets;
    bool unreferenced{false};
};

/// Figure numbers mentioned by "Figure N", "Fig. N", "Figs. 2 and 3" style
/// references in `paragraph`.
inline std::vector<int> referenced_figure_numbers(std::string_view paragraph) {
    static const std::regex ref(
        R"(\b(?:figures?|figs?\.?)\s*(\d+[a-z]?(?:\s*(?:,|and|&)\s*\d+[a-z]?)*))", std::regex::icase);
    static const std::regex number(R"(\d+)");
    std::vector<int> out;
    std::string s(paragraph);
    for(auto it = std::sregex_iterator(s.begin(), s.end(), ref); it != std::sregex_iterator(); ++it) {
        std::string group = (*it)[1].str();
        for(auto n = std::sregex_iterator(group.begin(), group.end(), number); n != std::sregex_iterator(); ++n)
            out.push_back(std::stoi(n->str()));
    }
    return out;
}

/// Snippets for every paragraph within `window` paragraphs of a paragraph that
/// references figure `number`, nearest first (ties by position).
inline ContextResult link_context(std::string_view body, int number, std::size_t window) {
    auto paras = text::paragraphs(body);
    std::map<std::size_t, std::size_t> best; // paragraph index -> distance
    bool referenced = false;
    for(std::size_t i = 0; i < paras.size(); ++i) {
        auto nums = referenced_figure_numbers(text::slice(body, paras[i]));
        if(std::find(nums.begin(), nums.end(), number) == nums.end()) continue;
        referenced = true;
        std::size_t lo = i >= window ? i - window : 0;
        std::size_t hi = std::min(paras.size() - 1, i + window);
        for(std::size_t j = lo; j <= hi; ++j) {
            std::size_t d = j > i ? j - i : i - j;
            auto [it, inserted] = best.emplace(j, d);
            if(!inserted) it->second = std::min(it->second, d);
        }
    }
    ContextResult result;
    result.unreferenced = !referenced;
    for(const auto &[idx, dist] : best)
        result.snippets.push_back({std::string(text::slice(body, paras[idx])), paras[idx], dist});
    std::stable_sort(result.snippets.begin(), result.snippets.end(),
                     [](const ContextSnippet &a, const ContextSnippet &b) { return a.distance < b.distance; });
    return result;
}

inline ContextResult link_figure_context(const PaperRecord &record, std::string_view figure_id,
                                         std::size_t window) {
    const auto *fig = record.find_figure(figure_id);
    if(!fig) throw Error(ErrorCode::not_found, "figure " + std::string(figure_id) + " not in paper " + record.paper_id);
    return link_context(record.body_text, fig->number, window);
}

} // namespace matvqa::corpus
