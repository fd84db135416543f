#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/common/text.hpp"

namespace matvqa::chain {

/// Structure, Property, Performance, Processing, Environment.
enum class ComponentTag { S, P, Pe, Pr, E };

inline constexpr std::array<ComponentTag, 5> kAllComponents = {ComponentTag::S, ComponentTag::P, ComponentTag::Pe,
                                                               ComponentTag::Pr, ComponentTag::E};

inline std::string_view to_string(ComponentTag t) {
    switch(t) {
        case ComponentTag::S: return "S";
        case ComponentTag::P: return "P";
        case ComponentTag::Pe: return "Pe";
        case ComponentTag::Pr: return "Pr";
        case ComponentTag::E: return "E";
    }
    return "S";
}

inline std::optional<ComponentTag> parse_component(std::string_view s) {
    auto u = text::to_lower(text::trim(s));
    if(u == "s" || u == "structure") return ComponentTag::S;
    if(u == "p" || u == "property") return ComponentTag::P;
    if(u == "pe" || u == "performance") return ComponentTag::Pe;
    if(u == "pr" || u == "processing") return ComponentTag::Pr;
    if(u == "e" || u == "environment") return ComponentTag::E;
    return std::nullopt;
}

struct Evidence {
    text::Span span;
    double score{0.0};

    bool operator==(const Evidence &) const = default;
};

struct ReasoningStep {
    std::size_t index{0};
    ComponentTag component{ComponentTag::S};
    std::string statement;
    std::vector<Evidence> evidence; // best first
    bool verified{false};

    double best_score() const { return evidence.empty() ? 0.0 : evidence.front().score; }
    bool operator==(const ReasoningStep &) const = default;
};

struct ReasoningChain {
    std::string chain_id;
    std::string paper_id;
    std::string figure_id;
    std::vector<ReasoningStep> steps;
    std::string lexicon_version;

    const ReasoningStep *terminal() const { return steps.empty() ? nullptr : &steps.back(); }
    bool operator==(const ReasoningChain &) const = default;
};

inline std::string chain_id_for(std::string_view paper_id, std::string_view figure_id) {
    return std::string(paper_id) + "/" + std::string(figure_id);
}

/// "stmt (E) -> stmt (S) -> ..." one-line rendering.
inline std::string summarize(const ReasoningChain &c) {
    std::string out;
    for(const auto &s : c.steps) {
        if(!out.empty()) out += " -> ";
        out += s.statement + " (" + std::string(to_string(s.component)) + ")";
    }
    return out;
}

inline void to_json(json &j, const ReasoningStep &s) {
    json ev = json::array();
    for(const auto &e : s.evidence) ev.push_back({{"span", {e.span.begin, e.span.end}}, {"score", e.score}});
    j = json{{"index", s.index},
             {"component", to_string(s.component)},
             {"statement", s.statement},
             {"evidence", ev},
             {"verified", s.verified}};
}

inline void from_json(const json &j, ReasoningStep &s) {
    s.index = j.at("index").get<std::size_t>();
    auto tag = parse_component(j.at("component").get<std::string>());
    if(!tag) throw ParseError("unknown component tag " + j.at("component").dump());
    s.component = *tag;
    s.statement = j.at("statement").get<std::string>();
    s.evidence.clear();
    for(const auto &e : j.value("evidence", json::array()))
        s.evidence.push_back({{e.at("span").at(0).get<std::size_t>(), e.at("span").at(1).get<std::size_t>()},
                              e.at("score").get<double>()});
    s.verified = j.value("verified", false);
}

inline void to_json(json &j, const ReasoningChain &c) {
    j = json{{"chain_id", c.chain_id},
             {"paper_id", c.paper_id},
             {"figure_id", c.figure_id},
             {"steps", c.steps},
             {"lexicon_version", c.lexicon_version}};
}

inline void from_json(const json &j, ReasoningChain &c) {
    c.chain_id = j.at("chain_id").get<std::string>();
    c.paper_id = j.value("paper_id", "");
    c.figure_id = j.at("figure_id").get<std::string>();
    c.steps = j.at("steps").get<std::vector<ReasoningStep>>();
    c.lexicon_version = j.value("lexicon_version", "");
}

} // namespace matvqa::chain
