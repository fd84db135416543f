#pragma once

#include <regex>
#include <string>
#include <vector>

#include "matvqa/chain/lexicon.hpp"
#include "matvqa/chain/types.hpp"
#include "matvqa/common/error.hpp"
#include "matvqa/corpus/types.hpp"
#include "matvqa/llm/roles.hpp"

namespace matvqa::chain {

/// Model output that never parsed as a step list; keeps the last raw output.
class ExtractionError : public Error {
public:
    ExtractionError(const std::string &message, std::string raw_output)
        : Error(ErrorCode::extraction, message), m_raw(std::move(raw_output)) {}

    const std::string &raw_output() const { return m_raw; }

private:
    std::string m_raw;
};

struct ProposedStep {
    ComponentTag component;
    std::string statement;

    bool operator==(const ProposedStep &) const = default;
};

/// Accepts either numbered lines ("1. [E] 10 T magnetic field") or a single
/// arrow chain ("10 T magnetic field (E) -> ... (Pe)"). Returns an empty list
/// when neither form parses cleanly.
inline std::vector<ProposedStep> parse_chain_output(std::string_view output) {
    static const std::regex line_form(R"(^\s*(?:\d+\s*[.):]\s*)?\[\s*(S|P|Pe|PE|Pr|PR|E)\s*\]\s*(.+?)\s*$)");
    static const std::regex arrow_seg(R"(^\s*(.+?)\s*\(\s*(S|P|Pe|PE|Pr|PR|E)\s*\)\s*\.?\s*$)");

    std::vector<ProposedStep> steps;
    for(const auto &raw : text::split(output, '\n')) {
        std::smatch m;
        if(std::regex_match(raw, m, line_form)) steps.push_back({*parse_component(m[1].str()), m[2].str()});
    }
    if(!steps.empty()) return steps;

    // Arrow form: normalise the unicode arrow to "->" and split.
    std::string flat;
    for(const auto &line : text::split(output, '\n')) {
        auto t = text::trim(line);
        if(!t.empty()) flat += (flat.empty() ? "" : " ") + t;
    }
    for(auto pos = flat.find("\xE2\x86\x92"); pos != std::string::npos; pos = flat.find("\xE2\x86\x92"))
        flat.replace(pos, 3, "->");
    if(flat.find("->") == std::string::npos) return {};
    std::size_t pos = 0;
    while(true) {
        auto next = flat.find("->", pos);
        auto seg = flat.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        std::smatch m;
        if(!std::regex_match(seg, m, arrow_seg)) return {};
        auto statement = text::trim(m[1].str());
        if(statement.front() == '"') statement.erase(0, 1);
        steps.push_back({*parse_component(m[2].str()), statement});
        if(next == std::string::npos) break;
        pos = next + 2;
    }
    return steps;
}

struct ExtractOptions {
    std::size_t repair_attempts = 2;
    std::size_t lexicon_hint_terms = 40;
};

inline std::string chain_system_prompt() {
    return "You are a materials scientist who builds reasoning chains over the components Structure (S), "
           "Property (P), Performance (Pe), Processing (Pr) and Environment (E).";
}

inline std::string chain_user_prompt(const corpus::FigureAsset &figure,
                                     const std::vector<corpus::ContextSnippet> &context,
                                     const ComponentLexicon &lexicon, std::size_t hint_terms) {
    std::string prompt = "Figure caption:\n" + figure.caption + "\n\nText around the figure:\n";
    for(std::size_t i = 0; i < context.size(); ++i) prompt += "[" + std::to_string(i + 1) + "] " + context[i].text + "\n";
    if(!lexicon.empty()) {
        prompt += "\nComponent vocabulary (term: tag):\n";
        std::size_t n = 0;
        for(const auto &e : lexicon.entries()) {
            if(n++ >= hint_terms) break;
            prompt += "- " + e.term + ": " + std::string(to_string(e.tag)) + "\n";
        }
    }
    prompt +=
        "\nWrite the longest reasoning chain that the caption and the text support. Every step must be a claim "
        "stated in the text. The last step must be a Performance (Pe) step.\n"
        "Reply with one step per line, in order, formatted as:\n"
        "1. [TAG] statement\n"
        "where TAG is one of S, P, Pe, Pr, E.";
    return prompt;
}

/// Asks the generator role for a chain, re-prompting up to repair_attempts
/// times on unparseable output. Step tags come from the lexicon when any of its
/// terms occur in the statement, otherwise from the model. Steps are not yet
/// verified.
inline ReasoningChain extract_chain(const std::string &paper_id, const corpus::FigureAsset &figure,
                                    const std::vector<corpus::ContextSnippet> &context, const ComponentLexicon &lexicon,
                                    const llm::Gateway &gateway, const ExtractOptions &opts = {}) {
    require(!text::trim(figure.caption).empty(), "extract_chain: figure has no caption");
    require(!context.empty(), "extract_chain: at least one context snippet is required");

    const auto system = chain_system_prompt();
    auto user = chain_user_prompt(figure, context, lexicon, opts.lexicon_hint_terms);
    std::string raw;
    std::vector<ProposedStep> proposed;
    for(std::size_t attempt = 0; attempt <= opts.repair_attempts; ++attempt) {
        std::string prompt = user;
        if(attempt > 0)
            prompt += "\n\nYour previous reply could not be parsed:\n" + raw +
                      "\n\nReply again using exactly the '1. [TAG] statement' line format.";
        raw = gateway.ask(llm::roles::generator, system, prompt).text;
        proposed = parse_chain_output(raw);
        if(!proposed.empty()) break;
    }
    if(proposed.empty())
        throw ExtractionError("chain extraction for " + paper_id + "/" + figure.figure_id + " unparseable after " +
                                  std::to_string(opts.repair_attempts) + " repair attempts",
                              raw);

    ReasoningChain chain;
    chain.chain_id = chain_id_for(paper_id, figure.figure_id);
    chain.paper_id = paper_id;
    chain.figure_id = figure.figure_id;
    chain.lexicon_version = lexicon.version();
    for(std::size_t i = 0; i < proposed.size(); ++i) {
        ReasoningStep step;
        step.index = i;
        step.statement = proposed[i].statement;
        step.component = lexicon.classify(step.statement, proposed[i].component);
        chain.steps.push_back(std::move(step));
    }
    return chain;
}

} // namespace matvqa::chain
