#pragma once

#include <memory>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "matvqa/common/text.hpp"
#include "matvqa/llm/backend.hpp"
#include "matvqa/llm/roles.hpp"
#include "matvqa/mcq/format.hpp"
#include "matvqa/refine/agents.hpp"

namespace matvqa::pipeline {

// Offline stand-in for every agent role. Output is a pure function of the
// prompt text, so mock runs are reproducible and can be recorded into
// transcripts. The evaluator answers by word overlap with the question, which
// is exactly the kind of language shortcut refinement is meant to remove.

namespace mock {

inline std::string first_user(const llm::ChatRequest &r) {
    for(const auto &m : r.messages)
        if(m.role == llm::Role::user) return m.text;
    return {};
}

inline std::string chain_reply(const std::string &prompt) {
    static const std::regex context_line(R"(^\[(\d+)\] (.+)$)");
    static const std::regex vocab_line(R"(^- (.+): (S|P|Pe|Pr|E)$)");
    std::vector<std::string> pe_terms;
    std::vector<std::string> sentences;
    std::set<std::string> seen;
    for(const auto &line : text::split(prompt, '\n')) {
        std::smatch m;
        if(std::regex_match(line, m, vocab_line) && m[2] == "Pe") pe_terms.push_back(text::to_lower(m[1].str()));
        if(!std::regex_match(line, m, context_line)) continue;
        std::string para = m[2].str();
        for(const auto &span : text::sentences(para, {0, para.size()})) {
            auto s = text::trim(text::slice(para, span));
            if(s.size() < 12 || !seen.insert(s).second) continue;
            sentences.push_back(s);
        }
    }
    if(sentences.size() < 2) return "No chain is supported by this text.";
    auto mentions_pe = [&](const std::string &s) {
        auto tokens = text::tokenize(s);
        for(const auto &t : pe_terms)
            if(text::contains_token_run(tokens, text::tokenize(t))) return true;
        return false;
    };
    std::size_t last = sentences.size() - 1;
    for(std::size_t i = sentences.size(); i-- > 1;)
        if(mentions_pe(sentences[i])) {
            last = i;
            break;
        }
    std::vector<std::string> steps;
    for(std::size_t i = 0; i < last && steps.size() < 3; ++i) steps.push_back(sentences[i]);
    steps.push_back(sentences[last]);
    std::string out;
    for(std::size_t i = 0; i < steps.size(); ++i) {
        std::string tag = i + 1 == steps.size() ? "Pe" : (i == 0 ? "S" : "P");
        out += std::to_string(i + 1) + ". [" + tag + "] " + steps[i] + "\n";
    }
    return out;
}

inline std::string draft_reply(const std::string &prompt) {
    static const std::regex step_line(R"(^\d+\. \[(S|P|Pe|Pr|E)\] (.+)$)");
    static const std::regex task_line(R"(^Task: write an? (\w+))");
    static const std::regex anchor_quote(R"re(^Task: [^"]*"([^"]+)")re");
    std::vector<std::string> steps;
    std::string task = "causal", anchor;
    for(const auto &line : text::split(prompt, '\n')) {
        std::smatch m;
        if(std::regex_match(line, m, step_line)) steps.push_back(m[2].str());
        if(std::regex_search(line, m, task_line)) task = m[1].str();
        if(std::regex_search(line, m, anchor_quote)) anchor = m[1].str();
    }
    if(steps.size() < 2) return "I cannot write a question for this chain.";
    const auto &outcome = steps.back();
    std::string stem;
    if(task == "comparative") stem = "Comparing the conditions shown in the figure, which outcome does the data support?";
    else if(task == "quantitative") stem = "Reading the values in the figure, which quantitative statement is supported?";
    else if(task == "what") stem = "If the structure in the figure were varied, which outcome would the data predict?";
    else {
        auto cause = anchor.empty() ? steps.front() : anchor;
        while(!cause.empty() && cause.back() == '.') cause.pop_back();
        stem = "Given that " + cause + ", which outcome does the figure show?";
    }
    return "QUESTION: " + stem + "\nANSWER: " + outcome +
           "\nDISTRACTOR: The opposite trend is observed across every sample in the figure." +
           "\nDISTRACTOR: No measurable difference appears between any of the conditions." +
           "\nDISTRACTOR: Only the untreated reference sample changes, and only at room temperature.\n";
}

/// Option with the largest token overlap with the question text; ties go to
/// the lower number.
inline std::string overlap_answer(const std::string &prompt) {
    static const std::regex option_line(R"(^(\d+)\. (.+)$)");
    std::string question;
    std::vector<std::pair<std::string, std::string>> options;
    for(const auto &line : text::split(prompt, '\n')) {
        std::smatch m;
        if(text::starts_with_icase(line, "Question:")) question += line.substr(9);
        else if(text::starts_with_icase(line, "Figure caption:")) question += " " + line.substr(15);
        else if(std::regex_match(line, m, option_line)) options.emplace_back(m[1].str(), m[2].str());
    }
    if(options.empty()) return "I cannot tell.";
    std::size_t best = 0;
    double best_score = -1;
    for(std::size_t i = 0; i < options.size(); ++i) {
        double s = text::token_f1(question, options[i].second);
        if(s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return "The wording of the question points to option " + options[best].first + ".\nThe answer is " +
           options[best].first;
}

inline std::string rewrite_reply(const std::string &prompt) {
    auto block = refine::item_block_in(prompt);
    if(!block) return "I cannot rewrite this.";
    auto answer_tokens = text::content_tokens(block->correct);
    std::string stem;
    for(const auto &word : text::split(block->stem, ' ')) {
        auto toks = text::content_tokens(word);
        bool leak = false;
        for(const auto &t : toks) leak = leak || std::find(answer_tokens.begin(), answer_tokens.end(), t) != answer_tokens.end();
        if(!leak) stem += (stem.empty() ? "" : " ") + word;
    }
    if(text::content_tokens(stem).empty()) stem = "Which outcome does the figure support?";
    block->stem = stem;
    return mcq::format_block(*block);
}

inline std::string respond(const llm::ChatRequest &r) {
    const auto prompt = first_user(r);
    if(r.tag == llm::roles::generator) {
        if(prompt.find("Reply with one step per line") != std::string::npos) return chain_reply(prompt);
        return draft_reply(prompt);
    }
    if(r.tag == llm::roles::evaluator || r.tag == "eval") return overlap_answer(prompt);
    if(r.tag == llm::roles::reflector) return "Remove the words the question shares with its correct option.";
    if(r.tag == llm::roles::rewriter) return rewrite_reply(prompt);
    if(r.tag == llm::roles::checker) return "PASS";
    return "";
}

} // namespace mock

inline std::shared_ptr<llm::ScriptedBackend> mock_backend() {
    auto b = std::make_shared<llm::ScriptedBackend>();
    b->otherwise(mock::respond);
    return b;
}

} // namespace matvqa::pipeline
