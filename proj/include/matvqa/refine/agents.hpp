#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matvqa/chain/types.hpp"
#include "matvqa/common/error.hpp"
#include "matvqa/common/text.hpp"
#include "matvqa/eval/extract.hpp"
#include "matvqa/eval/prompt.hpp"
#include "matvqa/llm/roles.hpp"
#include "matvqa/mcq/format.hpp"
#include "matvqa/mcq/types.hpp"

namespace matvqa::refine {

/// What a blind evaluator may see: never the image.
enum class BlindMode { text_only, caption_only };

inline std::string_view to_string(BlindMode m) { return m == BlindMode::text_only ? "text_only" : "caption_only"; }

struct BlindVerdict {
    std::optional<std::size_t> choice;
    std::string cot;
    bool correct{false};
    bool abstained{false};
    bool reprompted{false};
};

inline std::string blind_system_prompt() {
    return "You are answering a multiple-choice question about a scientific figure that you cannot see.";
}

inline std::string blind_user_prompt(const mcq::MCQItem &item, BlindMode mode, const std::string &caption) {
    std::string prompt;
    if(mode == BlindMode::caption_only) prompt += "Figure caption: " + caption + "\n\n";
    prompt += "Question: " + item.stem + "\nOptions:\n" + eval::numbered_options(item.options) +
              "\n\nAnswer the preceding multiple choice question. The last line of your response should be of the "
              "following format: 'The answer is N' (without quotes) where N is the number of the correct option. "
              "Think step by step before answering.";
    return prompt;
}

inline constexpr const char *kReprompt = "State your final choice as a last line of the form 'The answer is N'.";

/// Asks the evaluator role with only the inputs `mode` permits. One reprompt
/// if no answer can be extracted; after that the evaluator abstains, which
/// counts as incorrect.
inline BlindVerdict evaluate_blind(const mcq::MCQItem &item, BlindMode mode, const std::optional<std::string> &caption,
                                   const llm::Gateway &gateway) {
    require(mode == BlindMode::text_only || (caption && !text::trim(*caption).empty()),
            "evaluate_blind: caption_only mode requires a caption");
    auto request = gateway.request(llm::roles::evaluator, blind_system_prompt(),
                                   blind_user_prompt(item, mode, caption.value_or("")));
    BlindVerdict v;
    v.cot = gateway.backend->complete(request).text;
    v.choice = eval::extract_answer(v.cot, item.options.size());
    if(!v.choice) {
        v.reprompted = true;
        request.messages.push_back({llm::Role::assistant, v.cot});
        request.messages.push_back({llm::Role::user, kReprompt});
        auto second = gateway.backend->complete(request).text;
        v.choice = eval::extract_answer(second, item.options.size());
        v.cot += "\n" + second;
    }
    v.abstained = !v.choice;
    v.correct = v.choice && *v.choice == item.answer_index;
    return v;
}

inline constexpr const char *kUnspecifiedCue = "unspecified textual cue";

inline std::string strategy_user_prompt(const std::string &cot, BlindMode mode) {
    std::string what = mode == BlindMode::text_only
                           ? "without seeing the figure, using only the wording of the question and options"
                           : "without seeing the figure, using the figure caption";
    return "The reasoning below answered a multiple-choice question correctly " + what +
           ". In one or two imperative sentences, name the cue it relied on so that a rewriter can remove it.\n\n"
           "Reasoning:\n" + cot;
}

/// Summarizes which cue let the blind evaluator succeed.
inline std::string derive_strategy(const std::string &cot, BlindMode mode, const llm::Gateway &gateway) {
    if(text::trim(cot).empty()) return kUnspecifiedCue;
    auto out = text::trim(gateway.ask(llm::roles::reflector, "You analyse answering strategies.",
                                      strategy_user_prompt(cot, mode)).text);
    return out.empty() ? kUnspecifiedCue : out;
}

inline constexpr const char *kItemOpen = "<<<ITEM";
inline constexpr const char *kItemClose = "ITEM>>>";

/// The item block embedded in rewriter prompts, between <<<ITEM and ITEM>>>.
inline std::optional<mcq::Draft> item_block_in(std::string_view prompt) {
    auto a = prompt.find(kItemOpen);
    auto b = prompt.find(kItemClose);
    if(a == std::string_view::npos || b == std::string_view::npos || b < a) return std::nullopt;
    a += std::string_view(kItemOpen).size();
    return mcq::parse_block(prompt.substr(a, b - a));
}

inline std::string rewrite_user_prompt(const mcq::MCQItem &item, const std::string &strategy, BlindMode mode,
                                       const chain::ReasoningChain *chain) {
    std::string prompt = "Rewrite this multiple-choice question so that the following answering strategy no longer "
                         "works:\n" + strategy + "\n\n" + kItemOpen + "\n" + mcq::format_block(mcq::draft_of(item)) +
                         kItemClose + "\n\n";
    if(mode == BlindMode::text_only) {
        prompt += "Keep the scientific question and the meaning of the correct answer unchanged. Revise the wording "
                  "and the distractors so the answer cannot be inferred from the text alone.";
    } else {
        prompt += "The question may change substantially, but it must still follow this reasoning chain and keep "
                  "its answer correct:\n" + (chain ? chain::summarize(*chain) : item.chain_summary) +
                  "\nRemove any information that the figure caption alone would give away.";
    }
    prompt += "\nReply exactly in this format:\nQUESTION: ...\nANSWER: ...\nDISTRACTOR: ... (one line per wrong answer, "
              "" + std::to_string(item.options.size() - 1) + " in total)";
    return prompt;
}

/// Rewritten item with the correct answer kept at its current position.
/// Missing fields or too few usable distractors are malformed rewrites.
inline mcq::MCQItem apply_rewrite(const mcq::MCQItem &item, const mcq::Draft &rewrite) {
    const std::size_t m = item.options.size();
    if(text::trim(rewrite.stem).empty() || text::trim(rewrite.correct).empty())
        throw Error(ErrorCode::malformed_rewrite, "rewrite lacks a question or an answer");
    if(rewrite.distractors.size() < m - 1)
        throw Error(ErrorCode::malformed_rewrite, "rewrite has " + std::to_string(rewrite.distractors.size()) +
                                                      " distractors, need " + std::to_string(m - 1));
    mcq::MCQItem out = item;
    out.stem = text::trim(rewrite.stem);
    std::size_t next = 0;
    for(std::size_t i = 0; i < m; ++i)
        out.options[i] = i + 1 == item.answer_index ? text::trim(rewrite.correct) : text::trim(rewrite.distractors[next++]);
    try {
        mcq::check_item(out);
    } catch(const Error &e) {
        throw Error(ErrorCode::malformed_rewrite, e.what());
    }
    return out;
}

inline mcq::MCQItem rewrite_item(const mcq::MCQItem &item, const std::string &strategy, BlindMode mode,
                                 const chain::ReasoningChain *chain, const llm::Gateway &gateway) {
    require(!text::trim(strategy).empty(), "rewrite_item: strategy must be non-empty");
    auto raw = gateway.ask(llm::roles::rewriter, "You revise exam questions.",
                           rewrite_user_prompt(item, strategy, mode, chain)).text;
    auto parsed = mcq::parse_block(raw);
    if(!parsed) throw Error(ErrorCode::malformed_rewrite, "rewriter output lacks QUESTION or ANSWER");
    return apply_rewrite(item, *parsed);
}

enum class CheckerMode { llm, deterministic };

struct CheckOptions {
    CheckerMode mode = CheckerMode::llm;
    double answer_f1_threshold = 0.6; // deterministic Stage-1 fallback
};

struct CheckVerdict {
    bool pass{false};
    std::string reason;
    bool used_fallback{false};
};

namespace detail {

inline bool shares_token(const std::vector<std::string> &text_tokens, std::string_view statement) {
    for(const auto &t : text::content_tokens(statement))
        if(std::find(text_tokens.begin(), text_tokens.end(), t) != text_tokens.end()) return true;
    return false;
}

} // namespace detail

/// Deterministic chain-term containment: the rewritten stem plus correct answer
/// must mention the chain's performance step and at least one upstream step.
inline bool follows_chain(const mcq::MCQItem &rewritten, const chain::ReasoningChain &chain) {
    if(chain.steps.size() < 2) return false;
    auto tokens = text::content_tokens(rewritten.stem + " " + rewritten.correct_option());
    if(!detail::shares_token(tokens, chain.steps.back().statement)) return false;
    for(std::size_t i = 0; i + 1 < chain.steps.size(); ++i)
        if(detail::shares_token(tokens, chain.steps[i].statement)) return true;
    return false;
}

inline CheckVerdict deterministic_check(const mcq::MCQItem &original, const mcq::MCQItem &rewritten, BlindMode mode,
                                        const chain::ReasoningChain *chain, const CheckOptions &opts) {
    if(mode == BlindMode::caption_only && chain) {
        if(follows_chain(rewritten, *chain)) return {true, "chain terms retained", true};
        return {false, "reasoning path divergence", true};
    }
    double f1 = text::token_f1(original.correct_option(), rewritten.correct_option());
    if(f1 >= opts.answer_f1_threshold) return {true, "answer equivalent", true};
    return {false, "answer divergence", true};
}

inline std::string checker_user_prompt(const mcq::MCQItem &original, const mcq::MCQItem &rewritten, BlindMode mode,
                                       const chain::ReasoningChain *chain) {
    std::string prompt = "Original question:\n" + mcq::format_block(mcq::draft_of(original)) +
                         "\nRewritten question:\n" + mcq::format_block(mcq::draft_of(rewritten)) + "\n";
    if(mode == BlindMode::text_only) {
        prompt += "Does the rewritten question ask the same scientific question, with a correct answer that is "
                  "semantically equivalent to the original correct answer?";
    } else {
        prompt += "Does the rewritten question and its correct answer still follow this reasoning chain?\n" +
                  (chain ? chain::summarize(*chain) : original.chain_summary);
    }
    prompt += "\nReply with PASS, or with FAIL: <reason>.";
    return prompt;
}

/// Stage-1 (text_only) demands semantic equivalence of the correct answer;
/// Stage-2 (caption_only) only that the reasoning chain is still followed.
/// The LLM checker decides when available; on an outage or unparseable verdict
/// the deterministic rule decides.
inline CheckVerdict check_consistency(const mcq::MCQItem &original, const mcq::MCQItem &rewritten, BlindMode mode,
                                      const chain::ReasoningChain *chain, const llm::Gateway *gateway,
                                      const CheckOptions &opts = {}) {
    if(original.stem == rewritten.stem && original.options == rewritten.options &&
       original.answer_index == rewritten.answer_index)
        return {true, "identical", false};
    if(original.task != rewritten.task) return {false, "task type changed", false};
    try {
        mcq::check_item(rewritten);
    } catch(const Error &e) {
        return {false, std::string("answer key broken: ") + e.what(), false};
    }
    if(opts.mode == CheckerMode::deterministic || !gateway) return deterministic_check(original, rewritten, mode, chain, opts);
    try {
        auto out = text::trim(gateway->ask(llm::roles::checker, "You check rewritten exam questions for fidelity.",
                                           checker_user_prompt(original, rewritten, mode, chain)).text);
        if(text::starts_with_icase(out, "PASS")) return {true, "checker pass", false};
        if(text::starts_with_icase(out, "FAIL")) {
            auto reason = text::trim(out.substr(4));
            if(!reason.empty() && reason.front() == ':') reason = text::trim(reason.substr(1));
            if(reason.empty()) reason = mode == BlindMode::text_only ? "answer divergence" : "reasoning path divergence";
            return {false, reason, false};
        }
    } catch(const Error &e) {
        if(e.code() != ErrorCode::network && e.code() != ErrorCode::config && e.code() != ErrorCode::parse) throw;
    }
    return deterministic_check(original, rewritten, mode, chain, opts);
}

} // namespace matvqa::refine
