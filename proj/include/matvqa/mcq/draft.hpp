#pragma once

#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "matvqa/chain/types.hpp"
#include "matvqa/chain/validate.hpp"
#include "matvqa/common/error.hpp"
#include "matvqa/corpus/types.hpp"
#include "matvqa/llm/roles.hpp"
#include "matvqa/mcq/format.hpp"
#include "matvqa/mcq/types.hpp"

namespace matvqa::mcq {

/// True if the text contains a numeric literal followed by a unit token
/// ("10 T", "25 nm", "3.2 GPa", "15%", "2-fold").
inline bool has_numeric_quantity(std::string_view s) {
    static const std::regex quantity(
        R"((?:^|[^A-Za-z0-9_.])[-+]?\d+(?:\.\d+)?(?:\s*[x\xC3\x97]\s*10\^?[-+]?\d+)?\s*-?\s*)"
        R"((%|at\.?\s?%|wt\.?\s?%|vol\.?\s?%|fold|ppm|ppb|dB|)"
        R"(\xC2\xB0C|\xE2\x84\x83|K|mK|T|mT|Oe|kOe|G|)"
        R"(nm|\xC2\xB5m|\xCE\xBCm|um|mm|cm|m|km|pm|\xC3\x85|)"
        R"(GPa|MPa|kPa|Pa|bar|mbar|atm|Torr|)"
        R"(eV|meV|keV|MeV|V|mV|kV|A|mA|\xC2\xB5A|\xCE\xBCA|nA|W|mW|kW|J|mJ|kJ|)"
        R"(Hz|kHz|MHz|GHz|THz|s|ms|\xC2\xB5s|\xCE\xBCs|ns|ps|fs|min|h|)"
        R"(g|mg|kg|mol|mmol|M|mM|L|mL|)"
        R"(S/cm|S/m|\xCE\xA9|ohm|cm-1|cm\xE2\x88\x921|nm-1))"
        R"((?![A-Za-z]))");
    return std::regex_search(std::string(s), quantity);
}

inline bool has_comparison_cue(std::string_view s) {
    static const std::vector<std::string> cues = {"versus", "vs",       "compared",    "comparison", "than",
                                                  "whereas", "contrast", "outperforms", "superior",   "inferior"};
    auto tokens = text::tokenize(s);
    for(const auto &t : tokens)
        if(std::find(cues.begin(), cues.end(), t) != cues.end()) return true;
    return false;
}

/// One question to draft from a chain. Causal slots are anchored at a
/// non-terminal step and ask how it leads to the performance outcome.
struct TaskSlot {
    TaskType task{TaskType::causal};
    std::size_t anchor{0};

    bool operator==(const TaskSlot &) const = default;
};

inline bool task_feasible(const chain::ReasoningChain &chain, std::string_view caption, TaskType task) {
    if(chain.steps.empty()) return false;
    switch(task) {
        case TaskType::quantitative: return has_numeric_quantity(chain.steps.back().statement);
        case TaskType::comparative: {
            if(has_comparison_cue(caption)) return true;
            for(const auto &s : chain.steps)
                if(has_comparison_cue(s.statement)) return true;
            return false;
        }
        case TaskType::causal:
        case TaskType::hypothetical: return chain.steps.size() >= 2;
    }
    return false;
}

/// Question slots a validated chain supports: one causal slot per non-terminal
/// step, then one hypothetical, comparative and quantitative slot each when
/// feasible.
inline std::vector<TaskSlot> plan_tasks(const chain::ReasoningChain &chain, std::string_view caption,
                                        const std::vector<TaskType> &enabled = {kAllTasks.begin(), kAllTasks.end()}) {
    auto on = [&](TaskType t) { return std::find(enabled.begin(), enabled.end(), t) != enabled.end(); };
    std::vector<TaskSlot> out;
    if(chain.steps.size() < 2) return out;
    if(on(TaskType::causal))
        for(std::size_t i = 0; i + 1 < chain.steps.size(); ++i) out.push_back({TaskType::causal, i});
    std::size_t structure = 0;
    for(std::size_t i = 0; i + 1 < chain.steps.size(); ++i)
        if(chain.steps[i].component == chain::ComponentTag::S) {
            structure = i;
            break;
        }
    for(auto t : {TaskType::hypothetical, TaskType::comparative, TaskType::quantitative})
        if(on(t) && task_feasible(chain, caption, t)) out.push_back({t, structure});
    return out;
}

inline std::string draft_system_prompt() {
    return "You write research-level multiple-choice questions about materials-science figures. Questions must "
           "require reading the figure, not just the caption.";
}

inline std::string draft_user_prompt(const chain::ReasoningChain &chain, const corpus::FigureAsset &figure,
                                     const TaskSlot &slot) {
    const auto &anchor = chain.steps.at(slot.anchor).statement;
    const auto &outcome = chain.steps.back().statement;
    std::string prompt = "Figure caption:\n" + figure.caption + "\n\nReasoning chain:\n";
    for(const auto &s : chain.steps)
        prompt += std::to_string(s.index + 1) + ". [" + std::string(chain::to_string(s.component)) + "] " +
                  s.statement + "\n";
    prompt += "\nTask: ";
    switch(slot.task) {
        case TaskType::causal:
            prompt += "write a causal question asking how \"" + anchor + "\" leads to \"" + outcome + "\".";
            break;
        case TaskType::comparative:
            prompt += "write a comparative question contrasting the structures or conditions in the figure and "
                      "asking which gives the better outcome for \"" + outcome + "\".";
            break;
        case TaskType::quantitative:
            prompt += "write a quantitative question about the numerical relation between \"" + anchor +
                      "\" and \"" + outcome + "\".";
            break;
        case TaskType::hypothetical:
            prompt += "write a what-if question about an untested variation of \"" + anchor +
                      "\" and its effect on \"" + outcome + "\".";
            break;
    }
    prompt += "\nGive one correct answer and at least three plausible wrong answers that are clearly distinct "
              "from each other.\nReply exactly in this format:\nQUESTION: ...\nANSWER: ...\nDISTRACTOR: ...\n"
              "DISTRACTOR: ...\nDISTRACTOR: ...";
    return prompt;
}

/// Drafts one question for a validated chain. Infeasible tasks throw a
/// feasibility error before any model call.
inline Draft draft_question(const chain::ReasoningChain &chain, const corpus::FigureAsset &figure,
                            const TaskSlot &slot, const llm::Gateway &gateway) {
    auto violations = chain::validate_chain(chain);
    require(violations.empty(), "draft_question: chain " + chain.chain_id + " failed validation");
    require(slot.anchor < chain.steps.size(), "draft_question: anchor step out of range");
    if(!task_feasible(chain, figure.caption, slot.task))
        throw Error(ErrorCode::feasibility, std::string(to_string(slot.task)) + " question infeasible for chain " +
                                                chain.chain_id);
    auto raw = gateway.ask(llm::roles::generator, draft_system_prompt(), draft_user_prompt(chain, figure, slot)).text;
    auto draft = parse_block(raw);
    if(!draft) throw Error(ErrorCode::parse, "draft for " + chain.chain_id + " lacks QUESTION/ANSWER: " + raw);
    if(draft->distractors.size() < 3)
        throw Error(ErrorCode::parse, "draft for " + chain.chain_id + " has fewer than 3 distractors");
    return *draft;
}

} // namespace matvqa::mcq
