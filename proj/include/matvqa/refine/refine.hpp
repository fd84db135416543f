#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matvqa/chain/types.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/llm/roles.hpp"
#include "matvqa/mcq/types.hpp"
#include "matvqa/refine/agents.hpp"

namespace matvqa::refine {

enum class TerminalReason { evaluator_failed, max_iterations, max_rewrite_attempts, disabled };

inline std::string_view to_string(TerminalReason r) {
    switch(r) {
        case TerminalReason::evaluator_failed: return "evaluator_failed";
        case TerminalReason::max_iterations: return "max_iterations";
        case TerminalReason::max_rewrite_attempts: return "max_rewrite_attempts";
        case TerminalReason::disabled: return "disabled";
    }
    return "unknown";
}

struct RefineOptions {
    std::size_t max_iterations = 3; // T
    std::size_t rewrite_budget = 3; // failed rewrites tolerated per iteration
    CheckOptions check;
    bool language_stage = true;
    bool caption_stage = true;
};

struct RewriteDiff {
    std::string stem_before, stem_after;
    std::vector<std::string> options_before, options_after;
};

struct RewriteAttempt {
    std::size_t attempt{0}; // 1-based within the iteration
    std::optional<RewriteDiff> diff;
    CheckVerdict verdict;
};

struct VerdictSummary {
    std::optional<std::size_t> choice;
    bool correct{false};
    bool abstained{false};
};

struct Iteration {
    std::size_t t{0};
    VerdictSummary evaluator;
    std::string strategy;
    std::vector<RewriteAttempt> attempts;
};

/// Append-only record of one refinement stage for one item.
struct StageTrace {
    std::string item_id;
    mcq::Stage stage{mcq::Stage::lang_removed};
    BlindMode mode{BlindMode::text_only};
    std::vector<Iteration> iterations; // one per rewrite cycle
    std::optional<VerdictSummary> exit_verdict; // the incorrect verdict that ended the loop
    TerminalReason terminal{TerminalReason::max_iterations};
    std::size_t evaluator_calls{0};
    std::size_t rewrite_attempts{0};
};

struct RefineResult {
    std::vector<mcq::MCQItem> snapshots; // raw, lang_removed, caption_removed (fewer when quarantined)
    std::vector<StageTrace> traces;
    bool quarantined{false};
    mcq::MCQItem final_item;
};

inline mcq::MCQItem as_stage(mcq::MCQItem item, mcq::Stage stage, const std::string &parent) {
    item.stage = stage;
    item.lineage = parent;
    item.item_id = mcq::compute_item_id(item);
    return item;
}

namespace detail {

inline VerdictSummary summarize(const BlindVerdict &v) { return {v.choice, v.correct, v.abstained}; }

/// One refinement stage. Each iteration: blind evaluation; stop if incorrect;
/// otherwise derive a strategy and rewrite until the checker accepts. A rejected
/// rewrite is discarded and retried from the last accepted item without
/// advancing t; rewrite_budget rejections in one iteration quarantine the item.
inline StageTrace run_stage(mcq::MCQItem &current, BlindMode mode, mcq::Stage stage,
                            const chain::ReasoningChain *chain, const llm::Gateway &gateway,
                            const RefineOptions &opts) {
    StageTrace trace;
    trace.item_id = current.item_id;
    trace.stage = stage;
    trace.mode = mode;
    const std::optional<std::string> caption =
        mode == BlindMode::caption_only ? std::optional<std::string>(current.caption) : std::nullopt;

    std::size_t t = 0;
    while(t < opts.max_iterations) {
        auto verdict = evaluate_blind(current, mode, caption, gateway);
        ++trace.evaluator_calls;
        if(!verdict.correct) {
            trace.exit_verdict = summarize(verdict);
            trace.terminal = TerminalReason::evaluator_failed;
            return trace;
        }
        Iteration it;
        it.t = t;
        it.evaluator = summarize(verdict);
        it.strategy = derive_strategy(verdict.cot, mode, gateway);

        std::optional<mcq::MCQItem> accepted;
        for(std::size_t attempt = 1; attempt <= opts.rewrite_budget; ++attempt) {
            ++trace.rewrite_attempts;
            RewriteAttempt record;
            record.attempt = attempt;
            try {
                auto candidate = rewrite_item(current, it.strategy, mode, chain, gateway);
                record.diff = RewriteDiff{current.stem, candidate.stem, current.options, candidate.options};
                record.verdict = check_consistency(current, candidate, mode, chain, &gateway, opts.check);
                if(record.verdict.pass) accepted = std::move(candidate);
            } catch(const Error &e) {
                if(e.code() != ErrorCode::malformed_rewrite) throw;
                record.verdict = {false, std::string("malformed rewrite: ") + e.what(), false};
            }
            it.attempts.push_back(std::move(record));
            if(accepted) break;
        }
        trace.iterations.push_back(std::move(it));
        if(!accepted) {
            trace.terminal = TerminalReason::max_rewrite_attempts;
            return trace;
        }
        current = std::move(*accepted);
        ++t;
    }
    trace.terminal = TerminalReason::max_iterations;
    return trace;
}

} // namespace detail

/// Two-stage refinement of a raw item: language-shortcut removal with
/// text-only blind evaluation, then caption-shortcut removal with caption-only
/// blind evaluation. Emits a snapshot per completed stage, each linked to its
/// parent by lineage.
inline RefineResult refine_item(const mcq::MCQItem &raw, const chain::ReasoningChain *chain,
                                const llm::Gateway &gateway, const RefineOptions &opts = {}) {
    require(raw.stage == mcq::Stage::raw, "refine_item: item " + raw.item_id + " is not a raw item");
    RefineResult result;
    result.snapshots.push_back(raw);

    struct StagePlan {
        mcq::Stage stage;
        BlindMode mode;
        bool enabled;
    };
    const StagePlan plan[] = {{mcq::Stage::lang_removed, BlindMode::text_only, opts.language_stage},
                              {mcq::Stage::caption_removed, BlindMode::caption_only, opts.caption_stage}};

    mcq::MCQItem current = raw;
    for(const auto &step : plan) {
        StageTrace trace;
        if(step.enabled) {
            trace = detail::run_stage(current, step.mode, step.stage, chain, gateway, opts);
        } else {
            trace.item_id = current.item_id;
            trace.stage = step.stage;
            trace.mode = step.mode;
            trace.terminal = TerminalReason::disabled;
        }
        result.traces.push_back(trace);
        if(trace.terminal == TerminalReason::max_rewrite_attempts) {
            result.quarantined = true;
            result.final_item = result.snapshots.back();
            return result;
        }
        current = as_stage(std::move(current), step.stage, result.snapshots.back().item_id);
        result.snapshots.push_back(current);
    }
    result.final_item = current;
    return result;
}

inline void to_json(json &j, const VerdictSummary &v) {
    j = json{{"choice", v.choice ? json(*v.choice) : json(nullptr)}, {"correct", v.correct}, {"abstained", v.abstained}};
}

inline void to_json(json &j, const CheckVerdict &v) {
    j = json{{"pass", v.pass}, {"reason", v.reason}, {"fallback", v.used_fallback}};
}

inline void to_json(json &j, const RewriteAttempt &a) {
    j = json{{"attempt", a.attempt}, {"checker", a.verdict}};
    if(a.diff)
        j["diff"] = {{"stem_before", a.diff->stem_before},
                     {"stem_after", a.diff->stem_after},
                     {"options_before", a.diff->options_before},
                     {"options_after", a.diff->options_after}};
    else
        j["diff"] = nullptr;
}

inline void to_json(json &j, const Iteration &it) {
    j = json{{"t", it.t}, {"evaluator", it.evaluator}, {"strategy", it.strategy}, {"attempts", it.attempts}};
}

inline void to_json(json &j, const StageTrace &s) {
    j = json{{"item_id", s.item_id},
             {"stage", mcq::to_string(s.stage)},
             {"mode", to_string(s.mode)},
             {"iterations", s.iterations},
             {"exit_verdict", s.exit_verdict ? json(*s.exit_verdict) : json(nullptr)},
             {"terminal_reason", to_string(s.terminal)},
             {"evaluator_calls", s.evaluator_calls},
             {"rewrite_attempts", s.rewrite_attempts}};
}

} // namespace matvqa::refine
