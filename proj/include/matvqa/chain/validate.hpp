#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matvqa/chain/types.hpp"
#include "matvqa/chain/verify.hpp"
#include "matvqa/common/jsonl.hpp"

namespace matvqa::chain {

enum class ViolationKind { too_short, terminal_not_pe, unverified_step, empty_statement };

inline std::string_view to_string(ViolationKind k) {
    switch(k) {
        case ViolationKind::too_short: return "too_short";
        case ViolationKind::terminal_not_pe: return "terminal_not_pe";
        case ViolationKind::unverified_step: return "unverified_step";
        case ViolationKind::empty_statement: return "empty_statement";
    }
    return "unknown";
}

struct Violation {
    ViolationKind kind;
    std::optional<std::size_t> step;
    std::string message;

    bool operator==(const Violation &) const = default;
};

/// Every failed chain invariant; empty means the chain is acceptable. A step
/// counts as verified only if its best evidence score reaches theta, whatever
/// its stored flag says.
inline std::vector<Violation> validate_chain(const ReasoningChain &chain, double theta = VerifyOptions{}.theta) {
    std::vector<Violation> out;
    if(chain.steps.size() < 2)
        out.push_back({ViolationKind::too_short, std::nullopt,
                       "chain has " + std::to_string(chain.steps.size()) + " steps, needs at least 2"});
    if(chain.steps.empty() || chain.steps.back().component != ComponentTag::Pe)
        out.push_back({ViolationKind::terminal_not_pe, std::nullopt, "terminal not Pe"});
    for(const auto &s : chain.steps) {
        if(text::trim(s.statement).empty())
            out.push_back({ViolationKind::empty_statement, s.index, "empty statement at step " + std::to_string(s.index)});
        if(!(s.best_score() >= theta))
            out.push_back({ViolationKind::unverified_step, s.index, "unverified step " + std::to_string(s.index)});
    }
    return out;
}

inline void to_json(json &j, const Violation &v) {
    j = json{{"kind", to_string(v.kind)}, {"message", v.message}};
    j["step"] = v.step ? json(*v.step) : json(nullptr);
}

} // namespace matvqa::chain
