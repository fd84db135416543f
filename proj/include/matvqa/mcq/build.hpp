#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/rng.hpp"
#include "matvqa/common/text.hpp"
#include "matvqa/mcq/format.hpp"
#include "matvqa/mcq/types.hpp"

namespace matvqa::mcq {

/// Fields copied onto every item built from one (chain, figure, task).
struct ItemContext {
    TaskType task{TaskType::causal};
    std::string figure_id;
    std::string chain_id;
    std::string paper_id;
    std::string image_hash;
    std::string image_media_type;
    std::string caption;
    std::string chain_summary;
};

struct BuildOptions {
    std::size_t option_count = kDefaultOptions;
    double diversity_cap = 0.8; // max pairwise token F1 between options
};

/// Raw item with the correct answer first. Distractors are taken in draft
/// order, skipping any that duplicate or nearly duplicate (token F1 >= cap)
/// the correct answer or an already chosen distractor.
inline MCQItem to_mcq(const Draft &draft, const ItemContext &ctx, const BuildOptions &opts = {}) {
    const std::size_t m = opts.option_count;
    require(m >= kMinOptions && m <= kMaxOptions, "to_mcq: option count must be in [2, 10]");
    if(draft.distractors.size() < m - 1)
        throw Error(ErrorCode::construction, "to_mcq: draft has " + std::to_string(draft.distractors.size()) +
                                                 " distractors, need " + std::to_string(m - 1));
    std::vector<std::string> options{text::trim(draft.correct)};
    std::set<std::string> seen{normalize_option(draft.correct)};
    for(const auto &raw : draft.distractors) {
        if(options.size() == m) break;
        auto d = text::trim(raw);
        auto n = normalize_option(d);
        if(n.empty() || seen.contains(n)) continue;
        bool too_close = false;
        for(const auto &o : options) too_close = too_close || text::token_f1(o, d) >= opts.diversity_cap;
        if(too_close) continue;
        seen.insert(n);
        options.push_back(d);
    }
    if(options.size() < m)
        throw Error(ErrorCode::construction, "to_mcq: only " + std::to_string(options.size() - 1) +
                                                 " usable distractors after deduplication, need " +
                                                 std::to_string(m - 1));
    MCQItem item;
    item.task = ctx.task;
    item.stem = text::trim(draft.stem);
    item.options = std::move(options);
    item.answer_index = 1;
    item.figure_id = ctx.figure_id;
    item.chain_id = ctx.chain_id;
    item.stage = Stage::raw;
    item.paper_id = ctx.paper_id;
    item.image_hash = ctx.image_hash;
    item.image_media_type = ctx.image_media_type;
    item.caption = ctx.caption;
    item.chain_summary = ctx.chain_summary;
    item.item_id = compute_item_id(item);
    check_item(item);
    return item;
}

/// Seed 0 is the identity permutation.
inline constexpr std::uint64_t kIdentityShuffleSeed = 0;

inline std::vector<std::size_t> option_permutation(std::size_t m, std::uint64_t seed) {
    if(seed == kIdentityShuffleSeed) {
        std::vector<std::size_t> identity(m);
        for(std::size_t i = 0; i < m; ++i) identity[i] = i;
        return identity;
    }
    return seeded_permutation(m, seed);
}

/// Reorders options so that new position i holds old option perm[i]; the
/// answer index follows the correct option.
inline MCQItem shuffle_options(MCQItem item, std::uint64_t seed) {
    auto perm = option_permutation(item.options.size(), seed);
    std::vector<std::string> reordered(item.options.size());
    std::size_t answer = 0;
    for(std::size_t i = 0; i < perm.size(); ++i) {
        reordered[i] = item.options[perm[i]];
        if(perm[i] + 1 == item.answer_index) answer = i + 1;
    }
    item.options = std::move(reordered);
    item.answer_index = answer;
    item.shuffle_seed = seed;
    return item;
}

/// Inverse of the most recent shuffle_options.
inline MCQItem unshuffle_options(MCQItem item) {
    require(item.shuffle_seed.has_value(), "unshuffle_options: item has no shuffle seed");
    auto perm = option_permutation(item.options.size(), *item.shuffle_seed);
    std::vector<std::string> original(item.options.size());
    std::size_t answer = 0;
    for(std::size_t i = 0; i < perm.size(); ++i) {
        original[perm[i]] = item.options[i];
        if(i + 1 == item.answer_index) answer = perm[i] + 1;
    }
    item.options = std::move(original);
    item.answer_index = answer;
    item.shuffle_seed.reset();
    return item;
}

} // namespace matvqa::mcq
