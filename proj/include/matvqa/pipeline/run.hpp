#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "matvqa/chain/extract.hpp"
#include "matvqa/chain/lexicon.hpp"
#include "matvqa/chain/store.hpp"
#include "matvqa/chain/validate.hpp"
#include "matvqa/chain/verify.hpp"
#include "matvqa/common/error.hpp"
#include "matvqa/common/parallel.hpp"
#include "matvqa/common/rng.hpp"
#include "matvqa/corpus/context.hpp"
#include "matvqa/corpus/store.hpp"
#include "matvqa/llm/roles.hpp"
#include "matvqa/mcq/build.hpp"
#include "matvqa/mcq/draft.hpp"
#include "matvqa/pipeline/config.hpp"
#include "matvqa/pipeline/dataset.hpp"
#include "matvqa/refine/refine.hpp"

namespace matvqa::pipeline {

/// A per-item failure: the run records it and moves on.
struct Failure {
    std::string phase;
    std::string subject;
    std::string code;
    std::string message;
};

inline void to_json(json &j, const Failure &f) {
    j = json{{"phase", f.phase}, {"subject", f.subject}, {"code", f.code}, {"message", f.message}};
}

namespace detail {

template <typename Fn>
std::optional<Failure> isolate(const std::string &phase, const std::string &subject, Fn &&fn) {
    try {
        fn();
        return std::nullopt;
    } catch(const Error &e) {
        return Failure{phase, subject, std::string(to_string(e.code())), e.what()};
    }
}

} // namespace detail

struct ChainPhase {
    std::vector<chain::ChainRecord> records; // figure order within paper order
    std::vector<Failure> failures;
};

/// Extracts, verifies and validates one chain per figure. Invalid chains are
/// kept as quarantined records.
inline ChainPhase extract_chains(const corpus::CorpusStore &store, const chain::ComponentLexicon &lexicon,
                                 const llm::Gateway &gateway, const PipelineConfig &cfg) {
    struct Job {
        corpus::PaperRecord const *paper;
        const corpus::FigureAsset *figure;
    };
    std::vector<corpus::PaperRecord> papers;
    for(const auto &id : store.ids()) papers.push_back(store.get(id));
    std::vector<Job> jobs;
    for(const auto &p : papers)
        for(const auto &f : p.figures) jobs.push_back({&p, &f});

    std::vector<std::optional<chain::ChainRecord>> out(jobs.size());
    std::vector<std::optional<Failure>> failed(jobs.size());
    const chain::VerifyOptions vopts{cfg.theta, cfg.top_k};
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
        const auto &paper = *jobs[i].paper;
        const auto &figure = *jobs[i].figure;
        auto id = chain::chain_id_for(paper.paper_id, figure.figure_id);
        failed[i] = detail::isolate("extract", id, [&] {
            auto context = figure.context;
            if(context.empty()) context = corpus::link_context(paper.body_text, figure.number, cfg.context_window).snippets;
            if(context.empty()) throw Error(ErrorCode::extraction, "figure " + figure.figure_id + " has no context text");
            auto c = chain::extract_chain(paper.paper_id, figure, context, lexicon, gateway);
            c = chain::verify_chain(std::move(c), paper.body_text, vopts);
            chain::ChainRecord rec;
            rec.chain = std::move(c);
            for(const auto &v : chain::validate_chain(rec.chain, cfg.theta)) rec.violations.push_back(v.message);
            rec.accepted = rec.violations.empty();
            out[i] = std::move(rec);
        });
    });
    ChainPhase phase;
    for(std::size_t i = 0; i < jobs.size(); ++i) {
        if(out[i]) phase.records.push_back(std::move(*out[i]));
        if(failed[i]) phase.failures.push_back(*failed[i]);
    }
    return phase;
}

struct BuildPhase {
    std::vector<mcq::MCQItem> items; // raw, shuffled
    std::vector<Failure> failures;
};

/// Seed for one item's option shuffle, derived from the run seed and the slot.
inline std::uint64_t item_shuffle_seed(std::uint64_t run_seed, const std::string &chain_id, const mcq::TaskSlot &slot) {
    return mix_seed(run_seed, chain_id + "|" + std::string(mcq::to_string(slot.task)) + "|" + std::to_string(slot.anchor));
}

/// Drafts and assembles raw items for every feasible (chain, task) slot.
inline BuildPhase build_items(const corpus::CorpusStore &store, const std::vector<chain::ChainRecord> &chains,
                              const llm::Gateway &gateway, const PipelineConfig &cfg) {
    struct Job {
        const chain::ReasoningChain *chain;
        const corpus::FigureAsset *figure;
        mcq::TaskSlot slot;
    };
    std::map<std::string, corpus::PaperRecord> papers;
    std::vector<Job> jobs;
    std::vector<Failure> pre;
    for(const auto &rec : chains) {
        if(!rec.accepted) continue;
        auto &paper = papers.try_emplace(rec.chain.paper_id, store.get(rec.chain.paper_id)).first->second;
        const auto *figure = paper.find_figure(rec.chain.figure_id);
        if(!figure) {
            pre.push_back({"build", rec.chain.chain_id, "not_found", "figure missing from corpus"});
            continue;
        }
        for(const auto &slot : mcq::plan_tasks(rec.chain, figure->caption, cfg.tasks))
            jobs.push_back({&rec.chain, figure, slot});
    }

    std::vector<std::optional<mcq::MCQItem>> out(jobs.size());
    std::vector<std::optional<Failure>> failed(jobs.size());
    const mcq::BuildOptions bopts{cfg.option_count, cfg.diversity_cap};
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
        const auto &job = jobs[i];
        auto subject = job.chain->chain_id + "#" + std::string(mcq::to_string(job.slot.task)) + "@" +
                       std::to_string(job.slot.anchor);
        failed[i] = detail::isolate("build", subject, [&] {
            auto draft = mcq::draft_question(*job.chain, *job.figure, job.slot, gateway);
            mcq::ItemContext ctx{job.slot.task,
                                 job.figure->figure_id,
                                 job.chain->chain_id,
                                 job.chain->paper_id,
                                 job.figure->image.sha256,
                                 job.figure->image.media_type,
                                 job.figure->caption,
                                 chain::summarize(*job.chain)};
            auto item = mcq::to_mcq(draft, ctx, bopts);
            out[i] = mcq::shuffle_options(std::move(item), item_shuffle_seed(cfg.shuffle_seed, job.chain->chain_id, job.slot));
        });
    });
    BuildPhase phase;
    phase.failures = std::move(pre);
    std::set<std::string> seen;
    for(std::size_t i = 0; i < jobs.size(); ++i) {
        if(failed[i]) phase.failures.push_back(*failed[i]);
        if(!out[i]) continue;
        if(!seen.insert(out[i]->item_id).second) {
            phase.failures.push_back({"build", out[i]->item_id, "construction", "duplicate item"});
            continue;
        }
        phase.items.push_back(std::move(*out[i]));
    }
    return phase;
}

struct RefinePhase {
    std::vector<DatasetEntry> entries; // every snapshot
    std::vector<json> traces;          // one per item per stage
    std::vector<Failure> failures;
    std::size_t refined{0};
    std::size_t quarantined{0};
};

inline refine::RefineOptions refine_options(const PipelineConfig &cfg) {
    refine::RefineOptions o;
    o.max_iterations = cfg.max_iterations;
    o.rewrite_budget = cfg.rewrite_budget;
    o.check.mode = cfg.checker;
    o.check.answer_f1_threshold = cfg.checker_threshold;
    o.language_stage = cfg.language_stage;
    o.caption_stage = cfg.caption_stage;
    return o;
}

/// Refines every raw item. Items whose refinement raises are quarantined with
/// the error; items that exhaust the rewrite budget are quarantined with their
/// partial snapshots.
inline RefinePhase refine_items(const std::vector<mcq::MCQItem> &raw,
                                const std::map<std::string, chain::ReasoningChain> &chains,
                                const llm::Gateway &gateway, const PipelineConfig &cfg) {
    std::vector<std::optional<refine::RefineResult>> results(raw.size());
    std::vector<std::optional<Failure>> failed(raw.size());
    const auto opts = refine_options(cfg);
    parallel_for(raw.size(), cfg.workers, [&](std::size_t i) {
        failed[i] = detail::isolate("refine", raw[i].item_id, [&] {
            auto it = chains.find(raw[i].chain_id);
            results[i] = refine::refine_item(raw[i], it == chains.end() ? nullptr : &it->second, gateway, opts);
        });
    });
    RefinePhase phase;
    for(std::size_t i = 0; i < raw.size(); ++i) {
        if(failed[i]) {
            phase.failures.push_back(*failed[i]);
            ++phase.quarantined;
            phase.entries.push_back({raw[i], true, failed[i]->code + ": " + failed[i]->message});
            continue;
        }
        const auto &r = *results[i];
        for(const auto &t : r.traces) phase.traces.push_back(json(t));
        if(r.quarantined) {
            ++phase.quarantined;
            for(const auto &s : r.snapshots) phase.entries.push_back({s, true, "max_rewrite_attempts"});
        } else {
            ++phase.refined;
            for(const auto &s : r.snapshots) phase.entries.push_back({s, false, ""});
        }
    }
    return phase;
}

struct RunSummary {
    std::size_t papers{0};
    std::size_t figures{0};
    std::size_t chains_accepted{0};
    std::size_t chains_quarantined{0};
    std::size_t items_generated{0};
    std::size_t items_in_dataset{0};
    std::size_t items_quarantined{0};
    std::size_t failures{0};

    bool conserved() const { return items_in_dataset + items_quarantined == items_generated; }
};

inline void to_json(json &j, const RunSummary &s) {
    j = json{{"papers", s.papers},
             {"figures", s.figures},
             {"chains_accepted", s.chains_accepted},
             {"chains_quarantined", s.chains_quarantined},
             {"items_generated", s.items_generated},
             {"items_in_dataset", s.items_in_dataset},
             {"items_quarantined", s.items_quarantined},
             {"failures", s.failures}};
}

struct PipelineResult {
    Dataset dataset;
    std::vector<chain::ChainRecord> chains;
    std::vector<json> traces;
    std::vector<Failure> failures;
    RunSummary summary;
};

inline json dataset_seeds(const PipelineConfig &cfg) {
    return {{"shuffle", cfg.shuffle_seed}, {"sampling", cfg.sampling_seed}};
}

/// Entries plus header, serialized once so the hash is filled in.
inline Dataset make_dataset(std::vector<DatasetEntry> entries, const PipelineConfig &cfg, const std::string &created) {
    Dataset ds;
    ds.header.config_digest = config_digest(cfg);
    ds.header.created = created;
    ds.header.seeds = dataset_seeds(cfg);
    ds.entries = std::move(entries);
    serialize_dataset(ds);
    return ds;
}

/// extract -> build -> refine over the whole corpus store. Per-item failures
/// are recorded, never fatal. Output depends only on the corpus, the config,
/// `created`, and the gateway's responses.
inline PipelineResult run_pipeline(const PipelineConfig &cfg, const llm::Gateway &gateway, const std::string &created) {
    validate(cfg);
    corpus::CorpusStore store(cfg.corpus_path());
    auto lexicon = chain::ComponentLexicon::load(cfg.lexicon_path());

    PipelineResult result;
    auto chains = extract_chains(store, lexicon, gateway, cfg);
    auto built = build_items(store, chains.records, gateway, cfg);
    auto refined = refine_items(built.items, chain::accepted_chains(chains.records), gateway, cfg);

    auto &s = result.summary;
    for(const auto &id : store.ids()) {
        ++s.papers;
        s.figures += store.get(id).figures.size();
    }
    for(const auto &r : chains.records) (r.accepted ? s.chains_accepted : s.chains_quarantined)++;
    s.items_generated = built.items.size();
    s.items_in_dataset = refined.refined;
    s.items_quarantined = refined.quarantined;

    for(auto *phase : {&chains.failures, &built.failures, &refined.failures})
        result.failures.insert(result.failures.end(), phase->begin(), phase->end());
    s.failures = result.failures.size();
    if(!s.conserved())
        throw Error(ErrorCode::validation, "item conservation violated: " + canonical_dump(json(s)));

    result.chains = std::move(chains.records);
    result.traces = std::move(refined.traces);
    result.dataset = make_dataset(std::move(refined.entries), cfg, created);
    return result;
}

} // namespace matvqa::pipeline
