#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/common/parallel.hpp"
#include "matvqa/eval/extract.hpp"
#include "matvqa/eval/prompt.hpp"
#include "matvqa/llm/backend.hpp"
#include "matvqa/mcq/types.hpp"

namespace matvqa::eval {

inline constexpr const char *kRunFormat = "matvqa-run";
inline constexpr int kRunVersion = 1;

struct EvalRecord {
    std::string item_id;
    mcq::TaskType task{mcq::TaskType::causal};
    mcq::Stage stage{mcq::Stage::raw};
    std::size_t answer_index{1};
    std::string response;
    std::optional<std::size_t> extracted;
    bool correct{false};
    bool skipped{false};
    std::string skip_reason;
    double latency_ms{0};

    bool operator==(const EvalRecord &) const = default;
};

struct EvalRun {
    std::string run_id;
    std::string model_id;
    std::string template_version;
    std::string dataset_hash;
    std::optional<mcq::Stage> stage_filter;
    double elapsed_ms{0};
    std::vector<EvalRecord> records;
};

/// Builds the record from a raw response; correct iff extracted == answer_index.
inline EvalRecord score_response(const mcq::MCQItem &item, std::string response) {
    EvalRecord r;
    r.item_id = item.item_id;
    r.task = item.task;
    r.stage = item.stage;
    r.answer_index = item.answer_index;
    r.extracted = extract_answer(response, item.options.size());
    r.correct = r.extracted && *r.extracted == item.answer_index;
    r.response = std::move(response);
    return r;
}

inline std::string make_run_id(const std::string &model_id, const std::string &dataset_hash,
                               std::optional<mcq::Stage> stage, const std::string &template_version) {
    return sha256_hex(model_id + "\n" + dataset_hash + "\n" + std::string(stage ? mcq::to_string(*stage) : "all") +
                      "\n" + template_version)
        .substr(0, 12);
}

struct RunOptions {
    std::size_t workers = 4;
    llm::Sampling sampling{};
};

/// Evaluates every item with the chain-of-thought prompt. Items whose figure
/// does not resolve are recorded as skipped, never scored.
inline EvalRun run_eval(const std::vector<mcq::MCQItem> &items, llm::Backend &backend, const std::string &model_id,
                        const PromptTemplate &tmpl, const FigureCheck &figure_exists, const std::string &dataset_hash,
                        std::optional<mcq::Stage> stage_filter, const RunOptions &opts = {}) {
    EvalRun run;
    run.model_id = model_id;
    run.template_version = tmpl.version;
    run.dataset_hash = dataset_hash;
    run.stage_filter = stage_filter;
    run.run_id = make_run_id(model_id, dataset_hash, stage_filter, tmpl.version);

    std::vector<const mcq::MCQItem *> scope;
    for(const auto &item : items)
        if(!stage_filter || item.stage == *stage_filter) scope.push_back(&item);
    run.records.resize(scope.size());

    auto start = std::chrono::steady_clock::now();
    parallel_for(scope.size(), opts.workers, [&](std::size_t i) {
        const auto &item = *scope[i];
        try {
            auto request = build_prompt(item, tmpl, model_id, figure_exists, opts.sampling);
            auto t0 = std::chrono::steady_clock::now();
            auto response = backend.complete(request);
            run.records[i] = score_response(item, response.text);
            run.records[i].latency_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        } catch(const Error &e) {
            if(e.code() != ErrorCode::missing_figure) throw;
            EvalRecord r;
            r.item_id = item.item_id;
            r.task = item.task;
            r.stage = item.stage;
            r.answer_index = item.answer_index;
            r.skipped = true;
            r.skip_reason = e.what();
            run.records[i] = std::move(r);
        }
    });
    run.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return run;
}

inline void to_json(json &j, const EvalRecord &r) {
    j = json{{"item_id", r.item_id},
             {"task", mcq::to_string(r.task)},
             {"stage", mcq::to_string(r.stage)},
             {"answer_index", r.answer_index},
             {"response", r.response},
             {"extracted", r.extracted ? json(*r.extracted) : json(nullptr)},
             {"correct", r.correct},
             {"skipped", r.skipped},
             {"skip_reason", r.skip_reason},
             {"latency_ms", r.latency_ms}};
}

inline void from_json(const json &j, EvalRecord &r) {
    r.item_id = j.at("item_id").get<std::string>();
    r.task = mcq::task_from_string(j.at("task").get<std::string>());
    r.stage = mcq::stage_from_string(j.value("stage", "raw"));
    r.answer_index = j.at("answer_index").get<std::size_t>();
    r.response = j.value("response", "");
    r.extracted.reset();
    if(j.contains("extracted") && !j["extracted"].is_null()) r.extracted = j["extracted"].get<std::size_t>();
    r.correct = j.at("correct").get<bool>();
    r.skipped = j.value("skipped", false);
    r.skip_reason = j.value("skip_reason", "");
    r.latency_ms = j.value("latency_ms", 0.0);
}

/// Header line, then one record per line.
inline std::string serialize_run(const EvalRun &run) {
    json header{{"format", kRunFormat},
                {"version", kRunVersion},
                {"run_id", run.run_id},
                {"model", run.model_id},
                {"template_version", run.template_version},
                {"dataset_hash", run.dataset_hash},
                {"stage", run.stage_filter ? json(mcq::to_string(*run.stage_filter)) : json(nullptr)},
                {"elapsed_ms", run.elapsed_ms},
                {"records", run.records.size()}};
    std::string out = canonical_dump(header) + "\n";
    for(const auto &r : run.records) out += canonical_dump(json(r)) + "\n";
    return out;
}

inline EvalRun parse_run(std::string_view content, const std::string &what = "run") {
    auto lines = parse_jsonl(content, what);
    if(lines.empty() || lines[0].value("format", "") != kRunFormat)
        throw ParseError(what + ": missing run header", 1);
    const auto &h = lines[0];
    EvalRun run;
    run.run_id = h.value("run_id", "");
    run.model_id = h.at("model").get<std::string>();
    run.template_version = h.value("template_version", "");
    run.dataset_hash = h.value("dataset_hash", "");
    if(h.contains("stage") && !h["stage"].is_null()) run.stage_filter = mcq::stage_from_string(h["stage"].get<std::string>());
    run.elapsed_ms = h.value("elapsed_ms", 0.0);
    for(std::size_t i = 1; i < lines.size(); ++i) {
        try {
            run.records.push_back(lines[i].get<EvalRecord>());
        } catch(const std::exception &e) {
            throw ParseError(what + ": bad record: " + e.what(), i + 1);
        }
    }
    return run;
}

inline void write_run(const EvalRun &run, const std::filesystem::path &path) { write_file(path, serialize_run(run)); }

inline EvalRun read_run(const std::filesystem::path &path) { return parse_run(read_file(path), path.string()); }

} // namespace matvqa::eval
