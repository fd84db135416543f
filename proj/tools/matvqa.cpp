#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "matvqa/chain/lexicon.hpp"
#include "matvqa/chain/store.hpp"
#include "matvqa/corpus/arxiv.hpp"
#include "matvqa/corpus/importer.hpp"
#include "matvqa/corpus/keywords.hpp"
#include "matvqa/corpus/store.hpp"
#include "matvqa/eval/annotate.hpp"
#include "matvqa/eval/prompt.hpp"
#include "matvqa/eval/report.hpp"
#include "matvqa/eval/run.hpp"
#include "matvqa/eval/score.hpp"
#include "matvqa/llm/live.hpp"
#include "matvqa/llm/transcript.hpp"
#include "matvqa/pipeline/config.hpp"
#include "matvqa/pipeline/dataset.hpp"
#include "matvqa/pipeline/mock.hpp"
#include "matvqa/pipeline/run.hpp"
#include "matvqa/review/queue.hpp"
#include "matvqa/review/server.hpp"

namespace fs = std::filesystem;
using namespace matvqa;

namespace {

enum Exit { ok = 0, usage = 1, partial = 2, fatal = 3 };

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string backend = "mock";
    std::string transcript;
    std::string provider;
    std::optional<std::string> created;
    bool verbose = false;
};

// Backend selected by --backend. Live and mock runs record into --transcript
// when given; replay reads from it.
class Session {
public:
    explicit Session(const Globals &g, std::optional<fs::path> corpus = std::nullopt) : m_globals(g) {
        llm::BackendPtr inner;
        if(g.backend == "mock") {
            inner = pipeline::mock_backend();
        } else if(g.backend == "replay") {
            if(g.transcript.empty()) throw Error(ErrorCode::usage, "--backend replay needs --transcript");
            inner = llm::load_transcript(g.transcript);
        } else if(g.backend == "live") {
            llm::ProviderConfig provider;
            if(!g.provider.empty()) provider = json::parse(read_file(g.provider)).get<llm::ProviderConfig>();
            llm::BlobResolver resolve = [corpus](const std::string &sha) -> std::optional<std::pair<std::string, std::string>> {
                if(!corpus) return std::nullopt;
                corpus::CorpusStore store(*corpus);
                if(!store.has_blob(sha)) return std::nullopt;
                return std::make_pair(store.read_blob(sha), store.blob_media_type(sha));
            };
            inner = std::make_shared<llm::RetryingBackend>(std::make_shared<llm::LiveBackend>(provider, resolve));
        } else {
            throw Error(ErrorCode::usage, "unknown backend '" + g.backend + "'");
        }
        if(g.backend != "replay" && !g.transcript.empty()) {
            m_record = std::make_shared<llm::Transcript>();
            inner = std::make_shared<llm::RecordingBackend>(inner, m_record);
        }
        m_backend = inner;
    }

    ~Session() {
        if(m_record) llm::record_transcript(m_record->entries(), m_globals.transcript);
    }

    llm::BackendPtr backend() const { return m_backend; }

private:
    const Globals &m_globals;
    llm::BackendPtr m_backend;
    std::shared_ptr<llm::Transcript> m_record;
};

pipeline::PipelineConfig load(const Globals &g) {
    if(g.config.empty()) throw Error(ErrorCode::usage, "--config is required");
    auto cfg = pipeline::load_config(g.config);
    if(g.seed) cfg.shuffle_seed = cfg.sampling_seed = *g.seed;
    pipeline::validate(cfg);
    return cfg;
}

void write_failures(const std::vector<pipeline::Failure> &failures) {
    for(const auto &f : failures) spdlog::warn("[{}] {}: {} ({})", f.phase, f.subject, f.message, f.code);
}

std::string jsonl(const std::vector<json> &rows) {
    std::string out;
    for(const auto &r : rows) out += canonical_dump(r) + "\n";
    return out;
}

json quarantine_report(const pipeline::Dataset &ds, const std::vector<pipeline::Failure> &failures) {
    json items = json::array();
    for(const auto &e : ds.entries)
        if(e.quarantined)
            items.push_back({{"item_id", e.item.item_id}, {"stage", mcq::to_string(e.item.stage)}, {"reason", e.quarantine_reason}});
    json fails = json::array();
    for(const auto &f : failures) fails.push_back(f);
    return {{"items", items}, {"failures", fails}};
}

std::set<std::string> rejected_in(const std::string &review_dir) {
    if(review_dir.empty()) return {};
    review::ReviewQueue queue(review_dir);
    return queue.rejected_items();
}

int cmd_ingest(const std::string &query, std::size_t max, const std::string &keywords, const std::string &out,
               const std::string &endpoint) {
    corpus::FetchOptions opts;
    if(!endpoint.empty()) opts.endpoint = endpoint;
    auto stubs = corpus::fetch_metadata(query, max, corpus::http_transport(), opts);
    auto terms = keywords.empty() ? corpus::default_keywords() : corpus::load_keywords(keywords);
    auto kept = corpus::filter_by_keywords(stubs, terms);
    std::vector<json> rows(kept.begin(), kept.end());
    write_file(out, jsonl(rows));
    std::cout << "fetched " << stubs.size() << ", kept " << kept.size() << " -> " << out << "\n";
    return ok;
}

int cmd_import(const std::vector<std::string> &dirs, const std::string &corpus_dir, std::size_t window) {
    corpus::CorpusStore store(corpus_dir);
    std::size_t imported = 0, failed = 0;
    for(const auto &dir : dirs) {
        try {
            auto record = corpus::import_parsed_paper(dir, window);
            store.put(record);
            ++imported;
            std::cout << record.paper_id << ": " << record.figures.size() << " figures\n";
        } catch(const Error &e) {
            ++failed;
            spdlog::error("[import] {}: {}", dir, e.what());
        }
    }
    std::cout << "imported " << imported << ", failed " << failed << "\n";
    return failed ? partial : ok;
}

int cmd_extract(const Globals &g, const std::string &out) {
    auto cfg = load(g);
    Session session(g, cfg.corpus_path());
    llm::Gateway gw{session.backend(), cfg.roles};
    corpus::CorpusStore store(cfg.corpus_path());
    auto phase = pipeline::extract_chains(store, chain::ComponentLexicon::load(cfg.lexicon_path()), gw, cfg);
    write_file(out, chain::serialize_chains(phase.records));
    write_failures(phase.failures);
    std::size_t accepted = 0;
    for(const auto &r : phase.records) accepted += r.accepted;
    std::cout << "chains: " << accepted << " accepted, " << phase.records.size() - accepted << " quarantined, "
              << phase.failures.size() << " failed\n";
    return phase.failures.empty() ? ok : partial;
}

int cmd_build(const Globals &g, const std::string &chains_path, const std::string &out) {
    auto cfg = load(g);
    Session session(g, cfg.corpus_path());
    llm::Gateway gw{session.backend(), cfg.roles};
    corpus::CorpusStore store(cfg.corpus_path());
    auto phase = pipeline::build_items(store, chain::read_chains(chains_path), gw, cfg);
    std::vector<json> rows(phase.items.begin(), phase.items.end());
    write_file(out, jsonl(rows));
    write_failures(phase.failures);
    std::cout << "items: " << phase.items.size() << ", failed " << phase.failures.size() << "\n";
    return phase.failures.empty() ? ok : partial;
}

int cmd_refine(const Globals &g, const std::string &chains_path, const std::string &items_path, const std::string &out) {
    auto cfg = load(g);
    Session session(g, cfg.corpus_path());
    llm::Gateway gw{session.backend(), cfg.roles};
    std::vector<mcq::MCQItem> raw;
    for(const auto &row : read_jsonl(items_path)) raw.push_back(row.get<mcq::MCQItem>());
    auto phase = pipeline::refine_items(raw, chain::accepted_chains(chain::read_chains(chains_path)), gw, cfg);
    auto ds = pipeline::make_dataset(std::move(phase.entries), cfg, pipeline::creation_time(g.created));
    fs::create_directories(out);
    write_file(fs::path(out) / "dataset.jsonl", pipeline::serialize_dataset(ds));
    write_file(fs::path(out) / "traces.jsonl", jsonl(phase.traces));
    write_file(fs::path(out) / "quarantine.json", quarantine_report(ds, phase.failures).dump(2) + "\n");
    write_failures(phase.failures);
    std::cout << "refined " << phase.refined << ", quarantined " << phase.quarantined << ", dataset "
              << ds.header.dataset_hash << "\n";
    return phase.failures.empty() ? ok : partial;
}

int cmd_run(const Globals &g, const std::string &out) {
    auto cfg = load(g);
    Session session(g, cfg.corpus_path());
    llm::Gateway gw{session.backend(), cfg.roles};
    auto result = pipeline::run_pipeline(cfg, gw, pipeline::creation_time(g.created));
    fs::create_directories(out);
    write_file(fs::path(out) / "dataset.jsonl", pipeline::serialize_dataset(result.dataset));
    write_file(fs::path(out) / "chains.jsonl", chain::serialize_chains(result.chains));
    write_file(fs::path(out) / "traces.jsonl", jsonl(result.traces));
    write_file(fs::path(out) / "quarantine.json", quarantine_report(result.dataset, result.failures).dump(2) + "\n");
    write_file(fs::path(out) / "summary.json", json(result.summary).dump(2) + "\n");
    write_failures(result.failures);
    std::cout << json(result.summary).dump(2) << "\ndataset " << result.dataset.header.dataset_hash << "\n";
    return result.failures.empty() ? ok : partial;
}

int cmd_review_sample(const Globals &g, const std::string &dataset, const std::string &dir, double fraction,
                      std::size_t per_item) {
    auto ds = pipeline::read_dataset(dataset);
    std::uint64_t seed = g.seed.value_or(1);
    auto tasks = review::sample_for_review(ds, fraction, seed, per_item);
    fs::create_directories(dir);
    review::ReviewQueue::create(dir, ds.header.dataset_hash, tasks, fraction, seed);
    std::cout << tasks.size() << " review tasks -> " << (fs::path(dir) / review::ReviewQueue::kTasksFile).string() << "\n";
    return ok;
}

int cmd_review_serve(const std::string &dir, const std::string &corpus_dir, const std::string &host, int port,
                     const std::vector<std::string> &reviewers) {
    auto queue = std::make_shared<review::ReviewQueue>(dir, std::set<std::string>(reviewers.begin(), reviewers.end()));
    review::FigureSource figures;
    if(!corpus_dir.empty()) {
        auto store = std::make_shared<corpus::CorpusStore>(corpus_dir);
        figures = [store](const std::string &sha) -> std::optional<review::FigureBytes> {
            if(!store->has_blob(sha)) return std::nullopt;
            return review::FigureBytes{store->read_blob(sha), store->blob_media_type(sha)};
        };
    }
    review::ReviewServer server(queue, figures);
    if(!server.bind(host, port)) throw Error(ErrorCode::config, "cannot bind " + host + ":" + std::to_string(port));
    std::cout << "review service on http://" << host << ":" << port << " (" << queue->tasks().size() << " tasks)\n";
    server.listen_after_bind();
    return ok;
}

int cmd_review_report(const std::string &dir, const std::string &out) {
    review::ReviewQueue queue(dir);
    auto text = json(queue.audit_report()).dump(2) + "\n";
    if(out.empty()) std::cout << text;
    else write_file(out, text);
    return ok;
}

int cmd_eval(const Globals &g, const std::string &model, const std::string &dataset, const std::string &stage,
             const std::string &out, const std::string &tmpl_path, std::string corpus_dir, std::size_t workers,
             const std::string &review_dir) {
    auto ds = pipeline::read_dataset(dataset);
    std::optional<mcq::Stage> filter;
    if(!stage.empty()) filter = mcq::parse_stage(stage);
    if(!stage.empty() && !filter) throw Error(ErrorCode::usage, "unknown stage '" + stage + "'");
    if(corpus_dir.empty() && !g.config.empty()) corpus_dir = load(g).corpus_path().string();
    if(corpus_dir.empty()) throw Error(ErrorCode::usage, "eval needs --corpus (or --config) to resolve figures");

    auto released = pipeline::export_dataset(ds, rejected_in(review_dir), {filter, false});
    std::vector<mcq::MCQItem> items;
    for(const auto &e : released.entries) items.push_back(e.item);

    corpus::CorpusStore store(corpus_dir);
    Session session(g, fs::path(corpus_dir));
    auto tmpl = tmpl_path.empty() ? eval::PromptTemplate{} : eval::load_template(tmpl_path);
    eval::RunOptions opts;
    opts.workers = workers;
    auto run = eval::run_eval(items, *session.backend(), model, tmpl,
                              [&](const std::string &sha) { return store.has_blob(sha); }, ds.header.dataset_hash,
                              filter, opts);
    eval::write_run(run, out);
    auto score = eval::score_run(run);
    std::cout << "run " << run.run_id << ": " << eval::format_pct(score.overall.accuracy()) << " over "
              << score.overall.total << " items, " << score.skipped << " skipped\n";
    return score.skipped ? partial : ok;
}

int cmd_report(const std::vector<std::string> &paths, bool ablation, const std::string &md, const std::string &csv) {
    std::vector<eval::EvalRun> runs;
    for(const auto &p : paths) runs.push_back(eval::read_run(p));
    std::string md_text, csv_text;
    if(ablation) {
        auto table = eval::ablation_report(eval::stage_scores(runs));
        md_text = table.markdown();
        csv_text = table.csv();
    } else {
        std::vector<eval::ModelScore> rows;
        for(const auto &r : runs) rows.push_back({r.model_id, eval::score_run(r)});
        md_text = eval::accuracy_markdown(rows);
        csv_text = eval::accuracy_csv(rows);
    }
    if(!md.empty()) write_file(md, md_text);
    if(!csv.empty()) write_file(csv, csv_text);
    std::cout << md_text;
    return ok;
}

int cmd_stats(const std::string &dataset, const std::string &corpus_dir, const std::string &out) {
    auto ds = pipeline::read_dataset(dataset);
    std::map<std::string, std::string> domains;
    if(!corpus_dir.empty()) {
        corpus::CorpusStore store(corpus_dir);
        for(const auto &id : store.ids())
            if(auto d = store.get(id).domain) domains[id] = *d;
    }
    auto text = json(pipeline::stats_report(ds, domains)).dump(2) + "\n";
    if(!out.empty()) write_file(out, text);
    std::cout << text;
    return ok;
}

int cmd_export(const std::string &dataset, const std::string &stage, bool include_rejected,
               const std::string &review_dir, const std::string &out) {
    auto ds = pipeline::read_dataset(dataset);
    pipeline::ExportOptions opts;
    opts.include_rejected = include_rejected;
    if(!stage.empty()) {
        opts.stage = mcq::parse_stage(stage);
        if(!opts.stage) throw Error(ErrorCode::usage, "unknown stage '" + stage + "'");
    }
    auto view = pipeline::export_dataset(ds, rejected_in(review_dir), opts);
    write_file(out, pipeline::serialize_dataset(view));
    std::cout << view.entries.size() << " items -> " << out << "\n";
    return ok;
}

int cmd_annotate(const std::string &run_path, const std::string &item, const std::string &tag,
                 const std::string &annotator, const std::string &note, const std::string &log, bool summary) {
    auto run = eval::read_run(run_path);
    if(!item.empty()) {
        if(tag.empty()) throw Error(ErrorCode::usage, "--tag is required with --item");
        eval::annotate_error(run, item, eval::error_tag_from_string(tag), annotator, note, log);
    }
    if(summary || item.empty()) {
        for(const auto &[t, n] : eval::error_summary(run, eval::read_annotations(log)))
            std::cout << eval::to_string(t) << "\t" << n << "\n";
    }
    return ok;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"matvqa: build and evaluate figure-grounded multiple-choice benchmarks"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "pipeline config (JSON)");
    app.add_option("--seed", g.seed, "overrides the shuffle and sampling seeds");
    app.add_option("--backend", g.backend, "agent backend")->check(CLI::IsMember({"live", "replay", "mock"}));
    app.add_option("--transcript", g.transcript, "read when replaying, recorded otherwise");
    app.add_option("--provider", g.provider, "provider config for the live backend (JSON)");
    app.add_option("--created", g.created, "creation time written into dataset headers");
    app.add_flag("-v,--verbose", g.verbose);

    std::function<int()> action;

    auto *ingest = app.add_subcommand("ingest", "search arXiv and keep keyword matches");
    std::string query, keywords, ingest_out = "stubs.jsonl", endpoint;
    std::size_t max_results = 100;
    ingest->add_option("--query", query)->required();
    ingest->add_option("--max", max_results);
    ingest->add_option("--keywords", keywords, "keyword file, one term per line");
    ingest->add_option("--out", ingest_out);
    ingest->add_option("--endpoint", endpoint);
    ingest->callback([&] { action = [&] { return cmd_ingest(query, max_results, keywords, ingest_out, endpoint); }; });

    auto *import = app.add_subcommand("import", "add converter output directories to a corpus store");
    std::vector<std::string> import_dirs;
    std::string import_corpus;
    std::size_t window = 1;
    import->add_option("--dir", import_dirs)->required()->check(CLI::ExistingDirectory);
    import->add_option("--corpus", import_corpus)->required();
    import->add_option("--context-window", window);
    import->callback([&] { action = [&] { return cmd_import(import_dirs, import_corpus, window); }; });

    auto *extract = app.add_subcommand("extract-chains", "extract and validate one reasoning chain per figure");
    std::string chains_out = "chains.jsonl";
    extract->add_option("--out", chains_out);
    extract->callback([&] { action = [&] { return cmd_extract(g, chains_out); }; });

    auto *build = app.add_subcommand("build-mcq", "draft raw items from accepted chains");
    std::string build_chains, items_out = "items.jsonl";
    build->add_option("--chains", build_chains)->required()->check(CLI::ExistingFile);
    build->add_option("--out", items_out);
    build->callback([&] { action = [&] { return cmd_build(g, build_chains, items_out); }; });

    auto *refine = app.add_subcommand("refine", "two-stage refinement of raw items");
    std::string refine_chains, refine_items, refine_out = "out";
    refine->add_option("--chains", refine_chains)->required()->check(CLI::ExistingFile);
    refine->add_option("--items", refine_items)->required()->check(CLI::ExistingFile);
    refine->add_option("--out", refine_out);
    refine->callback([&] { action = [&] { return cmd_refine(g, refine_chains, refine_items, refine_out); }; });

    auto *run = app.add_subcommand("run", "extract, build and refine in one pass");
    std::string run_out = "out";
    run->add_option("--out", run_out);
    run->callback([&] { action = [&] { return cmd_run(g, run_out); }; });

    auto *review_cmd = app.add_subcommand("review", "expert audit queue");
    review_cmd->require_subcommand(1);
    std::string review_dir = "review";

    auto *sample = review_cmd->add_subcommand("sample", "draw the audit sample");
    std::string sample_dataset;
    double fraction = 0.2;
    std::size_t per_item = 1;
    sample->add_option("--dataset", sample_dataset)->required()->check(CLI::ExistingFile);
    sample->add_option("--dir", review_dir);
    sample->add_option("--fraction", fraction);
    sample->add_option("--reviewers-per-item", per_item);
    sample->callback([&] { action = [&] { return cmd_review_sample(g, sample_dataset, review_dir, fraction, per_item); }; });

    auto *serve = review_cmd->add_subcommand("serve", "serve the review HTTP API");
    std::string serve_corpus, host = "127.0.0.1";
    int port = 8080;
    std::vector<std::string> reviewers;
    serve->add_option("--dir", review_dir);
    serve->add_option("--corpus", serve_corpus);
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--reviewer", reviewers, "allowed reviewer ids; open registration when absent");
    serve->callback([&] { action = [&] { return cmd_review_serve(review_dir, serve_corpus, host, port, reviewers); }; });

    auto *rreport = review_cmd->add_subcommand("report", "aggregate completed reviews");
    std::string rreport_out;
    rreport->add_option("--dir", review_dir);
    rreport->add_option("--out", rreport_out);
    rreport->callback([&] { action = [&] { return cmd_review_report(review_dir, rreport_out); }; });

    auto *eval_cmd = app.add_subcommand("eval", "evaluate a model on a dataset");
    std::string model, eval_dataset, eval_stage, eval_out = "run.jsonl", tmpl, eval_corpus, eval_reviews;
    std::size_t workers = 4;
    eval_cmd->add_option("--model", model)->required();
    eval_cmd->add_option("--dataset", eval_dataset)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--stage", eval_stage);
    eval_cmd->add_option("--out", eval_out);
    eval_cmd->add_option("--template", tmpl);
    eval_cmd->add_option("--corpus", eval_corpus);
    eval_cmd->add_option("--workers", workers);
    eval_cmd->add_option("--reviews", eval_reviews, "review dir; rejected lineages are left out");
    eval_cmd->callback([&] {
        action = [&] {
            return cmd_eval(g, model, eval_dataset, eval_stage, eval_out, tmpl, eval_corpus, workers, eval_reviews);
        };
    });

    auto *report = app.add_subcommand("report", "accuracy or ablation tables from eval runs");
    std::vector<std::string> runs;
    bool ablation = false;
    std::string md, csv;
    report->add_option("--runs", runs)->required()->check(CLI::ExistingFile);
    report->add_flag("--ablation", ablation);
    report->add_option("--md", md);
    report->add_option("--csv", csv);
    report->callback([&] { action = [&] { return cmd_report(runs, ablation, md, csv); }; });

    auto *stats = app.add_subcommand("stats", "dataset statistics");
    std::string stats_dataset, stats_corpus, stats_out;
    stats->add_option("--dataset", stats_dataset)->required()->check(CLI::ExistingFile);
    stats->add_option("--corpus", stats_corpus, "corpus store for domain labels");
    stats->add_option("--out", stats_out);
    stats->callback([&] { action = [&] { return cmd_stats(stats_dataset, stats_corpus, stats_out); }; });

    auto *exp = app.add_subcommand("export", "released view of a dataset");
    std::string exp_dataset, exp_stage, exp_reviews, exp_out = "export.jsonl";
    bool include_rejected = false;
    exp->add_option("--dataset", exp_dataset)->required()->check(CLI::ExistingFile);
    exp->add_option("--stage", exp_stage);
    exp->add_flag("--include-rejected", include_rejected);
    exp->add_option("--reviews", exp_reviews, "review dir holding verdicts");
    exp->add_option("--out", exp_out);
    exp->callback([&] { action = [&] { return cmd_export(exp_dataset, exp_stage, include_rejected, exp_reviews, exp_out); }; });

    auto *annotate = app.add_subcommand("annotate", "tag incorrect answers with an error category");
    std::string ann_run, ann_item, ann_tag, annotator, note, ann_log = "annotations.jsonl";
    bool summary = false;
    annotate->add_option("--run", ann_run)->required()->check(CLI::ExistingFile);
    annotate->add_option("--item", ann_item);
    annotate->add_option("--tag", ann_tag);
    annotate->add_option("--annotator", annotator);
    annotate->add_option("--note", note);
    annotate->add_option("--log", ann_log);
    annotate->add_flag("--summary", summary);
    annotate->callback([&] {
        action = [&] { return cmd_annotate(ann_run, ann_item, ann_tag, annotator, note, ann_log, summary); };
    });

    try {
        app.parse(argc, argv);
    } catch(const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? ok : usage;
    }
    spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        return action();
    } catch(const Error &e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return e.code() == ErrorCode::usage ? usage : fatal;
    } catch(const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return fatal;
    }
}
