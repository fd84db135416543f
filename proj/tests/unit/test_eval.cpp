#include <gtest/gtest.h>

#include <map>
#include <random>

#include "fixtures.hpp"
#include "reference.hpp"
#include "matvqa/eval/annotate.hpp"
#include "matvqa/eval/extract.hpp"
#include "matvqa/eval/report.hpp"
#include "matvqa/eval/run.hpp"
#include "matvqa/eval/score.hpp"

using namespace matvqa;
using namespace matvqa::eval;
using matvqa::testing::make_item;
using matvqa::testing::TempDir;
using matvqa::testing::kExtractCases;

namespace {

EvalRecord rec(mcq::TaskType task, bool correct, bool skipped = false) {
    EvalRecord r;
    r.task = task;
    r.correct = correct;
    r.skipped = skipped;
    return r;
}

EvalRun run_with(std::vector<EvalRecord> records, std::string model = "m", std::optional<mcq::Stage> stage = {}) {
    EvalRun run;
    run.run_id = "r-" + model;
    run.model_id = std::move(model);
    run.stage_filter = stage;
    run.records = std::move(records);
    for(std::size_t i = 0; i < run.records.size(); ++i)
        if(run.records[i].item_id.empty()) run.records[i].item_id = "i" + std::to_string(i);
    return run;
}

} // namespace

TEST(AnswerExtraction, FixtureMatchesHandApplication) {
    ASSERT_EQ(std::size(kExtractCases), 20u);
    for(const auto &c : kExtractCases) EXPECT_EQ(extract_answer(c.response, c.m), c.expected) << c.response;
}

TEST(AnswerExtraction, DigitOutsideOptionRangeIsNone) {
    EXPECT_EQ(extract_answer("The answer is 3", 2), std::nullopt);
    EXPECT_EQ(extract_answer("The answer is 2", 2), 2u);
}

TEST(ScoreResponse, CorrectOnlyWhenExtractedEqualsKey) {
    auto item = make_item("a");
    EXPECT_TRUE(score_response(item, "The answer is 1").correct);
    auto wrong = score_response(item, "The answer is 2");
    EXPECT_FALSE(wrong.correct);
    EXPECT_EQ(wrong.extracted, 2u);
    auto none = score_response(item, "no idea");
    EXPECT_FALSE(none.correct);
    EXPECT_FALSE(none.extracted);
}

TEST(Scoring, EmptyBucketIsNotApplicable) {
    auto s = score_run(run_with({rec(mcq::TaskType::causal, true)}));
    EXPECT_EQ(s.overall.accuracy(), 100.0);
    EXPECT_FALSE(s.task(mcq::TaskType::quantitative).accuracy());
    EXPECT_EQ(format_pct(s.task(mcq::TaskType::quantitative).accuracy()), "n/a");
}

TEST(Scoring, SkippedRecordsExcludedAndCounted) {
    auto s = score_run(run_with({rec(mcq::TaskType::causal, true), rec(mcq::TaskType::causal, false, true)}));
    EXPECT_EQ(s.overall.total, 1u);
    EXPECT_EQ(s.skipped, 1u);
}

TEST(Scoring, EmptyRunHasNoAccuracy) {
    auto s = score_run(run_with({}));
    EXPECT_FALSE(s.overall.accuracy());
    EXPECT_EQ(format_pct(s.overall.accuracy()), "n/a");
}

// Brute-force tally over plain arrays, compared with score_run: 10 seeds of
// 100 random runs each.
TEST(Scoring, MatchesBruteForceTally) {
    std::size_t trials = 0;
    for(std::uint32_t seed = 1; seed <= 10; ++seed) {
        std::mt19937 gen(seed);
        for(int run_no = 0; run_no < 100; ++run_no) {
            std::uniform_int_distribution<int> size(0, 60), task(0, 3), coin(0, 1), skip(0, 9);
            std::vector<EvalRecord> records;
            int correct[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0}, skipped = 0;
            int n = size(gen);
            for(int i = 0; i < n; ++i) {
                int t = task(gen);
                bool c = coin(gen) == 1, s = skip(gen) == 0;
                records.push_back(rec(mcq::kAllTasks[static_cast<std::size_t>(t)], c, s));
                if(s) {
                    ++skipped;
                } else {
                    ++total[t];
                    correct[t] += c;
                }
            }
            auto score = score_run(run_with(records));
            int all_c = 0, all_t = 0;
            for(int t = 0; t < 4; ++t) {
                auto tally = score.task(mcq::kAllTasks[static_cast<std::size_t>(t)]);
                EXPECT_EQ(tally.correct, static_cast<std::size_t>(correct[t]));
                EXPECT_EQ(tally.total, static_cast<std::size_t>(total[t]));
                all_c += correct[t];
                all_t += total[t];
            }
            EXPECT_EQ(score.overall.correct, static_cast<std::size_t>(all_c));
            EXPECT_EQ(score.overall.total, static_cast<std::size_t>(all_t));
            EXPECT_EQ(score.skipped, static_cast<std::size_t>(skipped));
            if(all_t) EXPECT_DOUBLE_EQ(*score.overall.accuracy(), 100.0 * all_c / all_t);
            ++trials;
        }
    }
    EXPECT_EQ(trials, 1000u);
}

// 950 causal, 112 comparative, 256 hypothetical, 7 quantitative. Correct counts
// 423/48/102/4; overall 577/1325 = 43.547...% (Python fractions).
TEST(Scoring, OverallIsItemWeightedMean) {
    const std::pair<mcq::TaskType, std::pair<int, int>> rows[] = {{mcq::TaskType::causal, {423, 950}},
                                                                  {mcq::TaskType::comparative, {48, 112}},
                                                                  {mcq::TaskType::hypothetical, {102, 256}},
                                                                  {mcq::TaskType::quantitative, {4, 7}}};
    std::vector<EvalRecord> records;
    for(const auto &[task, counts] : rows)
        for(int i = 0; i < counts.second; ++i) records.push_back(rec(task, i < counts.first));
    auto s = score_run(run_with(records));
    EXPECT_EQ(s.overall.total, 1325u);
    EXPECT_EQ(s.overall.correct, 577u);
    double weighted = 0;
    for(const auto &[task, counts] : rows) weighted += *s.task(task).accuracy() * counts.second;
    EXPECT_NEAR(*s.overall.accuracy(), weighted / 1325.0, 1e-9);
    EXPECT_NEAR(*s.overall.accuracy(), 43.54716981132076, 1e-9);
    EXPECT_EQ(format_pct(s.overall.accuracy()), "43.5%");
    EXPECT_EQ(format_pct(s.task(mcq::TaskType::causal).accuracy()), "44.5%");
    EXPECT_EQ(format_pct(s.task(mcq::TaskType::comparative).accuracy()), "42.9%");
    EXPECT_EQ(format_pct(s.task(mcq::TaskType::hypothetical).accuracy()), "39.8%");
    EXPECT_EQ(format_pct(s.task(mcq::TaskType::quantitative).accuracy()), "57.1%");
}

TEST(Formatting, Tenths) {
    EXPECT_EQ(to_tenths(78.8), 788);
    EXPECT_EQ(to_tenths(48.25), 483);
    EXPECT_EQ(format_tenths(305), "30.5");
    EXPECT_EQ(format_tenths(-7), "-0.7");
    EXPECT_EQ(format_tenths(0), "0.0");
}

TEST(AccuracyTable, ColumnOrderAndNa) {
    std::vector<ModelScore> rows{{"gpt", score_run(run_with({rec(mcq::TaskType::causal, true),
                                                              rec(mcq::TaskType::hypothetical, false)}))}};
    auto md = accuracy_markdown(rows);
    EXPECT_NE(md.find("| Model | Overall | Caus | Hypo | Quan | Comp |"), std::string::npos) << md;
    EXPECT_NE(md.find("| gpt | 50.0% | 100.0% | 0.0% | n/a | n/a |"), std::string::npos) << md;
    auto csv = accuracy_csv(rows);
    EXPECT_EQ(csv, "model,overall,Caus,Hypo,Quan,Comp,n,skipped\ngpt,50.0,100.0,0.0,n/a,n/a,2,0\n");
}

using matvqa::testing::kAblationRows;

TEST(Ablation, ReproducesReferenceDrops) {
    std::vector<StageScores> inputs;
    for(const auto &r : kAblationRows)
        inputs.push_back({r.model, {{mcq::Stage::raw, r.raw}, {mcq::Stage::lang_removed, r.lang},
                                    {mcq::Stage::caption_removed, r.cap}}});
    auto table = ablation_report(inputs);
    ASSERT_EQ(table.models.size(), 6u);
    for(std::size_t i = 0; i < 6; ++i) {
        EXPECT_NEAR(table.rows[mcq::Stage::lang_removed][i].drop_tenths / 10.0, kAblationRows[i].lang_drop, 0.05);
        EXPECT_NEAR(table.rows[mcq::Stage::caption_removed][i].drop_tenths / 10.0, kAblationRows[i].cap_drop, 0.05);
        EXPECT_EQ(table.rows[mcq::Stage::raw][i].drop_tenths, 0);
    }
    auto md = table.markdown();
    EXPECT_NE(md.find("67.8% (11.0%↓)"), std::string::npos) << md;
    EXPECT_NE(md.find("44.2% (32.2%↓)"), std::string::npos) << md;
}

TEST(Ablation, IncreaseShowsUpArrow) {
    auto t = ablation_report({{"m", {{mcq::Stage::raw, 50.0}, {mcq::Stage::lang_removed, 52.5},
                                     {mcq::Stage::caption_removed, 40.0}}}});
    EXPECT_EQ(t.rows[mcq::Stage::lang_removed][0].drop_tenths, -25);
    EXPECT_NE(t.markdown().find("52.5% (2.5%↑)"), std::string::npos);
    EXPECT_EQ(t.csv(), "stage,model,score,drop\nRaw,m,50.0,0.0\nLan.Rem,m,52.5,-2.5\nCap.Rem,m,40.0,10.0\n");
}

TEST(Ablation, MissingStageIsReportError) {
    try {
        ablation_report({{"m", {{mcq::Stage::raw, 50.0}, {mcq::Stage::lang_removed, 40.0}}}});
        FAIL();
    } catch(const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::report);
        EXPECT_NE(std::string(e.what()).find("'m'"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("caption_removed"), std::string::npos);
    }
}

TEST(Ablation, StageScoresFromRuns) {
    std::vector<EvalRun> runs{
        run_with({rec(mcq::TaskType::causal, true), rec(mcq::TaskType::causal, true)}, "m", mcq::Stage::raw),
        run_with({rec(mcq::TaskType::causal, true), rec(mcq::TaskType::causal, false)}, "m", mcq::Stage::lang_removed),
        run_with({rec(mcq::TaskType::causal, false), rec(mcq::TaskType::causal, false)}, "m",
                 mcq::Stage::caption_removed)};
    auto table = ablation_report(stage_scores(runs));
    EXPECT_EQ(table.rows[mcq::Stage::caption_removed][0].drop_tenths, 1000);

    runs.push_back(runs[0]);
    EXPECT_THROW(stage_scores(runs), Error);
    EXPECT_THROW(stage_scores({run_with({rec(mcq::TaskType::causal, true)}, "x")}), Error);
}

TEST(EvalRunFile, RoundTrip) {
    TempDir dir;
    auto run = run_with({rec(mcq::TaskType::causal, true), rec(mcq::TaskType::comparative, false, true)}, "m",
                        mcq::Stage::lang_removed);
    run.records[0].response = "The answer is 1";
    run.records[0].extracted = 1;
    run.records[1].skip_reason = "missing";
    write_run(run, dir / "run.jsonl");
    auto back = read_run(dir / "run.jsonl");
    EXPECT_EQ(back.run_id, run.run_id);
    EXPECT_EQ(back.stage_filter, run.stage_filter);
    ASSERT_EQ(back.records.size(), 2u);
    EXPECT_EQ(back.records[0].response, "The answer is 1");
    EXPECT_EQ(back.records[0].extracted, 1u);
    EXPECT_TRUE(back.records[1].skipped);
    EXPECT_THROW(parse_run("{}\n"), Error);
}

TEST(RunEval, MissingFigureIsSkippedNotScored) {
    auto backend = std::make_shared<llm::ScriptedBackend>();
    backend->on("eval", "Thinking.\nThe answer is 1");
    auto a = make_item("a"), b = make_item("b");
    b.image_hash = std::string(64, 'b');
    auto run = run_eval({a, b}, *backend, "model-x", PromptTemplate{},
                        [](const std::string &sha) { return sha == std::string(64, 'a'); }, "hash", std::nullopt);
    ASSERT_EQ(run.records.size(), 2u);
    EXPECT_TRUE(run.records[0].correct);
    EXPECT_TRUE(run.records[1].skipped);
    auto s = score_run(run);
    EXPECT_EQ(s.overall.total, 1u);
    EXPECT_EQ(s.skipped, 1u);
    EXPECT_EQ(backend->calls("eval"), 1u);
}

TEST(RunEval, StageFilterAndRunId) {
    auto backend = std::make_shared<llm::ScriptedBackend>();
    backend->on("eval", "The answer is 2");
    auto a = make_item("a");
    auto b = make_item("b");
    b.stage = mcq::Stage::lang_removed;
    auto always = [](const std::string &) { return true; };
    auto run = run_eval({a, b}, *backend, "m", PromptTemplate{}, always, "h", mcq::Stage::lang_removed);
    ASSERT_EQ(run.records.size(), 1u);
    EXPECT_EQ(run.records[0].item_id, b.item_id);
    EXPECT_EQ(run.run_id.size(), 12u);
    EXPECT_EQ(run.run_id, make_run_id("m", "h", mcq::Stage::lang_removed, "cot-v1"));
    EXPECT_NE(run.run_id, make_run_id("m", "h", std::nullopt, "cot-v1"));
}

TEST(Prompt, RendersTemplateAndAttachesFigure) {
    auto item = make_item("a");
    auto r = build_prompt(item, PromptTemplate{}, "m", [](const std::string &) { return true; });
    ASSERT_EQ(r.messages.size(), 1u);
    const auto &text = r.messages[0].text;
    EXPECT_EQ(text.rfind("<image 1>\nQuestion: " + item.stem + "\nOptions:\n1. ", 0), 0u);
    EXPECT_NE(text.find("'The answer is N'"), std::string::npos);
    ASSERT_EQ(r.attachments.size(), 1u);
    EXPECT_EQ(r.attachments[0].sha256, item.image_hash);

    PromptTemplate bad;
    bad.body = "{{question}} {{unknown}}";
    EXPECT_THROW(bad.render(item), Error);
    try {
        build_prompt(item, PromptTemplate{}, "m", [](const std::string &) { return false; });
        FAIL();
    } catch(const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::missing_figure);
    }
}

TEST(Annotation, OnlyIncorrectScoredRecords) {
    TempDir dir;
    auto run = run_with({rec(mcq::TaskType::causal, false), rec(mcq::TaskType::causal, true),
                         rec(mcq::TaskType::causal, false, true), rec(mcq::TaskType::comparative, false)});
    auto log = dir / "ann.jsonl";
    annotate_error(run, "i0", ErrorTag::visual_perception, "ann", "", log);
    annotate_error(run, "i0", ErrorTag::reasoning_judgement, "ann", "revised", log);
    annotate_error(run, "i3", ErrorTag::material_knowledge, "ann", "", log);

    auto expect_code = [&](const std::string &id, ErrorCode code) {
        try {
            annotate_error(run, id, ErrorTag::visual_perception, "ann", "", log);
            FAIL() << id;
        } catch(const Error &e) {
            EXPECT_EQ(e.code(), code) << id;
        }
    };
    expect_code("i1", ErrorCode::validation);
    expect_code("i2", ErrorCode::validation);
    expect_code("nope", ErrorCode::not_found);

    auto summary = error_summary(run, read_annotations(log));
    EXPECT_EQ(summary[ErrorTag::visual_perception], 0u);
    EXPECT_EQ(summary[ErrorTag::reasoning_judgement], 1u);
    EXPECT_EQ(summary[ErrorTag::material_knowledge], 1u);
    EXPECT_THROW(error_tag_from_string("typo"), Error);
}
