#pragma once

#include <algorithm>
#include <array>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/eval/run.hpp"
#include "matvqa/eval/score.hpp"
#include "matvqa/mcq/types.hpp"

namespace matvqa::eval {

// Column order of the per-task table.
inline constexpr std::array<mcq::TaskType, 4> kTableTasks = {mcq::TaskType::causal, mcq::TaskType::hypothetical,
                                                            mcq::TaskType::quantitative, mcq::TaskType::comparative};

struct ModelScore {
    std::string model;
    RunScore score;
};

inline std::string accuracy_markdown(const std::vector<ModelScore> &rows) {
    std::string out = "| Model | Overall";
    for(auto t : kTableTasks) out += " | " + std::string(mcq::short_label(t));
    out += " |\n|---|---";
    for(std::size_t i = 0; i < kTableTasks.size(); ++i) out += "|---";
    out += "|\n";
    for(const auto &r : rows) {
        out += "| " + r.model + " | " + format_pct(r.score.overall.accuracy());
        for(auto t : kTableTasks) out += " | " + format_pct(r.score.task(t).accuracy());
        out += " |\n";
    }
    return out;
}

inline std::string accuracy_csv(const std::vector<ModelScore> &rows) {
    std::string out = "model,overall";
    for(auto t : kTableTasks) out += "," + std::string(mcq::short_label(t));
    out += ",n,skipped\n";
    auto cell = [](std::optional<double> p) { return p ? format_tenths(to_tenths(*p)) : std::string("n/a"); };
    for(const auto &r : rows) {
        out += r.model + "," + cell(r.score.overall.accuracy());
        for(auto t : kTableTasks) out += "," + cell(r.score.task(t).accuracy());
        out += "," + std::to_string(r.score.overall.total) + "," + std::to_string(r.score.skipped) + "\n";
    }
    return out;
}

/// Stage scores for one model, in percent.
struct StageScores {
    std::string model;
    std::map<mcq::Stage, double> score;
};

struct AblationCell {
    long score_tenths{0};
    long drop_tenths{0}; // raw - stage; positive means accuracy fell
};

struct AblationTable {
    std::vector<std::string> models;
    std::map<mcq::Stage, std::vector<AblationCell>> rows;

    std::string markdown() const;
    std::string csv() const;
};

/// Scores are rounded to report precision before subtracting, so every drop is
/// exactly raw - stage as printed.
inline AblationTable ablation_report(const std::vector<StageScores> &inputs) {
    AblationTable table;
    for(const auto &in : inputs) {
        for(auto st : mcq::kAllStages)
            if(!in.score.count(st))
                throw Error(ErrorCode::report, "ablation: model '" + in.model + "' has no " +
                                                   std::string(mcq::to_string(st)) + " run");
        table.models.push_back(in.model);
        long raw = to_tenths(in.score.at(mcq::Stage::raw));
        for(auto st : mcq::kAllStages) {
            long s = to_tenths(in.score.at(st));
            table.rows[st].push_back({s, raw - s});
        }
    }
    return table;
}

/// Groups runs by model and stage. Runs without a stage filter cannot be placed.
inline std::vector<StageScores> stage_scores(const std::vector<EvalRun> &runs) {
    std::vector<StageScores> out;
    for(const auto &run : runs) {
        if(!run.stage_filter)
            throw Error(ErrorCode::report, "ablation: run " + run.run_id + " (" + run.model_id + ") has no stage filter");
        auto acc = score_run(run).overall.accuracy();
        if(!acc) throw Error(ErrorCode::report, "ablation: run " + run.run_id + " has no scored items");
        auto it = std::find_if(out.begin(), out.end(), [&](const StageScores &s) { return s.model == run.model_id; });
        if(it == out.end()) {
            out.push_back({run.model_id, {}});
            it = std::prev(out.end());
        }
        if(it->score.count(*run.stage_filter))
            throw Error(ErrorCode::report, "ablation: duplicate " + std::string(mcq::to_string(*run.stage_filter)) +
                                               " run for model '" + run.model_id + "'");
        it->score[*run.stage_filter] = *acc;
    }
    return out;
}

inline std::string drop_text(long drop_tenths) {
    if(drop_tenths >= 0) return "(" + format_tenths(drop_tenths) + "%↓)";
    return "(" + format_tenths(-drop_tenths) + "%↑)";
}

inline std::string AblationTable::markdown() const {
    std::string out = "| Stage";
    for(const auto &m : models) out += " | " + m;
    out += " |\n|---";
    for(std::size_t i = 0; i < models.size(); ++i) out += "|---";
    out += "|\n";
    for(auto st : mcq::kAllStages) {
        out += "| " + std::string(mcq::stage_label(st));
        for(const auto &cell : rows.at(st)) {
            out += " | " + format_tenths(cell.score_tenths) + "%";
            if(st != mcq::Stage::raw) out += " " + drop_text(cell.drop_tenths);
        }
        out += " |\n";
    }
    return out;
}

inline std::string AblationTable::csv() const {
    std::string out = "stage,model,score,drop\n";
    for(auto st : mcq::kAllStages)
        for(std::size_t i = 0; i < models.size(); ++i) {
            const auto &cell = rows.at(st)[i];
            out += std::string(mcq::stage_label(st)) + "," + models[i] + "," + format_tenths(cell.score_tenths) + "," +
                   format_tenths(cell.drop_tenths) + "\n";
        }
    return out;
}

} // namespace matvqa::eval
