#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/eval/run.hpp"
#include "matvqa/mcq/types.hpp"

namespace matvqa::eval {

struct Tally {
    std::size_t correct{0};
    std::size_t total{0};

    /// Percentage, or nullopt for an empty bucket (reported as n/a, never 0).
    std::optional<double> accuracy() const {
        if(total == 0) return std::nullopt;
        return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
    }

    bool operator==(const Tally &) const = default;
};

struct RunScore {
    Tally overall;
    std::map<mcq::TaskType, Tally> per_task;
    std::size_t skipped{0};

    Tally task(mcq::TaskType t) const {
        auto it = per_task.find(t);
        return it == per_task.end() ? Tally{} : it->second;
    }
};

/// Micro-averaged: overall = correct / total over all scored items. Skipped
/// records are counted separately and excluded.
inline RunScore score_run(const EvalRun &run) {
    RunScore s;
    for(auto t : mcq::kAllTasks) s.per_task[t];
    for(const auto &r : run.records) {
        if(r.skipped) {
            ++s.skipped;
            continue;
        }
        auto &bucket = s.per_task[r.task];
        ++bucket.total;
        ++s.overall.total;
        if(r.correct) {
            ++bucket.correct;
            ++s.overall.correct;
        }
    }
    return s;
}

/// Integer tenths of a percentage point, half away from zero.
inline long to_tenths(double percent) { return std::lround(percent * 10.0); }

inline std::string format_tenths(long tenths) {
    std::string sign = tenths < 0 ? "-" : "";
    long a = std::labs(tenths);
    return sign + std::to_string(a / 10) + "." + std::to_string(a % 10);
}

inline std::string format_pct(std::optional<double> percent) {
    if(!percent) return "n/a";
    return format_tenths(to_tenths(*percent)) + "%";
}

} // namespace matvqa::eval
