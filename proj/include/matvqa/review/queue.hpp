#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/common/rng.hpp"
#include "matvqa/llm/backend.hpp"
#include "matvqa/mcq/types.hpp"
#include "matvqa/pipeline/dataset.hpp"

namespace matvqa::review {

enum class TaskStatus { pending, in_review, done };

inline std::string_view to_string(TaskStatus s) {
    switch(s) {
        case TaskStatus::pending: return "pending";
        case TaskStatus::in_review: return "in_review";
        case TaskStatus::done: return "done";
    }
    return "?";
}

struct ReviewTask {
    std::string task_id;
    mcq::MCQItem item;
    TaskStatus status{TaskStatus::pending};
    std::optional<std::string> reviewer;
    std::size_t slot{0}; // 0-based reviewer slot for items with several reviewers
};

enum class Verdict { accept, reject };

inline std::string_view to_string(Verdict v) { return v == Verdict::accept ? "accept" : "reject"; }

struct ReviewScore {
    int scientific_accuracy{0};
    int logical_consistency{0};
    int contextual_relevance{0};
    Verdict verdict{Verdict::accept};
    std::string note;
    std::string reviewer;
    std::string timestamp;
};

inline void validate(const ReviewScore &s) {
    auto axis = [](int v, const char *name) {
        if(v < 1 || v > 5)
            throw Error(ErrorCode::validation, std::string(name) + " must be an integer in [1, 5], got " + std::to_string(v));
    };
    axis(s.scientific_accuracy, "scientific_accuracy");
    axis(s.logical_consistency, "logical_consistency");
    axis(s.contextual_relevance, "contextual_relevance");
    if(s.verdict == Verdict::reject && text::trim(s.note).empty())
        throw Error(ErrorCode::validation, "a reject verdict requires a note");
    if(text::trim(s.reviewer).empty()) throw Error(ErrorCode::validation, "reviewer id is required");
}

/// Strict parse of a score body: every axis must be an integer.
inline ReviewScore score_from_json(const json &j) {
    if(!j.is_object()) throw Error(ErrorCode::validation, "review body must be an object");
    ReviewScore s;
    auto axis = [&](const char *name) {
        if(!j.contains(name)) throw Error(ErrorCode::validation, std::string("missing axis ") + name);
        const auto &v = j.at(name);
        if(!v.is_number_integer()) throw Error(ErrorCode::validation, std::string(name) + " must be an integer");
        return v.get<int>();
    };
    s.scientific_accuracy = axis("scientific_accuracy");
    s.logical_consistency = axis("logical_consistency");
    s.contextual_relevance = axis("contextual_relevance");
    auto verdict = j.value("verdict", std::string{});
    if(verdict == "accept") s.verdict = Verdict::accept;
    else if(verdict == "reject") s.verdict = Verdict::reject;
    else throw Error(ErrorCode::validation, "verdict must be 'accept' or 'reject'");
    if(j.contains("note") && !j["note"].is_null()) s.note = j["note"].get<std::string>();
    s.reviewer = j.value("reviewer", "");
    s.timestamp = j.value("timestamp", "");
    return s;
}

inline void to_json(json &j, const ReviewScore &s) {
    j = json{{"scientific_accuracy", s.scientific_accuracy},
             {"logical_consistency", s.logical_consistency},
             {"contextual_relevance", s.contextual_relevance},
             {"verdict", to_string(s.verdict)},
             {"note", s.note},
             {"reviewer", s.reviewer},
             {"timestamp", s.timestamp}};
}

inline void to_json(json &j, const ReviewTask &t) {
    j = json{{"task_id", t.task_id},
             {"item", t.item},
             {"status", to_string(t.status)},
             {"reviewer", t.reviewer ? json(*t.reviewer) : json(nullptr)},
             {"slot", t.slot}};
}

/// Items eligible for audit: the latest non-quarantined snapshot of each lineage.
inline std::vector<mcq::MCQItem> review_pool(const pipeline::Dataset &ds) {
    std::vector<mcq::MCQItem> pool;
    for(const auto *e : pipeline::leaf_entries(ds))
        if(!e->quarantined) pool.push_back(e->item);
    std::sort(pool.begin(), pool.end(), [](const auto &a, const auto &b) { return a.item_id < b.item_id; });
    return pool;
}

inline std::size_t sample_size(std::size_t n, double fraction) {
    require(fraction > 0.0 && fraction <= 1.0, "sample fraction must be in (0, 1]");
    return std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
}

/// round(fraction * N) items drawn uniformly without replacement, seeded by
/// (dataset hash, seed). Tasks come in draw order; that order is the queue.
inline std::vector<ReviewTask> sample_for_review(const std::vector<mcq::MCQItem> &pool, const std::string &dataset_hash,
                                                 double fraction, std::uint64_t seed,
                                                 std::size_t reviewers_per_item = 1) {
    require(reviewers_per_item >= 1, "reviewers_per_item must be >= 1");
    auto k = sample_size(pool.size(), fraction);
    auto picks = sample_without_replacement(pool.size(), k, mix_seed(seed, dataset_hash));
    std::vector<ReviewTask> tasks;
    for(auto idx : picks)
        for(std::size_t slot = 0; slot < reviewers_per_item; ++slot) {
            ReviewTask t;
            t.item = pool[idx];
            t.slot = slot;
            t.task_id = "t-" + t.item.item_id + (reviewers_per_item > 1 ? "-" + std::to_string(slot + 1) : "");
            tasks.push_back(std::move(t));
        }
    return tasks;
}

inline std::vector<ReviewTask> sample_for_review(const pipeline::Dataset &ds, double fraction, std::uint64_t seed,
                                                 std::size_t reviewers_per_item = 1) {
    return sample_for_review(review_pool(ds), ds.header.dataset_hash, fraction, seed, reviewers_per_item);
}

struct AxisMeans {
    double scientific_accuracy{0};
    double logical_consistency{0};
    double contextual_relevance{0};
};

struct Breakdown {
    std::size_t reviews{0};
    std::size_t accepted{0};
    AxisMeans means;

    double accept_rate() const { return reviews ? 100.0 * static_cast<double>(accepted) / static_cast<double>(reviews) : 0; }
};

struct Disagreement {
    std::string item_id;
    std::map<std::string, std::string> verdicts; // anonymized reviewer -> verdict
};

struct AuditReport {
    std::string dataset_hash;
    std::size_t tasks{0};
    std::size_t completed{0};
    Breakdown overall;
    std::map<std::string, Breakdown> per_task;
    std::map<std::string, std::size_t> reviews_per_reviewer; // anonymized ids
    std::vector<Disagreement> disagreements;
    std::vector<std::string> rejected_items;
};

inline void to_json(json &j, const Breakdown &b) {
    j = json{{"reviews", b.reviews},
             {"accepted", b.accepted},
             {"accept_rate", b.accept_rate()},
             {"means",
              {{"scientific_accuracy", b.means.scientific_accuracy},
               {"logical_consistency", b.means.logical_consistency},
               {"contextual_relevance", b.means.contextual_relevance}}}};
}

inline void to_json(json &j, const AuditReport &r) {
    json dis = json::array();
    for(const auto &d : r.disagreements) dis.push_back({{"item_id", d.item_id}, {"verdicts", d.verdicts}});
    j = json{{"dataset_hash", r.dataset_hash},
             {"tasks", r.tasks},
             {"completed", r.completed},
             {"overall", r.overall},
             {"per_task", r.per_task},
             {"reviewers", r.reviews_per_reviewer},
             {"disagreements", dis},
             {"rejected_items", r.rejected_items}};
}

/// Task queue plus append-only review log for one dataset version.
///
/// Files in `dir`: tasks.jsonl (header line, then tasks in queue order) and
/// reviews.jsonl (claim and review events). State is rebuilt by replaying the
/// log, so a restarted service resumes where it stopped.
class ReviewQueue {
public:
    static constexpr const char *kTasksFile = "tasks.jsonl";
    static constexpr const char *kLogFile = "reviews.jsonl";

    /// Writes a new task index. Refuses to overwrite an index that has reviews.
    static void create(const std::filesystem::path &dir, const std::string &dataset_hash,
                       const std::vector<ReviewTask> &tasks, double fraction, std::uint64_t seed) {
        if(std::filesystem::exists(dir / kLogFile) && std::filesystem::file_size(dir / kLogFile) > 0)
            throw Error(ErrorCode::conflict, "review log in " + dir.string() + " is not empty; refusing to resample");
        std::string out = canonical_dump(json{{"format", "matvqa-review-tasks"},
                                              {"dataset_hash", dataset_hash},
                                              {"fraction", fraction},
                                              {"seed", seed},
                                              {"tasks", tasks.size()}}) + "\n";
        for(const auto &t : tasks) out += canonical_dump(json{{"task_id", t.task_id}, {"item", t.item}, {"slot", t.slot}}) + "\n";
        write_file(dir / kTasksFile, out);
    }

    explicit ReviewQueue(std::filesystem::path dir, std::set<std::string> reviewers = {})
        : m_dir(std::move(dir)), m_reviewers(std::move(reviewers)) {
        auto lines = read_jsonl(m_dir / kTasksFile);
        if(lines.empty()) throw Error(ErrorCode::not_found, "no review tasks in " + m_dir.string());
        m_dataset_hash = lines[0].value("dataset_hash", "");
        for(std::size_t i = 1; i < lines.size(); ++i) {
            ReviewTask t;
            t.task_id = lines[i].at("task_id").get<std::string>();
            t.item = lines[i].at("item").get<mcq::MCQItem>();
            t.slot = lines[i].value("slot", std::size_t{0});
            m_index[t.task_id] = m_tasks.size();
            m_tasks.push_back(std::move(t));
        }
        for(const auto &event : read_jsonl(m_dir / kLogFile)) replay(event);
    }

    const std::string &dataset_hash() const { return m_dataset_hash; }

    /// Atomically assigns the oldest pending task. A reviewer that already holds
    /// a task gets it back; a reviewer never gets two slots of one item.
    std::optional<ReviewTask> next_task(const std::string &reviewer) {
        std::lock_guard lock(m_mutex);
        check_reviewer(reviewer);
        for(const auto &t : m_tasks)
            if(t.status == TaskStatus::in_review && t.reviewer == reviewer) return t;
        for(auto &t : m_tasks) {
            if(t.status != TaskStatus::pending) continue;
            if(holds_item(reviewer, t.item.item_id)) continue;
            t.status = TaskStatus::in_review;
            t.reviewer = reviewer;
            append_jsonl(m_dir / kLogFile, json{{"event", "claim"},
                                                {"task_id", t.task_id},
                                                {"reviewer", reviewer},
                                                {"timestamp", llm::utc_timestamp()}});
            return t;
        }
        return std::nullopt;
    }

    ReviewTask get(const std::string &task_id) const {
        std::lock_guard lock(m_mutex);
        return m_tasks[find(task_id)];
    }

    /// Records a score. The task must be in review by score.reviewer. With
    /// supersede, the same reviewer may replace the score of a done task; the
    /// earlier record stays in the log.
    ReviewTask submit_review(const std::string &task_id, ReviewScore score, bool supersede = false) {
        validate(score);
        std::lock_guard lock(m_mutex);
        check_reviewer(score.reviewer);
        auto &t = m_tasks[find(task_id)];
        if(t.status == TaskStatus::done && !(supersede && t.reviewer == score.reviewer))
            throw Error(ErrorCode::conflict, "task " + task_id + " is already done");
        if(t.status == TaskStatus::pending) throw Error(ErrorCode::conflict, "task " + task_id + " has not been claimed");
        if(t.reviewer != score.reviewer)
            throw Error(ErrorCode::forbidden, "task " + task_id + " is assigned to another reviewer");
        if(score.timestamp.empty()) score.timestamp = llm::utc_timestamp();
        json event{{"event", "review"}, {"task_id", task_id}, {"item_id", t.item.item_id}, {"score", score}};
        append_jsonl(m_dir / kLogFile, event);
        t.status = TaskStatus::done;
        m_scores[task_id] = score;
        return t;
    }

    std::vector<ReviewTask> tasks() const {
        std::lock_guard lock(m_mutex);
        return m_tasks;
    }

    bool has_reviews() const {
        std::lock_guard lock(m_mutex);
        return !m_scores.empty();
    }

    /// Items whose latest review by any reviewer is a reject.
    std::set<std::string> rejected_items() const {
        std::lock_guard lock(m_mutex);
        std::set<std::string> out;
        for(const auto &[task_id, score] : m_scores)
            if(score.verdict == Verdict::reject) out.insert(m_tasks[m_index.at(task_id)].item.item_id);
        return out;
    }

    /// Aggregates the latest score of every done task. Reviewer ids are
    /// replaced by R1, R2, ... in sorted id order.
    AuditReport audit_report() const {
        std::lock_guard lock(m_mutex);
        if(m_scores.empty()) throw Error(ErrorCode::conflict, "no_completed_reviews");
        AuditReport r;
        r.dataset_hash = m_dataset_hash;
        r.tasks = m_tasks.size();
        r.completed = m_scores.size();

        std::set<std::string> ids;
        for(const auto &[_, s] : m_scores) ids.insert(s.reviewer);
        std::map<std::string, std::string> anon;
        for(const auto &id : ids) anon[id] = "R" + std::to_string(anon.size() + 1);

        struct Sum {
            std::size_t n{0}, accepted{0};
            long sa{0}, lc{0}, cr{0};
        };
        auto add = [](Sum &s, const ReviewScore &x) {
            ++s.n;
            s.accepted += x.verdict == Verdict::accept;
            s.sa += x.scientific_accuracy;
            s.lc += x.logical_consistency;
            s.cr += x.contextual_relevance;
        };
        auto finish = [](const Sum &s) {
            Breakdown b;
            b.reviews = s.n;
            b.accepted = s.accepted;
            if(s.n) {
                double n = static_cast<double>(s.n);
                b.means = {static_cast<double>(s.sa) / n, static_cast<double>(s.lc) / n, static_cast<double>(s.cr) / n};
            }
            return b;
        };
        Sum all;
        std::map<std::string, Sum> by_task;
        std::map<std::string, std::map<std::string, std::string>> verdicts_by_item;
        std::set<std::string> rejected;
        for(const auto &t : m_tasks) {
            auto it = m_scores.find(t.task_id);
            if(it == m_scores.end()) continue;
            const auto &s = it->second;
            add(all, s);
            add(by_task[std::string(mcq::to_string(t.item.task))], s);
            ++r.reviews_per_reviewer[anon[s.reviewer]];
            verdicts_by_item[t.item.item_id][anon[s.reviewer]] = std::string(to_string(s.verdict));
            if(s.verdict == Verdict::reject) rejected.insert(t.item.item_id);
        }
        r.overall = finish(all);
        for(const auto &[task, sum] : by_task) r.per_task[task] = finish(sum);
        for(const auto &[item, verdicts] : verdicts_by_item) {
            std::set<std::string> distinct;
            for(const auto &[_, v] : verdicts) distinct.insert(v);
            if(distinct.size() > 1) r.disagreements.push_back({item, verdicts});
        }
        r.rejected_items.assign(rejected.begin(), rejected.end());
        return r;
    }

private:
    std::size_t find(const std::string &task_id) const {
        auto it = m_index.find(task_id);
        if(it == m_index.end()) throw Error(ErrorCode::not_found, "no task " + task_id);
        return it->second;
    }

    void check_reviewer(const std::string &reviewer) const {
        if(text::trim(reviewer).empty()) throw Error(ErrorCode::usage, "reviewer id is required");
        if(!m_reviewers.empty() && !m_reviewers.contains(reviewer))
            throw Error(ErrorCode::forbidden, "reviewer '" + reviewer + "' is not registered");
    }

    bool holds_item(const std::string &reviewer, const std::string &item_id) const {
        for(const auto &t : m_tasks)
            if(t.item.item_id == item_id && t.reviewer == reviewer) return true;
        return false;
    }

    void replay(const json &event) {
        auto id = event.value("task_id", "");
        auto it = m_index.find(id);
        if(it == m_index.end()) return;
        auto &t = m_tasks[it->second];
        auto kind = event.value("event", "");
        if(kind == "claim") {
            t.status = TaskStatus::in_review;
            t.reviewer = event.value("reviewer", "");
        } else if(kind == "review") {
            auto score = score_from_json(event.at("score"));
            t.status = TaskStatus::done;
            t.reviewer = score.reviewer;
            m_scores[id] = score;
        }
    }

    std::filesystem::path m_dir;
    std::set<std::string> m_reviewers;
    std::string m_dataset_hash;
    std::vector<ReviewTask> m_tasks;
    std::map<std::string, std::size_t> m_index;
    std::map<std::string, ReviewScore> m_scores; // latest per task
    mutable std::mutex m_mutex;
};

} // namespace matvqa::review
