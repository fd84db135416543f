#pragma once

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/mcq/types.hpp"

namespace matvqa::pipeline {

inline constexpr const char *kDatasetFormat = "matvqa-dataset";
inline constexpr int kDatasetVersion = 1;

struct DatasetEntry {
    mcq::MCQItem item;
    bool quarantined{false};
    std::string quarantine_reason;

    bool operator==(const DatasetEntry &) const = default;
};

struct DatasetHeader {
    int version{kDatasetVersion};
    std::string dataset_hash;
    std::string config_digest;
    std::string created;
    json seeds = json::object();
    std::optional<std::string> ancestor; // hash of the file lineage parents may live in
};

struct Dataset {
    DatasetHeader header;
    std::vector<DatasetEntry> entries;
};

inline json entry_json(const DatasetEntry &e) {
    json j = e.item;
    j["quarantined"] = e.quarantined;
    if(e.quarantined) j["quarantine_reason"] = e.quarantine_reason;
    return j;
}

inline DatasetEntry entry_from_json(const json &j) {
    DatasetEntry e;
    e.item = j.get<mcq::MCQItem>();
    e.quarantined = j.value("quarantined", false);
    e.quarantine_reason = j.value("quarantine_reason", "");
    return e;
}

/// Creation time for headers: explicit value, else SOURCE_DATE_EPOCH, else the
/// epoch. Wall-clock time would break byte-identical reruns.
inline std::string creation_time(const std::optional<std::string> &explicit_time = std::nullopt) {
    if(explicit_time) return *explicit_time;
    long long secs = 0;
    if(const char *env = std::getenv("SOURCE_DATE_EPOCH")) secs = std::atoll(env);
    std::time_t t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void sort_entries(std::vector<DatasetEntry> &entries) {
    std::sort(entries.begin(), entries.end(), [](const DatasetEntry &a, const DatasetEntry &b) {
        return a.item.item_id < b.item.item_id;
    });
}

inline std::string record_lines(const std::vector<DatasetEntry> &entries) {
    std::string body;
    for(const auto &e : entries) body += canonical_dump(entry_json(e)) + "\n";
    return body;
}

/// Sorts entries by item id and recomputes the dataset hash over the record
/// lines. Returns the file bytes.
inline std::string serialize_dataset(Dataset &ds) {
    sort_entries(ds.entries);
    auto body = record_lines(ds.entries);
    ds.header.dataset_hash = sha256_hex(body);
    json header{{"format", kDatasetFormat},
                {"version", ds.header.version},
                {"dataset_hash", ds.header.dataset_hash},
                {"config_digest", ds.header.config_digest},
                {"created", ds.header.created},
                {"seeds", ds.header.seeds},
                {"records", ds.entries.size()}};
    if(ds.header.ancestor) header["ancestor"] = *ds.header.ancestor;
    return canonical_dump(header) + "\n" + body;
}

inline void write_dataset(Dataset ds, const std::filesystem::path &path) { write_file(path, serialize_dataset(ds)); }

/// Parses and checks a dataset file: header present, hash matches the record
/// lines, unique item ids, and every lineage parent present unless the header
/// names an ancestor file.
inline Dataset parse_dataset(std::string_view content, const std::string &what = "dataset") {
    auto nl = content.find('\n');
    if(content.empty()) throw ParseError(what + ": empty file", 1);
    json h;
    try {
        h = json::parse(content.substr(0, nl));
    } catch(const json::parse_error &) {
        throw ParseError(what + ": malformed header", 1);
    }
    if(!h.is_object() || h.value("format", "") != kDatasetFormat) throw ParseError(what + ": missing dataset header", 1);

    Dataset ds;
    ds.header.version = h.value("version", kDatasetVersion);
    ds.header.dataset_hash = h.at("dataset_hash").get<std::string>();
    ds.header.config_digest = h.value("config_digest", "");
    ds.header.created = h.value("created", "");
    ds.header.seeds = h.value("seeds", json::object());
    if(h.contains("ancestor")) ds.header.ancestor = h["ancestor"].get<std::string>();

    auto body = nl == std::string_view::npos ? std::string_view{} : content.substr(nl + 1);
    if(sha256_hex(body) != ds.header.dataset_hash) throw Error(ErrorCode::checksum, what + ": dataset hash mismatch");
    auto lines = parse_jsonl(body, what);
    std::set<std::string> ids;
    for(std::size_t i = 0; i < lines.size(); ++i) {
        try {
            ds.entries.push_back(entry_from_json(lines[i]));
        } catch(const std::exception &e) {
            throw ParseError(what + ": bad record: " + e.what(), i + 2);
        }
        if(!ids.insert(ds.entries.back().item.item_id).second)
            throw Error(ErrorCode::validation, what + ": duplicate item id " + ds.entries.back().item.item_id);
    }
    if(!ds.header.ancestor)
        for(const auto &e : ds.entries)
            if(e.item.lineage && !ids.contains(*e.item.lineage))
                throw Error(ErrorCode::validation,
                            what + ": item " + e.item.item_id + " has missing lineage parent " + *e.item.lineage);
    return ds;
}

inline Dataset read_dataset(const std::filesystem::path &path) { return parse_dataset(read_file(path), path.string()); }

/// Maps every item id to the id of its raw ancestor within the file.
inline std::map<std::string, std::string> lineage_roots(const std::vector<DatasetEntry> &entries) {
    std::map<std::string, std::string> parent;
    for(const auto &e : entries)
        if(e.item.lineage) parent[e.item.item_id] = *e.item.lineage;
    std::map<std::string, std::string> roots;
    for(const auto &e : entries) {
        std::string id = e.item.item_id;
        for(std::size_t guard = 0; parent.count(id) && guard < entries.size(); ++guard) id = parent[id];
        roots[e.item.item_id] = id;
    }
    return roots;
}

/// Items that are nobody's lineage parent: the latest snapshot of each lineage.
inline std::vector<const DatasetEntry *> leaf_entries(const Dataset &ds) {
    std::set<std::string> parents;
    for(const auto &e : ds.entries)
        if(e.item.lineage) parents.insert(*e.item.lineage);
    std::vector<const DatasetEntry *> out;
    for(const auto &e : ds.entries)
        if(!parents.contains(e.item.item_id)) out.push_back(&e);
    return out;
}

struct ExportOptions {
    std::optional<mcq::Stage> stage;
    bool include_rejected{false};
};

/// Released view of a dataset. Quarantined items never appear; items in a
/// lineage with any rejected snapshot appear only with include_rejected. The
/// export keeps the source header fields and names the source as its ancestor,
/// so exporting twice gives identical bytes.
inline Dataset export_dataset(const Dataset &source, const std::set<std::string> &rejected_items,
                              const ExportOptions &opts = {}) {
    auto roots = lineage_roots(source.entries);
    std::set<std::string> rejected_roots;
    for(const auto &id : rejected_items)
        if(auto it = roots.find(id); it != roots.end()) rejected_roots.insert(it->second);

    Dataset out;
    out.header = source.header;
    out.header.ancestor = source.header.ancestor.value_or(source.header.dataset_hash);
    for(const auto &e : source.entries) {
        if(e.quarantined) continue;
        if(opts.stage && e.item.stage != *opts.stage) continue;
        if(!opts.include_rejected && rejected_roots.contains(roots[e.item.item_id])) continue;
        out.entries.push_back(e);
    }
    serialize_dataset(out);
    return out;
}

struct Stats {
    std::size_t items{0};
    std::size_t quarantined{0};
    std::map<std::string, std::size_t> per_task;
    std::map<std::string, std::size_t> per_stage;
    std::size_t unique_figures{0};
    std::size_t unique_papers{0};
    std::map<std::string, std::size_t> domains;
};

/// Counts by scan. Items, tasks, figures and papers count the latest snapshot
/// of each non-quarantined lineage; per_stage counts every snapshot. Domain
/// labels come from `paper_domains` when supplied.
inline Stats stats_report(const Dataset &ds, const std::map<std::string, std::string> &paper_domains = {}) {
    Stats s;
    for(auto t : mcq::kAllTasks) s.per_task[std::string(mcq::to_string(t))] = 0;
    for(auto st : mcq::kAllStages) s.per_stage[std::string(mcq::to_string(st))] = 0;
    for(const auto &e : ds.entries)
        if(!e.quarantined) ++s.per_stage[std::string(mcq::to_string(e.item.stage))];
    std::set<std::string> figures, papers;
    for(const auto *e : leaf_entries(ds)) {
        if(e->quarantined) {
            ++s.quarantined;
            continue;
        }
        ++s.items;
        ++s.per_task[std::string(mcq::to_string(e->item.task))];
        figures.insert(e->item.image_hash.empty() ? e->item.paper_id + "/" + e->item.figure_id : e->item.image_hash);
        papers.insert(e->item.paper_id);
    }
    s.unique_figures = figures.size();
    s.unique_papers = papers.size();
    for(const auto &p : papers)
        if(auto it = paper_domains.find(p); it != paper_domains.end()) ++s.domains[it->second];
    return s;
}

inline void to_json(json &j, const Stats &s) {
    j = json{{"items", s.items},
             {"quarantined", s.quarantined},
             {"per_task", s.per_task},
             {"per_stage", s.per_stage},
             {"unique_figures", s.unique_figures},
             {"unique_papers", s.unique_papers},
             {"domains", s.domains}};
}

} // namespace matvqa::pipeline
