#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "matvqa/chain/types.hpp"
#include "matvqa/chain/validate.hpp"
#include "matvqa/common/jsonl.hpp"

namespace matvqa::chain {

/// One extraction outcome per figure. Quarantined chains keep their
/// violations (or the extraction error) for audit.
struct ChainRecord {
    ReasoningChain chain;
    bool accepted{false};
    std::vector<std::string> violations;
};

inline void to_json(json &j, const ChainRecord &r) {
    j = json{{"chain", r.chain}, {"status", r.accepted ? "accepted" : "quarantined"}, {"violations", r.violations}};
}

inline void from_json(const json &j, ChainRecord &r) {
    r.chain = j.at("chain").get<ReasoningChain>();
    r.accepted = j.at("status").get<std::string>() == "accepted";
    r.violations = j.value("violations", std::vector<std::string>{});
}

inline std::string serialize_chains(const std::vector<ChainRecord> &records) {
    std::string out;
    for(const auto &r : records) out += canonical_dump(json(r)) + "\n";
    return out;
}

inline std::vector<ChainRecord> read_chains(const std::filesystem::path &path) {
    std::vector<ChainRecord> out;
    for(const auto &row : parse_jsonl(read_file(path), path.string())) out.push_back(row.get<ChainRecord>());
    return out;
}

inline std::map<std::string, ReasoningChain> accepted_chains(const std::vector<ChainRecord> &records) {
    std::map<std::string, ReasoningChain> out;
    for(const auto &r : records)
        if(r.accepted) out.emplace(r.chain.chain_id, r.chain);
    return out;
}

} // namespace matvqa::chain
