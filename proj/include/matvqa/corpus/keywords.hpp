#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/text.hpp"
#include "matvqa/corpus/types.hpp"

namespace matvqa::corpus {

inline const std::vector<std::string> &default_keywords() {
    static const std::vector<std::string> terms = {"property",       "structure",
                                                   "performance",    "processing",
                                                   "microstructure", "characterization"};
    return terms;
}

/// One keyword per line; blank lines and '#' comments ignored. Entries are
/// lowercased and trimmed.
inline std::vector<std::string> load_keywords(const std::filesystem::path &path) {
    std::vector<std::string> out;
    for(const auto &raw : text::split(read_file(path), '\n')) {
        auto line = text::trim(raw);
        if(line.empty() || line.front() == '#') continue;
        out.push_back(text::to_lower(line));
    }
    return out;
}

/// Keeps stubs whose title or abstract contains at least one lexicon term as a
/// whole-token, case-insensitive match. Multi-word terms must match as a
/// contiguous token run. An empty lexicon keeps nothing.
inline std::vector<PaperStub> filter_by_keywords(const std::vector<PaperStub> &stubs,
                                                 const std::vector<std::string> &lexicon) {
    std::vector<std::vector<std::string>> terms;
    for(const auto &term : lexicon) {
        require(!text::trim(term).empty(), "filter_by_keywords: empty lexicon entry");
        require(term == text::to_lower(term), "filter_by_keywords: lexicon entry not lowercase: " + term);
        terms.push_back(text::tokenize(term));
    }
    std::vector<PaperStub> kept;
    if(terms.empty()) return kept;
    for(const auto &stub : stubs) {
        auto title = text::tokenize(stub.title);
        auto abstract = text::tokenize(stub.abstract);
        for(const auto &t : terms) {
            if(text::contains_token_run(title, t) || text::contains_token_run(abstract, t)) {
                kept.push_back(stub);
                break;
            }
        }
    }
    return kept;
}

} // namespace matvqa::corpus
