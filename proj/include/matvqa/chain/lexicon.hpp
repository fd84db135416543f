#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matvqa/chain/types.hpp"
#include "matvqa/common/error.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/text.hpp"

namespace matvqa::chain {

/// Flat term -> component lexicon (an ontology reduced to surface terms).
///
/// File format: first line "#lexicon <version>", then one "term<TAB>tag" (or
/// "term,tag") pair per line; other '#' lines are comments.
class ComponentLexicon {
public:
    struct Entry {
        std::string term;
        std::vector<std::string> tokens;
        ComponentTag tag;
    };

    struct Hit {
        std::size_t token_pos;
        const Entry *entry;
    };

    ComponentLexicon() = default;
    ComponentLexicon(std::string version, const std::vector<std::pair<std::string, ComponentTag>> &pairs)
        : m_version(std::move(version)) {
        for(const auto &[term, tag] : pairs) add(term, tag);
    }

    static ComponentLexicon parse(std::string_view content) {
        auto lines = text::split(content, '\n');
        if(lines.empty() || !text::trim(lines[0]).starts_with("#lexicon"))
            throw ParseError("lexicon: missing '#lexicon <version>' header", 1);
        ComponentLexicon lex;
        lex.m_version = text::trim(text::trim(lines[0]).substr(8));
        if(lex.m_version.empty()) throw ParseError("lexicon: empty version", 1);
        for(std::size_t i = 1; i < lines.size(); ++i) {
            auto line = text::trim(lines[i]);
            if(line.empty() || line.front() == '#') continue;
            auto sep = line.find('\t');
            if(sep == std::string::npos) sep = line.rfind(',');
            if(sep == std::string::npos) throw ParseError("lexicon: expected 'term<TAB>tag'", i + 1);
            auto tag = parse_component(line.substr(sep + 1));
            if(!tag) throw ParseError("lexicon: unknown component '" + line.substr(sep + 1) + "'", i + 1);
            auto term = text::trim(line.substr(0, sep));
            if(text::tokenize(term).empty()) throw ParseError("lexicon: empty term", i + 1);
            lex.add(term, *tag);
        }
        return lex;
    }

    static ComponentLexicon load(const std::filesystem::path &path) { return parse(read_file(path)); }

    const std::string &version() const { return m_version; }
    const std::vector<Entry> &entries() const { return m_entries; }
    bool empty() const { return m_entries.empty(); }

    /// Leftmost-longest, non-overlapping term matches over the text's tokens.
    std::vector<Hit> hits(std::string_view s) const {
        auto tokens = text::tokenize(s);
        std::vector<Hit> out;
        std::size_t i = 0;
        while(i < tokens.size()) {
            const Entry *best = nullptr;
            for(const auto &e : m_entries) {
                if(e.tokens.size() > tokens.size() - i) continue;
                if(!std::equal(e.tokens.begin(), e.tokens.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i)))
                    continue;
                if(!best || e.tokens.size() > best->tokens.size()) best = &e;
            }
            if(best) {
                out.push_back({i, best});
                i += best->tokens.size();
            } else {
                ++i;
            }
        }
        return out;
    }

    /// Component with the most term hits in `statement`. Ties go to `proposed`
    /// when it is among the leaders, otherwise to the earliest hit. No hits
    /// returns `proposed`.
    ComponentTag classify(std::string_view statement, ComponentTag proposed) const {
        auto found = hits(statement);
        if(found.empty()) return proposed;
        std::map<ComponentTag, std::size_t> counts;
        for(const auto &h : found) ++counts[h.entry->tag];
        std::size_t top = 0;
        for(const auto &[tag, n] : counts) top = std::max(top, n);
        if(counts[proposed] == top) return proposed;
        for(const auto &h : found)
            if(counts[h.entry->tag] == top) return h.entry->tag;
        return proposed;
    }

private:
    void add(const std::string &term, ComponentTag tag) {
        m_entries.push_back({text::to_lower(term), text::tokenize(term), tag});
    }

    std::string m_version;
    std::vector<Entry> m_entries;
};

} // namespace matvqa::chain
