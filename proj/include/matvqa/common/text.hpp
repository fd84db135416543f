#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace matvqa::text {

/// Half-open byte range [begin, end) into some owning string.
struct Span {
    std::size_t begin{0};
    std::size_t end{0};

    std::size_t size() const { return end - begin; }
    bool operator==(const Span &) const = default;
    auto operator<=>(const Span &) const = default;
};

inline std::string_view slice(std::string_view s, Span span) {
    return s.substr(span.begin, span.end - span.begin);
}

inline bool is_token_char(unsigned char c) {
    // Bytes >= 0x80 belong to UTF-8 sequences; keep them inside words.
    return std::isalnum(c) || c >= 0x80;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if(first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

/// Lowercased alphanumeric runs, in order.
inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string current;
    for(unsigned char c : s) {
        if(is_token_char(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if(!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if(!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

inline const std::unordered_set<std::string> &stopwords() {
    static const std::unordered_set<std::string> words = {
        "a", "an", "the", "and", "or", "but", "nor", "of", "in", "on", "at", "to", "for", "from",
        "by", "with", "without", "into", "onto", "as", "is", "are", "was", "were", "be", "been",
        "being", "it", "its", "this", "that", "these", "those", "which", "who", "whom", "whose",
        "what", "when", "where", "why", "how", "there", "their", "they", "them", "we", "our",
        "us", "he", "she", "his", "her", "i", "you", "your", "do", "does", "did", "done", "has",
        "have", "had", "having", "can", "could", "will", "would", "shall", "should", "may",
        "might", "must", "not", "no", "so", "such", "than", "then", "also", "both", "each",
        "all", "any", "some", "more", "most", "very", "via", "per", "upon", "about", "between",
        "under", "over", "after", "before", "during", "while", "if", "because", "thus", "hence",
        "therefore", "however", "into", "up", "down", "out", "only", "other", "same", "own"};
    return words;
}

/// Tokens with stopwords removed.
inline std::vector<std::string> content_tokens(std::string_view s) {
    auto tokens = tokenize(s);
    const auto &stop = stopwords();
    std::erase_if(tokens, [&](const std::string &t) { return stop.contains(t); });
    return tokens;
}

/// Multiset token F1 between two texts over content tokens. 0 when either side
/// has no content tokens.
inline double token_f1(std::string_view a, std::string_view b) {
    auto ta = content_tokens(a);
    auto tb = content_tokens(b);
    if(ta.empty() || tb.empty()) return 0.0;
    std::map<std::string, int> counts;
    for(const auto &t : ta) ++counts[t];
    std::size_t common = 0;
    for(const auto &t : tb) {
        auto it = counts.find(t);
        if(it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if(common == 0) return 0.0;
    double precision = static_cast<double>(common) / static_cast<double>(tb.size());
    double recall = static_cast<double>(common) / static_cast<double>(ta.size());
    return 2.0 * precision * recall / (precision + recall);
}

/// True if `needle_tokens` occurs as a contiguous run inside `haystack_tokens`.
inline bool contains_token_run(const std::vector<std::string> &haystack_tokens,
                               const std::vector<std::string> &needle_tokens) {
    if(needle_tokens.empty() || needle_tokens.size() > haystack_tokens.size()) return false;
    return std::search(haystack_tokens.begin(), haystack_tokens.end(), needle_tokens.begin(),
                       needle_tokens.end()) != haystack_tokens.end();
}

/// Paragraph spans: maximal runs of non-blank lines. Leading/trailing
/// whitespace is excluded from each span.
inline std::vector<Span> paragraphs(std::string_view body) {
    std::vector<Span> out;
    auto emit = [&](std::size_t b, std::size_t e) {
        while(b < e && std::isspace(static_cast<unsigned char>(body[b]))) ++b;
        while(e > b && std::isspace(static_cast<unsigned char>(body[e - 1]))) --e;
        if(e > b) out.push_back({b, e});
    };
    constexpr auto npos = std::string_view::npos;
    std::size_t pos = 0;
    std::size_t para_start = npos;
    std::size_t para_end = 0;
    while(true) {
        auto nl = body.find('\n', pos);
        std::size_t line_end = nl == npos ? body.size() : nl;
        bool blank = body.substr(pos, line_end - pos).find_first_not_of(" \t\r") == npos;
        if(blank) {
            if(para_start != npos) emit(para_start, para_end);
            para_start = npos;
        } else {
            if(para_start == npos) para_start = pos;
            para_end = line_end;
        }
        if(nl == npos) break;
        pos = nl + 1;
    }
    if(para_start != npos) emit(para_start, para_end);
    return out;
}

namespace detail {
inline bool is_abbreviation_before(std::string_view text, std::size_t dot) {
    static const std::vector<std::string_view> abbreviations = {
        "fig", "figs", "eq", "eqs", "ref", "refs", "al", "e.g", "i.e", "vs", "approx", "ca",
        "no", "sec", "tab", "cf", "resp"};
    std::size_t start = dot;
    while(start > 0 && !std::isspace(static_cast<unsigned char>(text[start - 1])) &&
          text[start - 1] != '(')
        --start;
    auto word = to_lower(text.substr(start, dot - start));
    return std::find(abbreviations.begin(), abbreviations.end(), word) != abbreviations.end();
}
} // namespace detail

/// Sentence spans inside `range`: split after '.', '!' or '?' followed by
/// whitespace, except after common scientific abbreviations (Fig., Eq., et al.).
inline std::vector<Span> sentences(std::string_view body, Span range) {
    std::vector<Span> out;
    std::size_t start = range.begin;
    auto push = [&](std::size_t b, std::size_t e) {
        while(b < e && std::isspace(static_cast<unsigned char>(body[b]))) ++b;
        while(e > b && std::isspace(static_cast<unsigned char>(body[e - 1]))) --e;
        if(e > b) out.push_back({b, e});
    };
    for(std::size_t i = range.begin; i < range.end; ++i) {
        char c = body[i];
        if((c == '.' || c == '!' || c == '?') && i + 1 < range.end &&
           std::isspace(static_cast<unsigned char>(body[i + 1]))) {
            if(c == '.' && detail::is_abbreviation_before(body, i)) continue;
            push(start, i + 1);
            start = i + 1;
        }
    }
    push(start, range.end);
    return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while(true) {
        auto next = s.find(sep, pos);
        out.emplace_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if(next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
    if(s.size() < prefix.size()) return false;
    for(std::size_t i = 0; i < prefix.size(); ++i)
        if(std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    return true;
}

} // namespace matvqa::text
