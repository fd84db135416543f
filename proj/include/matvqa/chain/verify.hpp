#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "matvqa/chain/types.hpp"
#include "matvqa/common/error.hpp"
#include "matvqa/common/text.hpp"

namespace matvqa::chain {

struct VerifyOptions {
    double theta = 0.35;   // minimum best-evidence token F1 for a verified step
    std::size_t top_k = 3; // evidence spans kept per step
};

/// Candidate evidence spans of a body: every sentence and every paragraph,
/// deduplicated, in document order.
class EvidenceIndex {
public:
    explicit EvidenceIndex(std::string_view body) : m_body(body) {
        std::set<text::Span> spans;
        for(const auto &p : text::paragraphs(body)) {
            spans.insert(p);
            for(const auto &s : text::sentences(body, p)) spans.insert(s);
        }
        m_spans.assign(spans.begin(), spans.end());
    }

    const std::vector<text::Span> &spans() const { return m_spans; }

    /// Top-k spans by token F1 against `statement`. Ties break on earlier start,
    /// then shorter span. Zero-score spans are never returned.
    std::vector<Evidence> rank(std::string_view statement, std::size_t top_k) const {
        std::vector<Evidence> scored;
        for(const auto &span : m_spans) {
            double score = text::token_f1(statement, text::slice(m_body, span));
            if(score > 0.0) scored.push_back({span, score});
        }
        std::sort(scored.begin(), scored.end(), [](const Evidence &a, const Evidence &b) {
            if(a.score != b.score) return a.score > b.score;
            if(a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
            return a.span.end < b.span.end;
        });
        if(scored.size() > top_k) scored.resize(top_k);
        return scored;
    }

private:
    std::string_view m_body;
    std::vector<text::Span> m_spans;
};

inline ReasoningStep verify_step(ReasoningStep step, const EvidenceIndex &index, const VerifyOptions &opts = {}) {
    step.evidence = index.rank(step.statement, opts.top_k);
    step.verified = step.best_score() >= opts.theta;
    return step;
}

inline ReasoningStep verify_step(ReasoningStep step, std::string_view body, const VerifyOptions &opts = {}) {
    require(!text::trim(body).empty(), "verify_step: body_text must be non-empty");
    return verify_step(std::move(step), EvidenceIndex(body), opts);
}

inline ReasoningChain verify_chain(ReasoningChain chain, std::string_view body, const VerifyOptions &opts = {}) {
    require(!text::trim(body).empty(), "verify_chain: body_text must be non-empty");
    EvidenceIndex index(body);
    for(auto &s : chain.steps) s = verify_step(std::move(s), index, opts);
    return chain;
}

} // namespace matvqa::chain
