#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "matvqa/chain/extract.hpp"
#include "matvqa/chain/lexicon.hpp"
#include "matvqa/chain/store.hpp"
#include "matvqa/chain/validate.hpp"
#include "matvqa/chain/verify.hpp"
#include "matvqa/corpus/importer.hpp"

using namespace matvqa;
using namespace matvqa::chain;
namespace mt = matvqa::testing;

namespace {

const char *kArrowChain =
    "A 10 T magnetic field was applied during annealing of the cobalt ferrite film (E) -> "
    "The magnetic field aligns the grain orientation along the field axis (S) -> "
    "Aligned grain orientation raises magnetocrystalline anisotropy (P) -> "
    "The aligned film reaches a coercivity of 2500 Oe (Pe)";

std::string ferrite_body() { return read_file(mt::fixtures() / "papers/ferrite/paper.md"); }

ComponentLexicon shipped() { return ComponentLexicon::load(mt::config_dir() / "lexicon.tsv"); }

ReasoningChain chain_of(const std::vector<ProposedStep> &steps) {
    ReasoningChain c;
    c.chain_id = "2401.00001/fig1";
    c.figure_id = "fig1";
    for(std::size_t i = 0; i < steps.size(); ++i) c.steps.push_back({i, steps[i].component, steps[i].statement, {}, false});
    return c;
}

std::vector<ViolationKind> kinds(const std::vector<Violation> &v) {
    std::vector<ViolationKind> out;
    for(const auto &x : v) out.push_back(x.kind);
    return out;
}

} // namespace

TEST(ChainParse, ArrowForm) {
    auto steps = parse_chain_output(kArrowChain);
    ASSERT_EQ(steps.size(), 4u);
    EXPECT_EQ(steps[0].component, ComponentTag::E);
    EXPECT_EQ(steps[0].statement, "A 10 T magnetic field was applied during annealing of the cobalt ferrite film");
    EXPECT_EQ(steps[3].component, ComponentTag::Pe);
    auto unicode = parse_chain_output("grain size (S) \xE2\x86\x92 hardness (Pe).");
    ASSERT_EQ(unicode.size(), 2u);
    EXPECT_EQ(unicode[1].statement, "hardness");
}

TEST(ChainParse, LineForm) {
    auto steps = parse_chain_output("Here is the chain:\n1. [Pr] Ball milling for 20 h\n2) [S] Grain size shrinks\n"
                                    "3: [PE] Hardness rises\n");
    ASSERT_EQ(steps.size(), 3u);
    EXPECT_EQ(steps[0], (ProposedStep{ComponentTag::Pr, "Ball milling for 20 h"}));
    EXPECT_EQ(steps[2].component, ComponentTag::Pe);
}

TEST(ChainParse, Unparseable) {
    EXPECT_TRUE(parse_chain_output("no chain here").empty());
    EXPECT_TRUE(parse_chain_output("a (S) -> b").empty());
    EXPECT_TRUE(parse_chain_output("a (X) -> b (Pe)").empty());
    EXPECT_TRUE(parse_chain_output("").empty());
}

TEST(Lexicon, ShippedFileAndClassify) {
    auto lex = shipped();
    EXPECT_EQ(lex.version(), "v1");
    EXPECT_EQ(lex.entries().size(), 20u); // 6 Pe, 3 P, 5 S, 4 Pr, 2 E
    // each statement has a tie between two components; the proposal wins the tie
    EXPECT_EQ(lex.classify("A 10 T magnetic field was applied during annealing", ComponentTag::E), ComponentTag::E);
    EXPECT_EQ(lex.classify("A 10 T magnetic field was applied during annealing", ComponentTag::Pe), ComponentTag::E);
    EXPECT_EQ(lex.classify("Coercivity and hardness improve with grain size", ComponentTag::S), ComponentTag::Pe);
    EXPECT_EQ(lex.classify("unrelated words", ComponentTag::P), ComponentTag::P);
}

TEST(Lexicon, LeftmostLongestHits) {
    ComponentLexicon lex("t", {{"grain", ComponentTag::S}, {"grain size", ComponentTag::P}, {"size", ComponentTag::E}});
    auto hits = lex.hits("Grain size and size");
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].entry->term, "grain size");
    EXPECT_EQ(hits[1].token_pos, 3u);
}

TEST(Lexicon, ParseErrors) {
    auto line_of = [](const std::string &content) -> std::size_t {
        try {
            ComponentLexicon::parse(content);
        } catch(const ParseError &e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of("hardness\tPe\n"), 1u);
    EXPECT_EQ(line_of("#lexicon \nhardness\tPe\n"), 1u);
    EXPECT_EQ(line_of("#lexicon v2\n# c\nhardness Pe\n"), 3u);
    EXPECT_EQ(line_of("#lexicon v2\nhardness\tQ\n"), 2u);
    EXPECT_EQ(line_of("#lexicon v2\n --\tS\n"), 2u);
    auto lex = ComponentLexicon::parse("#lexicon v2\nband gap,property\n\nyield strength\tperformance\n");
    ASSERT_EQ(lex.entries().size(), 2u);
    EXPECT_EQ(lex.entries()[0].tag, ComponentTag::P);
    EXPECT_EQ(lex.entries()[1].tag, ComponentTag::Pe);
}

// Scores and spans are frozen from a Python re-implementation of the sentence
// and paragraph splitter and the content-token F1.
TEST(Verify, EvidenceSpansAreByteExact) {
    auto body = ferrite_body();
    auto chain = verify_chain(chain_of(parse_chain_output(kArrowChain)), body);
    ASSERT_EQ(chain.steps.size(), 4u);
    const std::vector<std::pair<std::size_t, std::size_t>> best = {{130, 208}, {209, 278}, {279, 362}, {363, 476}};
    const std::vector<double> scores = {1.0, 1.0, 0.92307692307692302, 0.59999999999999998};
    for(std::size_t i = 0; i < 4; ++i) {
        const auto &s = chain.steps[i];
        ASSERT_FALSE(s.evidence.empty());
        EXPECT_EQ(s.evidence[0].span.begin, best[i].first);
        EXPECT_EQ(s.evidence[0].span.end, best[i].second);
        EXPECT_DOUBLE_EQ(s.evidence[0].score, scores[i]);
        EXPECT_TRUE(s.verified);
        EXPECT_LE(s.evidence.size(), 3u);
    }
    EXPECT_EQ(text::slice(body, chain.steps[1].evidence[0].span),
              "The magnetic field aligns the grain orientation along the field axis.");
    // step 0: second-best is the heading, third the whole paragraph
    EXPECT_EQ(chain.steps[0].evidence[1].span, (text::Span{0, 41}));
    EXPECT_DOUBLE_EQ(chain.steps[0].evidence[1].score, 0.5714285714285714);
    EXPECT_EQ(chain.steps[0].evidence[2].span, (text::Span{130, 476}));
    EXPECT_DOUBLE_EQ(chain.steps[0].evidence[2].score, 0.38297872340425526);
    EXPECT_TRUE(validate_chain(chain).empty());
}

TEST(Verify, ThresholdBoundary) {
    auto body = ferrite_body();
    ReasoningStep step{0, ComponentTag::Pe, "The aligned film reaches a coercivity of 2500 Oe", {}, false};
    EXPECT_TRUE(verify_step(step, body, {0.6, 3}).verified);
    EXPECT_FALSE(verify_step(step, body, {0.61, 3}).verified);
    EXPECT_EQ(verify_step(step, body, {0.6, 1}).evidence.size(), 1u);
    ReasoningStep absent{0, ComponentTag::Pe, "Graphene oxide improves battery capacity retention", {}, false};
    auto v = verify_step(absent, body);
    EXPECT_TRUE(v.evidence.empty());
    EXPECT_FALSE(v.verified);
    EXPECT_THROW(verify_step(step, std::string_view("  ")), Error);
}

TEST(Validate, FerriteChainAndRejections) {
    auto body = ferrite_body();
    auto steps = parse_chain_output(kArrowChain);
    auto good = verify_chain(chain_of(steps), body);
    EXPECT_TRUE(validate_chain(good).empty());

    auto ends_in_p = good;
    ends_in_p.steps.pop_back();
    EXPECT_EQ(kinds(validate_chain(ends_in_p)), (std::vector<ViolationKind>{ViolationKind::terminal_not_pe}));

    auto single = good;
    single.steps.erase(single.steps.begin(), single.steps.begin() + 3);
    EXPECT_EQ(kinds(validate_chain(single)), (std::vector<ViolationKind>{ViolationKind::too_short}));

    EXPECT_EQ(kinds(validate_chain(ReasoningChain{})),
              (std::vector<ViolationKind>{ViolationKind::too_short, ViolationKind::terminal_not_pe}));

    auto forged = good;
    forged.steps[3].evidence.clear(); // stored flag says verified, evidence says otherwise
    auto v = validate_chain(forged);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, ViolationKind::unverified_step);
    EXPECT_EQ(v[0].step, 3u);

    auto blank = good;
    blank.steps[1].statement = " ";
    EXPECT_EQ(kinds(validate_chain(blank)), (std::vector<ViolationKind>{ViolationKind::empty_statement}));
    // a stricter theta turns step 3 (0.6) into a violation
    EXPECT_EQ(kinds(validate_chain(good, 0.7)), (std::vector<ViolationKind>{ViolationKind::unverified_step}));
}

TEST(Extract, RepairsThenReclassifies) {
    auto rec = corpus::import_parsed_paper(mt::fixtures() / "papers/ferrite");
    const auto &fig = rec.figures[0];
    auto b = std::make_shared<llm::ScriptedBackend>();
    std::vector<std::string> prompts;
    b->on(llm::roles::generator, [&](const llm::ChatRequest &r) {
        prompts.push_back(r.messages.back().text);
        if(prompts.size() == 1) return std::string("I cannot format this.");
        // the model mis-tags the field step as Pe; the lexicon corrects it to E
        return std::string("1. [Pe] A 10 T magnetic field was applied during annealing\n2. [S] grain orientation\n"
                           "3. [Pe] coercivity of 2500 Oe\n");
    });
    llm::Gateway gw{b, llm::RoleMap::defaults()};
    auto chain = extract_chain(rec.paper_id, fig, fig.context, shipped(), gw);
    ASSERT_EQ(prompts.size(), 2u);
    EXPECT_NE(prompts[1].find("I cannot format this."), std::string::npos);
    EXPECT_NE(prompts[0].find("Figure caption:\n" + fig.caption), std::string::npos);
    EXPECT_NE(prompts[0].find("- coercivity: Pe"), std::string::npos);
    EXPECT_EQ(chain.chain_id, "2401.00001/fig1");
    EXPECT_EQ(chain.lexicon_version, "v1");
    EXPECT_EQ(chain.steps[0].component, ComponentTag::E);
    EXPECT_EQ(chain.steps[2].component, ComponentTag::Pe);
}

TEST(Extract, GivesUpAfterRepairs) {
    auto rec = corpus::import_parsed_paper(mt::fixtures() / "papers/ferrite");
    auto b = std::make_shared<llm::ScriptedBackend>();
    b->on(llm::roles::generator, "still nothing");
    llm::Gateway gw{b, llm::RoleMap::defaults()};
    try {
        extract_chain(rec.paper_id, rec.figures[0], rec.figures[0].context, shipped(), gw);
        FAIL();
    } catch(const ExtractionError &e) {
        EXPECT_EQ(e.code(), ErrorCode::extraction);
        EXPECT_EQ(e.raw_output(), "still nothing");
    }
    EXPECT_EQ(b->calls(llm::roles::generator), 3u);
    EXPECT_THROW(extract_chain(rec.paper_id, rec.figures[0], {}, shipped(), gw), Error);
}

TEST(ChainStore, RoundTrip) {
    auto good = verify_chain(chain_of(parse_chain_output(kArrowChain)), ferrite_body());
    auto bad = good;
    bad.chain_id = "x/fig2";
    bad.steps.pop_back();
    std::vector<ChainRecord> records = {{good, true, {}}, {bad, false, {"terminal not Pe"}}};
    mt::TempDir dir;
    write_file(dir / "c.jsonl", serialize_chains(records));
    auto back = read_chains(dir / "c.jsonl");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].chain, good);
    EXPECT_FALSE(back[1].accepted);
    EXPECT_EQ(back[1].violations[0], "terminal not Pe");
    auto acc = accepted_chains(back);
    EXPECT_EQ(acc.size(), 1u);
    EXPECT_TRUE(acc.contains("2401.00001/fig1"));
    EXPECT_EQ(summarize(good).substr(0, 20), "A 10 T magnetic fiel");
}
