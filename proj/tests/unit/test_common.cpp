#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <set>

#include "fixtures.hpp"
#include "matvqa/common/hash.hpp"
#include "matvqa/common/jsonl.hpp"
#include "matvqa/common/parallel.hpp"
#include "matvqa/common/rate_limit.hpp"
#include "matvqa/common/rng.hpp"
#include "matvqa/common/text.hpp"

using namespace matvqa;

// Expected sequences below come from a Python re-implementation of SplitMix64
// and FNV-1a.
TEST(Rng, SplitMix64ReferenceSequence) {
    SplitMix64 r(0);
    EXPECT_EQ(r.next(), 0xe220a8397b1dcdafULL);
    EXPECT_EQ(r.next(), 0x6e789e6aa1b965f4ULL);
    EXPECT_EQ(r.next(), 0x06c45d188009454fULL);
}

TEST(Rng, FnvAndMixSeed) {
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(mix_seed(7, "item"), 0x44d20c5f93b47ca8ULL);
    EXPECT_NE(mix_seed(7, "item"), mix_seed(8, "item"));
}

TEST(Rng, PermutationAndSample) {
    EXPECT_EQ(seeded_permutation(8, 42), (std::vector<std::size_t>{3, 1, 6, 2, 4, 0, 7, 5}));
    EXPECT_EQ(sample_without_replacement(10, 4, 7), (std::vector<std::size_t>{7, 0, 4, 6}));
    EXPECT_EQ(sample_without_replacement(3, 5, 7).size(), 3u);
    EXPECT_TRUE(seeded_permutation(0, 1).empty());
}

TEST(Rng, BelowIsInRange) {
    SplitMix64 r(99);
    std::set<std::uint64_t> seen;
    for(int i = 0; i < 500; ++i) {
        auto v = r.below(6);
        ASSERT_LT(v, 6u);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 6u);
}

TEST(Hash, Sha256KnownVectors) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(Sha256{}.update("a").update("bc").hex(), sha256_hex("abc"));
}

TEST(Hash, FileHelpers) {
    matvqa::testing::TempDir dir;
    write_file(dir / "x/y.txt", "abc");
    EXPECT_EQ(sha256_file(dir / "x/y.txt"), sha256_hex("abc"));
    append_file(dir / "x/y.txt", "d");
    EXPECT_EQ(read_file(dir / "x/y.txt"), "abcd");
    try {
        read_file(dir / "missing");
        FAIL();
    } catch(const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::not_found);
    }
}

TEST(Jsonl, CanonicalDumpSortsKeys) {
    json a = json::parse(R"({"b":1,"a":[1,2],"c":{"z":1,"y":2}})");
    EXPECT_EQ(canonical_dump(a), R"({"a":[1,2],"b":1,"c":{"y":2,"z":1}})");
    EXPECT_THROW(canonical_dump(json(std::string("\xff"))), json::type_error);
}

TEST(Jsonl, ParseSkipsBlanksAndReportsLine) {
    auto rows = parse_jsonl("{\"a\":1}\n\n  \n{\"a\":2}\n");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1]["a"], 2);
    try {
        parse_jsonl("{\"a\":1}\n\n{oops\n");
        FAIL();
    } catch(const ParseError &e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_EQ(e.code(), ErrorCode::parse);
    }
    matvqa::testing::TempDir dir;
    EXPECT_TRUE(read_jsonl(dir / "none.jsonl").empty());
    append_jsonl(dir / "log.jsonl", json{{"k", 1}});
    append_jsonl(dir / "log.jsonl", json{{"k", 2}});
    EXPECT_EQ(read_jsonl(dir / "log.jsonl").size(), 2u);
}

TEST(Text, Tokens) {
    EXPECT_EQ(text::tokenize("Fe3O4, under 10-T field!"),
              (std::vector<std::string>{"fe3o4", "under", "10", "t", "field"}));
    EXPECT_EQ(text::content_tokens("The grain size of the film"),
              (std::vector<std::string>{"grain", "size", "film"}));
    EXPECT_DOUBLE_EQ(text::token_f1("grain size", "grain size"), 1.0);
    EXPECT_DOUBLE_EQ(text::token_f1("grain size", "the"), 0.0);
    // {grain,size} vs {grain,boundary,size,film}: P=2/4 R=1, F1=2/3
    EXPECT_DOUBLE_EQ(text::token_f1("grain size", "grain boundary size film"), 2.0 / 3.0);
    EXPECT_TRUE(text::contains_token_run({"a", "b", "c"}, {"b", "c"}));
    EXPECT_FALSE(text::contains_token_run({"a", "b", "c"}, {"c", "b"}));
    EXPECT_FALSE(text::contains_token_run({"a"}, {}));
}

TEST(Text, ParagraphsAndSentences) {
    std::string body = "First line.\nSame para, see Fig. 2 here.\n\n  \nSecond para! Next? End";
    auto paras = text::paragraphs(body);
    ASSERT_EQ(paras.size(), 2u);
    EXPECT_EQ(text::slice(body, paras[0]), "First line.\nSame para, see Fig. 2 here.");
    EXPECT_EQ(text::slice(body, paras[1]), "Second para! Next? End");
    auto s = text::sentences(body, paras[0]);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(text::slice(body, s[1]), "Same para, see Fig. 2 here.");
    s = text::sentences(body, paras[1]);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(text::slice(body, s[2]), "End");
    EXPECT_TRUE(text::paragraphs("\n \n").empty());
}

TEST(Text, Misc) {
    EXPECT_EQ(text::trim(" \t x y \r\n"), "x y");
    EXPECT_EQ(text::trim("   "), "");
    EXPECT_EQ(text::split("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
    EXPECT_TRUE(text::starts_with_icase("pass: ok", "PASS"));
    EXPECT_FALSE(text::starts_with_icase("PA", "PASS"));
}

TEST(Parallel, VisitsEveryIndexOnce) {
    std::vector<std::atomic<int>> hits(200);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
    for(auto &h : hits) EXPECT_EQ(h.load(), 1);
    parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(Parallel, RethrowsAfterJoin) {
    std::atomic<int> done{0};
    EXPECT_THROW(parallel_for(50, 4,
                              [&](std::size_t i) {
                                  if(i == 10) throw Error(ErrorCode::network, "boom");
                                  ++done;
                              }),
                 Error);
    EXPECT_EQ(done.load(), 49);
}

TEST(RateLimit, DisabledAndThrottled) {
    TokenBucket off(1, 0);
    for(int i = 0; i < 100; ++i) off.acquire();
    TokenBucket slow(1, 20);
    auto t0 = std::chrono::steady_clock::now();
    for(int i = 0; i < 3; ++i) slow.acquire();
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_GE(ms, 90); // two refills at 50 ms each
}

TEST(Errors, CodesAndMessages) {
    EXPECT_EQ(to_string(ErrorCode::replay_miss), "replay_miss");
    ParseError e("bad", 4);
    EXPECT_STREQ(e.what(), "bad (line 4)");
    RetryableError r("down", 3);
    EXPECT_EQ(r.code(), ErrorCode::network);
    EXPECT_EQ(r.attempts(), 3u);
    EXPECT_THROW(require(false, "x"), Error);
}
