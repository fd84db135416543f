#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "fixtures.hpp"
#include "matvqa/llm/live.hpp"
#include "matvqa/llm/roles.hpp"
#include "matvqa/llm/transcript.hpp"

using namespace matvqa;
using namespace matvqa::llm;
namespace mt = matvqa::testing;

namespace {

ChatRequest sample_request(std::string user = "hi") { return make_request("m", "evaluator", "sys", std::move(user)); }

std::shared_ptr<ScriptedBackend> echo() {
    auto b = std::make_shared<ScriptedBackend>();
    b->otherwise([](const ChatRequest &r) { return "echo: " + r.messages.back().text; });
    return b;
}

ErrorCode code_of(const std::function<void()> &fn) {
    try {
        fn();
    } catch(const Error &e) {
        return e.code();
    }
    return ErrorCode::precondition;
}

} // namespace

TEST(Request, CanonicalHashFrozen) {
    // sha256 of the sorted-key compact JSON, computed independently in Python
    auto r = sample_request();
    EXPECT_EQ(canonical_serialization(r),
              R"({"attachments":[],"messages":[{"role":"system","text":"sys"},{"role":"user","text":"hi"}],)"
              R"("model_id":"m","sampling":{"max_tokens":1024,"seed":null,"temperature":0.0},"tag":"evaluator"})");
    EXPECT_EQ(request_hash(r), "3f36ee444175a6ce829ac8df2511d0bc874e34626e330052f8e560f4c3b4e31a");
    auto seeded = r;
    seeded.sampling.seed = 7;
    EXPECT_NE(request_hash(seeded), request_hash(r));
    EXPECT_EQ(json(seeded).get<ChatRequest>(), seeded);
}

TEST(Request, Validation) {
    ChatRequest r;
    r.model_id = "m";
    r.messages = {{Role::system, "only system"}};
    EXPECT_THROW(validate(r), Error);
    r.messages.push_back({Role::user, "u"});
    EXPECT_NO_THROW(validate(r));
    r.attachments = {{"short", "image/png"}};
    EXPECT_THROW(validate(r), Error);
    r.attachments.clear();
    r.model_id.clear();
    EXPECT_THROW(validate(r), Error);
    EXPECT_THROW(role_from_string("tool"), ParseError);
}

TEST(Scripted, DispatchAndCounts) {
    auto b = std::make_shared<ScriptedBackend>();
    b->on("evaluator", "The answer is 2");
    EXPECT_EQ(b->complete(sample_request()).text, "The answer is 2");
    EXPECT_EQ(b->calls("evaluator"), 1u);
    auto other = sample_request();
    other.tag = "unknown";
    EXPECT_EQ(code_of([&] { b->complete(other); }), ErrorCode::config);
    b->otherwise([](const ChatRequest &) { return std::string("fallback"); });
    EXPECT_EQ(b->complete(other).text, "fallback");
}

TEST(Replay, HitsAndMisses) {
    auto inner = echo();
    auto transcript = std::make_shared<Transcript>();
    RecordingBackend rec(inner, transcript);
    rec.complete(sample_request("one"));
    rec.complete(sample_request("two"));
    auto entries = transcript->entries();
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].request_hash, request_hash(sample_request("one")));
    EXPECT_EQ(entries[1].response.text, "echo: two");
    EXPECT_EQ(entries[0].timestamp.size(), 20u);

    ReplayBackend replay(entries);
    EXPECT_EQ(replay.complete(sample_request("two")).text, "echo: two");
    EXPECT_EQ(replay.hits(), 1u);
    EXPECT_EQ(code_of([&] { replay.complete(sample_request("three")); }), ErrorCode::replay_miss);

    auto counter = std::make_shared<CountingBackend>(inner);
    ReplayBackend with_fallback(entries, counter);
    EXPECT_EQ(with_fallback.complete(sample_request("three")).text, "echo: three");
    with_fallback.complete(sample_request("one"));
    EXPECT_EQ(counter->count(), 1u);
}

TEST(Transcript, FileRoundTripAndIntegrity) {
    auto transcript = std::make_shared<Transcript>();
    RecordingBackend rec(echo(), transcript);
    for(auto s : {"a", "b", "c"}) rec.complete(sample_request(s));
    mt::TempDir dir;
    auto path = dir / "t.jsonl";
    record_transcript(transcript->entries(), path);
    EXPECT_EQ(read_transcript(path), transcript->entries());
    auto replay = load_transcript(path);
    EXPECT_EQ(replay->size(), 3u);
    EXPECT_EQ(replay->complete(sample_request("b")).text, "echo: b");

    auto bytes = read_file(path);
    // byte-stable: re-serializing gives the same file
    EXPECT_EQ(serialize_transcript(read_transcript(path)), bytes);

    auto tampered = bytes;
    tampered.replace(tampered.find("echo: b"), 7, "echo: X");
    EXPECT_EQ(code_of([&] { parse_transcript(tampered); }), ErrorCode::checksum);

    auto lines = text::split(bytes, '\n');
    EXPECT_EQ(code_of([&] { parse_transcript(lines[0] + "\n"); }), ErrorCode::parse); // no trailer
    EXPECT_EQ(code_of([&] { parse_transcript(""); }), ErrorCode::parse);
    try {
        parse_transcript(lines[0] + "\n{oops\n" + lines[3] + "\n");
        FAIL();
    } catch(const ParseError &e) {
        EXPECT_EQ(e.line(), 2u);
    }

    auto entries = transcript->entries();
    entries[0].request_hash = std::string(64, '0');
    EXPECT_THROW(record_transcript(entries, dir / "bad.jsonl"), Error);
    // a forged hash with a valid checksum still fails
    EXPECT_EQ(code_of([&] { parse_transcript(serialize_transcript(entries)); }), ErrorCode::checksum);
    EXPECT_EQ(code_of([&] { read_transcript(dir / "missing.jsonl"); }), ErrorCode::not_found);
}

TEST(Retrying, LinearBackoffAndAttemptCount) {
    int calls = 0;
    auto flaky = std::make_shared<ScriptedBackend>();
    flaky->otherwise([&](const ChatRequest &) -> std::string {
        if(++calls < 3) throw RetryableError("HTTP 429");
        return "ok";
    });
    std::vector<long> sleeps;
    RetryingBackend retry(flaky, 3, std::chrono::milliseconds(10),
                          [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    EXPECT_EQ(retry.complete(sample_request()).text, "ok");
    EXPECT_EQ(sleeps, (std::vector<long>{10, 20}));

    calls = -100;
    try {
        retry.complete(sample_request());
        FAIL();
    } catch(const RetryableError &e) {
        EXPECT_EQ(e.attempts(), 3u);
    }

    auto fatal = std::make_shared<ScriptedBackend>();
    int fatal_calls = 0;
    fatal->otherwise([&](const ChatRequest &) -> std::string {
        ++fatal_calls;
        throw Error(ErrorCode::config, "bad key");
    });
    RetryingBackend no_retry(fatal, 3, std::chrono::milliseconds(0), nullptr);
    EXPECT_THROW(no_retry.complete(sample_request()), Error);
    EXPECT_EQ(fatal_calls, 1);
}

TEST(Roles, GatewayAppliesRoleSettings) {
    auto b = std::make_shared<ScriptedBackend>();
    ChatRequest seen;
    b->otherwise([&](const ChatRequest &r) {
        seen = r;
        return std::string("x");
    });
    Gateway gw{b, RoleMap::defaults("model-a")};
    gw.ask(roles::rewriter, "sys", "user", {{std::string(64, 'f'), "image/png"}});
    EXPECT_EQ(seen.tag, "rewriter");
    EXPECT_EQ(seen.model_id, "model-a");
    EXPECT_DOUBLE_EQ(seen.sampling.temperature, 0.7);
    EXPECT_EQ(seen.attachments.size(), 1u);
    EXPECT_EQ(code_of([&] { gw.ask("nobody", "", "u"); }), ErrorCode::config);

    auto parsed = json::parse(R"({"evaluator":{"model":"m2","temperature":0.3}})").get<RoleMap>();
    EXPECT_EQ(parsed.at("evaluator").model_id, "m2");
    EXPECT_EQ(parsed.at("evaluator").max_tokens, 1024);
    EXPECT_EQ(parsed.at("checker").model_id, "gpt-4o");
}

TEST(Live, PayloadShape) {
    auto r = sample_request();
    r.attachments = {{std::string(64, 'a'), ""}};
    BlobResolver resolve = [](const std::string &) {
        return std::optional<std::pair<std::string, std::string>>{{"ab", "image/png"}};
    };
    auto body = provider_payload(r, resolve);
    EXPECT_EQ(body["messages"][0]["content"], "sys");
    const auto &content = body["messages"][1]["content"];
    ASSERT_EQ(content.size(), 2u);
    EXPECT_EQ(content[0]["text"], "hi");
    EXPECT_EQ(content[1]["image_url"]["url"], "data:image/png;base64,YWI=");
    EXPECT_FALSE(body.contains("seed"));
    EXPECT_EQ(base64("\x89PNG"), "iVBORw==");
    EXPECT_EQ(code_of([&] { provider_payload(r, nullptr); }), ErrorCode::missing_figure);
}

TEST(Live, AgainstLocalServer) {
    httplib::Server server;
    std::string mode = "ok";
    std::string auth;
    json last_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request &req, httplib::Response &res) {
        auth = req.get_header_value("Authorization");
        last_body = json::parse(req.body);
        if(mode == "ok") {
            res.set_content(R"({"id":"c1","model":"m","choices":[{"message":{"content":"The answer is 3"}}],)"
                            R"("usage":{"prompt_tokens":11,"completion_tokens":4}})",
                            "application/json");
        } else if(mode == "401") {
            res.status = 401;
        } else if(mode == "429") {
            res.status = 429;
        } else if(mode == "400") {
            res.status = 400;
            res.set_content("bad", "text/plain");
        } else {
            res.set_content("not json", "text/plain");
        }
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ProviderConfig cfg;
    cfg.name = "local";
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.api_key_env = "MATVQA_TEST_KEY";
    ::unsetenv("MATVQA_TEST_KEY");
    EXPECT_EQ(code_of([&] { LiveBackend(cfg, nullptr).complete(sample_request()); }), ErrorCode::config);

    ::setenv("MATVQA_TEST_KEY", "secret", 1);
    LiveBackend live(cfg, nullptr);
    auto r = sample_request();
    r.sampling.seed = 5;
    auto resp = live.complete(r);
    EXPECT_EQ(resp.text, "The answer is 3");
    EXPECT_EQ(resp.usage.prompt_tokens, 11);
    EXPECT_EQ(resp.usage.completion_tokens, 4);
    EXPECT_EQ(resp.provider_meta["provider"], "local");
    EXPECT_EQ(auth, "Bearer secret");
    EXPECT_EQ(last_body["seed"], 5);
    EXPECT_EQ(last_body["model"], "m");

    mode = "401";
    EXPECT_EQ(code_of([&] { live.complete(r); }), ErrorCode::config);
    mode = "429";
    EXPECT_THROW(live.complete(r), RetryableError);
    mode = "400";
    EXPECT_EQ(code_of([&] { live.complete(r); }), ErrorCode::network);
    mode = "garbage";
    EXPECT_EQ(code_of([&] { live.complete(r); }), ErrorCode::parse);

    server.stop();
    th.join();
    EXPECT_THROW(live.complete(r), RetryableError); // connection refused
    ::unsetenv("MATVQA_TEST_KEY");
}
