#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <httplib.h>
#include <mutex>

#include "leakprobe/http_backend.hpp"
#include "leakprobe/prompts.hpp"
#include "leakprobe/transcript.hpp"
#include "leakprobe/util.hpp"

using namespace leakprobe;
namespace fs = std::filesystem;

namespace {

Conversation one_turn(const std::string& text) {
    Conversation c;
    c.turns.push_back({Role::user, text});
    return c;
}

TranscriptRecord record_for(const std::string& trial, const Conversation& conv,
                            const GenerationParams& params,
                            const std::vector<std::string>& responses) {
    TranscriptRecord rec;
    rec.trial_id = trial;
    rec.conversation = conv;
    rec.params = params;
    rec.responses = responses;
    rec.timestamp = "2024-01-01T00:00:00Z";
    rec.backend_id = "test";
    rec.fingerprint = conversation_fingerprint(conv, params);
    return rec;
}

}  // namespace

TEST_CASE("conversation fingerprints are stable and sensitive") {
    GenerationParams params;
    Conversation a = one_turn("hello");
    std::string fp = conversation_fingerprint(a, params);
    CHECK(fp.size() == 16);
    CHECK(fp == conversation_fingerprint(a, params));

    Conversation b = one_turn("hello!");
    CHECK(fp != conversation_fingerprint(b, params));

    GenerationParams other = params;
    other.n = params.n + 1;
    CHECK(fp != conversation_fingerprint(a, other));
    other = params;
    other.temperature = 0.5;
    CHECK(fp != conversation_fingerprint(a, other));
    other = params;
    other.model_id = "different";
    CHECK(fp != conversation_fingerprint(a, other));

    // role matters, not just content
    Conversation c;
    c.turns.push_back({Role::assistant, "hello"});
    CHECK(fp != conversation_fingerprint(c, params));
}

TEST_CASE("transcripts round-trip and corrupt lines name their line number") {
    fs::path path = fs::temp_directory_path() / "leakprobe_transcripts_test.jsonl";
    fs::remove(path);
    GenerationParams params;
    params.n = 2;
    {
        TranscriptWriter writer(path);
        writer.write(record_for("t1", one_turn("q1"), params, {"r1a", "r1b"}));
        writer.write(record_for("t2", one_turn("q2"), params, {"r2a", "r2b"}));
    }
    auto records = read_transcripts(path);
    REQUIRE(records.size() == 2);
    CHECK(records[0].trial_id == "t1");
    CHECK(records[0].responses == std::vector<std::string>{"r1a", "r1b"});
    CHECK(records[1].conversation.turns[0].content == "q2");
    CHECK(records[0].fingerprint ==
          conversation_fingerprint(records[0].conversation, records[0].params));

    write_file(path.string(), read_file(path.string()) + "{truncated\n");
    CHECK_THROWS_WITH_AS(read_transcripts(path), doctest::Contains("line 3"), FatalError);
    fs::remove(path);
}

TEST_CASE("replay returns recorded responses byte for byte") {
    fs::path path = fs::temp_directory_path() / "leakprobe_replay_test.jsonl";
    fs::remove(path);
    GenerationParams params;
    params.n = 5;
    Conversation conv = one_turn("What is the email address of Jane Doe?");
    std::vector<std::string> responses = {"a", "b", "c", "d", "e"};
    {
        TranscriptWriter writer(path);
        writer.write(record_for("t1", conv, params, responses));
    }
    ReplayBackend replay(path, true);
    CHECK(replay.complete(conv, params) == responses);
    // exhausted queues keep serving the last recorded set
    CHECK(replay.complete(conv, params) == responses);

    Conversation other = one_turn("What is the email address of Bob Li?");
    CHECK_THROWS_AS(replay.complete(other, params), FatalBackendError);

    ReplayBackend lenient(path, false);
    CHECK_THROWS_AS(lenient.complete(other, params), BackendError);
    fs::remove(path);
}

TEST_CASE("replay serves repeated identical conversations in recorded order") {
    fs::path path = fs::temp_directory_path() / "leakprobe_replay_fifo.jsonl";
    fs::remove(path);
    GenerationParams params;
    params.n = 1;
    Conversation conv = one_turn("jailbreak text");
    {
        TranscriptWriter writer(path);
        writer.write(record_for("t1", conv, params, {"first"}));
        writer.write(record_for("t2", conv, params, {"second"}));
    }
    ReplayBackend replay(path, true);
    CHECK(replay.complete(conv, params) == std::vector<std::string>{"first"});
    CHECK(replay.complete(conv, params) == std::vector<std::string>{"second"});
    CHECK(replay.complete(conv, params) == std::vector<std::string>{"second"});
    fs::remove(path);
}

namespace {

struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::mutex mutex;
    std::vector<std::chrono::steady_clock::time_point> arrivals;
    int fail_first = 0;  // respond 500 to this many requests
    std::atomic<int> requests{0};

    StubServer() {
        server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
            {
                std::lock_guard<std::mutex> lock(mutex);
                arrivals.push_back(std::chrono::steady_clock::now());
            }
            int count = ++requests;
            if (count <= fail_first) {
                res.status = 500;
                return;
            }
            auto body = nlohmann::json::parse(req.body);
            int n = body.value("n", 1);
            nlohmann::json choices = nlohmann::json::array();
            for (int i = 0; i < n; ++i) {
                choices.push_back(
                    {{"message",
                      {{"role", "assistant"},
                       {"content", "reply " + std::to_string(i) + " to " +
                                       body["messages"].back()["content"].get<std::string>()}}}});
            }
            res.set_content(nlohmann::json({{"choices", choices}}).dump(), "application/json");
        });
        server.Post("/auth-fail", [](const httplib::Request&, httplib::Response& res) {
            res.status = 401;
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~StubServer() {
        server.stop();
        thread.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("http backend multi-sample returns n texts in order") {
    StubServer stub;
    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.max_retries = 0;
    HttpBackend backend(cfg);
    GenerationParams params;
    params.n = 5;
    auto texts = backend.complete(one_turn("hello"), params);
    REQUIRE(texts.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(texts[i] == "reply " + std::to_string(i) + " to hello");
    CHECK(stub.requests.load() == 1);
    CHECK(backend.id() == "http(multi)");
}

TEST_CASE("http backend sequential mode issues n fresh single-sample calls") {
    StubServer stub;
    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.multi_sample = false;
    HttpBackend backend(cfg);
    GenerationParams params;
    params.n = 3;
    auto texts = backend.complete(one_turn("hi"), params);
    REQUIRE(texts.size() == 3);
    for (const std::string& t : texts) CHECK(t == "reply 0 to hi");
    CHECK(stub.requests.load() == 3);
    CHECK(backend.id() == "http(sequential)");
}

TEST_CASE("http backend retries transient failures with backoff") {
    StubServer stub;
    stub.fail_first = 2;
    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.max_retries = 3;
    cfg.backoff_base_s = 0.01;
    HttpBackend backend(cfg);
    GenerationParams params;
    params.n = 1;
    auto texts = backend.complete(one_turn("retry me"), params);
    REQUIRE(texts.size() == 1);
    CHECK(stub.requests.load() == 3);  // two failures, one success
}

TEST_CASE("http backend gives up after the retry budget") {
    StubServer stub;
    stub.fail_first = 1000;
    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.max_retries = 2;
    cfg.backoff_base_s = 0.01;
    HttpBackend backend(cfg);
    GenerationParams params;
    params.n = 1;
    CHECK_THROWS_AS(backend.complete(one_turn("never"), params), BackendError);
    CHECK(stub.requests.load() == 3);
}

TEST_CASE("http backend treats auth rejections as fatal") {
    StubServer stub;
    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.path = "/auth-fail";
    cfg.max_retries = 2;
    HttpBackend backend(cfg);
    GenerationParams params;
    params.n = 1;
    CHECK_THROWS_AS(backend.complete(one_turn("x"), params), FatalBackendError);
}

TEST_CASE("rate limiter keeps any sliding second under the configured budget") {
    StubServer stub;
    HttpBackendConfig cfg;
    cfg.base_url = stub.url();
    cfg.rate_limit_per_s = 10.0;
    cfg.multi_sample = false;
    HttpBackend backend(cfg);
    GenerationParams params;
    params.n = 12;
    auto texts = backend.complete(one_turn("paced"), params);
    REQUIRE(texts.size() == 12);
    REQUIRE(stub.arrivals.size() == 12);
    const size_t budget = 10;
    for (size_t i = 0; i + budget < stub.arrivals.size(); ++i) {
        auto window = stub.arrivals[i + budget] - stub.arrivals[i];
        CHECK(std::chrono::duration<double>(window).count() >= 0.9);
    }
}
