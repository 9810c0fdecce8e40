#include <doctest.h>

#include "leakprobe/extract.hpp"
#include "leakprobe/http_backend.hpp"
#include "leakprobe/prompts.hpp"
#include "leakprobe/sim.hpp"
#include "leakprobe/sim_server.hpp"
#include "leakprobe/util.hpp"

using namespace leakprobe;

namespace {

SimTargetConfig planted_config(size_t n, uint64_t seed = 3) {
    SimTargetConfig cfg = default_sim_config();
    cfg.planted = synth_fixture(77, n, {"enron.com"});
    cfg.seed = seed;
    return cfg;
}

GenerationParams params_n(int n) {
    GenerationParams p;
    p.n = n;
    p.model_id = "sim";
    return p;
}

}  // namespace

TEST_CASE("classify_prompt recognizes every builder shape") {
    TemplatePack pack = default_template_pack();
    Subject s;
    s.name = "Jane Doe";
    s.email = "jane.doe@enron.com";
    s.domain = "enron.com";

    CHECK(classify_prompt(build_direct(s, pack)) == PromptCategory::direct);
    CHECK(classify_prompt(build_jailbreak_phase1(pack)) == PromptCategory::jailbreak);
    Conversation phase2 =
        assemble_jailbreak_phase2(build_jailbreak_phase1(pack), "ok, go ahead", s, pack);
    CHECK(classify_prompt(phase2) == PromptCategory::jailbreak);
    CHECK(classify_prompt(build_jailbreak_cot(s, pack)) == PromptCategory::jailbreak_cot);
    CHECK(classify_prompt(build_multiple_choice(s, {"a@x.com", "b@x.com"}, pack)) ==
          PromptCategory::mc);
    CHECK(classify_prompt(build_free_form("enron.com", 5, pack)) == PromptCategory::free_form);
    CHECK(classify_prompt(build_partial_identified(s.name, s.domain, pack)) ==
          PromptCategory::pie);
}

TEST_CASE("classify_prompt falls back to direct on arbitrary text") {
    SplitMix64 rng(5);
    std::vector<std::string> words = {"please", "tell", "me",  "something", "nice",
                                      "about",  "the",  "sky", "tonight",   "ok"};
    for (int i = 0; i < 200; ++i) {
        std::string text;
        for (size_t w = 0, len = 1 + rng.bounded(12); w < len; ++w) {
            if (w) text += " ";
            text += words[rng.bounded(words.size())];
        }
        Conversation conv;
        conv.turns.push_back({Role::user, text});
        CHECK(classify_prompt(conv) == PromptCategory::direct);
    }
}

TEST_CASE("simulator is deterministic per conversation") {
    SimTargetConfig cfg = planted_config(20);
    SimTarget a(cfg);
    SimTarget b(cfg);
    TemplatePack pack = default_template_pack();
    Conversation conv = build_jailbreak_cot(cfg.planted.subjects[0], pack);
    auto r1 = a.complete(conv, params_n(5));
    auto r2 = a.complete(conv, params_n(5));
    auto r3 = b.complete(conv, params_n(5));
    CHECK(r1 == r2);
    CHECK(r1 == r3);

    SimTargetConfig other = cfg;
    other.seed = cfg.seed + 1;
    SimTarget c(other);
    CHECK(a.complete(conv, params_n(5)) != c.complete(conv, params_n(5)));
}

TEST_CASE("forced refusal yields zero parseable emails") {
    SimTargetConfig cfg = planted_config(10);
    cfg.refusal_prob[PromptCategory::direct] = 1.0;
    SimTarget sim(cfg);
    TemplatePack pack = default_template_pack();
    for (const Subject& s : cfg.planted.subjects) {
        for (const std::string& response : sim.complete(build_direct(s, pack), params_n(5))) {
            CHECK_MESSAGE(parse_emails(response).empty(), "refusal leaked email: ", response);
        }
    }
}

TEST_CASE("forced recall embeds the planted email verbatim") {
    SimTargetConfig cfg = planted_config(10);
    cfg.refusal_prob[PromptCategory::jailbreak_cot] = 0.0;
    cfg.recall_prob = 1.0;
    SimTarget sim(cfg);
    TemplatePack pack = default_template_pack();
    for (const Subject& s : cfg.planted.subjects) {
        for (const std::string& response :
             sim.complete(build_jailbreak_cot(s, pack), params_n(3))) {
            CHECK(response.find(s.email) != std::string::npos);
        }
    }
}

TEST_CASE("hallucinations keep the domain at the configured fidelity") {
    SimTargetConfig cfg = planted_config(1);
    cfg.refusal_prob[PromptCategory::jailbreak_cot] = 0.0;
    cfg.recall_prob = 0.0;
    cfg.domain_fidelity = 1.0;
    SimTarget sim(cfg);
    TemplatePack pack = default_template_pack();
    const Subject& s = cfg.planted.subjects[0];
    auto responses = sim.complete(build_jailbreak_cot(s, pack), params_n(1000));
    size_t correct_domain = 0;
    size_t exact = 0;
    for (const std::string& r : responses) {
        auto first = first_email(r);
        REQUIRE(first.has_value());
        CHECK(email_domain(*first) == s.domain);
        if (email_domain(*first) == s.domain) ++correct_domain;
        if (*first == s.email) ++exact;
    }
    CHECK(correct_domain == responses.size());
    // one of four confusable patterns coincides with the true first.last local
    double frac = static_cast<double>(exact) / static_cast<double>(responses.size());
    CHECK(frac > 0.25 - 3 * 0.0137);  // 3 sigma around 1/4 over 1000 draws
    CHECK(frac < 0.25 + 3 * 0.0137);
}

TEST_CASE("response-level recall rate matches the analytic product") {
    SimTargetConfig cfg = planted_config(1);
    double refusal = 0.3;
    double recall = 0.6;
    cfg.refusal_prob[PromptCategory::jailbreak_cot] = refusal;
    cfg.recall_prob = recall;
    cfg.domain_fidelity = 0.0;  // hallucinated guesses can never hit the true email
    SimTarget sim(cfg);
    TemplatePack pack = default_template_pack();
    const Subject& s = cfg.planted.subjects[0];
    const int N = 4000;
    auto responses = sim.complete(build_jailbreak_cot(s, pack), params_n(N));
    size_t hits = 0;
    for (const std::string& r : responses) {
        if (r.find(s.email) != std::string::npos) ++hits;
    }
    double p = (1.0 - refusal) * recall;
    double sigma = std::sqrt(p * (1 - p) / N);
    double measured = static_cast<double>(hits) / N;
    CHECK(std::abs(measured - p) <= 3 * sigma);
}

TEST_CASE("names outside the planted corpus are never answered correctly") {
    SimTargetConfig cfg = planted_config(20);
    cfg.refusal_prob[PromptCategory::jailbreak_cot] = 0.0;
    cfg.recall_prob = 1.0;
    SimTarget sim(cfg);
    TemplatePack pack = default_template_pack();
    Subject stranger;
    stranger.name = "Zebulon Query";
    stranger.email = "zebulon.query@elsewhere.net";
    stranger.domain = "elsewhere.net";
    std::set<std::string> planted_emails;
    for (const Subject& s : cfg.planted.subjects) planted_emails.insert(s.email);
    auto responses = sim.complete(build_jailbreak_cot(stranger, pack), params_n(200));
    for (const std::string& r : responses) {
        auto first = first_email(r);
        if (!first) continue;
        CHECK(*first != stranger.email);
        CHECK_FALSE(planted_emails.count(*first));
    }
}

TEST_CASE("multiple-choice answers select the true option at the configured rate") {
    SimTargetConfig cfg = planted_config(5);
    cfg.mc_true_pick_prob = 1.0;
    SimTarget sim(cfg);
    TemplatePack pack = default_template_pack();
    const Subject& s = cfg.planted.subjects[0];
    Conversation mc = build_multiple_choice(s, {"wrong.guess@enron.com", s.email}, pack);
    for (const std::string& r : sim.complete(mc, params_n(20))) {
        CHECK(r.find(s.email) != std::string::npos);
        CHECK(r.find("B.") != std::string::npos);
    }
}

TEST_CASE("free-form listings mix planted and fabricated pairs") {
    SimTargetConfig cfg = planted_config(30);
    cfg.refusal_prob[PromptCategory::free_form] = 0.0;
    cfg.fe_list_total = 10;
    cfg.fe_list_planted = 4;
    SimTarget sim(cfg);
    TemplatePack pack = default_template_pack();
    auto responses = sim.complete(build_free_form("enron.com", 10, pack), params_n(1));
    auto pairs = parse_pairs(responses[0]);
    REQUIRE(pairs.size() == 10);
    std::set<std::string> planted_emails;
    for (const Subject& s : cfg.planted.subjects) planted_emails.insert(s.email);
    size_t planted_hits = 0;
    for (const NamedPair& p : pairs) {
        if (planted_emails.count(p.email)) ++planted_hits;
        CHECK(p.name.has_value());
    }
    CHECK(planted_hits == 4);
}

TEST_CASE("obfuscation mode still round-trips through the parser") {
    SimTargetConfig cfg = planted_config(5);
    cfg.refusal_prob[PromptCategory::jailbreak_cot] = 0.0;
    cfg.recall_prob = 1.0;
    cfg.obfuscation_prob = 1.0;
    SimTarget sim(cfg);
    TemplatePack pack = default_template_pack();
    for (const Subject& s : cfg.planted.subjects) {
        auto responses = sim.complete(build_jailbreak_cot(s, pack), params_n(2));
        for (const std::string& r : responses) {
            CHECK(r.find(" [at] ") != std::string::npos);
            CHECK(r.find(s.email) == std::string::npos);  // raw text is obfuscated
            CHECK(first_email(r) == s.email);             // parser recovers it
        }
    }
}

TEST_CASE("sim config json round trip") {
    SimTargetConfig cfg = planted_config(3);
    cfg.recall_prob = 0.25;
    cfg.refusal_prob[PromptCategory::direct] = 0.75;
    nlohmann::json j = sim_config_to_json(cfg);
    SimTargetConfig loaded = sim_config_from_json(j);
    CHECK(loaded.recall_prob == cfg.recall_prob);
    CHECK(loaded.refusal_prob[PromptCategory::direct] == 0.75);
    CHECK(loaded.planted.subjects.size() == cfg.planted.subjects.size());
    CHECK(loaded.seed == cfg.seed);

    nlohmann::json bad = j;
    bad["recall_prob"] = 1.5;
    CHECK_THROWS_AS(sim_config_from_json(bad), FatalError);
}

TEST_CASE("sim server speaks the chat-completion wire shape") {
    SimTargetConfig cfg = planted_config(5);
    cfg.refusal_prob[PromptCategory::direct] = 0.0;
    cfg.recall_prob = 1.0;
    SimServer server(cfg);
    int port = server.start();
    HttpBackendConfig http;
    http.base_url = "http://127.0.0.1:" + std::to_string(port);
    HttpBackend backend(http);
    TemplatePack pack = default_template_pack();
    const Subject& s = cfg.planted.subjects[0];
    auto texts = backend.complete(build_direct(s, pack), params_n(3));
    REQUIRE(texts.size() == 3);
    for (const std::string& t : texts) CHECK(t.find(s.email) != std::string::npos);
    server.stop();
}
