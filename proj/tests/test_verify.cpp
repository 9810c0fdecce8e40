#include <doctest.h>

#include "leakprobe/util.hpp"
#include "leakprobe/verify.hpp"

using namespace leakprobe;

namespace {

ExtractionResult gen_with(const std::vector<std::string>& emails, int index) {
    ExtractionResult er;
    er.source_generation_index = index;
    size_t offset = 0;
    for (const std::string& e : emails) {
        er.candidates.push_back({e, e, offset, false});
        offset += e.size() + 1;
    }
    return er;
}

std::vector<ExtractionResult> gens(const std::vector<std::vector<std::string>>& per_gen) {
    std::vector<ExtractionResult> out;
    for (size_t i = 0; i < per_gen.size(); ++i) {
        out.push_back(gen_with(per_gen[i], static_cast<int>(i)));
    }
    return out;
}

Subject subject() {
    Subject s;
    s.id = "jane.doe@enron.com";
    s.name = "Jane Doe";
    s.email = "jane.doe@enron.com";
    s.domain = "enron.com";
    return s;
}

class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<std::string> responses, bool fail = false)
        : responses_(std::move(responses)), fail_(fail) {}

    std::vector<std::string> complete(const Conversation&, const GenerationParams& params) override {
        ++calls;
        if (fail_) throw BackendError("scripted failure");
        std::vector<std::string> out;
        for (int i = 0; i < params.n; ++i) out.push_back(responses_[i % responses_.size()]);
        return out;
    }
    std::string id() const override { return "scripted"; }

    int calls = 0;

private:
    std::vector<std::string> responses_;
    bool fail_;
};

}  // namespace

TEST_CASE("default_pick takes the earliest generation with any parse") {
    CHECK(default_pick(gens({{}, {"a@x.com", "b@x.com"}})) == "a@x.com");
    CHECK_FALSE(default_pick(gens({{}, {}, {}})).has_value());
    CHECK(default_pick(gens({{"b@x.com"}, {}, {"a@x.com"}})) == "b@x.com");
}

TEST_CASE("tally counts one vote per generation in first-seen order") {
    auto t = tally(gens({{"a@x.com"}, {"a@x.com"}, {"b@x.com"}, {"a@x.com"}, {"c@x.com"}}));
    REQUIRE(t.size() == 3);
    CHECK(t[0].candidate == "a@x.com");
    CHECK(t[0].count == 3);
    CHECK(t[1].candidate == "b@x.com");
    CHECK(t[1].count == 1);
    CHECK(t[2].candidate == "c@x.com");
    CHECK(t[2].count == 1);

    // repeats inside one generation count once
    auto one = tally(gens({{"a@x.com", "a@x.com", "a@x.com"}}));
    REQUIRE(one.size() == 1);
    CHECK(one[0].count == 1);

    CHECK(tally(gens({{}, {}})).empty());
}

TEST_CASE("majority_vote picks the strict winner and breaks ties deterministically") {
    SplitMix64 rng = derive_stream(1, "trial");
    auto t = tally(gens({{"a@x.com"}, {"a@x.com"}, {"b@x.com"}, {"a@x.com"}, {"c@x.com"}}));
    CHECK(majority_vote(t, rng) == "a@x.com");

    auto tie = tally(gens({{"a@x.com"}, {"b@x.com"}, {"a@x.com"}, {"b@x.com"}}));
    SplitMix64 r1 = derive_stream(9, "trial-42");
    SplitMix64 r2 = derive_stream(9, "trial-42");
    auto pick1 = majority_vote(tie, r1);
    auto pick2 = majority_vote(tie, r2);
    CHECK(pick1 == pick2);
    REQUIRE(pick1.has_value());
    CHECK((*pick1 == "a@x.com" || *pick1 == "b@x.com"));

    SplitMix64 empty_rng(1);
    CHECK_FALSE(majority_vote({}, empty_rng).has_value());
}

TEST_CASE("majority_vote winner count dominates every tally entry") {
    SplitMix64 gen_rng(123);
    std::vector<std::string> pool = {"a@x.com", "b@x.com", "c@x.com", "d@x.com"};
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::vector<std::string>> per_gen;
        for (int g = 0, n = 1 + static_cast<int>(gen_rng.bounded(6)); g < n; ++g) {
            if (gen_rng.bernoulli(0.2)) {
                per_gen.push_back({});
            } else {
                per_gen.push_back({pool[gen_rng.bounded(pool.size())]});
            }
        }
        auto t = tally(gens(per_gen));
        SplitMix64 rng = derive_stream(7, "t" + std::to_string(trial));
        auto winner = majority_vote(t, rng);
        if (t.empty()) {
            CHECK_FALSE(winner.has_value());
            continue;
        }
        REQUIRE(winner.has_value());
        int winner_count = 0;
        bool member = false;
        for (const CandidateTally& entry : t) {
            if (entry.candidate == *winner) {
                winner_count = entry.count;
                member = true;
            }
        }
        CHECK(member);
        for (const CandidateTally& entry : t) CHECK(winner_count >= entry.count);
    }
}

TEST_CASE("all three schemes agree under consensus") {
    auto unanimous = gens({{"a@x.com"}, {"a@x.com"}, {"a@x.com"}});
    auto t = tally(unanimous);
    SplitMix64 rng = derive_stream(3, "consensus");
    CHECK(default_pick(unanimous) == "a@x.com");
    CHECK(majority_vote(t, rng) == "a@x.com");
    ScriptedBackend never_called({"unused"});
    GenerationParams params;
    auto mc = mc_verify(subject(), t, unanimous, never_called, params, default_template_pack());
    CHECK(mc.prediction == "a@x.com");
    CHECK(never_called.calls == 0);  // single candidate short-circuits
}

TEST_CASE("mc_verify takes the first displayed option") {
    auto generations = gens({{"a@x.com"}, {"b@x.com"}, {"a@x.com"}});
    auto t = tally(generations);
    GenerationParams params;
    TemplatePack pack = default_template_pack();

    ScriptedBackend by_label({"The correct one is B. b@x.com"});
    auto mc = mc_verify(subject(), t, generations, by_label, params, pack);
    CHECK(mc.prediction == "b@x.com");
    CHECK(mc.queried);
    CHECK_FALSE(mc.used_fallback);

    // value mention beats a later label
    ScriptedBackend by_value({"I believe a@x.com is right, not option B."});
    mc = mc_verify(subject(), t, generations, by_value, params, pack);
    CHECK(mc.prediction == "a@x.com");

    // response naming nothing falls back to default_pick
    ScriptedBackend vague({"Neither of these seems right to me."});
    mc = mc_verify(subject(), t, generations, vague, params, pack);
    CHECK(mc.used_fallback);
    CHECK(mc.prediction == "a@x.com");

    // backend failure degrades to default_pick and flags it
    ScriptedBackend broken({}, true);
    mc = mc_verify(subject(), t, generations, broken, params, pack);
    CHECK(mc.backend_failed);
    CHECK(mc.used_fallback);
    CHECK(mc.prediction == "a@x.com");
}

TEST_CASE("verification outputs always come from the generated candidate set") {
    SplitMix64 gen_rng(321);
    std::vector<std::string> pool = {"a@x.com", "b@x.com", "c@x.com"};
    GenerationParams params;
    TemplatePack pack = default_template_pack();
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<std::string>> per_gen;
        for (int g = 0; g < 5; ++g) {
            if (gen_rng.bernoulli(0.3)) per_gen.push_back({});
            else per_gen.push_back({pool[gen_rng.bounded(pool.size())]});
        }
        auto generations = gens(per_gen);
        auto t = tally(generations);
        std::set<std::string> seen;
        for (const auto& entry : t) seen.insert(entry.candidate);

        SplitMix64 rng = derive_stream(11, "m" + std::to_string(trial));
        for (auto pick : {default_pick(generations), majority_vote(t, rng)}) {
            if (pick) CHECK(seen.count(*pick));
            else CHECK(seen.empty());
        }
        ScriptedBackend echo({"A."});
        auto mc = mc_verify(subject(), t, generations, echo, params, pack);
        if (mc.prediction) CHECK(seen.count(*mc.prediction));
    }
}
