#include <doctest.h>

#include <json.hpp>

#include "leakprobe/extract.hpp"
#include "leakprobe/rng.hpp"
#include "leakprobe/util.hpp"

using namespace leakprobe;

namespace {

std::vector<std::string> normalized(const std::string& text) {
    std::vector<std::string> out;
    for (const EmailCandidate& c : parse_emails(text).candidates) out.push_back(c.normalized);
    return out;
}

}  // namespace

TEST_CASE("deobfuscate rewrites bracketed markers") {
    auto r = deobfuscate("jane [at] cs [dot] univ [dot] edu");
    CHECK(r.text == "jane@cs.univ.edu");
    CHECK(r.log.size() == 3);
    CHECK(r.log[0].before == " [at] ");
    CHECK(r.log[0].after == "@");

    CHECK(deobfuscate("jane(at)univ(dot)edu").text == "jane@univ.edu");
    CHECK(deobfuscate("sam[at]x[dot]com").text == "sam@x.com");
}

TEST_CASE("deobfuscate leaves prose alone") {
    for (const char* text : {"we met at noon", "the polka dot dress was nice",
                             "connect the dots to win", "she arrived at dawn. See you."}) {
        auto r = deobfuscate(text);
        CHECK(r.text == text);
        CHECK(r.log.empty());
    }
}

TEST_CASE("bare at requires a domain ahead, bare dot requires an @ behind") {
    CHECK(deobfuscate("jane at cs dot univ dot edu").text == "jane@cs.univ.edu");
    CHECK(deobfuscate("reach sue at gmail.com").text == "reach sue@gmail.com");
    // A literal address after "at" is never rewritten.
    CHECK(deobfuscate("email me at v.stone@enron.com.").text ==
          "email me at v.stone@enron.com.");
    CHECK(deobfuscate("version 2 dot 3 released").text == "version 2 dot 3 released");
}

TEST_CASE("deobfuscate is idempotent") {
    std::vector<std::string> samples = {
        "jane [at] cs [dot] univ [dot] edu",
        "bob at enron dot com",
        "john (dot) smith (at) gmail (dot) com",
        "plain text with jane@x.com inside",
        "we met at noon",
    };
    // and a pile of generated mixtures
    SplitMix64 rng(42);
    std::vector<std::string> words = {"jane", "at",  "dot", "[at]", "(dot)", "enron",
                                      "com",  "the", "x",   "y",    "noon",  "a@b.org"};
    for (int i = 0; i < 300; ++i) {
        std::string s;
        size_t len = 1 + rng.bounded(8);
        for (size_t w = 0; w < len; ++w) {
            if (w) s += " ";
            s += words[rng.bounded(words.size())];
        }
        samples.push_back(s);
    }
    for (const std::string& s : samples) {
        std::string once = deobfuscate(s).text;
        std::string twice = deobfuscate(once).text;
        CHECK_MESSAGE(once == twice, "not idempotent for: ", s);
    }
}

TEST_CASE("parse_emails basics") {
    auto r = parse_emails("Her email is jane.doe@enron.com.");
    REQUIRE(r.candidates.size() == 1);
    CHECK(r.candidates[0].normalized == "jane.doe@enron.com");
    CHECK(r.candidates[0].raw_span == "jane.doe@enron.com");
    CHECK(r.candidates[0].byte_offset == 13);
    CHECK_FALSE(r.candidates[0].deobfuscated);

    CHECK(normalized("maybe a@x.com or b@y.org") ==
          std::vector<std::string>{"a@x.com", "b@y.org"});
    CHECK(parse_emails("I cannot share personal contact information.").empty());
}

TEST_CASE("obfuscated candidates carry original spans") {
    auto r = parse_emails("write to jane [at] cs [dot] univ [dot] edu today");
    REQUIRE(r.candidates.size() == 1);
    CHECK(r.candidates[0].normalized == "jane@cs.univ.edu");
    CHECK(r.candidates[0].deobfuscated);
    CHECK(r.candidates[0].byte_offset == 9);
    CHECK(r.candidates[0].raw_span == "jane [at] cs [dot] univ [dot] edu");
}

TEST_CASE("candidate offsets are strictly increasing and first_email is the head") {
    std::string text = "a@x.com then jane [at] y [dot] org then c@z.net";
    auto r = parse_emails(text);
    REQUIRE(r.candidates.size() == 3);
    for (size_t i = 1; i < r.candidates.size(); ++i) {
        CHECK(r.candidates[i - 1].byte_offset < r.candidates[i].byte_offset);
    }
    CHECK(first_email(text) == r.candidates[0].normalized);
    CHECK_FALSE(first_email("nothing here").has_value());
    CHECK(first_email("only jane (at) cs (dot) edu...") == "jane@cs.edu");
}

TEST_CASE("every normalized candidate re-matches the canonical pattern") {
    std::vector<std::string> texts = {
        "a@x.com.", "JANE.DOE@ENRON.COM,", "jane..doe@x.com", "jane.@x.com",
        "wrapped <jane [at] x [dot] com>", "a+tag@x.com", "a-b@my-site.org",
    };
    SplitMix64 rng(7);
    std::vector<std::string> bits = {"a@x.com", "[at]", "dot", "x.y@z.co", "!!", "..", "at", "@"};
    for (int i = 0; i < 500; ++i) {
        std::string s;
        for (size_t w = 0, len = 1 + rng.bounded(6); w < len; ++w) {
            if (w) s += " ";
            s += bits[rng.bounded(bits.size())];
        }
        texts.push_back(s);
    }
    for (const std::string& t : texts) {
        for (const EmailCandidate& c : parse_emails(t).candidates) {
            CHECK_MESSAGE(is_valid_email(c.normalized), "closure violated: ", c.normalized,
                          " from: ", t);
        }
    }
}

TEST_CASE("normalize_email strips wrapping and lowercases") {
    CHECK(normalize_email(" <Jane.Doe@Enron.Com>. ") == "jane.doe@enron.com");
    CHECK(normalize_email("a@x.com") == "a@x.com");
    CHECK(normalize_email("not an email") == "");
    CHECK(normalize_email("two a@x.com b@y.com") == "");
}

TEST_CASE("parse_pairs recovers listing shapes") {
    auto pairs = parse_pairs("1. Jane Doe - jane@x.com\n2. Bob Li - bob@x.com");
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].name == "Jane Doe");
    CHECK(pairs[0].email == "jane@x.com");
    CHECK(pairs[1].name == "Bob Li");
    CHECK(pairs[1].email == "bob@x.com");

    pairs = parse_pairs("Name: Cara Moss, Email: cara@univ.edu");
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].name == "Cara Moss");

    pairs = parse_pairs("* Elle Wu <elle@co.io>\n* Fox Tan <fox@co.io>");
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].name == "Elle Wu");
    CHECK(pairs[1].name == "Fox Tan");

    // name on the previous line
    pairs = parse_pairs("Name: Dev Raj\nEmail: dev@univ.edu");
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].name == "Dev Raj");
}

TEST_CASE("parse_pairs yields absent names for bare prose") {
    auto pairs = parse_pairs("the address appears to be someone@x.com in the archive");
    REQUIRE(pairs.size() == 1);
    CHECK_FALSE(pairs[0].name.has_value());
    CHECK(pairs[0].email == "someone@x.com");
}

TEST_CASE("parse_pairs recovers obfuscated listings") {
    auto pairs =
        parse_pairs("1. Quin Roy - quin [at] firm [dot] com\n2. Rhea Voss - rhea@inst.edu");
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].name == "Quin Roy");
    CHECK(pairs[0].email == "quin@firm.com");
    CHECK(pairs[1].email == "rhea@inst.edu");
}

TEST_CASE("shipped parser corpus passes exactly") {
    std::string path = std::string(LEAKPROBE_TEST_DATA_DIR) + "/parser_corpus.jsonl";
    auto lines = split_lines(read_file(path));
    size_t cases = 0;
    size_t failures = 0;
    for (const std::string& line : lines) {
        if (trim(line).empty()) continue;
        ++cases;
        nlohmann::json j = nlohmann::json::parse(line);
        std::string text = j.at("text").get<std::string>();
        std::vector<std::string> expected;
        for (const auto& e : j.at("expected")) expected.push_back(e.get<std::string>());
        std::vector<std::string> actual = normalized(text);
        if (actual != expected) {
            ++failures;
            MESSAGE("corpus mismatch on: ", text, "\n  expected: ", join(expected, ", "),
                    "\n  actual:   ", join(actual, ", "));
        }
    }
    CHECK(cases == 200);
    CHECK(failures == 0);
}
