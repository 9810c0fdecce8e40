#include "leakprobe/subjects.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "leakprobe/extract.hpp"
#include "leakprobe/rng.hpp"
#include "leakprobe/util.hpp"

namespace fs = std::filesystem;

namespace leakprobe {

std::string_view category_name(SubjectCategory cat) {
    switch (cat) {
        case SubjectCategory::enron_frequent: return "enron_frequent";
        case SubjectCategory::enron_infrequent: return "enron_infrequent";
        case SubjectCategory::institutional: return "institutional";
        case SubjectCategory::synthetic: return "synthetic";
    }
    return "synthetic";
}

SubjectCategory category_from_name(std::string_view name) {
    if (name == "enron_frequent") return SubjectCategory::enron_frequent;
    if (name == "enron_infrequent") return SubjectCategory::enron_infrequent;
    if (name == "institutional") return SubjectCategory::institutional;
    if (name == "synthetic") return SubjectCategory::synthetic;
    throw FatalError("unknown subject category: " + std::string(name));
}

std::string email_domain(std::string_view email) {
    size_t at = email.find('@');
    if (at == std::string_view::npos) return {};
    return std::string(email.substr(at + 1));
}

bool validate_subject(const Subject& s, std::string* why) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg + " (" + s.email + ")";
        return false;
    };
    size_t at = s.email.find('@');
    if (at == std::string::npos || at == 0 || at + 1 >= s.email.size() ||
        s.email.find('@', at + 1) != std::string::npos) {
        return fail("email must contain exactly one @ with non-empty local part and domain");
    }
    if (s.domain != s.email.substr(at + 1)) return fail("domain field does not match email");
    if (s.category == SubjectCategory::enron_frequent && s.domain != "enron.com") {
        return fail("enron_frequent requires enron.com domain");
    }
    if (s.category == SubjectCategory::enron_infrequent && s.domain == "enron.com") {
        return fail("enron_infrequent must not use enron.com domain");
    }
    if (s.frequency == 0 && s.category != SubjectCategory::synthetic) {
        return fail("frequency 0 is only allowed for synthetic subjects");
    }
    return true;
}

void save_subject_set(const SubjectSet& set, const fs::path& path) {
    nlohmann::json subjects = nlohmann::json::array();
    for (const Subject& s : set.subjects) {
        subjects.push_back({
            {"id", s.id},
            {"name", s.name},
            {"email", s.email},
            {"domain", s.domain},
            {"category", std::string(category_name(s.category))},
            {"frequency", s.frequency},
            {"meta", s.meta},
        });
    }
    nlohmann::json j = {
        {"subjects", subjects},
        {"provenance", {{"source", set.provenance.source}, {"log", set.provenance.log}}},
    };
    write_file(path.string(), j.dump(2) + "\n");
}

SubjectSet load_subject_set(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path.string()));
    } catch (const nlohmann::json::exception& e) {
        throw FatalError("invalid subject set " + path.string() + ": " + e.what());
    }
    SubjectSet set;
    for (const auto& item : j.at("subjects")) {
        Subject s;
        s.id = item.at("id").get<std::string>();
        s.name = item.at("name").get<std::string>();
        s.email = item.at("email").get<std::string>();
        s.domain = item.at("domain").get<std::string>();
        s.category = category_from_name(item.at("category").get<std::string>());
        s.frequency = item.at("frequency").get<uint64_t>();
        if (item.contains("meta")) {
            for (auto it = item["meta"].begin(); it != item["meta"].end(); ++it) {
                s.meta[it.key()] = it.value().get<std::string>();
            }
        }
        std::string why;
        if (!validate_subject(s, &why)) {
            throw FatalError("invalid subject in " + path.string() + ": " + why);
        }
        set.subjects.push_back(std::move(s));
    }
    if (j.contains("provenance")) {
        set.provenance.source = j["provenance"].value("source", "");
        if (j["provenance"].contains("log")) {
            for (const auto& line : j["provenance"]["log"]) {
                set.provenance.log.push_back(line.get<std::string>());
            }
        }
    }
    return set;
}

namespace {

struct ParsedHeaders {
    std::map<std::string, std::string> fields;  // lowercase key
    size_t header_lines = 0;
    std::string body;
};

ParsedHeaders parse_header_block(const std::vector<std::string>& lines) {
    ParsedHeaders out;
    std::string last_key;
    size_t i = 0;
    for (; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (trim_view(line).empty()) {
            ++i;
            break;
        }
        if ((line[0] == ' ' || line[0] == '\t') && !last_key.empty()) {
            out.fields[last_key] += " " + trim(line);
            continue;
        }
        size_t colon = line.find(':');
        bool key_ok = colon != std::string::npos && colon > 0;
        if (key_ok) {
            for (size_t k = 0; k < colon; ++k) {
                if (is_space(line[k]) || line[k] == '<' || line[k] == '@') {
                    key_ok = false;
                    break;
                }
            }
        }
        if (!key_ok) break;  // header region ends at the first non-header line
        last_key = to_lower(line.substr(0, colon));
        out.fields[last_key] = trim(line.substr(colon + 1));
        ++out.header_lines;
    }
    std::vector<std::string> body_lines(lines.begin() + static_cast<long>(i), lines.end());
    out.body = join(body_lines, "\n");
    return out;
}

bool build_record(const std::string& text, const std::string& source, RawMessage* out) {
    ParsedHeaders h = parse_header_block(split_lines(text));
    if (h.header_lines == 0) return false;
    auto get = [&](const char* key) {
        auto it = h.fields.find(key);
        return it == h.fields.end() ? std::string() : it->second;
    };
    RawMessage msg;
    msg.from = get("from");
    msg.to = get("to");
    msg.cc = get("cc");
    msg.subject = get("subject");
    msg.body = h.body;
    msg.source = source;
    if (msg.from.empty() && msg.to.empty() && msg.cc.empty()) return false;
    *out = std::move(msg);
    return true;
}

// mbox archives separate messages with "From " lines.
std::vector<std::string> split_mbox(const std::string& text) {
    std::vector<std::string> messages;
    std::string current;
    bool at_line_start = true;
    size_t i = 0;
    while (i < text.size()) {
        if (at_line_start && text.compare(i, 5, "From ") == 0) {
            if (!trim(current).empty()) messages.push_back(current);
            current.clear();
            while (i < text.size() && text[i] != '\n') ++i;  // drop the separator line
            if (i < text.size()) ++i;
            at_line_start = true;
            continue;
        }
        at_line_start = text[i] == '\n';
        current += text[i];
        ++i;
    }
    if (!trim(current).empty()) messages.push_back(current);
    return messages;
}

void load_message_file(const fs::path& file, CorpusLoadResult* out) {
    std::string text = read_file(file.string());
    if (text.rfind("From ", 0) == 0) {
        auto members = split_mbox(text);
        for (size_t m = 0; m < members.size(); ++m) {
            RawMessage msg;
            if (build_record(members[m], file.string() + "#" + std::to_string(m), &msg)) {
                out->messages.push_back(std::move(msg));
            } else {
                ++out->skipped;
            }
        }
        return;
    }
    RawMessage msg;
    if (build_record(text, file.string(), &msg)) {
        out->messages.push_back(std::move(msg));
    } else {
        ++out->skipped;
    }
}

}  // namespace

CorpusLoadResult load_raw_corpus(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec) || ec) {
        throw FatalError("corpus path does not exist: " + path.string());
    }
    CorpusLoadResult result;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::recursive_directory_iterator(path)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());  // order-independent, deterministic
        for (const fs::path& file : files) load_message_file(file, &result);
    } else {
        load_message_file(path, &result);
    }
    return result;
}

namespace {

// Splits an address-list header on commas, re-joining "Last, First" segments
// that carry no address of their own.
std::vector<std::string> split_address_list(const std::string& value) {
    std::vector<std::string> raw;
    std::string current;
    bool in_angle = false, in_quote = false;
    for (char c : value) {
        if (c == '"' && !in_angle) in_quote = !in_quote;
        if (c == '<' && !in_quote) in_angle = true;
        if (c == '>' && !in_quote) in_angle = false;
        if (c == ',' && !in_angle && !in_quote) {
            raw.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    raw.push_back(current);

    std::vector<std::string> merged;
    std::string buffer;
    for (const std::string& seg : raw) {
        buffer = buffer.empty() ? seg : buffer + "," + seg;
        if (buffer.find('@') != std::string::npos) {
            merged.push_back(trim(buffer));
            buffer.clear();
        }
    }
    if (!trim(buffer).empty()) merged.push_back(trim(buffer));
    return merged;
}

struct Mailbox {
    std::string name;   // raw display name, possibly empty
    std::string email;  // normalized
};

std::optional<Mailbox> parse_mailbox(const std::string& segment) {
    std::string name_raw;
    std::string email_raw;
    size_t lt = segment.find('<');
    size_t gt = segment.find('>', lt == std::string::npos ? 0 : lt);
    if (lt != std::string::npos && gt != std::string::npos && gt > lt) {
        email_raw = segment.substr(lt + 1, gt - lt - 1);
        name_raw = trim(segment.substr(0, lt));
    } else {
        size_t lp = segment.find('(');
        size_t rp = segment.find(')', lp == std::string::npos ? 0 : lp);
        if (lp != std::string::npos && rp != std::string::npos && rp > lp) {
            email_raw = trim(segment.substr(0, lp));
            name_raw = trim(segment.substr(lp + 1, rp - lp - 1));
        } else {
            email_raw = trim(segment);
        }
    }
    std::string email = normalize_email(email_raw);
    if (email.empty()) return std::nullopt;

    while (name_raw.size() >= 2 && name_raw.front() == '"' && name_raw.back() == '"') {
        name_raw = trim(name_raw.substr(1, name_raw.size() - 2));
    }
    if (name_raw.find('@') != std::string::npos) name_raw.clear();
    bool has_alpha = std::any_of(name_raw.begin(), name_raw.end(), [](char c) { return is_alpha(c); });
    if (!has_alpha) name_raw.clear();
    return Mailbox{name_raw, email};
}

}  // namespace

std::string normalize_person_name(std::string_view raw) {
    std::string s = trim(raw);
    while (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                             (s.front() == '\'' && s.back() == '\''))) {
        s = trim(s.substr(1, s.size() - 2));
    }
    size_t comma = s.find(',');
    if (comma != std::string::npos && s.find(',', comma + 1) == std::string::npos) {
        std::string last = trim(s.substr(0, comma));
        std::string first = trim(s.substr(comma + 1));
        if (!first.empty() && !last.empty()) s = first + " " + last;
    }
    std::string out;
    bool new_word = true;
    bool prev_space = false;
    for (char c : s) {
        if (is_space(c)) {
            if (!prev_space && !out.empty()) out += ' ';
            prev_space = true;
            new_word = true;
            continue;
        }
        prev_space = false;
        if (is_alpha(c)) {
            out += new_word ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                            : lower_char(c);
            new_word = false;
        } else {
            out += c;
            new_word = (c == '-' || c == '\'' || c == '.');
        }
    }
    return trim(out);
}

ExtractPairsResult extract_pairs(const std::vector<RawMessage>& records) {
    struct Acc {
        std::set<size_t> message_ids;
        std::map<std::string, uint64_t> name_counts;  // raw display names
    };
    std::map<std::string, Acc> by_email;

    for (size_t m = 0; m < records.size(); ++m) {
        const RawMessage& msg = records[m];
        for (const std::string* header : {&msg.from, &msg.to, &msg.cc}) {
            if (header->empty()) continue;
            for (const std::string& segment : split_address_list(*header)) {
                auto mailbox = parse_mailbox(segment);
                if (!mailbox) continue;
                Acc& acc = by_email[mailbox->email];
                acc.message_ids.insert(m);
                if (!mailbox->name.empty()) ++acc.name_counts[mailbox->name];
            }
        }
    }

    ExtractPairsResult result;
    for (const auto& [email, acc] : by_email) {
        if (acc.name_counts.empty()) {
            ++result.dropped;
            continue;
        }
        std::string best_name;
        uint64_t best_count = 0;
        for (const auto& [name, count] : acc.name_counts) {
            std::string normalized = normalize_person_name(name);
            if (normalized.empty()) continue;
            if (count > best_count || (count == best_count && normalized < best_name)) {
                best_name = normalized;
                best_count = count;
            }
        }
        if (best_name.empty()) {
            ++result.dropped;
            continue;
        }
        result.pairs.push_back({best_name, email, acc.message_ids.size()});
    }
    // by_email is already email-ordered, so pairs come out sorted.
    return result;
}

PartitionResult partition_frequency(const std::vector<PairCount>& pairs, size_t n_frequent,
                                    size_t n_infrequent) {
    std::vector<PairCount> enron;
    std::vector<PairCount> other;
    for (const PairCount& p : pairs) {
        (email_domain(p.email) == "enron.com" ? enron : other).push_back(p);
    }
    std::sort(enron.begin(), enron.end(), [](const PairCount& a, const PairCount& b) {
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return a.email < b.email;
    });
    std::sort(other.begin(), other.end(), [](const PairCount& a, const PairCount& b) {
        if (a.frequency != b.frequency) return a.frequency < b.frequency;
        return a.email < b.email;
    });

    PartitionResult result;
    auto take = [](const std::vector<PairCount>& src, size_t n, SubjectCategory cat,
                   SubjectSet* dst, const char* label) {
        size_t count = std::min(n, src.size());
        for (size_t i = 0; i < count; ++i) {
            Subject s;
            s.id = src[i].email;
            s.name = src[i].name;
            s.email = src[i].email;
            s.domain = email_domain(s.email);
            s.category = cat;
            s.frequency = src[i].frequency;
            dst->subjects.push_back(std::move(s));
        }
        dst->provenance.log.push_back(std::string(label) + ": selected " +
                                      std::to_string(count) + " of " + std::to_string(n) +
                                      " requested from " + std::to_string(src.size()) +
                                      " candidates");
        if (count < n) {
            dst->provenance.log.push_back(std::string("warning: only ") + std::to_string(count) +
                                          " " + label + " candidates available");
        }
    };
    take(enron, n_frequent, SubjectCategory::enron_frequent, &result.frequent, "frequent");
    take(other, n_infrequent, SubjectCategory::enron_infrequent, &result.infrequent, "infrequent");
    return result;
}

const std::vector<std::string>& default_exclusion_rules() {
    static const std::vector<std::string> rules = {
        "no.address",  "noreply",     "no-reply",   "admin",      "office",
        "announcement", "mailbox",    "webmaster",  "postmaster", "helpdesk",
        "support",      "outlook.team", "all.employees", "distribution", "dl-",
    };
    return rules;
}

std::set<std::string> load_exclusion_list(const fs::path& path) {
    std::set<std::string> out;
    for (const std::string& line : split_lines(read_file(path.string()))) {
        std::string entry = trim(line.substr(0, line.find('#')));
        if (!entry.empty()) out.insert(to_lower(entry));
    }
    return out;
}

SubjectSet filter_invalid(const SubjectSet& set, const std::vector<std::string>& rules,
                          const std::set<std::string>& exclusion) {
    SubjectSet out;
    out.provenance = set.provenance;
    for (const Subject& s : set.subjects) {
        std::string rule;
        if (exclusion.count(to_lower(s.email))) {
            rule = "explicit";
        } else {
            std::string local = to_lower(s.email.substr(0, s.email.find('@')));
            for (const std::string& r : rules) {
                if (local.find(to_lower(r)) != std::string::npos) {
                    rule = "heuristic:" + r;
                    break;
                }
            }
        }
        if (rule.empty()) {
            out.subjects.push_back(s);
        } else {
            out.provenance.log.push_back("removed " + s.email + " rule=" + rule);
        }
    }
    return out;
}

SubjectSet load_institutional(const fs::path& path) {
    auto rows = parse_csv(read_file(path.string()));
    if (rows.empty()) throw FatalError("institutional CSV is empty: " + path.string());

    std::map<std::string, size_t> columns;
    for (size_t i = 0; i < rows[0].size(); ++i) columns[to_lower(trim(rows[0][i]))] = i;
    for (const char* required : {"name", "email"}) {
        if (!columns.count(required)) {
            throw FatalError("institutional CSV missing required column: " +
                             std::string(required));
        }
    }

    SubjectSet set;
    set.provenance.source = path.string();
    std::set<std::string> seen;
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        auto cell = [&](const char* key) -> std::string {
            auto it = columns.find(key);
            if (it == columns.end() || it->second >= row.size()) return {};
            return trim(row[it->second]);
        };
        std::string email = normalize_email(cell("email"));
        if (email.empty()) {
            set.provenance.log.push_back("skipped row " + std::to_string(r + 1) +
                                         ": invalid email");
            continue;
        }
        if (!seen.insert(email).second) {
            set.provenance.log.push_back("skipped row " + std::to_string(r + 1) +
                                         ": duplicate email " + email);
            continue;
        }
        Subject s;
        s.id = email;
        s.name = normalize_person_name(cell("name"));
        s.email = email;
        s.domain = email_domain(email);
        s.category = SubjectCategory::institutional;
        s.frequency = 1;
        if (!cell("domain_hint").empty()) s.meta["domain_hint"] = cell("domain_hint");
        if (!cell("citations").empty()) s.meta["citations"] = cell("citations");
        set.subjects.push_back(std::move(s));
    }
    set.provenance.log.push_back("loaded " + std::to_string(set.subjects.size()) +
                                 " institutional subjects");
    return set;
}

namespace {

const std::vector<std::string>& given_names() {
    static const std::vector<std::string> names = {
        "Ava",    "Noah",   "Mia",     "Liam",   "Zoe",    "Ethan",  "Ivy",    "Owen",
        "Ruby",   "Caleb",  "Nora",    "Felix",  "Iris",   "Hugo",   "Lena",   "Oscar",
        "Tessa",  "Jonas",  "Clara",   "Milo",   "Elsa",   "Arlo",   "Vera",   "Nico",
        "Stella", "Rhys",   "Maeve",   "Ezra",   "Opal",   "Jude",   "Wren",   "Silas",
        "Pearl",  "Abel",   "Daisy",   "Otis",   "Flora",  "Reid",   "Hazel",  "Knox",
        "June",   "Boone",  "Sadie",   "Cyrus",  "Belle",  "Amos",   "Greta",  "Levi",
    };
    return names;
}

const std::vector<std::string>& family_names() {
    static const std::vector<std::string> names = {
        "Hartwell", "Benson",   "Calloway", "Draper",  "Ellison",  "Faulkner", "Granger",
        "Holloway", "Irwin",    "Jamison",  "Keller",  "Lockhart", "Mercer",   "Norwood",
        "Overton",  "Prescott", "Quimby",   "Radcliff", "Sheldon", "Thatcher", "Underhill",
        "Vance",    "Westbrook", "Xiong",   "Yardley", "Ziegler",  "Abbott",   "Barlow",
        "Crane",    "Dalton",   "Emerson",  "Forsythe", "Gideon",  "Hobbes",   "Ingram",
        "Jasper",   "Kendrick", "Lachlan",  "Maddox",  "Nielson",  "Osborne",  "Pembroke",
        "Quill",    "Rutledge", "Sterling", "Tobias",  "Ullman",   "Winslow",
    };
    return names;
}

}  // namespace

SubjectSet synth_fixture(uint64_t seed, size_t n, const std::vector<std::string>& domain_pool) {
    std::vector<std::string> domains = domain_pool;
    if (domains.empty()) domains.push_back("example.com");

    SubjectSet set;
    set.provenance.source = "synth_fixture(seed=" + std::to_string(seed) + ")";
    SplitMix64 rng(seed ^ 0x5e91c0de5e91c0deull);
    std::set<std::string> used_names;

    for (size_t i = 0; i < n; ++i) {
        std::string given = given_names()[rng.bounded(given_names().size())];
        std::string family = family_names()[rng.bounded(family_names().size())];
        std::string base = family;
        for (uint64_t attempt = 2; used_names.count(given + " " + family); ++attempt) {
            family = base + std::to_string(attempt);
        }
        std::string name = given + " " + family;
        used_names.insert(name);

        Subject s;
        s.name = name;
        s.email = to_lower(given) + "." + to_lower(family) + "@" +
                  domains[rng.bounded(domains.size())];
        s.id = s.email;
        s.domain = email_domain(s.email);
        s.category = SubjectCategory::synthetic;
        s.frequency = 0;
        set.subjects.push_back(std::move(s));
    }
    set.provenance.log.push_back("generated " + std::to_string(n) + " synthetic subjects");
    return set;
}

}  // namespace leakprobe
