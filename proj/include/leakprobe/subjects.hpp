#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace leakprobe {

enum class SubjectCategory { enron_frequent, enron_infrequent, institutional, synthetic };

std::string_view category_name(SubjectCategory cat);
SubjectCategory category_from_name(std::string_view name);

/// One ground-truth target: the (name, email) pair an attack tries to recover.
struct Subject {
    std::string id;
    std::string name;
    std::string email;   // lowercase-normalized
    std::string domain;  // substring after "@"
    SubjectCategory category = SubjectCategory::synthetic;
    uint64_t frequency = 0;
    std::map<std::string, std::string> meta;
};

/// Validates the Subject field invariants; fills `why` with the first failure.
bool validate_subject(const Subject& s, std::string* why = nullptr);

struct Provenance {
    std::string source;
    std::vector<std::string> log;
};

struct SubjectSet {
    std::vector<Subject> subjects;
    Provenance provenance;
};

void save_subject_set(const SubjectSet& set, const std::filesystem::path& path);
SubjectSet load_subject_set(const std::filesystem::path& path);

/// One message pulled from a raw corpus; only the address-bearing headers and
/// the body survive ingestion.
struct RawMessage {
    std::string from;
    std::string to;
    std::string cc;
    std::string subject;
    std::string body;
    std::string source;  // file (and index for mbox members)
};

struct CorpusLoadResult {
    std::vector<RawMessage> messages;
    size_t skipped = 0;
};

/// Reads a directory tree of single-message files and/or mbox archives
/// ("From " separated). Malformed messages are skipped and counted; an
/// unreadable path is fatal.
CorpusLoadResult load_raw_corpus(const std::filesystem::path& path);

struct PairCount {
    std::string name;
    std::string email;
    uint64_t frequency = 0;
};

struct ExtractPairsResult {
    std::vector<PairCount> pairs;  // sorted by email
    size_t dropped = 0;            // addresses with no resolvable display name
};

/// Harvests (name, email) pairs from From/To/Cc headers. frequency counts the
/// messages in which the email appears; the display name is the most common
/// form seen, normalized to title-cased "First Last".
ExtractPairsResult extract_pairs(const std::vector<RawMessage>& records);

struct PartitionResult {
    SubjectSet frequent;
    SubjectSet infrequent;
};

/// frequent: top-n by frequency among enron.com pairs; infrequent: bottom-n
/// among everything else. Ties break by lexicographic email order.
PartitionResult partition_frequency(const std::vector<PairCount>& pairs, size_t n_frequent,
                                    size_t n_infrequent);

/// Local-part substrings that flag shared or organizational mailboxes.
const std::vector<std::string>& default_exclusion_rules();

/// One email per line; "#" starts a comment.
std::set<std::string> load_exclusion_list(const std::filesystem::path& path);

/// Drops subjects whose local part matches a heuristic rule or whose email is
/// explicitly excluded. Every removal lands in the curation log with its
/// triggering rule.
SubjectSet filter_invalid(const SubjectSet& set, const std::vector<std::string>& rules,
                          const std::set<std::string>& exclusion);

/// CSV with header columns name,email and optional domain_hint,citations.
SubjectSet load_institutional(const std::filesystem::path& path);

/// Deterministic synthetic subjects: distinct names, first.last@domain
/// addresses. Same seed yields byte-identical output.
SubjectSet synth_fixture(uint64_t seed, size_t n, const std::vector<std::string>& domain_pool);

/// "Last, First" becomes "First Last"; every word is title-cased.
std::string normalize_person_name(std::string_view raw);

std::string email_domain(std::string_view email);

}  // namespace leakprobe
