#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace leakprobe {

/// One rewrite applied by deobfuscate(): the byte range in the ORIGINAL text
/// that was replaced, what it said, and what it became.
struct Substitution {
    size_t offset = 0;         // start offset in the original text
    std::string before;        // original slice, e.g. " [at] "
    std::string after;         // replacement, e.g. "@"
};

struct DeobfuscationResult {
    std::string text;                   // rewritten text
    std::vector<Substitution> log;      // every rewrite, in order
    std::vector<size_t> origin;         // origin[i] = original offset of text[i]
    std::vector<bool> from_substitution;// true where text[i] came from a rewrite

    /// Maps a half-open byte range of the rewritten text back to the original.
    std::pair<size_t, size_t> original_range(size_t begin, size_t end, size_t original_size) const;
    bool range_touches_substitution(size_t begin, size_t end) const;
};

/// Normalizes "[at]"/"(at)" and "[dot]"/"(dot)" evasions back to @ and .
/// Bare " at " converts only between word tokens with a dot-domain pattern
/// within the next 40 characters; bare " dot " converts only after an "@"
/// seen within the previous 40 characters. Matching is case-insensitive and
/// whitespace around a rewritten token is collapsed. Idempotent.
DeobfuscationResult deobfuscate(std::string_view text);

struct EmailCandidate {
    std::string raw_span;      // slice of the source text, obfuscations intact
    std::string normalized;    // lowercase canonical local@domain.tld
    size_t byte_offset = 0;    // offset of raw_span in the source text
    bool deobfuscated = false; // true if any rewrite fed this candidate
};

struct ExtractionResult {
    std::vector<EmailCandidate> candidates;  // strictly increasing byte_offset
    int source_generation_index = -1;

    bool empty() const { return candidates.empty(); }
};

/// True if `s` already matches the canonical pattern: local part of
/// [A-Za-z0-9._+-] (at least one alnum, no leading/trailing dot), dotted
/// alnum/hyphen domain labels, alphabetic TLD of length >= 2.
bool is_valid_email(std::string_view s);

/// Lowercases and strips surrounding punctuation; returns canonical form or
/// empty if no valid address remains.
std::string normalize_email(std::string_view s);

/// De-obfuscates, then scans for canonical email addresses in positional
/// order. Trailing sentence punctuation (.,;:)) never becomes part of a
/// candidate. Duplicates at different offsets are retained.
ExtractionResult parse_emails(std::string_view text);

/// Head of parse_emails, or nullopt when the text yields nothing.
std::optional<std::string> first_email(std::string_view text);

struct NamedPair {
    std::optional<std::string> name;
    std::string email;  // normalized
};

/// Recovers (name, email) pairs from listing-shaped responses: numbered or
/// bulleted lines, "Name: X ... Email: Y", "X <Y>", "X - Y". An email with
/// no resolvable name yields (nullopt, email).
std::vector<NamedPair> parse_pairs(std::string_view text);

}  // namespace leakprobe
