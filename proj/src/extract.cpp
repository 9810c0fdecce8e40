#include "leakprobe/extract.hpp"

#include <set>

#include "leakprobe/util.hpp"

namespace leakprobe {

namespace {

bool is_local_char(char c) {
    return is_alnum(c) || c == '.' || c == '_' || c == '+' || c == '-';
}

bool is_label_char(char c) {
    return is_alnum(c) || c == '-';
}

// Matches "at" or "dot" at position p, case-insensitive, exactly that token.
bool token_at(std::string_view t, size_t p, std::string_view word) {
    if (p + word.size() > t.size()) return false;
    for (size_t i = 0; i < word.size(); ++i) {
        if (lower_char(t[p + i]) != word[i]) return false;
    }
    return true;
}

size_t skip_ws(std::string_view t, size_t p) {
    while (p < t.size() && (t[p] == ' ' || t[p] == '\t')) ++p;
    return p;
}

struct PatternMatch {
    bool matched = false;
    size_t end = 0;     // one past the original span
    char replacement = 0;
};

// " [at] " / "[at]" / "( dot )" etc. Whitespace on both sides is folded into
// the match so the rewrite splices the neighboring tokens together.
PatternMatch match_bracketed(std::string_view t, size_t begin, std::string_view word, char repl) {
    size_t p = skip_ws(t, begin);
    if (p >= t.size()) return {};
    char open = t[p];
    if (open != '[' && open != '(') return {};
    char close = (open == '[') ? ']' : ')';
    p = skip_ws(t, p + 1);
    if (!token_at(t, p, word)) return {};
    p = skip_ws(t, p + word.size());
    if (p >= t.size() || t[p] != close) return {};
    p = skip_ws(t, p + 1);
    return {true, p, repl};
}

// Bare " at " / " dot ": the single token between whitespace runs.
PatternMatch match_bare(std::string_view t, size_t begin, std::string_view word, char repl) {
    if (begin >= t.size() || (t[begin] != ' ' && t[begin] != '\t')) return {};
    size_t p = skip_ws(t, begin);
    if (p == begin) return {};
    if (!token_at(t, p, word)) return {};
    size_t after = p + word.size();
    if (after >= t.size() || (t[after] != ' ' && t[after] != '\t')) return {};
    size_t end = skip_ws(t, after);
    if (end >= t.size()) return {};
    return {true, end, repl};
}

// A bare " at " only rewrites when what follows looks like an obfuscated
// domain: within the next 40 characters a dot pattern (".x", "[dot]",
// "(dot)", bare "dot" token) must be reachable across word tokens separated
// by at most one space. A token already containing "@" means the text after
// "at" is a literal address ("reach her at jane@x.com"), so nothing is
// rewritten. Keeps "we met at noon" and "at the party. See x.y" untouched.
bool at_guard(std::string_view t, size_t from) {
    size_t limit = std::min(t.size(), from + 40);
    // A bracketed "[at]"/"(at)" later in the window is the real @ marker;
    // the bare "at" being tested is then prose ("reached at jane [at] ...").
    for (size_t p = from; p < limit; ++p) {
        if (t[p] == '[' || t[p] == '(') {
            size_t q = skip_ws(t, p + 1);
            if (token_at(t, q, "at")) {
                size_t close = skip_ws(t, q + 2);
                if (close < t.size() && (t[close] == ']' || t[close] == ')')) return false;
            }
        }
    }
    size_t spaces = 0;
    size_t p = from;
    while (p < limit) {
        if (t[p] == '[' || t[p] == '(') {
            size_t q = skip_ws(t, p + 1);
            return token_at(t, q, "dot");
        }
        size_t start = p;
        size_t cap = std::min(t.size(), start + 60);
        bool has_at = false;
        bool dot_alpha = false;
        while (p < cap && (is_alnum(t[p]) || t[p] == '.' || t[p] == '_' || t[p] == '-' ||
                           t[p] == '+' || t[p] == '@')) {
            if (t[p] == '@') has_at = true;
            if (t[p] == '.' && p + 1 < t.size() && is_alpha(t[p + 1])) dot_alpha = true;
            ++p;
        }
        if (p == start) return false;  // punctuation or end: no domain here
        if (has_at) return false;
        std::string_view token = t.substr(start, p - start);
        if (token.size() == 3 && token_at(t, start, "dot")) return true;
        if (dot_alpha) return true;
        if (p < t.size() && (t[p] == '[' || t[p] == '(')) {
            size_t q = skip_ws(t, p + 1);
            return token_at(t, q, "dot");
        }
        if (p >= t.size() || (t[p] != ' ' && t[p] != '\t')) return false;
        if (++spaces > 1) return false;
        p = skip_ws(t, p);
    }
    return false;
}

// A bare " dot " only rewrites in domain context: an "@" already produced
// within the previous 40 bytes of output.
bool dot_guard(const std::string& out) {
    size_t start = out.size() > 40 ? out.size() - 40 : 0;
    return out.find('@', start) != std::string::npos;
}

bool prev_is_word(const std::string& out) {
    return !out.empty() && is_alnum(out.back());
}

bool next_is_word(std::string_view t, size_t p) {
    return p < t.size() && is_alnum(t[p]);
}

}  // namespace

std::pair<size_t, size_t> DeobfuscationResult::original_range(size_t begin, size_t end,
                                                              size_t original_size) const {
    size_t ob = begin < origin.size() ? origin[begin] : original_size;
    size_t oe = end < origin.size() ? origin[end] : original_size;
    return {ob, oe};
}

bool DeobfuscationResult::range_touches_substitution(size_t begin, size_t end) const {
    for (size_t i = begin; i < end && i < from_substitution.size(); ++i) {
        if (from_substitution[i]) return true;
    }
    return false;
}

DeobfuscationResult deobfuscate(std::string_view text) {
    DeobfuscationResult res;
    res.text.reserve(text.size());
    res.origin.reserve(text.size());
    res.from_substitution.reserve(text.size());

    auto emit = [&](char c, size_t orig, bool sub) {
        res.text.push_back(c);
        res.origin.push_back(orig);
        res.from_substitution.push_back(sub);
    };

    size_t i = 0;
    while (i < text.size()) {
        PatternMatch m;
        if (prev_is_word(res.text)) {
            m = match_bracketed(text, i, "at", '@');
            if (!m.matched) m = match_bracketed(text, i, "dot", '.');
            if (!m.matched) {
                m = match_bare(text, i, "at", '@');
                if (m.matched && !at_guard(text, m.end)) m = {};
            }
            if (!m.matched) {
                m = match_bare(text, i, "dot", '.');
                if (m.matched && !dot_guard(res.text)) m = {};
            }
        }
        if (m.matched && next_is_word(text, m.end)) {
            res.log.push_back({i, std::string(text.substr(i, m.end - i)),
                               std::string(1, m.replacement)});
            emit(m.replacement, i, true);
            i = m.end;
        } else {
            emit(text[i], i, false);
            ++i;
        }
    }
    return res;
}

namespace {

struct ScanHit {
    size_t begin = 0;  // offsets into the scanned text
    size_t end = 0;
    std::string normalized;
};

// Scans `t` for canonical addresses: local of [A-Za-z0-9._+-] starting with
// an alnum, no ".." runs and no edge dots; dotted alnum/hyphen labels; final
// label alphabetic with length >= 2. Trailing labels that cannot be a TLD are
// dropped, which also keeps sentence punctuation out of the span.
std::vector<ScanHit> scan_addresses(std::string_view t) {
    std::vector<ScanHit> hits;
    size_t pos = 0;
    while (true) {
        size_t a = t.find('@', pos);
        if (a == std::string_view::npos) break;

        size_t ls = a;
        while (ls > 0 && is_local_char(t[ls - 1])) --ls;
        size_t dd = t.rfind("..", a);
        if (dd != std::string_view::npos && dd >= ls && dd < a) ls = dd + 2;
        while (ls < a && !is_alnum(t[ls])) ++ls;
        size_t le = a;
        while (le > ls && t[le - 1] == '.') --le;

        bool local_ok = le > ls;

        std::vector<std::pair<size_t, size_t>> labels;
        size_t p = a + 1;
        while (p < t.size() && is_label_char(t[p]) && t[p] != '-') {
            size_t q = p;
            while (q < t.size() && is_label_char(t[q])) ++q;
            while (q > p && t[q - 1] == '-') --q;
            if (q == p) break;
            labels.emplace_back(p, q);
            if (q < t.size() && t[q] == '.' && q + 1 < t.size() && is_label_char(t[q + 1]) &&
                t[q + 1] != '-') {
                p = q + 1;
            } else {
                break;
            }
        }
        auto tld_ok = [&](const std::pair<size_t, size_t>& lab) {
            size_t len = lab.second - lab.first;
            if (len < 2) return false;
            for (size_t k = lab.first; k < lab.second; ++k) {
                if (!is_alpha(t[k])) return false;
            }
            return true;
        };
        while (labels.size() >= 2 && !tld_ok(labels.back())) labels.pop_back();

        if (local_ok && labels.size() >= 2 && tld_ok(labels.back())) {
            size_t de = labels.back().second;
            ScanHit hit;
            hit.begin = ls;
            hit.end = de;
            hit.normalized = to_lower(t.substr(ls, le - ls));
            hit.normalized += '@';
            hit.normalized += to_lower(t.substr(a + 1, de - a - 1));
            hits.push_back(std::move(hit));
            pos = de;
        } else {
            pos = a + 1;
        }
    }
    return hits;
}

}  // namespace

bool is_valid_email(std::string_view s) {
    auto hits = scan_addresses(s);
    return hits.size() == 1 && hits[0].begin == 0 && hits[0].end == s.size();
}

std::string normalize_email(std::string_view s) {
    std::string_view v = trim_view(s);
    while (!v.empty() && (v.front() == '<' || v.front() == '"' || v.front() == '\'' ||
                          v.front() == '(' || v.front() == '[')) {
        v.remove_prefix(1);
    }
    while (!v.empty() && (v.back() == '>' || v.back() == '"' || v.back() == '\'' ||
                          v.back() == ')' || v.back() == ']' || v.back() == '.' ||
                          v.back() == ',' || v.back() == ';' || v.back() == ':')) {
        v.remove_suffix(1);
    }
    auto hits = scan_addresses(v);
    if (hits.size() == 1 && hits[0].begin == 0 && hits[0].end == v.size()) {
        return hits[0].normalized;
    }
    return {};
}

ExtractionResult parse_emails(std::string_view text) {
    ExtractionResult result;
    DeobfuscationResult deob = deobfuscate(text);
    for (const ScanHit& hit : scan_addresses(deob.text)) {
        auto [ob, oe] = deob.original_range(hit.begin, hit.end, text.size());
        EmailCandidate cand;
        cand.raw_span = std::string(text.substr(ob, oe - ob));
        cand.normalized = hit.normalized;
        cand.byte_offset = ob;
        cand.deobfuscated = deob.range_touches_substitution(hit.begin, hit.end);
        result.candidates.push_back(std::move(cand));
    }
    return result;
}

std::optional<std::string> first_email(std::string_view text) {
    ExtractionResult r = parse_emails(text);
    if (r.empty()) return std::nullopt;
    return r.candidates.front().normalized;
}

namespace {

const std::set<std::string>& leading_stopwords() {
    static const std::set<std::string> words = {
        "contact", "email", "e-mail", "reach", "write", "see",
        "from", "to", "cc", "attn", "mr", "mr.", "ms", "ms.", "dr", "dr.",
    };
    return words;
}

bool plausible_name_token(std::string_view tok) {
    if (tok.empty() || tok.size() > 24) return false;
    if (!is_alpha(tok.front())) return false;
    bool upper = std::isupper(static_cast<unsigned char>(tok.front())) != 0;
    bool all_caps = true;
    for (char c : tok) {
        if (!(is_alpha(c) || c == '.' || c == '\'' || c == '-')) return false;
        if (is_alpha(c) && std::islower(static_cast<unsigned char>(c))) all_caps = false;
    }
    return upper || all_caps;
}

// Cleans the text found before an email into a display name, or nullopt when
// it does not look like one.
std::optional<std::string> clean_name_segment(std::string_view seg) {
    std::string_view v = trim_view(seg);

    // leading bullets / numbering: "1.", "2)", "-", "*", ">"
    while (!v.empty() && (v.front() == '-' || v.front() == '*' || v.front() == '>' ||
                          v.front() == '+' || v.front() == '|')) {
        v.remove_prefix(1);
        v = trim_view(v);
    }
    size_t d = 0;
    while (d < v.size() && is_digit(v[d])) ++d;
    if (d > 0 && d < v.size() && (v[d] == '.' || v[d] == ')')) v = trim_view(v.substr(d + 1));

    // label prefixes and dangling "email:" style tails
    for (bool changed = true; changed;) {
        changed = false;
        for (std::string_view label : {"name:", "name :", "full name:"}) {
            if (starts_with_ci(v, label)) {
                v = trim_view(v.substr(label.size()));
                changed = true;
            }
        }
        while (!v.empty() && (v.back() == ',' || v.back() == ';' || v.back() == ':' ||
                              v.back() == '-' || v.back() == '<' || v.back() == '(' ||
                              v.back() == '|' || v.back() == '"' || v.back() == '\'' ||
                              v.back() == '*' || v.back() == '_' || v.back() == '=')) {
            v.remove_suffix(1);
            v = trim_view(v);
            changed = true;
        }
        for (std::string_view tail : {"email", "e-mail", "mail", "address"}) {
            if (v.size() >= tail.size() &&
                starts_with_ci(v.substr(v.size() - tail.size()), tail)) {
                bool boundary = v.size() == tail.size() ||
                                !is_alnum(v[v.size() - tail.size() - 1]);
                if (boundary) {
                    v = trim_view(v.substr(0, v.size() - tail.size()));
                    changed = true;
                }
            }
        }
    }
    while (!v.empty() && (v.front() == '"' || v.front() == '\'' || v.front() == '(' ||
                          v.front() == '*' || v.front() == '_')) {
        v.remove_prefix(1);
        v = trim_view(v);
    }

    if (v.empty() || v.size() > 64) return std::nullopt;
    if (v.find('@') != std::string_view::npos) return std::nullopt;

    std::vector<std::string> tokens;
    for (const std::string& tok : split(std::string(v), ' ')) {
        if (!tok.empty()) tokens.push_back(tok);
    }
    while (!tokens.empty() && leading_stopwords().count(to_lower(tokens.front()))) {
        tokens.erase(tokens.begin());
    }
    if (tokens.empty() || tokens.size() > 6) return std::nullopt;
    for (const std::string& tok : tokens) {
        if (!plausible_name_token(tok)) return std::nullopt;
    }
    return join(tokens, " ");
}

}  // namespace

std::vector<NamedPair> parse_pairs(std::string_view text) {
    std::vector<NamedPair> pairs;
    std::optional<std::string> pending_name;

    for (const std::string& line : split_lines(text)) {
        ExtractionResult er = parse_emails(line);
        if (er.empty()) {
            auto name = clean_name_segment(line);
            // Only short, standalone phrases carry over to the next line.
            if (name && split(*name, ' ').size() <= 4) pending_name = name;
            continue;
        }
        size_t prev_end = 0;
        for (size_t j = 0; j < er.candidates.size(); ++j) {
            const EmailCandidate& cand = er.candidates[j];
            std::string_view segment =
                std::string_view(line).substr(prev_end, cand.byte_offset - prev_end);
            std::optional<std::string> name = clean_name_segment(segment);
            if (!name && j == 0) name = pending_name;
            pairs.push_back({name, cand.normalized});
            prev_end = cand.byte_offset + cand.raw_span.size();
        }
        pending_name.reset();
    }
    return pairs;
}

}  // namespace leakprobe
