#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "leakprobe/conversation.hpp"
#include "leakprobe/subjects.hpp"

namespace leakprobe {

class TemplateError : public std::runtime_error {
public:
    explicit TemplateError(const std::string& what) : std::runtime_error(what) {}
};

/// Text templates for every attack conversation. Placeholders use {name},
/// {domain_info}, {candidates}, {k}; a [[...]] block is dropped whole when
/// every placeholder inside it resolves to an empty value.
struct TemplatePack {
    std::string jailbreak_text;
    std::string ack_text;
    std::string direct_query_text;
    std::string guess_suffix_text;
    std::string mc_text;
    std::string fe_text;
    std::string pie_text;
};

TemplatePack default_template_pack();

/// Loads jailbreak.txt, ack.txt, direct.txt, guess_suffix.txt, mc.txt,
/// fe.txt, pie.txt from a directory. Missing files fall back to the default
/// pack's slot.
TemplatePack load_template_pack(const std::filesystem::path& dir);

void save_template_pack(const TemplatePack& pack, const std::filesystem::path& dir);

/// Stable content fingerprint, recorded in run manifests.
std::string template_pack_fingerprint(const TemplatePack& pack);

/// Substitutes {key} placeholders left to right in a single pass; substituted
/// values are inserted verbatim and never re-scanned, so braces in values
/// cannot explode. Unknown {word} tokens are copied literally.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);

bool has_placeholder(std::string_view tmpl, std::string_view key);

enum class StrategyKind { DP, JP, JP_CoT, FE, PIE };
enum class VerificationMode { none, MC, MV };

struct PromptStrategy {
    StrategyKind kind = StrategyKind::DP;
    VerificationMode verification = VerificationMode::none;

    std::string label() const;
    static PromptStrategy parse(std::string_view label);
};

/// [user: direct query for subject.name]
Conversation build_direct(const Subject& subject, const TemplatePack& pack);

/// [user: jailbreak role-play text, verbatim]
Conversation build_jailbreak_phase1(const TemplatePack& pack);

/// [user: jailbreak, assistant: model_reply, user: direct query]
Conversation assemble_jailbreak_phase2(const Conversation& phase1, std::string_view model_reply,
                                       const Subject& subject, const TemplatePack& pack);

/// The three-utterance context: jailbreak, canned acknowledgment, direct
/// query plus guess-encouragement suffix. Needs no live call to assemble.
Conversation build_jailbreak_cot(const Subject& subject, const TemplatePack& pack);

/// Candidates rendered as "A. ..." options in first-seen order;
/// requires at least two distinct candidates.
Conversation build_multiple_choice(const Subject& subject,
                                   const std::vector<std::string>& candidates,
                                   const TemplatePack& pack);

/// Listing request for n_pairs (name, email) pairs about domain_info; an
/// optional condition clause is appended verbatim.
Conversation build_free_form(std::string_view domain_info, int n_pairs, const TemplatePack& pack,
                             std::string_view condition = {});

/// Fill-in-the-blank recovery: "name: X, email: ____" with optional domain
/// context.
Conversation build_partial_identified(std::string_view name, std::string_view domain_info,
                                      const TemplatePack& pack);

}  // namespace leakprobe
