#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakprobe/backend.hpp"
#include "leakprobe/rng.hpp"
#include "leakprobe/subjects.hpp"

namespace leakprobe {

/// Prompt categories the simulator keys its refusal behavior on.
enum class PromptCategory { direct, jailbreak, jailbreak_cot, mc, free_form, pie };

std::string_view prompt_category_name(PromptCategory cat);
PromptCategory prompt_category_from_name(std::string_view name);

/// Detects the category from structural signatures: labeled options mean mc,
/// a fill-in-the-blank means pie, a listing request means free_form, a
/// three-turn context with a guess-encouragement suffix means jailbreak_cot,
/// a role-play marker means jailbreak, anything else falls back to direct.
PromptCategory classify_prompt(const Conversation& conversation);

/// Extracts "A. value" option lines from a multiple-choice prompt or response.
std::vector<std::pair<char, std::string>> parse_mc_options(const std::string& text);

enum class SimResponseKind { refusal, recall, hallucination, mc_choice, listing };

/// Behavior model for the deterministic stand-in target: refusal keyed on
/// prompt category, probabilistic recall from a planted corpus, and
/// domain-plausible hallucinated guesses derived from the queried name.
struct SimTargetConfig {
    SubjectSet planted;                              // the "training data"
    std::map<PromptCategory, double> refusal_prob;   // per-category, in [0,1]
    double recall_prob = 0.6;       // non-refused response contains the true email
    double domain_fidelity = 0.9;   // hallucinated email carries the true domain
    double mc_true_pick_prob = 0.9; // picks the true option when it is present
    double obfuscation_prob = 0.0;  // recalled/guessed emails rendered as "[at]/[dot]"
    int fe_list_total = 10;         // pairs listed per free-form response
    int fe_list_planted = 5;        // planted pairs among them
    uint64_t seed = 1;
};

SimTargetConfig default_sim_config();
nlohmann::json sim_config_to_json(const SimTargetConfig& cfg, bool inline_planted = true);
SimTargetConfig sim_config_from_json(const nlohmann::json& j,
                                     const std::filesystem::path& base_dir = {});

/// In-process target. Responses are a pure function of (config, conversation,
/// params): the RNG stream is derived from the conversation fingerprint, so
/// trials are order-independent and reproducible under parallel execution.
class SimTarget : public Backend {
public:
    explicit SimTarget(SimTargetConfig config);

    std::vector<std::string> complete(const Conversation& conversation,
                                      const GenerationParams& params) override;
    std::string id() const override { return "sim"; }

    const SimTargetConfig& config() const { return config_; }

    /// Name-derived confusable guesses: first.last, flast, first_last, f.last.
    static std::vector<std::string> hallucination_locals(const std::string& name);

private:
    std::string render_listing(const std::string& final_lower, SplitMix64& rng) const;

    SimTargetConfig config_;
    std::map<std::string, const Subject*> by_lower_name_;
};

}  // namespace leakprobe
