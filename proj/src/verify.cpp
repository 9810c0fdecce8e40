#include "leakprobe/verify.hpp"

#include <algorithm>

#include "leakprobe/util.hpp"

namespace leakprobe {

std::optional<std::string> default_pick(const std::vector<ExtractionResult>& generations) {
    for (const ExtractionResult& gen : generations) {
        if (!gen.empty()) return gen.candidates.front().normalized;
    }
    return std::nullopt;
}

std::vector<CandidateTally> tally(const std::vector<ExtractionResult>& generations) {
    std::vector<CandidateTally> tallies;
    for (size_t g = 0; g < generations.size(); ++g) {
        if (generations[g].empty()) continue;
        const EmailCandidate& first = generations[g].candidates.front();
        auto it = std::find_if(tallies.begin(), tallies.end(), [&](const CandidateTally& t) {
            return t.candidate == first.normalized;
        });
        if (it != tallies.end()) {
            ++it->count;
        } else {
            tallies.push_back({first.normalized, 1, static_cast<int>(g), first.byte_offset});
        }
    }
    return tallies;
}

std::optional<std::string> majority_vote(const std::vector<CandidateTally>& tallies,
                                         SplitMix64& rng) {
    if (tallies.empty()) return std::nullopt;
    int best = 0;
    for (const CandidateTally& t : tallies) best = std::max(best, t.count);
    std::vector<const CandidateTally*> tied;
    for (const CandidateTally& t : tallies) {
        if (t.count == best) tied.push_back(&t);
    }
    if (tied.size() == 1) return tied.front()->candidate;
    return tied[rng.bounded(tied.size())]->candidate;
}

namespace {

// Earliest standalone "B."/"B)"/"B:" token, or "option B", for label index i.
std::optional<size_t> find_label(const std::string& response, char label) {
    std::optional<size_t> best;
    for (size_t i = 0; i < response.size(); ++i) {
        if (std::toupper(static_cast<unsigned char>(response[i])) != label) continue;
        bool left_ok = i == 0 || !is_alnum(response[i - 1]);
        if (!left_ok) continue;
        bool punct_right = i + 1 < response.size() &&
                           (response[i + 1] == '.' || response[i + 1] == ')' ||
                            response[i + 1] == ':');
        bool after_option =
            i >= 7 && starts_with_ci(std::string_view(response).substr(i - 7, 7), "option ");
        bool standalone_end = i + 1 == response.size() || !is_alnum(response[i + 1]);
        if (punct_right || (after_option && standalone_end)) {
            best = i;
            break;
        }
    }
    return best;
}

std::optional<size_t> find_value_ci(const std::string& response, const std::string& value) {
    std::string lower_resp = to_lower(response);
    size_t pos = lower_resp.find(to_lower(value));
    if (pos == std::string::npos) return std::nullopt;
    return pos;
}

}  // namespace

McOutcome mc_verify(const Subject& subject, const std::vector<CandidateTally>& tallies,
                    const std::vector<ExtractionResult>& generations, Backend& backend,
                    const GenerationParams& params, const TemplatePack& pack) {
    McOutcome outcome;
    if (tallies.empty()) {
        outcome.prediction = default_pick(generations);
        return outcome;
    }
    if (tallies.size() == 1) {
        outcome.prediction = tallies.front().candidate;
        return outcome;
    }

    std::vector<std::string> candidates;
    candidates.reserve(tallies.size());
    for (const CandidateTally& t : tallies) candidates.push_back(t.candidate);

    outcome.prompt = build_multiple_choice(subject, candidates, pack);
    GenerationParams mc_params = params;
    mc_params.n = 1;
    try {
        outcome.responses = backend.complete(outcome.prompt, mc_params);
        outcome.queried = true;
    } catch (const BackendError&) {
        outcome.backend_failed = true;
        outcome.used_fallback = true;
        outcome.prediction = default_pick(generations);
        return outcome;
    }

    const std::string& response = outcome.responses.front();
    std::optional<size_t> best_offset;
    std::optional<size_t> best_candidate;
    for (size_t i = 0; i < candidates.size(); ++i) {
        std::optional<size_t> hit = find_label(response, static_cast<char>('A' + i));
        std::optional<size_t> value_hit = find_value_ci(response, candidates[i]);
        if (value_hit && (!hit || *value_hit < *hit)) hit = value_hit;
        if (hit && (!best_offset || *hit < *best_offset)) {
            best_offset = hit;
            best_candidate = i;
        }
    }
    if (best_candidate) {
        outcome.prediction = candidates[*best_candidate];
    } else {
        outcome.used_fallback = true;
        outcome.prediction = default_pick(generations);
    }
    return outcome;
}

}  // namespace leakprobe
