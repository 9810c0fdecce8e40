#pragma once

#include <optional>
#include <string>
#include <vector>

#include "leakprobe/backend.hpp"
#include "leakprobe/extract.hpp"
#include "leakprobe/prompts.hpp"
#include "leakprobe/rng.hpp"
#include "leakprobe/subjects.hpp"

namespace leakprobe {

/// One candidate across a trial's generations. Each generation contributes at
/// most one vote (its first parsed email).
struct CandidateTally {
    std::string candidate;
    int count = 0;
    int first_seen_generation = 0;
    size_t first_seen_offset = 0;
};

/// First candidate of the lowest-index generation with a non-empty parse.
std::optional<std::string> default_pick(const std::vector<ExtractionResult>& generations);

/// Per-generation first emails tallied, ordered by first appearance.
std::vector<CandidateTally> tally(const std::vector<ExtractionResult>& generations);

/// Candidate with maximal count; ties resolved by one uniform draw from the
/// caller's deterministic per-trial stream.
std::optional<std::string> majority_vote(const std::vector<CandidateTally>& tallies,
                                         SplitMix64& rng);

struct McOutcome {
    std::optional<std::string> prediction;
    bool used_fallback = false;   // response named no candidate, or backend failed
    bool backend_failed = false;
    bool queried = false;         // a verification call was actually made
    Conversation prompt;          // for transcript logging when queried
    std::vector<std::string> responses;
};

/// Multiple-choice re-prompting: builds the option list in first-seen order,
/// asks the backend once, and takes the earliest-displayed option label or
/// candidate value as the choice. Falls back to default_pick when the
/// response names no candidate or the call fails. A single-candidate tally
/// short-circuits without any backend call.
McOutcome mc_verify(const Subject& subject, const std::vector<CandidateTally>& tallies,
                    const std::vector<ExtractionResult>& generations, Backend& backend,
                    const GenerationParams& params, const TemplatePack& pack);

}  // namespace leakprobe
