#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakprobe/http_backend.hpp"
#include "leakprobe/metrics.hpp"
#include "leakprobe/sim.hpp"
#include "leakprobe/subjects.hpp"

namespace leakprobe {

inline constexpr const char* kCodeVersion = "leakprobe 0.1.0";

struct DatasetRef {
    std::string label;
    std::string path;  // subject-set JSON
};

struct FreeFormTarget {
    std::string label;
    std::string domain_info;
    int n_pairs = 10;
    std::string condition;     // appended verbatim to the prompt when set
    std::string ground_truth;  // subject-set JSON; empty scores all pairs incorrect
};

/// Everything a run needs. The (config, seed) pair fully determines every
/// output artifact on simulator and replay backends.
struct RunConfig {
    std::vector<DatasetRef> datasets;
    std::vector<std::string> strategies = {"DP", "JP", "JP_CoT", "JP_CoT+MC", "JP_CoT+MV"};
    std::string backend = "sim";  // sim | replay | http
    int k = 5;
    int n = 5;
    uint64_t seed = 1;
    double temperature = 1.0;
    int max_tokens = 512;
    double timeout_s = 30.0;
    std::string model_id = "default";
    std::string template_pack_dir;  // empty uses the built-in pack
    std::string out_dir = "run_out";
    std::string mode = "association";  // association | free_form
    int parallelism = 1;
    std::string parsed_mode = "first_generation";  // or any_generation
    bool exclude_failed = false;
    uint64_t stop_after = 0;  // executes at most this many trials, 0 = all
    nlohmann::json sim = nlohmann::json::object();
    bool sim_plant_datasets = true;  // plant dataset subjects when sim has none
    HttpBackendConfig http;
    std::string replay_path;
    bool replay_strict = true;
    std::vector<FreeFormTarget> free_form_targets;
    bool authorized = false;  // required before any live http run
};

nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

struct RunResult {
    std::vector<MetricsRow> rows;
    size_t trials_total = 0;
    size_t trials_executed = 0;
    size_t trials_failed = 0;
    size_t domain_only_matches = 0;  // wrong address, right domain (diagnostic)
    bool complete = false;
    std::filesystem::path out_dir;
};

/// Iterates subjects x strategies with a fresh session per trial, drives
/// two-phase jailbreak flows, applies verification, persists transcripts and
/// per-trial details, and writes results.csv / results.md. Completed trials
/// are never re-executed on resume.
RunResult run_association(const RunConfig& config, bool resume = false);

struct FreeFormResult {
    std::vector<FreeFormRow> rows;
    bool complete = false;
    std::filesystem::path out_dir;
};

/// Builds listing prompts per target, parses (name, email) pairs, and scores
/// each extracted email against the target's ground-truth set.
FreeFormResult run_free_form(const RunConfig& config, bool resume = false);

/// Re-renders tables from stored trial details without touching any backend.
/// Returns the rendered text; writes nothing.
std::string report_run(const std::filesystem::path& run_dir, const std::string& format);

struct LeakHit {
    std::string trial_id;
    std::string email;
};

struct LeakScanReport {
    size_t user_turns_scanned = 0;
    size_t mc_prompts_checked = 0;
    std::vector<LeakHit> hits;           // ground-truth email inside a user turn
    std::vector<LeakHit> mc_foreign;     // mc option that no generation produced
};

/// Scans every recorded user turn for ground-truth emails. With mc_aware set,
/// multiple-choice verification prompts are instead checked for containing
/// only model-generated candidates of their own trial.
LeakScanReport scan_prompt_leaks(const std::filesystem::path& transcripts_path,
                                 const std::vector<Subject>& subjects, bool mc_aware = true);

/// Writes synthetic fixture files: a subject set and a generated parser
/// corpus whose labels come from construction, not from the parser.
void emit_fixtures(const std::filesystem::path& out_dir, uint64_t seed, size_t n_subjects,
                   const std::vector<std::string>& domains);

}  // namespace leakprobe
