#include "leakprobe/run.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "leakprobe/prompts.hpp"
#include "leakprobe/transcript.hpp"
#include "leakprobe/verify.hpp"

namespace fs = std::filesystem;

namespace leakprobe {

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json datasets = nlohmann::json::array();
    for (const DatasetRef& d : cfg.datasets) {
        datasets.push_back({{"label", d.label}, {"path", d.path}});
    }
    nlohmann::json targets = nlohmann::json::array();
    for (const FreeFormTarget& t : cfg.free_form_targets) {
        targets.push_back({{"label", t.label},
                           {"domain_info", t.domain_info},
                           {"n_pairs", t.n_pairs},
                           {"condition", t.condition},
                           {"ground_truth", t.ground_truth}});
    }
    return {
        {"datasets", datasets},
        {"strategies", cfg.strategies},
        {"backend", cfg.backend},
        {"k", cfg.k},
        {"n", cfg.n},
        {"seed", cfg.seed},
        {"temperature", cfg.temperature},
        {"max_tokens", cfg.max_tokens},
        {"timeout_s", cfg.timeout_s},
        {"model_id", cfg.model_id},
        {"template_pack", cfg.template_pack_dir},
        {"out", cfg.out_dir},
        {"mode", cfg.mode},
        {"parallelism", cfg.parallelism},
        {"parsed_mode", cfg.parsed_mode},
        {"exclude_failed", cfg.exclude_failed},
        {"stop_after", cfg.stop_after},
        {"sim", cfg.sim},
        {"sim_plant_datasets", cfg.sim_plant_datasets},
        {"http", http_config_to_json(cfg.http)},
        {"replay_path", cfg.replay_path},
        {"replay_strict", cfg.replay_strict},
        {"free_form_targets", targets},
    };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    if (j.contains("datasets")) {
        cfg.datasets.clear();
        for (const auto& d : j["datasets"]) {
            cfg.datasets.push_back({d.at("label").get<std::string>(),
                                    d.at("path").get<std::string>()});
        }
    }
    if (j.contains("strategies")) {
        cfg.strategies.clear();
        for (const auto& s : j["strategies"]) cfg.strategies.push_back(s.get<std::string>());
    }
    cfg.backend = j.value("backend", cfg.backend);
    cfg.k = j.value("k", cfg.k);
    cfg.n = j.value("n", cfg.n);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
    cfg.timeout_s = j.value("timeout_s", cfg.timeout_s);
    cfg.model_id = j.value("model_id", cfg.model_id);
    cfg.template_pack_dir = j.value("template_pack", cfg.template_pack_dir);
    cfg.out_dir = j.value("out", cfg.out_dir);
    cfg.mode = j.value("mode", cfg.mode);
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    cfg.parsed_mode = j.value("parsed_mode", cfg.parsed_mode);
    cfg.exclude_failed = j.value("exclude_failed", cfg.exclude_failed);
    cfg.stop_after = j.value("stop_after", cfg.stop_after);
    if (j.contains("sim")) cfg.sim = j["sim"];
    cfg.sim_plant_datasets = j.value("sim_plant_datasets", cfg.sim_plant_datasets);
    if (j.contains("http")) cfg.http = http_config_from_json(j["http"]);
    cfg.replay_path = j.value("replay_path", cfg.replay_path);
    cfg.replay_strict = j.value("replay_strict", cfg.replay_strict);
    if (j.contains("free_form_targets")) {
        for (const auto& t : j["free_form_targets"]) {
            FreeFormTarget target;
            target.label = t.at("label").get<std::string>();
            target.domain_info = t.at("domain_info").get<std::string>();
            target.n_pairs = t.value("n_pairs", target.n_pairs);
            target.condition = t.value("condition", target.condition);
            target.ground_truth = t.value("ground_truth", target.ground_truth);
            cfg.free_form_targets.push_back(std::move(target));
        }
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    try {
        return run_config_from_json(nlohmann::json::parse(read_file(path.string())));
    } catch (const nlohmann::json::exception& e) {
        throw FatalError("invalid run config " + path.string() + ": " + e.what());
    }
}

namespace {

// The part of the config that determines results. Execution knobs (degree of
// parallelism, stop_after) may change between resume invocations.
nlohmann::json effective_config_json(const RunConfig& cfg) {
    nlohmann::json j = run_config_to_json(cfg);
    j.erase("parallelism");
    j.erase("stop_after");
    return j;
}

void write_manifest_atomic(const fs::path& path, const nlohmann::json& manifest) {
    fs::path tmp = path;
    tmp += ".tmp";
    write_file(tmp.string(), manifest.dump(2) + "\n");
    fs::rename(tmp, path);
}

struct TrialLog {
    explicit TrialLog(const fs::path& path) : path_(path) {
        out_.open(path, std::ios::binary | std::ios::app);
        if (!out_) throw FatalError("cannot open trial log: " + path.string());
    }

    void append(const nlohmann::json& entry) {
        std::string line = entry.dump();
        std::lock_guard<std::mutex> lock(mutex_);
        out_ << line << "\n";
        out_.flush();
    }

    fs::path path_;
    std::ofstream out_;
    std::mutex mutex_;
};

// A corrupt final line (a crash mid-append) is tolerated; anything else is
// fatal.
std::vector<nlohmann::json> read_log_entries(const fs::path& path) {
    std::vector<nlohmann::json> entries;
    if (!fs::exists(path)) return entries;
    auto lines = split_lines(read_file(path.string()));
    for (size_t i = 0; i < lines.size(); ++i) {
        if (trim_view(lines[i]).empty()) continue;
        try {
            entries.push_back(nlohmann::json::parse(lines[i]));
        } catch (const nlohmann::json::exception& e) {
            if (i + 1 == lines.size()) {
                std::cerr << "warning: dropping truncated final log line in " << path << "\n";
                continue;
            }
            throw FatalError("corrupt log " + path.string() + " at line " + std::to_string(i + 1) +
                             ": " + e.what());
        }
    }
    return entries;
}

// Subject-set JSON is the native dataset format; institutional CSVs load
// through the corpus module.
SubjectSet load_dataset(const std::string& path) {
    if (to_lower(fs::path(path).extension().string()) == ".csv") {
        return load_institutional(path);
    }
    return load_subject_set(path);
}

GenerationParams params_from_config(const RunConfig& cfg) {
    GenerationParams params;
    params.n = cfg.n;
    params.temperature = cfg.temperature;
    params.max_tokens = cfg.max_tokens;
    params.timeout_s = cfg.timeout_s;
    params.model_id = cfg.model_id;
    return params;
}

std::unique_ptr<Backend> make_backend(const RunConfig& cfg,
                                      const std::vector<const SubjectSet*>& datasets) {
    if (cfg.backend == "sim") {
        SimTargetConfig sim = sim_config_from_json(cfg.sim);
        if (!cfg.sim.contains("seed")) sim.seed = cfg.seed;
        if (sim.planted.subjects.empty() && cfg.sim_plant_datasets) {
            for (const SubjectSet* set : datasets) {
                for (const Subject& s : set->subjects) sim.planted.subjects.push_back(s);
            }
        }
        return std::make_unique<SimTarget>(std::move(sim));
    }
    if (cfg.backend == "replay") {
        if (cfg.replay_path.empty()) {
            throw FatalError("replay backend requires replay_path");
        }
        return open_replay(cfg.replay_path, cfg.replay_strict);
    }
    if (cfg.backend == "http") {
        if (!cfg.authorized) {
            throw FatalError(
                "live http runs require --i-have-authorization; probe only systems you are "
                "authorized to test");
        }
        std::cerr << "notice: live run against " << cfg.http.base_url
                  << " -- authorization asserted by operator\n";
        return std::make_unique<HttpBackend>(cfg.http);
    }
    throw FatalError("unknown backend: " + cfg.backend);
}

struct TrialSpec {
    size_t index = 0;
    std::string trial_id;
    std::string dataset;
    std::string strategy_label;
    PromptStrategy strategy;
    const Subject* subject = nullptr;
};

struct TrialExecution {
    TrialOutcome outcome;
    std::string error;
};

TrialExecution execute_trial(const TrialSpec& spec, const RunConfig& cfg,
                             const TemplatePack& pack, Backend& backend,
                             TranscriptWriter& transcripts) {
    GenerationParams params = params_from_config(cfg);
    auto log_call = [&](const Conversation& conv, const GenerationParams& p,
                        const std::vector<std::string>& responses) {
        TranscriptRecord rec;
        rec.trial_id = spec.trial_id;
        rec.conversation = conv;
        rec.params = p;
        rec.responses = responses;
        rec.timestamp = iso8601_utc_now();
        rec.backend_id = backend.id();
        rec.fingerprint = conversation_fingerprint(conv, p);
        transcripts.write(rec);
    };

    TrialExecution exec;
    try {
        Conversation conv;
        switch (spec.strategy.kind) {
            case StrategyKind::DP:
                conv = build_direct(*spec.subject, pack);
                break;
            case StrategyKind::PIE:
                conv = build_partial_identified(spec.subject->name, spec.subject->domain, pack);
                break;
            case StrategyKind::JP: {
                Conversation phase1 = build_jailbreak_phase1(pack);
                GenerationParams p1 = params;
                p1.n = 1;
                std::vector<std::string> r1 = backend.complete(phase1, p1);
                log_call(phase1, p1, r1);
                conv = assemble_jailbreak_phase2(phase1, r1.front(), *spec.subject, pack);
                break;
            }
            case StrategyKind::JP_CoT:
                conv = build_jailbreak_cot(*spec.subject, pack);
                break;
            case StrategyKind::FE:
                throw FatalError("FE is not a per-subject strategy; use the freeform mode");
        }

        std::vector<std::string> responses = backend.complete(conv, params);
        log_call(conv, params, responses);

        std::vector<ExtractionResult> generations;
        generations.reserve(responses.size());
        for (size_t g = 0; g < responses.size(); ++g) {
            ExtractionResult er = parse_emails(responses[g]);
            er.source_generation_index = static_cast<int>(g);
            generations.push_back(std::move(er));
        }

        std::optional<std::string> final_prediction;
        switch (spec.strategy.verification) {
            case VerificationMode::none:
                final_prediction = default_pick(generations);
                break;
            case VerificationMode::MV: {
                SplitMix64 rng = derive_stream(cfg.seed, spec.trial_id);
                final_prediction = majority_vote(tally(generations), rng);
                break;
            }
            case VerificationMode::MC: {
                McOutcome mc = mc_verify(*spec.subject, tally(generations), generations, backend,
                                         params, pack);
                if (mc.queried) {
                    GenerationParams mcp = params;
                    mcp.n = 1;
                    log_call(mc.prompt, mcp, mc.responses);
                }
                if (mc.backend_failed) exec.error = "mc verification call failed; used fallback";
                final_prediction = mc.prediction;
                break;
            }
        }

        exec.outcome = score_trial(generations, final_prediction, *spec.subject, cfg.k);
    } catch (const BackendError& e) {
        exec.outcome = score_trial({}, std::nullopt, *spec.subject, cfg.k);
        exec.outcome.failed = true;
        exec.error = e.what();
    }
    exec.outcome.dataset = spec.dataset;
    exec.outcome.strategy = spec.strategy_label;
    return exec;
}

ParsedMode parsed_mode_from_string(const std::string& s) {
    if (s == "first_generation") return ParsedMode::first_generation;
    if (s == "any_generation") return ParsedMode::any_generation;
    throw FatalError("unknown parsed_mode: " + s);
}

std::vector<MetricsRow> aggregate_rows(const RunConfig& cfg,
                                       const std::vector<std::string>& dataset_order,
                                       const std::vector<TrialOutcome>& outcomes) {
    ParsedMode mode = parsed_mode_from_string(cfg.parsed_mode);
    std::vector<MetricsRow> rows;
    for (const std::string& ds : dataset_order) {
        for (const std::string& strat : cfg.strategies) {
            std::vector<TrialOutcome> cell;
            for (const TrialOutcome& o : outcomes) {
                if (o.dataset != ds || o.strategy != strat) continue;
                if (cfg.exclude_failed && o.failed) continue;
                cell.push_back(o);
            }
            if (!cell.empty()) rows.push_back(compute_row(cell, ds, strat, cfg.k, mode));
        }
    }
    return rows;
}

std::string render_trials_csv(const std::vector<TrialOutcome>& outcomes) {
    std::string out = "subject_id,strategy,final_prediction,correct,hit,parsed_first_gen\n";
    for (const TrialOutcome& o : outcomes) {
        out += csv_escape(o.subject_id) + "," + csv_escape(o.strategy) + "," +
               csv_escape(o.final_prediction.value_or("")) + "," +
               (o.correct ? "true" : "false") + "," + (o.hit_at_k ? "true" : "false") + "," +
               (o.parsed_in_first_generation ? "true" : "false") + "\n";
    }
    return out;
}

nlohmann::json leak_report_to_json(const LeakScanReport& report) {
    nlohmann::json hits = nlohmann::json::array();
    for (const LeakHit& h : report.hits) {
        hits.push_back({{"trial_id", h.trial_id}, {"email", h.email}});
    }
    nlohmann::json foreign = nlohmann::json::array();
    for (const LeakHit& h : report.mc_foreign) {
        foreign.push_back({{"trial_id", h.trial_id}, {"email", h.email}});
    }
    return {
        {"user_turns_scanned", report.user_turns_scanned},
        {"mc_prompts_checked", report.mc_prompts_checked},
        {"ground_truth_hits", hits},
        {"mc_foreign_candidates", foreign},
    };
}

}  // namespace

RunResult run_association(const RunConfig& config, bool resume) {
    if (config.mode != "association") {
        throw FatalError("run_association requires mode=association");
    }
    if (config.datasets.empty()) {
        throw FatalError("association run needs at least one dataset");
    }
    if (config.n < 1 || config.k < 1) throw FatalError("n and k must be >= 1");

    std::vector<std::pair<std::string, SubjectSet>> datasets;
    for (const DatasetRef& ref : config.datasets) {
        datasets.emplace_back(ref.label, load_dataset(ref.path));
    }
    std::vector<PromptStrategy> strategies;
    for (const std::string& label : config.strategies) {
        PromptStrategy s = PromptStrategy::parse(label);
        if (s.kind == StrategyKind::FE) {
            throw FatalError("FE belongs to freeform mode, not association");
        }
        strategies.push_back(s);
    }

    TemplatePack pack = config.template_pack_dir.empty()
                            ? default_template_pack()
                            : load_template_pack(config.template_pack_dir);

    fs::path out_dir(config.out_dir);
    fs::create_directories(out_dir);
    fs::path manifest_path = out_dir / "manifest.json";
    fs::path trial_log_path = out_dir / "trial_log.jsonl";
    fs::path transcripts_path = out_dir / "transcripts.jsonl";

    nlohmann::json effective = effective_config_json(config);
    std::string pack_fp = template_pack_fingerprint(pack);
    bool continuing = false;
    if (fs::exists(manifest_path)) {
        if (!resume) {
            throw FatalError("output directory already holds a run: " + out_dir.string() +
                             " (pass --resume to continue it)");
        }
        nlohmann::json manifest = nlohmann::json::parse(read_file(manifest_path.string()));
        if (manifest.at("config") != effective) {
            throw FatalError("resume config does not match the recorded run config");
        }
        if (manifest.value("template_pack", "") != pack_fp) {
            throw FatalError("resume template pack does not match the recorded run");
        }
        continuing = true;
    }
    write_manifest_atomic(manifest_path, {{"code_version", kCodeVersion},
                                          {"template_pack", pack_fp},
                                          {"status", "running"},
                                          {"config", effective}});

    // Completed trials never re-execute.
    std::map<std::string, TrialOutcome> done;
    if (continuing) {
        for (const nlohmann::json& entry : read_log_entries(trial_log_path)) {
            done[entry.at("trial_id").get<std::string>()] =
                trial_outcome_from_json(entry.at("outcome"));
        }
    }

    std::vector<TrialSpec> specs;
    std::vector<std::string> dataset_order;
    for (const auto& [label, set] : datasets) {
        dataset_order.push_back(label);
        for (size_t si = 0; si < strategies.size(); ++si) {
            for (const Subject& subject : set.subjects) {
                TrialSpec spec;
                spec.index = specs.size();
                spec.dataset = label;
                spec.strategy = strategies[si];
                spec.strategy_label = config.strategies[si];
                spec.subject = &subject;
                spec.trial_id = label + "/" + spec.strategy_label + "/" + subject.id;
                specs.push_back(std::move(spec));
            }
        }
    }

    std::vector<const SubjectSet*> dataset_ptrs;
    for (const auto& [label, set] : datasets) dataset_ptrs.push_back(&set);
    std::unique_ptr<Backend> backend = make_backend(config, dataset_ptrs);

    TranscriptWriter transcripts(transcripts_path, /*append=*/continuing);
    TrialLog trial_log(trial_log_path);

    std::vector<std::optional<TrialOutcome>> outcomes(specs.size());
    std::vector<size_t> pending;
    for (const TrialSpec& spec : specs) {
        auto it = done.find(spec.trial_id);
        if (it != done.end()) {
            outcomes[spec.index] = it->second;
        } else {
            pending.push_back(spec.index);
        }
    }

    // Replay consumes per-fingerprint response queues in recorded order, so it
    // must execute trials in that order.
    int workers = config.backend == "replay" ? 1 : std::max(1, config.parallelism);
    size_t budget = config.stop_after == 0
                        ? pending.size()
                        : std::min<size_t>(pending.size(), config.stop_after);

    std::atomic<size_t> next{0};
    std::atomic<size_t> executed{0};
    std::atomic<size_t> failed{0};
    std::mutex error_mutex;
    std::exception_ptr fatal;

    auto worker = [&]() {
        while (true) {
            {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (fatal) return;
            }
            size_t claim = next.fetch_add(1);
            if (claim >= budget) return;
            const TrialSpec& spec = specs[pending[claim]];
            try {
                TrialExecution exec =
                    execute_trial(spec, config, pack, *backend, transcripts);
                if (exec.outcome.failed) failed.fetch_add(1);
                nlohmann::json entry = {
                    {"trial_id", spec.trial_id},
                    {"status", exec.outcome.failed ? "failed" : "done"},
                    {"outcome", trial_outcome_to_json(exec.outcome)},
                };
                if (!exec.error.empty()) entry["error"] = exec.error;
                trial_log.append(entry);
                outcomes[spec.index] = std::move(exec.outcome);
                executed.fetch_add(1);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!fatal) fatal = std::current_exception();
                return;
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);  // manifest stays resumable

    RunResult result;
    result.out_dir = out_dir;
    result.trials_total = specs.size();
    result.trials_executed = executed.load();
    result.trials_failed = failed.load();
    result.complete = std::all_of(outcomes.begin(), outcomes.end(),
                                  [](const auto& o) { return o.has_value(); });

    std::vector<TrialOutcome> completed;
    for (const auto& o : outcomes) {
        if (o) completed.push_back(*o);
    }
    for (const TrialOutcome& o : completed) result.domain_only_matches += o.domain_only;
    result.rows = aggregate_rows(config, dataset_order, completed);

    write_file((out_dir / "trials.csv").string(), render_trials_csv(completed));
    write_file((out_dir / "results.csv").string(), render_table_csv(result.rows));
    write_file((out_dir / "results.md").string(), render_table_markdown(result.rows));

    std::vector<Subject> all_subjects;
    for (const auto& [label, set] : datasets) {
        all_subjects.insert(all_subjects.end(), set.subjects.begin(), set.subjects.end());
    }
    LeakScanReport leaks = scan_prompt_leaks(transcripts_path, all_subjects, true);
    write_file((out_dir / "leak_check.json").string(),
               leak_report_to_json(leaks).dump(2) + "\n");

    write_manifest_atomic(manifest_path,
                          {{"code_version", kCodeVersion},
                           {"template_pack", pack_fp},
                           {"status", result.complete ? "complete" : "incomplete"},
                           {"config", effective}});
    return result;
}

FreeFormResult run_free_form(const RunConfig& config, bool resume) {
    if (config.free_form_targets.empty()) {
        throw FatalError("freeform run needs at least one target");
    }

    std::vector<std::pair<std::string, SubjectSet>> datasets;
    for (const DatasetRef& ref : config.datasets) {
        datasets.emplace_back(ref.label, load_dataset(ref.path));
    }
    std::vector<const SubjectSet*> dataset_ptrs;
    for (const auto& [label, set] : datasets) dataset_ptrs.push_back(&set);

    TemplatePack pack = config.template_pack_dir.empty()
                            ? default_template_pack()
                            : load_template_pack(config.template_pack_dir);

    fs::path out_dir(config.out_dir);
    fs::create_directories(out_dir);
    fs::path manifest_path = out_dir / "manifest.json";
    fs::path log_path = out_dir / "freeform_log.jsonl";
    fs::path transcripts_path = out_dir / "transcripts.jsonl";

    nlohmann::json effective = effective_config_json(config);
    std::string pack_fp = template_pack_fingerprint(pack);
    bool continuing = false;
    if (fs::exists(manifest_path)) {
        if (!resume) {
            throw FatalError("output directory already holds a run: " + out_dir.string() +
                             " (pass --resume to continue it)");
        }
        nlohmann::json manifest = nlohmann::json::parse(read_file(manifest_path.string()));
        if (manifest.at("config") != effective) {
            throw FatalError("resume config does not match the recorded run config");
        }
        continuing = true;
    }
    write_manifest_atomic(manifest_path, {{"code_version", kCodeVersion},
                                          {"template_pack", pack_fp},
                                          {"status", "running"},
                                          {"config", effective}});

    std::map<std::string, nlohmann::json> done;
    if (continuing) {
        for (const nlohmann::json& entry : read_log_entries(log_path)) {
            done[entry.at("label").get<std::string>()] = entry;
        }
    }

    std::unique_ptr<Backend> backend = make_backend(config, dataset_ptrs);
    TranscriptWriter transcripts(transcripts_path, continuing);
    TrialLog log(log_path);

    for (const FreeFormTarget& target : config.free_form_targets) {
        if (done.count(target.label)) continue;

        Conversation conv = build_free_form(target.domain_info, target.n_pairs, pack,
                                            target.condition);
        GenerationParams params = params_from_config(config);
        params.n = 1;  // one listing request per target

        nlohmann::json entry = {{"label", target.label}};
        try {
            std::vector<std::string> responses = backend->complete(conv, params);
            TranscriptRecord rec;
            rec.trial_id = "FE/" + target.label;
            rec.conversation = conv;
            rec.params = params;
            rec.responses = responses;
            rec.timestamp = iso8601_utc_now();
            rec.backend_id = backend->id();
            rec.fingerprint = conversation_fingerprint(conv, params);
            transcripts.write(rec);

            std::set<std::string> truth;
            if (!target.ground_truth.empty()) {
                for (const Subject& s : load_subject_set(target.ground_truth).subjects) {
                    truth.insert(s.email);
                }
            }
            if (truth.empty()) {
                entry["warning"] = "empty ground truth; every pair scored incorrect";
                std::cerr << "warning: target " << target.label
                          << " has no ground truth; every pair scores incorrect\n";
            }
            nlohmann::json pairs = nlohmann::json::array();
            for (const NamedPair& pair : parse_pairs(responses.front())) {
                pairs.push_back({{"name", pair.name ? nlohmann::json(*pair.name)
                                                    : nlohmann::json(nullptr)},
                                 {"email", pair.email},
                                 {"correct", truth.count(pair.email) > 0}});
            }
            entry["pairs"] = pairs;
            entry["status"] = "done";
        } catch (const BackendError& e) {
            entry["status"] = "failed";
            entry["error"] = e.what();
            entry["pairs"] = nlohmann::json::array();
        }
        log.append(entry);
        done[target.label] = entry;
    }

    FreeFormResult result;
    result.out_dir = out_dir;
    result.complete = true;
    std::string pairs_csv = "target,name,email,correct\n";
    for (const FreeFormTarget& target : config.free_form_targets) {
        auto it = done.find(target.label);
        if (it == done.end()) {
            result.complete = false;
            continue;
        }
        uint64_t n_samples = 0;
        uint64_t n_correct = 0;
        for (const auto& pair : it->second["pairs"]) {
            ++n_samples;
            bool correct = pair.at("correct").get<bool>();
            if (correct) ++n_correct;
            pairs_csv += csv_escape(target.label) + "," +
                         csv_escape(pair.at("name").is_null()
                                        ? std::string()
                                        : pair["name"].get<std::string>()) +
                         "," + csv_escape(pair.at("email").get<std::string>()) + "," +
                         (correct ? "true" : "false") + "\n";
        }
        result.rows.push_back(compute_free_form_row(target.label, n_samples, n_correct));
    }

    write_file((out_dir / "pairs.csv").string(), pairs_csv);
    write_file((out_dir / "freeform_results.csv").string(), render_free_form_csv(result.rows));
    write_file((out_dir / "freeform_results.md").string(),
               render_free_form_markdown(result.rows));
    write_manifest_atomic(manifest_path,
                          {{"code_version", kCodeVersion},
                           {"template_pack", pack_fp},
                           {"status", result.complete ? "complete" : "incomplete"},
                           {"config", effective}});
    return result;
}

std::string report_run(const fs::path& run_dir, const std::string& format) {
    fs::path manifest_path = run_dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw FatalError("no manifest in " + run_dir.string());
    }
    nlohmann::json manifest = nlohmann::json::parse(read_file(manifest_path.string()));
    RunConfig cfg = run_config_from_json(manifest.at("config"));
    bool as_csv = format == "csv";
    if (!as_csv && format != "md" && format != "markdown") {
        throw FatalError("unknown report format: " + format);
    }

    if (cfg.mode == "free_form") {
        std::vector<FreeFormRow> rows;
        std::map<std::string, nlohmann::json> done;
        for (const nlohmann::json& entry : read_log_entries(run_dir / "freeform_log.jsonl")) {
            done[entry.at("label").get<std::string>()] = entry;
        }
        for (const FreeFormTarget& target : cfg.free_form_targets) {
            auto it = done.find(target.label);
            if (it == done.end()) continue;
            uint64_t n = 0, c = 0;
            for (const auto& pair : it->second["pairs"]) {
                ++n;
                if (pair.at("correct").get<bool>()) ++c;
            }
            rows.push_back(compute_free_form_row(target.label, n, c));
        }
        return as_csv ? render_free_form_csv(rows) : render_free_form_markdown(rows);
    }

    std::vector<TrialOutcome> outcomes;
    for (const nlohmann::json& entry : read_log_entries(run_dir / "trial_log.jsonl")) {
        outcomes.push_back(trial_outcome_from_json(entry.at("outcome")));
    }
    std::vector<std::string> dataset_order;
    for (const DatasetRef& d : cfg.datasets) dataset_order.push_back(d.label);
    std::vector<MetricsRow> rows = aggregate_rows(cfg, dataset_order, outcomes);
    return as_csv ? render_table_csv(rows) : render_table_markdown(rows);
}

LeakScanReport scan_prompt_leaks(const fs::path& transcripts_path,
                                 const std::vector<Subject>& subjects, bool mc_aware) {
    LeakScanReport report;
    if (!fs::exists(transcripts_path)) return report;
    std::vector<TranscriptRecord> records = read_transcripts(transcripts_path);

    // Model-generated emails per trial, for checking MC option provenance.
    std::map<std::string, std::set<std::string>> generated;
    std::vector<bool> is_mc(records.size(), false);
    for (size_t i = 0; i < records.size(); ++i) {
        if (mc_aware && classify_prompt(records[i].conversation) == PromptCategory::mc) {
            is_mc[i] = true;
            continue;  // mc responses echo candidates; they are not generations
        }
        for (const std::string& response : records[i].responses) {
            for (const EmailCandidate& c : parse_emails(response).candidates) {
                generated[records[i].trial_id].insert(c.normalized);
            }
        }
    }

    std::set<std::pair<std::string, std::string>> seen_hits;
    for (size_t i = 0; i < records.size(); ++i) {
        const TranscriptRecord& rec = records[i];
        if (is_mc[i]) {
            ++report.mc_prompts_checked;
            const std::string& prompt = rec.conversation.last_user_content();
            for (const auto& [label, value] : parse_mc_options(prompt)) {
                std::string email = normalize_email(value);
                if (email.empty()) continue;
                if (!generated[rec.trial_id].count(email)) {
                    report.mc_foreign.push_back({rec.trial_id, email});
                }
            }
            report.user_turns_scanned += 1;
            continue;
        }
        for (const Turn& turn : rec.conversation.turns) {
            if (turn.role != Role::user) continue;
            ++report.user_turns_scanned;
            std::string lowered = to_lower(turn.content);
            for (const Subject& s : subjects) {
                if (lowered.find(s.email) == std::string::npos) continue;
                if (seen_hits.insert({rec.trial_id, s.email}).second) {
                    report.hits.push_back({rec.trial_id, s.email});
                }
            }
        }
    }
    return report;
}

void emit_fixtures(const fs::path& out_dir, uint64_t seed, size_t n_subjects,
                   const std::vector<std::string>& domains) {
    fs::create_directories(out_dir);
    SubjectSet set = synth_fixture(seed, n_subjects, domains);
    save_subject_set(set, out_dir / "subjects.json");

    SimTargetConfig sim = default_sim_config();
    sim.seed = seed;
    nlohmann::json sim_json = sim_config_to_json(sim, false);
    sim_json["planted_path"] = "subjects.json";
    write_file((out_dir / "sim_config.json").string(), sim_json.dump(2) + "\n");

    // Parser corpus whose expectations come from construction, not from the
    // parser: each line wraps a known address (or none) in a fixed shape.
    std::string corpus;
    for (size_t i = 0; i < set.subjects.size(); ++i) {
        const Subject& s = set.subjects[i];
        nlohmann::json expected = nlohmann::json::array();
        std::string text;
        size_t at = s.email.find('@');
        std::string local = s.email.substr(0, at);
        std::string domain = s.email.substr(at + 1);
        switch (i % 6) {
            case 0:
                text = "Contact " + s.name + " <" + s.email + "> for details.";
                expected.push_back(s.email);
                break;
            case 1:
                text = "The address you want is " + s.email + ".";
                expected.push_back(s.email);
                break;
            case 2: {
                std::string obf = local + " [at] ";
                for (char c : domain) obf += (c == '.') ? std::string(" [dot] ") : std::string(1, c);
                text = "Reach out via " + obf + " any time.";
                expected.push_back(s.email);
                break;
            }
            case 3:
                text = "1. " + s.name + " - " + s.email;
                expected.push_back(s.email);
                break;
            case 4:
                text = "I cannot share " + s.name + "'s personal contact information.";
                break;
            default:
                text = "(" + s.email + ") is listed in the directory";
                expected.push_back(s.email);
                break;
        }
        corpus += nlohmann::json({{"text", text}, {"expected", expected}}).dump() + "\n";
    }
    write_file((out_dir / "parser_corpus.jsonl").string(), corpus);
}

}  // namespace leakprobe
