// leakprobe CLI: audit | freeform | report | fixtures | curate | serve

#include <iostream>

#include <CLI11.hpp>

#include "leakprobe/run.hpp"
#include "leakprobe/sim_server.hpp"
#include "leakprobe/subjects.hpp"
#include "leakprobe/util.hpp"

namespace {

struct CliOverrides {
    std::string backend;
    uint64_t seed = 0;
    int k = 0;
    int n = 0;
    std::string strategies;
    std::string out;
    std::string templates;
    int parallelism = 0;
    uint64_t stop_after = 0;
    bool resume = false;
    bool authorized = false;
};

void add_run_options(CLI::App* cmd, std::string& config_path, CliOverrides& ov) {
    cmd->add_option("--config", config_path, "run config JSON")->required();
    cmd->add_option("--backend", ov.backend, "sim | replay | http");
    cmd->add_option("--seed", ov.seed, "run seed");
    cmd->add_option("--k", ov.k, "hit@k window");
    cmd->add_option("--n", ov.n, "generations per trial");
    cmd->add_option("--strategies", ov.strategies, "comma-separated strategy labels");
    cmd->add_option("--out", ov.out, "output directory");
    cmd->add_option("--templates", ov.templates, "template pack directory");
    cmd->add_option("--parallelism", ov.parallelism, "worker threads");
    cmd->add_option("--stop-after", ov.stop_after, "execute at most this many trials");
    cmd->add_flag("--resume", ov.resume, "continue an interrupted run");
    cmd->add_flag("--i-have-authorization", ov.authorized,
                  "assert authorization for live http probing");
}

leakprobe::RunConfig load_with_overrides(const CLI::App* cmd, const std::string& config_path,
                                         const CliOverrides& ov) {
    leakprobe::RunConfig cfg = leakprobe::load_run_config(config_path);
    if (cmd->count("--backend")) cfg.backend = ov.backend;
    if (cmd->count("--seed")) cfg.seed = ov.seed;
    if (cmd->count("--k")) cfg.k = ov.k;
    if (cmd->count("--n")) cfg.n = ov.n;
    if (cmd->count("--strategies")) {
        cfg.strategies.clear();
        for (const std::string& s : leakprobe::split(ov.strategies, ',')) {
            if (!leakprobe::trim(s).empty()) cfg.strategies.push_back(leakprobe::trim(s));
        }
    }
    if (cmd->count("--out")) cfg.out_dir = ov.out;
    if (cmd->count("--templates")) cfg.template_pack_dir = ov.templates;
    if (cmd->count("--parallelism")) cfg.parallelism = ov.parallelism;
    if (cmd->count("--stop-after")) cfg.stop_after = ov.stop_after;
    cfg.authorized = ov.authorized;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"leakprobe: measures email-extraction attacks against chat-style LLM targets"};
    app.require_subcommand(1);

    std::string audit_config;
    CliOverrides audit_ov;
    CLI::App* audit = app.add_subcommand("audit", "run subjects x strategies association audit");
    add_run_options(audit, audit_config, audit_ov);

    std::string ff_config;
    CliOverrides ff_ov;
    CLI::App* freeform = app.add_subcommand("freeform", "run free-form listing extraction");
    add_run_options(freeform, ff_config, ff_ov);

    std::string report_dir;
    std::string report_format = "md";
    std::string report_out;
    CLI::App* report = app.add_subcommand("report", "re-render tables from stored trial details");
    report->add_option("--in", report_dir, "run output directory")->required();
    report->add_option("--format", report_format, "md | csv");
    report->add_option("--out", report_out, "write to file instead of stdout");

    std::string fx_out = "fixtures";
    uint64_t fx_seed = 7;
    size_t fx_subjects = 100;
    std::string fx_domains = "enron.com";
    CLI::App* fixtures = app.add_subcommand("fixtures", "emit synthetic subject sets and corpora");
    fixtures->add_option("--out", fx_out, "output directory");
    fixtures->add_option("--seed", fx_seed, "generator seed");
    fixtures->add_option("--subjects", fx_subjects, "number of subjects");
    fixtures->add_option("--domains", fx_domains, "comma-separated domain pool");

    std::string serve_config;
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    CLI::App* serve = app.add_subcommand("serve", "serve the simulator over the chat wire shape");
    serve->add_option("--sim-config", serve_config, "simulator config JSON");
    serve->add_option("--host", serve_host, "bind host");
    serve->add_option("--port", serve_port, "bind port");

    std::string curate_raw;
    std::string curate_out = "curated";
    std::string curate_exclusions;
    size_t curate_frequent = 100;
    size_t curate_infrequent = 100;
    bool curate_no_heuristics = false;
    CLI::App* curate =
        app.add_subcommand("curate", "build subject sets from a raw email corpus");
    curate->add_option("--raw", curate_raw, "message directory or mbox archive")->required();
    curate->add_option("--out", curate_out, "output directory");
    curate->add_option("--frequent", curate_frequent, "frequent pairs to keep");
    curate->add_option("--infrequent", curate_infrequent, "infrequent pairs to keep");
    curate->add_option("--exclusions", curate_exclusions, "explicit exclusion list file");
    curate->add_flag("--no-heuristics", curate_no_heuristics,
                     "skip the organizational-mailbox heuristics");

    CLI11_PARSE(app, argc, argv);

    try {
        if (audit->parsed()) {
            leakprobe::RunConfig cfg = load_with_overrides(audit, audit_config, audit_ov);
            cfg.mode = "association";
            leakprobe::RunResult result = leakprobe::run_association(cfg, audit_ov.resume);
            std::cout << leakprobe::render_table_markdown(result.rows) << "\n"
                      << (result.complete ? "run complete: " : "run stopped early: ")
                      << result.trials_executed << " trials executed, " << result.trials_failed
                      << " failed; domain-only matches: " << result.domain_only_matches
                      << "; artifacts in " << result.out_dir.string() << "\n";
            return result.complete ? 0 : 3;
        }
        if (freeform->parsed()) {
            leakprobe::RunConfig cfg = load_with_overrides(freeform, ff_config, ff_ov);
            cfg.mode = "free_form";
            leakprobe::FreeFormResult result = leakprobe::run_free_form(cfg, ff_ov.resume);
            std::cout << leakprobe::render_free_form_markdown(result.rows) << "\n"
                      << "artifacts in " << result.out_dir.string() << "\n";
            return 0;
        }
        if (report->parsed()) {
            std::string text = leakprobe::report_run(report_dir, report_format);
            if (report_out.empty()) {
                std::cout << text;
            } else {
                leakprobe::write_file(report_out, text);
            }
            return 0;
        }
        if (fixtures->parsed()) {
            std::vector<std::string> domains;
            for (const std::string& d : leakprobe::split(fx_domains, ',')) {
                if (!leakprobe::trim(d).empty()) domains.push_back(leakprobe::trim(d));
            }
            leakprobe::emit_fixtures(fx_out, fx_seed, fx_subjects, domains);
            std::cout << "fixtures written to " << fx_out << "\n";
            return 0;
        }
        if (curate->parsed()) {
            auto loaded = leakprobe::load_raw_corpus(curate_raw);
            auto pairs = leakprobe::extract_pairs(loaded.messages);
            auto split = leakprobe::partition_frequency(pairs.pairs, curate_frequent,
                                                        curate_infrequent);
            std::vector<std::string> rules =
                curate_no_heuristics ? std::vector<std::string>{}
                                     : leakprobe::default_exclusion_rules();
            std::set<std::string> exclusions;
            if (!curate_exclusions.empty()) {
                exclusions = leakprobe::load_exclusion_list(curate_exclusions);
            }
            auto frequent = leakprobe::filter_invalid(split.frequent, rules, exclusions);
            auto infrequent = leakprobe::filter_invalid(split.infrequent, rules, exclusions);
            frequent.provenance.source = curate_raw;
            infrequent.provenance.source = curate_raw;
            std::filesystem::create_directories(curate_out);
            leakprobe::save_subject_set(frequent,
                                        std::filesystem::path(curate_out) / "frequent.json");
            leakprobe::save_subject_set(infrequent,
                                        std::filesystem::path(curate_out) / "infrequent.json");
            std::cout << "messages: " << loaded.messages.size() << " (" << loaded.skipped
                      << " skipped), pairs: " << pairs.pairs.size() << " (" << pairs.dropped
                      << " dropped)\nfrequent: " << frequent.subjects.size()
                      << ", infrequent: " << infrequent.subjects.size() << "; written to "
                      << curate_out << "\n";
            return 0;
        }
        if (serve->parsed()) {
            leakprobe::SimTargetConfig cfg = leakprobe::default_sim_config();
            if (!serve_config.empty()) {
                cfg = leakprobe::sim_config_from_json(
                    nlohmann::json::parse(leakprobe::read_file(serve_config)),
                    std::filesystem::path(serve_config).parent_path());
            }
            leakprobe::SimServer server(std::move(cfg));
            std::cout << "simulator listening on " << serve_host << ":" << serve_port << "\n";
            server.run(serve_host, serve_port);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
