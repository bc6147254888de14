// Command-line front end: benchmarks, reports, synthetic data and live campaigns.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "folde/service/http.hpp"
#include "folde/sim/landscape.hpp"
#include "folde/sim/simulate.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace folde;

namespace {

struct TargetOptions {
    std::string dataset, embeddings, logprobs, name;
    std::size_t synthetic = 1;
    SynthConfig synth;
};

void add_target_options(CLI::App* app, TargetOptions& t) {
    app->add_option("--dataset", t.dataset, "Dataset TSV (#ref= line, mutant/activity header)");
    app->add_option("--embeddings", t.embeddings, "FLDE1 embedding file");
    app->add_option("--logprobs", t.logprobs, "Per-position log-probability TSV");
    app->add_option("--target", t.name, "Target name written to results");
    app->add_option("--synthetic", t.synthetic, "Without --dataset: number of synthetic targets")->capture_default_str();
    app->add_option("--synth-length", t.synth.length, "Synthetic reference length")->capture_default_str();
    app->add_option("--synth-variants", t.synth.n_variants, "Synthetic variant count (0 = all singles)")
        ->capture_default_str();
    app->add_option("--synth-order", t.synth.max_order, "Synthetic max mutation order (1 or 2)")->capture_default_str();
    app->add_option("--synth-epistasis", t.synth.epistasis_strength, "Synthetic epistasis strength")
        ->capture_default_str();
    app->add_option("--synth-rho", t.synth.rho_target, "Target naturalness/activity Spearman")->capture_default_str();
    app->add_option("--synth-dim", t.synth.embed_dim, "Synthetic embedding dimension")->capture_default_str();
    app->add_option("--synth-seed", t.synth.seed, "Seed of the first synthetic target")->capture_default_str();
}

struct LoadedTarget {
    std::string name;
    Dataset dataset;
    EmbeddingStore embeddings;
    LogProbMatrix logprobs;
};

std::vector<LoadedTarget> load_targets(const TargetOptions& t) {
    std::vector<LoadedTarget> out;
    if (!t.dataset.empty()) {
        if (t.embeddings.empty() || t.logprobs.empty())
            throw ParseError("--dataset requires --embeddings and --logprobs");
        auto ds = load_dataset(t.dataset);
        auto lp = load_logprobs(t.logprobs, ds);
        auto name = t.name.empty() ? fs::path(t.dataset).stem().string() : t.name;
        out.push_back({std::move(name), std::move(ds), load_embeddings(t.embeddings), std::move(lp)});
        return out;
    }
    for (std::size_t k = 0; k < t.synthetic; ++k) {
        SynthConfig c = t.synth;
        c.seed = t.synth.seed + k;
        auto land = synth_landscape(c);
        auto name = (t.name.empty() ? std::string("synth") : t.name) + "-" + std::to_string(c.seed);
        out.push_back({std::move(name), std::move(land.dataset), std::move(land.embeddings), std::move(land.logprobs)});
    }
    return out;
}

struct SimOptions {
    SimConfig config;
    std::vector<std::string> policies;
    std::string alpha_text;
    std::string noise = "per_step";
    std::string out = "-";
    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
};

void add_sim_options(CLI::App* app, SimOptions& s) {
    app->add_option("--rounds", s.config.rounds, "Rounds per campaign")->capture_default_str();
    app->add_option("--batch-size", s.config.batch_size, "Variants per round")->capture_default_str();
    app->add_option("--replicates", s.config.replicates, "Replicates per policy")->capture_default_str();
    app->add_option("--seed", s.config.seed, "Base seed")->capture_default_str();
    app->add_option("--alpha", s.alpha_text, "Alpha per round from round 2, comma separated (default 6,100)");
    app->add_option("--beta", s.config.ucb_beta, "UCB beta")->capture_default_str();
    app->add_option("--holdout", s.config.holdout_fraction, "Held-out fraction")->capture_default_str();
    app->add_option("--parents", s.config.parents_per_round, "Expansion parents per round")->capture_default_str();
    app->add_option("--members", s.config.ensemble.members, "Ensemble size")->capture_default_str();
    app->add_option("--noise", s.noise, "Alpha noise placement: per_step or diagonal_once")->capture_default_str();
    app->add_option("--threads", s.threads, "Worker threads for replicates");
    app->add_option("-o,--out", s.out, "Results TSV ('-' = stdout)")->capture_default_str();
}

std::vector<double> parse_reals(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(detail::parse_real(item, "alpha"));
    return out;
}

void finish_sim_options(SimOptions& s) {
    if (!s.alpha_text.empty()) s.config.alpha_schedule = parse_reals(s.alpha_text);
    if (s.noise == "per_step")
        s.config.noise_placement = NoisePlacement::per_step;
    else if (s.noise == "diagonal_once")
        s.config.noise_placement = NoisePlacement::diagonal_once;
    else
        throw ParseError("--noise must be per_step or diagonal_once");
}

void with_output(const std::string& path, const std::function<void(std::ostream&)>& fn) {
    if (path == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    fn(out);
}

int run_simulation(const TargetOptions& t, SimOptions& s, const std::vector<std::string>& policy_names) {
    finish_sim_options(s);
    std::vector<Policy> policies;
    for (const auto& p : policy_names) policies.push_back(parse_policy(p));
    std::vector<ResultRow> rows;
    for (const auto& target : load_targets(t)) {
        SimInputs in{&target.dataset, &target.embeddings, &target.logprobs, target.name};
        std::cerr << "target " << target.name << ": " << target.dataset.size() << " variants\n";
        auto part = result_rows(simulate(in, s.config, policies, s.threads));
        rows.insert(rows.end(), part.begin(), part.end());
    }
    with_output(s.out, [&](std::ostream& o) { write_results(o, rows); });
    return 0;
}

std::unique_ptr<httplib::Server> g_server;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active-learning-assisted directed evolution engine"};
    app.set_config("--config", "", "Key-value config file");
    app.require_subcommand(1);

    // simulate
    TargetOptions sim_target;
    SimOptions sim;
    std::string sim_policy = "folde";
    auto* simulate_cmd = app.add_subcommand("simulate", "Run a benchmark for one policy");
    add_target_options(simulate_cmd, sim_target);
    add_sim_options(simulate_cmd, sim);
    simulate_cmd->add_option("--policy", sim_policy, "Policy name")->capture_default_str();

    // ablate
    TargetOptions abl_target;
    SimOptions abl;
    std::vector<std::string> abl_policies;
    for (auto p : kAllPolicies) abl_policies.emplace_back(policy_name(p));
    auto* ablate_cmd = app.add_subcommand("ablate", "Run a benchmark for several policies");
    add_target_options(ablate_cmd, abl_target);
    add_sim_options(ablate_cmd, abl);
    ablate_cmd->add_option("--policies", abl_policies, "Policies (default: all)")->delimiter(',');

    // report
    std::string rep_results, rep_table = "-", rep_series, rep_baseline = "random";
    auto* report_cmd = app.add_subcommand("report", "Aggregate a results file");
    report_cmd->add_option("results", rep_results, "Results TSV")->required();
    report_cmd->add_option("--table", rep_table, "Summary table output ('-' = stdout)")->capture_default_str();
    report_cmd->add_option("--series", rep_series, "Plot-ready long-format series output");
    report_cmd->add_option("--baseline", rep_baseline, "Baseline policy for comparisons")->capture_default_str();

    // synth
    SynthConfig synth_cfg;
    std::string synth_dir;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset, embeddings and log-probs");
    synth_cmd->add_option("--out-dir", synth_dir, "Output directory")->required();
    synth_cmd->add_option("--length", synth_cfg.length, "Reference length")->capture_default_str();
    synth_cmd->add_option("--variants", synth_cfg.n_variants, "Variant count (0 = all singles)")->capture_default_str();
    synth_cmd->add_option("--order", synth_cfg.max_order, "Max mutation order (1 or 2)")->capture_default_str();
    synth_cmd->add_option("--epistasis", synth_cfg.epistasis_strength, "Epistasis strength")->capture_default_str();
    synth_cmd->add_option("--noise", synth_cfg.noise_sd, "Activity noise sd")->capture_default_str();
    synth_cmd->add_option("--rho", synth_cfg.rho_target, "Target naturalness/activity Spearman")->capture_default_str();
    synth_cmd->add_option("--dim", synth_cfg.embed_dim, "Embedding dimension")->capture_default_str();
    synth_cmd->add_option("--seed", synth_cfg.seed, "Seed")->capture_default_str();

    // campaign
    std::string data_dir;
    auto* campaign_cmd = app.add_subcommand("campaign", "Live campaigns");
    campaign_cmd->add_option("--data-dir", data_dir, "Campaign directory (default $FOLDE_DATA_DIR or ./campaigns)");
    campaign_cmd->require_subcommand(1);

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve_cmd = campaign_cmd->add_subcommand("serve", "Serve the HTTP API");
    serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", port, "Port")->capture_default_str();
    serve_cmd->add_option("--data-dir", data_dir, "Campaign directory");

    service::CreateRequest create_req;
    std::string create_alpha;
    std::size_t create_cap = 3;
    bool create_no_cap = false;
    auto* create_cmd = campaign_cmd->add_subcommand("create", "Create a campaign");
    create_cmd->add_option("--id", create_req.id, "Campaign id (default: generated)");
    create_cmd->add_option("--reference", create_req.reference, "Reference sequence");
    create_cmd->add_option("--embeddings", create_req.embeddings, "FLDE1 embedding file")->required();
    create_cmd->add_option("--logprobs", create_req.logprobs, "Log-probability TSV")->required();
    create_cmd->add_option("--ground-truth", create_req.ground_truth, "Dataset TSV used for hit metrics");
    create_cmd->add_option("--batch-size", create_req.config.batch_size, "Variants per round")->capture_default_str();
    create_cmd->add_option("--alpha", create_alpha, "Alpha per round from round 2 (default 6,100)");
    create_cmd->add_option("--locus-cap", create_cap, "Round-1 per-locus cap")->capture_default_str();
    create_cmd->add_flag("--no-locus-cap", create_no_cap, "Disable the round-1 per-locus cap");
    create_cmd->add_option("--max-rounds", create_req.config.max_rounds, "Rounds before completion (0 = open)");
    create_cmd->add_option("--seed", create_req.config.seed, "Seed")->capture_default_str();

    std::string campaign_id, record_file;
    auto* propose_cmd = campaign_cmd->add_subcommand("propose", "Propose the next batch");
    propose_cmd->add_option("id", campaign_id, "Campaign id")->required();
    auto* record_cmd = campaign_cmd->add_subcommand("record", "Record measurements for the open batch");
    record_cmd->add_option("id", campaign_id, "Campaign id")->required();
    record_cmd->add_option("file", record_file,
                           "TSV with header mutant<TAB>activity; empty or NA activity marks a failure")
        ->required();
    auto* show_cmd = campaign_cmd->add_subcommand("show", "Print campaign state");
    show_cmd->add_option("id", campaign_id, "Campaign id")->required();
    auto* metrics_cmd = campaign_cmd->add_subcommand("metrics", "Print per-round metrics");
    metrics_cmd->add_option("id", campaign_id, "Campaign id")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate_cmd) return run_simulation(sim_target, sim, {sim_policy});
        if (*ablate_cmd) return run_simulation(abl_target, abl, abl_policies);
        if (*report_cmd) {
            const auto rows = load_results(rep_results);
            const auto summary = summarize(rows);
            with_output(rep_table, [&](std::ostream& o) {
                write_summary_table(o, summary);
                std::set<std::string> policies;
                for (const auto& r : rows) policies.insert(r.policy);
                for (const auto& p : policies) {
                    if (p == rep_baseline) continue;
                    const auto c = compare_policies(summary, p, rep_baseline);
                    o << "# " << p << " vs " << rep_baseline << ": targets=" << c.targets
                      << " mean_log_ratio=" << detail::format_real(c.mean_log_ratio);
                    if (c.test) o << " wilcoxon_p=" << detail::format_real(c.test->p_value);
                    o << '\n';
                }
            });
            if (!rep_series.empty()) with_output(rep_series, [&](std::ostream& o) { write_series(o, summary); });
            return 0;
        }
        if (*synth_cmd) {
            const auto land = synth_landscape(synth_cfg);
            fs::create_directories(synth_dir);
            save_dataset((fs::path(synth_dir) / "dataset.tsv").string(), land.dataset);
            save_embeddings((fs::path(synth_dir) / "embeddings.flde").string(), land.embeddings);
            save_logprobs((fs::path(synth_dir) / "logprobs.tsv").string(), land.logprobs);
            std::cout << "variants\t" << land.dataset.size() << "\nnaturalness_spearman\t"
                      << detail::format_real(land.meta.naturalness_spearman) << "\ndifficulty\t"
                      << detail::format_real(difficulty(land.dataset)) << '\n';
            return 0;
        }
        service::CampaignService svc(service::resolve_data_dir(data_dir));
        if (*serve_cmd) {
            g_server = std::make_unique<httplib::Server>();
            service::install_routes(*g_server, svc);
            std::signal(SIGINT, [](int) { g_server->stop(); });
            std::signal(SIGTERM, [](int) { g_server->stop(); });
            std::cerr << "serving " << svc.store().dir() << " on http://" << host << ':' << port << '\n';
            if (!g_server->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
            return 0;
        }
        if (*create_cmd) {
            if (!create_alpha.empty()) create_req.config.alpha_schedule = parse_reals(create_alpha);
            create_req.config.per_locus_cap = create_no_cap ? std::nullopt : std::optional(create_cap);
            std::cout << service::to_json(svc.create(create_req)).dump(2) << '\n';
            return 0;
        }
        if (*propose_cmd) {
            std::cout << service::round_json(svc.propose(campaign_id)).dump(2) << '\n';
            return 0;
        }
        if (*record_cmd) {
            std::ifstream in(record_file);
            if (!in) throw Error("cannot open " + record_file);
            std::string line;
            if (!std::getline(in, line) || detail::strip_cr(line) != "mutant\tactivity")
                throw ParseError("measurement file needs header 'mutant\\tactivity'");
            std::vector<service::MeasurementInput> inputs;
            while (std::getline(in, line)) {
                const auto text = detail::strip_cr(line);
                if (text.empty()) continue;
                const auto tab = text.find('\t');
                const auto name = std::string(text.substr(0, tab));
                const auto value = tab == std::string_view::npos ? std::string_view() : text.substr(tab + 1);
                std::optional<double> act;
                if (!value.empty() && value != "NA") act = detail::parse_real(value, "activity");
                inputs.push_back({name, act});
            }
            std::cout << service::to_json(svc.record(campaign_id, inputs)).dump(2) << '\n';
            return 0;
        }
        if (*show_cmd) {
            std::cout << service::to_json(svc.get(campaign_id)).dump(2) << '\n';
            return 0;
        }
        if (*metrics_cmd) {
            std::cout << svc.metrics(campaign_id).dump(2) << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
