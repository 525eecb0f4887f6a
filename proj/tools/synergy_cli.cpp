// synergy: world generation, training, evaluation, experiment suites and reports.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "synergy/config.hpp"
#include "synergy/csv.hpp"
#include "synergy/dataset.hpp"
#include "synergy/error.hpp"
#include "synergy/experiment.hpp"
#include "synergy/report.hpp"
#include "synergy/synth.hpp"

namespace fs = std::filesystem;
using namespace synergy;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kNumericError = 2, kPartialFailure = 3 };

struct GlobalOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> workers;
};

AppConfig load_config(const GlobalOptions& g, bool required) {
    AppConfig cfg;
    if (!g.config.empty()) cfg = AppConfig::load(g.config);
    else if (required) throw ConfigError("--config is required");
    else cfg = AppConfig::from_document(ConfigDocument::parse("", "<defaults>"));
    if (g.seed_override) cfg.override_seeds(*g.seed_override);
    if (g.workers) {
        if (*g.workers < 1) throw ConfigError("--workers must be >= 1");
        cfg.io.workers = *g.workers;
    }
    return cfg;
}

fs::path require_out(const GlobalOptions& g) {
    if (g.out.empty()) throw ConfigError("--out is required");
    return g.out;
}

SubRegionTable load_taxonomy(const ExperimentConfig& ec, const fs::path& data_dir) {
    if (ec.taxonomy == "builtin") return SubRegionTable::epa();
    fs::path p = ec.taxonomy;
    if (p.is_relative()) p = data_dir / p;
    return SubRegionTable::load_csv(p);
}

int cmd_gen_world(const GlobalOptions& g) {
    auto cfg = load_config(g, true);
    cfg.require_world_seed();
    const auto out = require_out(g);
    const auto world = gen_world(cfg.world);
    save_world(world, out);
    std::cout << "wrote " << world.data.sites.size() << " sites x " << world.data.num_steps() << " days to " << out.string()
              << "\n";
    return kOk;
}

int cmd_train(const GlobalOptions& g, const std::string& data_dir, const std::string& manifest_path) {
    const auto out = require_out(g);
    const auto ds = load_dataset(data_dir);
    PlannedRun run;
    if (!manifest_path.empty()) {
        if (g.seed_override) std::cerr << "note: --seed-override is ignored when rerunning from a manifest\n";
        run = load_manifest(manifest_path).run;
    } else {
        auto cfg = load_config(g, true);
        cfg.require_train_seed();
        run.spec.family = Family::GlobalLocal;
        run.spec.scenario = Scenario::Global;
        run.spec.roi = "all";
        run.spec.train_start = cfg.experiment.train_start;
        run.spec.train_end = cfg.experiment.train_end;
        run.spec.test_start = cfg.experiment.test_start;
        run.spec.test_end = cfg.experiment.test_end;
        run.spec.train = cfg.train;
        run.spec.data_seed = cfg.world.seed;
        run.spec.sampling_seed = cfg.experiment.sampling_seed.value_or(0);
        for (const auto& s : ds.sites) run.train_site_ids.push_back(s.id);
        run.eval_site_ids = run.train_site_ids;
    }
    auto trained = train_run(ds, run);
    RunManifest m;
    m.run = run;
    m.run_id = run.spec.run_id();
    m.status = "ok";
    m.norm = trained.norm;
    m.iterations = trained.iterations;
    fs::create_directories(out);
    save_checkpoint(trained.params, out / m.checkpoint);
    write_text_file(out / m.train_log, format_train_log(trained.log));
    write_text_file(out / "manifest.json", to_json(m).dump(2) + "\n");
    std::cout << "trained " << m.run.spec.model_id() << " (" << m.iterations << " iterations, final loss "
              << (trained.log.empty() ? 0.0 : trained.log.back().mean_loss) << ")\n";
    return kOk;
}

int cmd_eval(const GlobalOptions& g, const std::string& data_dir, const std::string& manifest_path,
             const std::string& checkpoint_path) {
    if (manifest_path.empty()) throw ConfigError("--manifest is required");
    const auto out = require_out(g);
    const auto m = load_manifest(manifest_path);
    if (m.status != "ok") throw ConfigError("manifest records a failed run: " + m.error);
    const fs::path ckpt = checkpoint_path.empty() ? fs::path(manifest_path).parent_path() / m.checkpoint : fs::path(checkpoint_path);
    const auto params = load_checkpoint(ckpt);
    const auto ds = load_dataset(data_dir);
    const auto metrics = evaluate_run(ds, m.run, params, m.norm);
    fs::create_directories(out);
    write_text_file(out / m.metrics, format_metrics_csv(metrics));
    std::cout << "evaluated " << metrics.size() << " sites -> " << (out / m.metrics).string() << "\n";
    return kOk;
}

int cmd_run_suite(const GlobalOptions& g, const std::string& data_dir) {
    auto cfg = load_config(g, true);
    cfg.require_train_seed();
    if (!cfg.experiment.sampling_seed) throw ConfigError("missing key experiment.sampling_seed");
    const auto out = require_out(g);
    const auto ds = load_dataset(data_dir);
    const auto taxonomy = load_taxonomy(cfg.experiment, data_dir);
    const auto plan = plan_suite(ds, taxonomy, cfg.experiment, cfg.train, cfg.world.seed);
    std::cerr << "running " << plan.runs.size() << " training runs with " << cfg.io.workers << " worker(s)\n";
    const auto result = run_suite(ds, plan, cfg.eval.metrics, out, cfg.io.workers);
    const auto summary = format_suite_summary(result, plan);
    write_text_file(fs::path(out) / "summary.txt", summary);
    std::cout << summary;
    for (const auto& m : result.manifests)
        if (m.status != "ok") std::cerr << "run " << m.run_id << " (" << m.run.spec.model_id() << ") failed: " << m.error << "\n";
    if (result.failed == 0) return kOk;
    return result.failed == result.manifests.size() ? kNumericError : kPartialFailure;
}

int cmd_report(const GlobalOptions& g, const std::string& runs_dir) {
    if (runs_dir.empty()) throw ConfigError("--runs is required");
    const auto out = require_out(g);
    const auto report = build_report(runs_dir);
    write_report(report, out);
    std::cout << format_significance_text(report);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regionalization vs. unification benchmark harness"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--config", g.config, "Sectioned key=value config file");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--seed-override", g.seed_override, "Replace every seed in the config");
    app.add_option("--workers", g.workers, "Parallel training runs");

    std::string data_dir, manifest, checkpoint, runs_dir;
    auto* gen = app.add_subcommand("gen-world", "Generate a synthetic hierarchical world");
    auto* tr = app.add_subcommand("train", "Train one model (from config, or rerun a manifest)");
    tr->add_option("--data", data_dir, "Dataset directory")->required();
    tr->add_option("--manifest", manifest, "Rerun the run described by this manifest");
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest's test sites");
    ev->add_option("--data", data_dir, "Dataset directory")->required();
    ev->add_option("--manifest", manifest, "Run manifest")->required();
    ev->add_option("--checkpoint", checkpoint, "Checkpoint (default: next to the manifest)");
    auto* suite = app.add_subcommand("run-suite", "Run a global/local or similar/dissimilar experiment suite");
    suite->add_option("--data", data_dir, "Dataset directory")->required();
    auto* rep = app.add_subcommand("report", "Merge run comparisons into significance tables");
    rep->add_option("--runs", runs_dir, "Directory of runs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (gen->parsed()) return cmd_gen_world(g);
        if (tr->parsed()) return cmd_train(g, data_dir, manifest);
        if (ev->parsed()) return cmd_eval(g, data_dir, manifest, checkpoint);
        if (suite->parsed()) return cmd_run_suite(g, data_dir);
        if (rep->parsed()) return cmd_report(g, runs_dir);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumericError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}
