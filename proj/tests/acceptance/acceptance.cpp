// Acceptance gate: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; the process fails if any selected criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "synergy/config.hpp"
#include "synergy/csv.hpp"
#include "synergy/evaluation.hpp"
#include "synergy/experiment.hpp"
#include "synergy/lstm.hpp"
#include "synergy/region.hpp"
#include "synergy/synth.hpp"
#include "synergy/training.hpp"

using namespace synergy;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, const char* spec = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

fs::path work_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "synergy_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// ---------------------------------------------------------------- 1

Outcome gradient_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> Hd(1, 8), Ld(1, 12), Dd(1, 6), Bd(1, 3);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst = 0.0;
    int instances = 0, skipped = 0;
    while (instances < 50) {
        const NetworkDims dims{Dd(rng), Hd(rng)};
        const int L = Ld(rng), B = Bd(rng);
        auto p = ModelParams::zeros(dims);
        std::vector<double> flat(p.size());
        for (auto& v : flat) v = u(rng);
        p.assign(flat);
        SequenceBatch batch(L, Eigen::MatrixXd(dims.input, B));
        for (auto& m : batch)
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
        Eigen::MatrixXd w(L, B);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
        const auto res = forward(p, batch);
        bool near_kink = false;
        for (const auto& pre : res.cache.in_pre) near_kink |= pre.cwiseAbs().minCoeff() < 1e-3;
        if (near_kink) {
            ++skipped;
            continue;
        }
        ++instances;
        const auto grad = backward(p, res.cache, w).flatten();
        const auto fd = oracle::central_difference(flat, [&](const std::vector<double>& x) {
            auto q = p;
            q.assign(x);
            return (forward(q, batch).yhat.array() * w.array()).sum();
        }, 1e-5);
        for (std::size_t i = 0; i < fd.size(); ++i) worst = std::max(worst, oracle::relative_error(grad[i], fd[i]));
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 30.0, "max relative error " + fmt(worst, "%.3e") + " over 50 instances (" +
                                             std::to_string(skipped) + " redrawn near the rectifier kink), " +
                                             fmt(secs, "%.1f") + " s"};
}

// ---------------------------------------------------------------- 2

Outcome optimizer_check() {
    const NetworkDims dims{1, 1};
    auto p = ModelParams::zeros(dims);
    auto g = ModelParams::zeros(dims);
    g.out_bias(0) = 1.0;
    auto state = AdaDeltaState::zeros(dims);
    adadelta_step(p, g, state, 0.95, 1e-6);
    const double delta = p.out_bias(0);
    const bool first_ok = std::abs(delta - (-4.4721e-3)) < 1e-7;

    auto x = ModelParams::zeros(dims);
    x.out_bias(0) = 1.0;
    auto st = AdaDeltaState::zeros(dims);
    int steps = 0;
    while (std::abs(x.out_bias(0)) >= 0.1 && steps < 10000) {
        auto gx = ModelParams::zeros(dims);
        gx.out_bias(0) = x.out_bias(0);
        adadelta_step(x, gx, st, 0.95, 1e-6);
        ++steps;
    }
    const bool quad_ok = std::abs(x.out_bias(0)) < 0.1;
    return {first_ok && quad_ok, "first step " + fmt(delta, "%.7e") + ", quadratic reached |x| < 0.1 after " +
                                     std::to_string(steps) + " steps"};
}

// ---------------------------------------------------------------- 3

Outcome metric_check() {
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> len(2, 80);
    double worst = 0.0;
    bool defined_agree = true;
    const double na = std::numeric_limits<double>::quiet_NaN();
    auto track = [&](const std::optional<double>& a, const std::optional<double>& b) {
        if (a.has_value() != b.has_value()) {
            defined_agree = false;
            return;
        }
        if (a) worst = std::max(worst, std::abs(*a - *b) / std::max(1.0, std::abs(*b)));
    };
    for (int trial = 0; trial < 1000; ++trial) {
        const int T = len(rng);
        const double miss = 0.6 * u(rng);
        std::vector<double> obs(T), pred(T);
        for (int t = 0; t < T; ++t) {
            const double truth = 2.0 + n(rng);
            obs[t] = u(rng) < miss ? na : truth;
            pred[t] = truth + 0.4 * n(rng);
        }
        track(rmse(obs, pred), oracle::rmse(obs, pred));
        track(pearson_corr(obs, pred), oracle::corr(obs, pred));
        track(nse(obs, pred), oracle::nse(obs, pred));
    }
    // mean predictor and perfect predictor
    double worst_mean = 0.0;
    bool perfect = true;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> obs(30), mean_pred(30);
        double sum = 0;
        int count = 0;
        for (auto& v : obs) {
            v = u(rng) < 0.2 ? na : 5.0 + n(rng);
            if (!oracle::missing(v)) {
                sum += v;
                ++count;
            }
        }
        for (auto& v : mean_pred) v = sum / count;
        worst_mean = std::max(worst_mean, std::abs(*nse(obs, mean_pred)));
        perfect = perfect && *nse(obs, obs) == 1.0;
    }
    const bool ok = defined_agree && worst <= 1e-12 && worst_mean <= 1e-12 && perfect;
    return {ok, "max deviation from brute force " + fmt(worst, "%.2e") + ", |nse(mean)| max " + fmt(worst_mean, "%.2e") +
                    ", nse(perfect) == 1: " + (perfect ? "yes" : "no")};
}

// ---------------------------------------------------------------- 4

Outcome wilcoxon_check() {
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> small(-3, 3);
    double worst_enum = 0.0;
    int cases = 0;
    for (std::size_t size = 1; size <= 12; ++size)
        for (int trial = 0; trial < 40; ++trial) {
            std::vector<double> a(size), b(size);
            const bool ties = trial % 2 == 0;
            for (std::size_t i = 0; i < size; ++i) {
                a[i] = ties ? small(rng) : n(rng);
                b[i] = ties ? small(rng) : n(rng);
            }
            const auto ref = oracle::wilcoxon_enumerate(a, b);
            const auto got = wilcoxon_signed_rank(a, b, WilcoxonMethod::Exact);
            if (ref.n == 0) {
                if (!got.degenerate) worst_enum = 1.0;
                continue;
            }
            worst_enum = std::max(worst_enum, std::abs(got.p_value - ref.p));
            ++cases;
        }
    const std::vector<double> pos{1, 2, 3, 4, 5}, zero(5, 0.0);
    const double p5 = wilcoxon_signed_rank(pos, zero).p_value;

    double worst_approx = 0.0;
    for (std::size_t size = 20; size <= 25; ++size)
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<double> a(size), b(size);
            for (std::size_t i = 0; i < size; ++i) {
                a[i] = n(rng) + 0.1 * (trial % 6);
                b[i] = n(rng);
            }
            const double e = wilcoxon_signed_rank(a, b, WilcoxonMethod::Exact).p_value;
            const double m = wilcoxon_signed_rank(a, b, WilcoxonMethod::Normal).p_value;
            worst_approx = std::max(worst_approx, std::abs(e - m));
        }
    const bool ok = worst_enum < 1e-12 && p5 == 0.0625 && worst_approx < 0.01;
    return {ok, std::to_string(cases) + " enumeration cases, max |dp| " + fmt(worst_enum, "%.1e") + "; n=5 p = " +
                    fmt(p5, "%.6g") + "; exact vs normal max |dp| " + fmt(worst_approx, "%.4f")};
}

// ---------------------------------------------------------------- 5

Outcome region_check() {
    std::mt19937_64 rng(55);
    std::uniform_int_distribution<int> count(1, 4);
    bool ok = true;
    int universes = 0;
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<RegionCode> universe;
        const int n1 = count(rng);
        for (int i = 1; i <= n1; ++i) {
            const int n2 = count(rng);
            for (int j = 1; j <= n2; ++j) {
                const int n3 = count(rng);
                for (int k = 1; k <= n3; ++k)
                    universe.push_back(parse_region_code(std::to_string(i) + "." + std::to_string(j) + "." + std::to_string(k)));
            }
        }
        ++universes;
        for (const auto& roi : universe) {
            int self = 0;
            for (const auto& other : universe) {
                const auto c = classify_neighbor(roi, other);
                ok = ok && classify_neighbor(other, roi) == c;
                NeighborClass expect = NeighborClass::Dissimilar;
                if (other == roi) expect = NeighborClass::Self;
                else if (*other.level2 == *roi.level2) expect = NeighborClass::Close;
                else if (other.level1 == roi.level1) expect = NeighborClass::Far;
                ok = ok && c == expect;
                self += c == NeighborClass::Self;
            }
            ok = ok && self == 1;
        }
    }
    const auto roi = parse_region_code("8.3.5");
    const bool worked = classify_neighbor(roi, parse_region_code("8.3.4")) == NeighborClass::Close &&
                        classify_neighbor(roi, parse_region_code("8.1.7")) == NeighborClass::Far &&
                        classify_neighbor(roi, parse_region_code("9.4.2")) == NeighborClass::Dissimilar &&
                        classify_neighbor(roi, roi) == NeighborClass::Self;

    // sub-region letters and their ecoregion members
    const std::vector<std::pair<std::string, std::vector<std::string>>> table1 = {
        {"A", {"5"}},   {"B", {"6"}},   {"C", {"7"}},    {"D", {"8.1"}},        {"E", {"8.2"}},  {"F", {"8.3"}},
        {"G", {"8.4"}}, {"H", {"8.5"}}, {"I", {"9.2"}},  {"J", {"9.3"}},        {"K", {"9.4"}},  {"L", {"9.5", "9.6"}},
        {"M", {"10.1"}}, {"N", {"10.2"}}, {"O", {"11.1"}}, {"P", {"12.1"}}, {"Q", {"13"}}, {"R", {"14", "15"}}};
    const auto& epa = SubRegionTable::epa();
    bool table_ok = epa.groups().size() == table1.size();
    for (const auto& [letter, members] : table1) {
        table_ok = table_ok && epa.group(letter).member_codes == members;
        for (const auto& m : members) table_ok = table_ok && epa.subregion_of(parse_region_code(m + (m.find('.') == std::string::npos ? ".1.1" : ".1"))) == letter;
    }
    return {ok && worked && table_ok, std::to_string(universes) + " random universes; worked example " +
                                          (worked ? "holds" : "FAILS") + "; 18-letter table " + (table_ok ? "matches" : "differs")};
}

// ---------------------------------------------------------------- 6

Outcome memorization_check() {
    const auto t0 = Clock::now();
    WorldConfig w;
    w.n_level1 = w.n_level2 = w.n_level3 = 1;
    w.sites_per_region = 4;
    w.days = 60;
    w.revisit_min = w.revisit_max = 1;
    w.obs_noise = 0.0;
    w.seed = 3;
    const auto world = gen_world(w);
    const auto ds = apply_normalization(world.data, fit_normalization(world.data));
    TrainConfig cfg;
    cfg.window = 60;
    cfg.batch = 4;
    cfg.epochs = 15000;
    cfg.hidden = 16;
    cfg.seed = 1;
    const auto res = train(ds, {5, 16}, cfg);
    bool finite = true;
    for (const auto& e : res.log) finite = finite && std::isfinite(e.mean_loss);
    std::vector<WindowRef> all;
    for (std::size_t s = 0; s < 4; ++s) all.push_back({s, 0});
    const auto loss = masked_rmse_loss(predict(res.params, gather_inputs(ds, all, 60)), gather_targets(ds, all, 60));
    const double secs = seconds_since(t0);
    return {finite && loss.loss < 0.05 && secs < 120.0,
            "training RMSE " + fmt(loss.loss, "%.4f") + " (normalized) after " + std::to_string(res.iterations) +
                " iterations, " + fmt(secs, "%.1f") + " s"};
}

// ---------------------------------------------------------------- 7, 8, 9 share suite runs

constexpr int kSeeds = 5;
const std::vector<std::string> kRois = {"S1.1.1", "S2.1.1", "S3.1.1", "S4.1.1"};

struct SeedRuns {
    AppConfig cfg;
    SyntheticWorld world;
    fs::path gl_dir, sd_dir;
    SuitePlan gl_plan, sd_plan;
    SuiteResult gl, sd;
};

std::map<int, SeedRuns>& seed_cache() {
    static std::map<int, SeedRuns> cache;
    return cache;
}

AppConfig base_config() { return AppConfig::load(SYNERGY_SOURCE_DIR "/configs/default.conf"); }

SeedRuns& seed_runs(int seed, bool need_gl, bool need_sd) {
    auto& cache = seed_cache();
    auto [it, fresh] = cache.try_emplace(seed);
    auto& r = it->second;
    if (fresh) {
        r.cfg = base_config();
        r.cfg.override_seeds(static_cast<std::uint64_t>(seed));
        r.cfg.io.workers = 1;
        r.world = gen_world(r.cfg.world);
        r.gl_dir = work_dir() / ("seed" + std::to_string(seed)) / "global_local";
        r.sd_dir = work_dir() / ("seed" + std::to_string(seed)) / "similar_dissimilar";
    }
    if (need_gl && r.gl.manifests.empty()) {
        const auto t0 = Clock::now();
        auto ec = r.cfg.experiment;
        ec.family = Family::GlobalLocal;
        r.gl_plan = plan_suite(r.world.data, r.world.taxonomy, ec, r.cfg.train, r.cfg.world.seed);
        r.gl = run_suite(r.world.data, r.gl_plan, {Metric::Rmse, Metric::Corr, Metric::Nse}, r.gl_dir, r.cfg.io.workers);
        std::cout << "  seed " << seed << ": global/local suite, " << r.gl_plan.runs.size() << " runs, "
                  << fmt(seconds_since(t0), "%.0f") << " s" << std::endl;
    }
    if (need_sd && r.sd.manifests.empty()) {
        const auto t0 = Clock::now();
        auto ec = r.cfg.experiment;
        ec.family = Family::SimilarDissimilar;
        ec.rois = kRois;
        ec.size_control = SizeControl::Both;
        r.sd_plan = plan_suite(r.world.data, r.world.taxonomy, ec, r.cfg.train, r.cfg.world.seed);
        r.sd = run_suite(r.world.data, r.sd_plan, {Metric::Rmse, Metric::Corr}, r.sd_dir, r.cfg.io.workers);
        std::cout << "  seed " << seed << ": similar/dissimilar suite, " << r.sd_plan.runs.size() << " runs, "
                  << fmt(seconds_since(t0), "%.0f") << " s" << std::endl;
    }
    return r;
}

const PairedComparison* find_comparison(const SuiteResult& res, const std::string& label_a, const std::string& region,
                                        Metric metric) {
    for (const auto& c : res.comparisons)
        if (c.model_a == label_a && c.region == region && c.metric == metric) return &c;
    return nullptr;
}

Outcome global_local_check() {
    int better = 0, significant = 0, failed_runs = 0;
    std::string per_seed;
    for (int seed = 1; seed <= kSeeds; ++seed) {
        const auto& r = seed_runs(seed, true, false);
        failed_runs += static_cast<int>(r.gl.failed);
        const auto* c = find_comparison(r.gl, "global", "All", Metric::Rmse);
        if (!c) {
            per_seed += " seed" + std::to_string(seed) + "=missing";
            continue;
        }
        const bool wins = c->median_a < c->median_b;
        better += wins;
        significant += wins && c->wilcoxon.p_value < 0.05;
        std::cout << "  seed " << seed << ": pooled median RMSE global " << fmt(c->median_a) << " vs local "
                  << fmt(c->median_b) << ", p = " << fmt(c->wilcoxon.p_value, "%.3e") << ", global better at "
                  << fmt(c->pct_better, "%.1f") << "% of " << c->n() << " sites" << std::endl;
    }
    return {better >= 4 && significant >= 3 && failed_runs == 0,
            "global median RMSE lower in " + std::to_string(better) + "/5 seeds, significant (p < 0.05) in " +
                std::to_string(significant) + "/5" + per_seed};
}

Outcome similar_dissimilar_check() {
    int ordered_seeds = 0, failed_runs = 0;
    bool sizes_equal = true;
    std::size_t manifests_checked = 0;
    for (int seed = 1; seed <= kSeeds; ++seed) {
        const auto& r = seed_runs(seed, false, true);
        failed_runs += static_cast<int>(r.sd.failed);
        bool all_rois = true;
        std::string line = "  seed " + std::to_string(seed) + ": median RMSE local_plus_dissimilar vs local:";
        for (const auto& roi : kRois) {
            const auto* c = find_comparison(r.sd, "local_plus_dissimilar", roi, Metric::Rmse);
            const bool ok = c && c->median_a <= c->median_b;
            all_rois = all_rois && ok;
            line += " " + roi + " " + (c ? fmt(c->median_a) + "/" + fmt(c->median_b) : std::string("missing")) + (ok ? "" : "(x)");
        }
        ordered_seeds += all_rois;
        std::cout << line << std::endl;

        // added-site counts straight from the manifests on disk
        std::map<std::string, std::set<std::size_t>> added;
        std::map<std::string, int> augmented;
        for (const auto& e : fs::directory_iterator(r.sd_dir / "runs")) {
            const auto m = load_manifest(e.path() / "manifest.json");
            const auto& s = m.run.spec;
            if (!s.size_controlled) continue;
            ++manifests_checked;
            std::size_t roi_sites = 0;
            for (const auto& id : m.run.train_site_ids)
                roi_sites += std::find(m.run.eval_site_ids.begin(), m.run.eval_site_ids.end(), id) != m.run.eval_site_ids.end();
            sizes_equal = sizes_equal && m.run.train_site_ids.size() - roi_sites == m.run.added_site_count;
            added[s.roi].insert(m.run.added_site_count);
            ++augmented[s.roi];
        }
        for (const auto& roi : kRois) sizes_equal = sizes_equal && augmented[roi] == 3 && added[roi].size() == 1;
    }
    return {ordered_seeds >= 4 && sizes_equal && failed_runs == 0,
            "local_plus_dissimilar <= local for every ROI in " + std::to_string(ordered_seeds) +
                "/5 seeds; size-controlled added counts equal in " + std::to_string(manifests_checked) + " manifests: " +
                (sizes_equal ? "yes" : "no")};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SYNERGY_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism_check() {
    auto& r = seed_runs(1, true, true);
    std::size_t compared = 0, identical = 0;
    auto compare_dirs = [&](const fs::path& a, const fs::path& b) {
        for (const char* f : {"checkpoint.bin", "metrics.csv"}) {
            ++compared;
            identical += fs::exists(a / f) && fs::exists(b / f) && read_text_file(a / f) == read_text_file(b / f);
        }
    };
    // library reruns: every local model of the global/local suite and every size-controlled model of one ROI
    for (const auto& m : r.gl.manifests) {
        if (m.run.spec.scenario != Scenario::Local) continue;
        const auto loaded = load_manifest(r.gl_dir / "runs" / m.run_id / "manifest.json");
        const auto dir = work_dir() / "rerun" / m.run_id;
        execute_run(r.world.data, loaded.run, dir);
        compare_dirs(r.gl_dir / "runs" / m.run_id, dir);
    }
    for (const auto& m : r.sd.manifests) {
        if (m.run.spec.roi != kRois.front() || !m.run.spec.size_controlled) continue;
        const auto loaded = load_manifest(r.sd_dir / "runs" / m.run_id / "manifest.json");
        const auto dir = work_dir() / "rerun" / m.run_id;
        execute_run(r.world.data, loaded.run, dir);
        compare_dirs(r.sd_dir / "runs" / m.run_id, dir);
    }
    // command-line reruns: train then eval from a manifest on disk, and world generation
    const auto data = work_dir() / "seed1_world";
    save_world(r.world, data);
    const auto regen = work_dir() / "seed1_world_again";
    const auto conf = work_dir() / "seed1.conf";
    write_text_file(conf, read_text_file(SYNERGY_SOURCE_DIR "/configs/default.conf"));
    bool cli_ok = run_cli("--config '" + conf.string() + "' --seed-override 1 --out '" + regen.string() + "' gen-world") == 0;
    for (const char* f : {"sites.csv", "forcing.csv", "target.csv", "latent_truth.csv", "taxonomy.csv"}) {
        ++compared;
        identical += read_text_file(data / f) == read_text_file(regen / f);
    }
    for (const auto& m : r.sd.manifests) {
        if (m.run.spec.scenario != Scenario::Local || m.run.spec.roi != kRois.back()) continue;
        const auto src = r.sd_dir / "runs" / m.run_id;
        const auto dst = work_dir() / "cli_rerun";
        cli_ok = cli_ok && run_cli("--out '" + dst.string() + "' train --data '" + data.string() + "' --manifest '" +
                                   (src / "manifest.json").string() + "'") == 0;
        cli_ok = cli_ok && run_cli("--out '" + dst.string() + "' eval --data '" + data.string() + "' --manifest '" +
                                   (dst / "manifest.json").string() + "'") == 0;
        compare_dirs(src, dst);
    }
    return {cli_ok && compared == identical && compared > 0,
            std::to_string(identical) + "/" + std::to_string(compared) + " rerun files byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient correctness", gradient_check},
        {"optimizer correctness", optimizer_check},
        {"metric oracles", metric_check},
        {"wilcoxon exactness", wilcoxon_check},
        {"region algebra", region_check},
        {"memorization", memorization_check},
        {"directional data synergy (global vs local)", global_local_check},
        {"similar vs dissimilar ordering and size control", similar_dissimilar_check},
        {"determinism from manifests", determinism_check},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
