#include "synergy/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <thread>
#include <unordered_set>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy {

using nlohmann::json;

namespace {

std::mutex& writer_mutex() {
    static std::mutex m;
    return m;
}

// All run outputs funnel through one lock so concurrent runs never interleave writes.
void write_serialized(const std::filesystem::path& path, const std::string& contents) {
    std::lock_guard lock(writer_mutex());
    std::filesystem::create_directories(path.parent_path());
    write_text_file(path, contents);
}

std::vector<std::string> site_ids(const Dataset& ds) {
    std::vector<std::string> ids;
    ids.reserve(ds.sites.size());
    for (const auto& s : ds.sites) ids.push_back(s.id);
    return ids;
}

json norm_to_json(const NormStats& n) {
    auto pairs = [](const std::vector<MeanStd>& v) {
        json a = json::array();
        for (const auto& m : v) a.push_back({m.mean, m.std});
        return a;
    };
    return {{"forcing", pairs(n.forcing)}, {"attrs", pairs(n.attrs)}, {"target", {n.target.mean, n.target.std}}};
}

NormStats norm_from_json(const json& j) {
    auto pairs = [](const json& a) {
        std::vector<MeanStd> v;
        for (const auto& p : a) v.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        return v;
    };
    NormStats n;
    n.forcing = pairs(j.at("forcing"));
    n.attrs = pairs(j.at("attrs"));
    n.target = {j.at("target").at(0).get<double>(), j.at("target").at(1).get<double>()};
    return n;
}

}  // namespace

std::string_view to_string(Family f) {
    return f == Family::GlobalLocal ? "global_local" : "similar_dissimilar";
}

std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::Global: return "global";
        case Scenario::Local: return "local";
        case Scenario::LocalPlusClose: return "local_plus_close";
        case Scenario::LocalPlusFar: return "local_plus_far";
        case Scenario::LocalPlusDissimilar: return "local_plus_dissimilar";
    }
    return "?";
}

Family parse_family(std::string_view s) {
    if (s == "global_local") return Family::GlobalLocal;
    if (s == "similar_dissimilar") return Family::SimilarDissimilar;
    throw ConfigError("unknown experiment family '" + std::string(s) + "'");
}

Scenario parse_scenario(std::string_view s) {
    for (auto sc : {Scenario::Global, Scenario::Local, Scenario::LocalPlusClose, Scenario::LocalPlusFar,
                    Scenario::LocalPlusDissimilar})
        if (to_string(sc) == s) return sc;
    throw ConfigError("unknown scenario '" + std::string(s) + "'");
}

void ExperimentSpec::validate() const {
    train.validate();
    if (family == Family::GlobalLocal && scenario != Scenario::Global && scenario != Scenario::Local)
        throw ConfigError("global_local experiments use the global and local scenarios only");
    if (family == Family::SimilarDissimilar && scenario == Scenario::Global)
        throw ConfigError("similar_dissimilar experiments have no global scenario");
    if (size_controlled && family != Family::SimilarDissimilar)
        throw ConfigError("size control applies to similar_dissimilar experiments only");
    if (size_controlled && scenario == Scenario::Local) throw ConfigError("size control does not alter the local scenario");
    if (roi.empty()) throw ConfigError("experiment spec without region of interest");
}

std::string ExperimentSpec::model_id() const {
    if (family == Family::GlobalLocal) return scenario == Scenario::Global ? "global" : "local:" + roi;
    std::string id = roi + "/" + std::string(to_string(scenario));
    if (size_controlled) id += "/size_controlled";
    return id;
}

std::string ExperimentSpec::run_id() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(*this).dump())));
    return buf;
}

json to_json(const TrainConfig& c) {
    return {{"window", c.window}, {"batch", c.batch},   {"epochs", c.epochs},         {"hidden", c.hidden},
            {"rho", c.rho},       {"epsilon", c.epsilon}, {"clip", c.clip},           {"dropout", c.dropout},
            {"warmup", c.warmup}, {"max_redraws", c.max_redraws}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.window = j.at("window").get<int>();
    c.batch = j.at("batch").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.rho = j.at("rho").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.clip = j.at("clip").get<double>();
    c.dropout = j.at("dropout").get<double>();
    c.warmup = j.at("warmup").get<int>();
    c.max_redraws = j.at("max_redraws").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

json to_json(const ExperimentSpec& s) {
    return {{"family", to_string(s.family)},
            {"scenario", to_string(s.scenario)},
            {"roi", s.roi},
            {"size_controlled", s.size_controlled},
            {"train_start", s.train_start},
            {"train_end", s.train_end},
            {"test_start", s.test_start},
            {"test_end", s.test_end},
            {"train", to_json(s.train)},
            {"data_seed", s.data_seed},
            {"sampling_seed", s.sampling_seed}};
}

ExperimentSpec spec_from_json(const json& j) {
    ExperimentSpec s;
    s.family = parse_family(j.at("family").get<std::string>());
    s.scenario = parse_scenario(j.at("scenario").get<std::string>());
    s.roi = j.at("roi").get<std::string>();
    s.size_controlled = j.at("size_controlled").get<bool>();
    s.train_start = j.at("train_start").get<std::string>();
    s.train_end = j.at("train_end").get<std::string>();
    s.test_start = j.at("test_start").get<std::string>();
    s.test_end = j.at("test_end").get<std::string>();
    s.train = train_config_from_json(j.at("train"));
    s.data_seed = j.at("data_seed").get<std::uint64_t>();
    s.sampling_seed = j.at("sampling_seed").get<std::uint64_t>();
    s.validate();
    return s;
}

TimeWindows resolve_windows(const Dataset& ds, const std::string& train_start, const std::string& train_end,
                            const std::string& test_start, const std::string& test_end) {
    if (ds.time_axis.empty()) throw ConfigError("dataset has an empty time axis");
    Date d[4];
    const std::string* text[4] = {&train_start, &train_end, &test_start, &test_end};
    for (int i = 0; i < 4; ++i) {
        try {
            d[i] = parse_date(*text[i]);
        } catch (const ParseError& e) {
            throw ConfigError(std::string("experiment window: ") + e.what());
        }
    }
    const Date first = ds.time_axis.front();
    const Date past_end = ds.time_axis.back() + std::chrono::days(1);
    if (!(d[0] < d[1] && d[1] <= d[2] && d[2] < d[3]))
        throw ConfigError("experiment window: need train_start < train_end <= test_start < test_end");
    if (d[0] < first || d[3] > past_end)
        throw ConfigError("experiment window: dates must lie within " + format_date(first) + " .. " + format_date(past_end));
    TimeWindows w;
    w.train_begin = ds.lower_index(d[0]);
    w.train_end = ds.lower_index(d[1]);
    w.test_begin = ds.lower_index(d[2]);
    w.test_end = ds.lower_index(d[3]);
    if (w.train_begin == w.train_end || w.test_begin == w.test_end)
        throw ConfigError("experiment window: empty train or test window");
    return w;
}

std::map<std::string, Dataset> build_global_local(const Dataset& ds, const SubRegionTable& table) {
    std::map<std::string, Dataset> out;
    std::vector<std::string> letters;
    letters.reserve(ds.sites.size());
    for (const auto& s : ds.sites) letters.push_back(table.subregion_of(s.region));
    out.emplace("global", ds);
    for (const auto& g : table.groups()) {
        auto local = subset_by_region(ds, [&](const RegionCode& r) { return table.try_subregion_of(r) == g.letter; });
        if (!local.empty()) out.emplace("local:" + g.letter, std::move(local));
    }
    return out;
}

std::map<Scenario, Dataset> build_similar_dissimilar(const Dataset& ds, const RegionCode& roi) {
    if (!roi.is_level3()) throw ContractError("region of interest must be a level-III code, got '" + roi.str() + "'");
    auto with = [&](NeighborClass extra) {
        return subset_by_region(ds, [&, extra](const RegionCode& r) {
            auto c = classify_neighbor(roi, r);
            return c == NeighborClass::Self || c == extra;
        });
    };
    std::map<Scenario, Dataset> out;
    out.emplace(Scenario::Local, with(NeighborClass::Self));
    if (out.at(Scenario::Local).empty()) throw ContractError("region of interest " + roi.str() + " has no sites");
    out.emplace(Scenario::LocalPlusClose, with(NeighborClass::Close));
    out.emplace(Scenario::LocalPlusFar, with(NeighborClass::Far));
    out.emplace(Scenario::LocalPlusDissimilar, with(NeighborClass::Dissimilar));
    return out;
}

std::map<Scenario, Dataset> apply_size_control(const std::map<Scenario, Dataset>& scenarios, const RegionCode& roi,
                                               Rng& rng) {
    const Scenario augmented[] = {Scenario::LocalPlusClose, Scenario::LocalPlusFar, Scenario::LocalPlusDissimilar};
    std::size_t smallest = std::numeric_limits<std::size_t>::max();
    for (auto sc : augmented) {
        auto it = scenarios.find(sc);
        if (it == scenarios.end()) throw ContractError("size control: scenario " + std::string(to_string(sc)) + " missing");
        std::size_t pool = 0;
        for (const auto& s : it->second.sites)
            if (classify_neighbor(roi, s.region) != NeighborClass::Self) ++pool;
        if (pool == 0)
            throw ContractError("size control: scenario " + std::string(to_string(sc)) + " has no added sites for ROI " +
                                roi.str());
        smallest = std::min(smallest, pool);
    }
    std::map<Scenario, Dataset> out;
    if (auto it = scenarios.find(Scenario::Local); it != scenarios.end()) out.emplace(Scenario::Local, it->second);
    for (auto sc : augmented) {
        const auto& full = scenarios.at(sc);
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < full.sites.size(); ++i)
            if (classify_neighbor(roi, full.sites[i].region) != NeighborClass::Self) pool.push_back(i);
        // Partial Fisher-Yates: the first `smallest` slots become a uniform sample.
        for (std::size_t i = 0; i < smallest; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        std::unordered_set<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(smallest));
        Dataset d;
        d.time_axis = full.time_axis;
        d.feature_names = full.feature_names;
        d.attr_names = full.attr_names;
        for (std::size_t i = 0; i < full.sites.size(); ++i)
            if (classify_neighbor(roi, full.sites[i].region) == NeighborClass::Self || chosen.count(i))
                d.sites.push_back(full.sites[i]);
        out.emplace(sc, std::move(d));
    }
    return out;
}

SuitePlan plan_suite(const Dataset& ds, const SubRegionTable& table, const ExperimentConfig& cfg,
                     const TrainConfig& train, std::uint64_t data_seed) {
    if (!cfg.sampling_seed) throw ConfigError("missing key experiment.sampling_seed");
    resolve_windows(ds, cfg.train_start, cfg.train_end, cfg.test_start, cfg.test_end);
    train.validate();

    ExperimentSpec base;
    base.family = cfg.family;
    base.train_start = cfg.train_start;
    base.train_end = cfg.train_end;
    base.test_start = cfg.test_start;
    base.test_end = cfg.test_end;
    base.train = train;
    base.data_seed = data_seed;
    base.sampling_seed = *cfg.sampling_seed;

    SuitePlan plan;
    if (cfg.family == Family::GlobalLocal) {
        auto sets = build_global_local(ds, table);
        ExperimentSpec g = base;
        g.scenario = Scenario::Global;
        g.roi = "all";
        PlannedRun global{g, site_ids(ds), site_ids(ds), 0, {}};
        const auto global_id = g.run_id();
        plan.runs.push_back(global);

        PlannedComparison all{{global_id}, {}, "global", "local", "All", {}};
        for (const auto& grp : table.groups()) {
            auto it = sets.find("local:" + grp.letter);
            if (it == sets.end()) continue;
            ExperimentSpec l = base;
            l.scenario = Scenario::Local;
            l.roi = grp.letter;
            const auto ids = site_ids(it->second);
            plan.runs.push_back({l, ids, ids, 0, {}});
            plan.comparisons.push_back({{global_id}, {l.run_id()}, "global", "local", grp.letter, ids});
            all.runs_b.push_back(l.run_id());
            all.site_ids.insert(all.site_ids.end(), ids.begin(), ids.end());
        }
        if (plan.comparisons.size() >= 2) plan.comparisons.push_back(all);
        return plan;
    }

    std::vector<std::string> rois = cfg.rois;
    if (rois.empty()) {
        std::map<std::string, std::size_t> counts;
        std::vector<std::string> order;
        for (const auto& s : ds.sites)
            if (counts[s.region.str()]++ == 0) order.push_back(s.region.str());
        for (const auto& r : order)
            if (counts[r] >= static_cast<std::size_t>(cfg.min_roi_sites)) rois.push_back(r);
        if (rois.empty()) throw ConfigError("no level-III region has at least experiment.min_roi_sites sites");
    }

    const bool run_off = cfg.size_control != SizeControl::On;
    const bool run_on = cfg.size_control != SizeControl::Off;
    const Scenario augmented[] = {Scenario::LocalPlusClose, Scenario::LocalPlusFar, Scenario::LocalPlusDissimilar};
    std::map<std::string, PlannedComparison> pooled;  // label -> All comparison
    std::vector<std::string> pooled_order;

    for (const auto& roi_text : rois) {
        RegionCode roi;
        try {
            roi = parse_region_code(roi_text);
        } catch (const ParseError& e) {
            throw ConfigError(std::string("experiment.rois: ") + e.what());
        }
        if (!roi.is_level3()) throw ConfigError("experiment.rois: '" + roi_text + "' is not a level-III code");
        auto sets = build_similar_dissimilar(ds, roi);
        const auto roi_ids = site_ids(sets.at(Scenario::Local));

        ExperimentSpec local = base;
        local.scenario = Scenario::Local;
        local.roi = roi.str();
        const auto local_id = local.run_id();
        plan.runs.push_back({local, roi_ids, roi_ids, 0, {}});

        auto add_variant = [&](const std::map<Scenario, Dataset>& variant, bool controlled) {
            for (auto sc : augmented) {
                ExperimentSpec s = base;
                s.scenario = sc;
                s.roi = roi.str();
                s.size_controlled = controlled;
                const auto& d = variant.at(sc);
                plan.runs.push_back({s, site_ids(d), roi_ids, d.sites.size() - roi_ids.size(), local_id});
                std::string label(to_string(sc));
                if (controlled) label += "/size_controlled";
                plan.comparisons.push_back({{s.run_id()}, {local_id}, label, "local", roi.str(), roi_ids});
                auto [it, inserted] = pooled.try_emplace(label, PlannedComparison{{}, {}, label, "local", "All", {}});
                if (inserted) pooled_order.push_back(label);
                it->second.runs_a.push_back(s.run_id());
                it->second.runs_b.push_back(local_id);
                it->second.site_ids.insert(it->second.site_ids.end(), roi_ids.begin(), roi_ids.end());
            }
        };
        if (run_off) add_variant(sets, false);
        if (run_on) {
            Rng rng = make_rng(*cfg.sampling_seed, "size-control/" + roi.str());
            add_variant(apply_size_control(sets, roi, rng), true);
        }
    }
    if (rois.size() >= 2)
        for (const auto& label : pooled_order) plan.comparisons.push_back(pooled.at(label));
    return plan;
}

json to_json(const RunManifest& m) {
    json j;
    j["run_id"] = m.run_id;
    j["model_id"] = m.run.spec.model_id();
    j["spec"] = to_json(m.run.spec);
    j["baseline_run_id"] = m.run.baseline_run_id;
    j["train_site_count"] = m.run.train_site_ids.size();
    j["added_site_count"] = m.run.added_site_count;
    j["train_site_ids"] = m.run.train_site_ids;
    j["eval_site_ids"] = m.run.eval_site_ids;
    j["status"] = m.status;
    j["error"] = m.error;
    j["iterations"] = m.iterations;
    j["norm"] = norm_to_json(m.norm);
    j["files"] = {{"checkpoint", m.checkpoint}, {"metrics", m.metrics}, {"comparisons", m.comparisons}, {"train_log", m.train_log}};
    j["seeds"] = {{"data", m.run.spec.data_seed}, {"sampling", m.run.spec.sampling_seed}, {"train", m.run.spec.train.seed}};
    j["software_version"] = m.software_version;
    j["notes"] = m.notes;
    return j;
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    try {
        m.run.spec = spec_from_json(j.at("spec"));
        m.run_id = j.at("run_id").get<std::string>();
        m.run.baseline_run_id = j.at("baseline_run_id").get<std::string>();
        m.run.added_site_count = j.at("added_site_count").get<std::size_t>();
        m.run.train_site_ids = j.at("train_site_ids").get<std::vector<std::string>>();
        m.run.eval_site_ids = j.at("eval_site_ids").get<std::vector<std::string>>();
        m.status = j.at("status").get<std::string>();
        m.error = j.at("error").get<std::string>();
        m.iterations = j.at("iterations").get<std::size_t>();
        if (m.status == "ok") m.norm = norm_from_json(j.at("norm"));
        m.checkpoint = j.at("files").at("checkpoint").get<std::string>();
        m.metrics = j.at("files").at("metrics").get<std::string>();
        m.comparisons = j.at("files").at("comparisons").get<std::string>();
        m.train_log = j.at("files").at("train_log").get<std::string>();
        m.software_version = j.at("software_version").get<std::string>();
        m.notes = j.at("notes").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest: ") + e.what());
    }
    if (m.run_id != m.run.spec.run_id()) throw DataError("manifest: run_id does not match its spec");
    return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

TrainedRun train_run(const Dataset& ds, const PlannedRun& run) {
    const auto& spec = run.spec;
    spec.validate();
    const auto w = resolve_windows(ds, spec.train_start, spec.train_end, spec.test_start, spec.test_end);
    auto train_set = slice_time(subset_by_ids(ds, run.train_site_ids), w.train_begin, w.train_end);
    TrainedRun out;
    out.norm = fit_normalization(train_set);
    const auto normalized = apply_normalization(train_set, out.norm);
    const NetworkDims dims{static_cast<int>(ds.num_features() + ds.num_attrs()), spec.train.hidden};
    auto res = train(normalized, dims, spec.train);
    out.params = std::move(res.params);
    out.log = std::move(res.log);
    out.iterations = res.iterations;
    return out;
}

std::vector<SiteMetrics> evaluate_run(const Dataset& ds, const PlannedRun& run, const ModelParams& params,
                                      const NormStats& norm) {
    const auto& spec = run.spec;
    const auto w = resolve_windows(ds, spec.train_start, spec.train_end, spec.test_start, spec.test_end);
    const auto eval_set = apply_normalization(subset_by_ids(ds, run.eval_site_ids), norm);
    std::vector<WindowRef> windows;
    for (std::size_t i = 0; i < eval_set.sites.size(); ++i) windows.push_back({i, 0});
    const auto yhat = predict(params, gather_inputs(eval_set, windows, w.test_end));
    const auto model_id = spec.model_id();
    std::vector<SiteMetrics> out;
    const auto n = w.test_end - w.test_begin;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& raw = ds.site(run.eval_site_ids[i]);
        std::vector<double> obs(raw.target.begin() + static_cast<std::ptrdiff_t>(w.test_begin),
                                raw.target.begin() + static_cast<std::ptrdiff_t>(w.test_end));
        std::vector<double> pred(n);
        for (std::size_t t = 0; t < n; ++t)
            pred[t] = norm.denormalize_target(yhat(static_cast<Eigen::Index>(w.test_begin + t), static_cast<Eigen::Index>(i)));
        out.push_back(compute_site_metrics(raw.id, raw.region.str(), model_id, obs, pred));
    }
    return out;
}

RunManifest execute_run(const Dataset& ds, const PlannedRun& run, const std::filesystem::path& dir) {
    RunManifest m;
    m.run = run;
    m.run_id = run.spec.run_id();
    m.notes = {
        "minibatch windows are drawn with replacement",
        "wilcoxon p-values are two-sided; zero differences dropped",
        "size control samples whole sites, not individual observations",
        "test predictions run from the start of the time axis; test-window targets never enter training",
    };
    if (ds.synthetic) m.notes.push_back("synthetic world: generator parameters are stand-ins, not fitted to observations");
    try {
        auto trained = train_run(ds, run);
        m.norm = trained.norm;
        m.iterations = trained.iterations;
        write_serialized(dir / m.checkpoint, encode_checkpoint(trained.params));
        write_serialized(dir / m.train_log, format_train_log(trained.log));
        write_serialized(dir / m.metrics, format_metrics_csv(evaluate_run(ds, run, trained.params, trained.norm)));
        m.status = "ok";
    } catch (const std::exception& e) {
        m.status = "failed";
        m.error = e.what();
    }
    write_serialized(dir / "manifest.json", to_json(m).dump(2) + "\n");
    return m;
}

SuiteResult run_suite(const Dataset& ds, const SuitePlan& plan, const std::vector<Metric>& metrics,
                      const std::filesystem::path& out, int workers) {
    const auto runs_dir = out / "runs";
    SuiteResult result;
    result.manifests.resize(plan.runs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < plan.runs.size(); i = next++) {
            const auto id = plan.runs[i].spec.run_id();
            result.manifests[i] = execute_run(ds, plan.runs[i], runs_dir / id);
        }
    };
    const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
    if (n_threads == 1 || plan.runs.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(n_threads, plan.runs.size()); ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::map<std::string, std::vector<SiteMetrics>> metrics_by_run;
    for (auto& m : result.manifests) {
        if (m.status != "ok") {
            ++result.failed;
            continue;
        }
        metrics_by_run[m.run_id] = read_metrics_csv(runs_dir / m.run_id / m.metrics);
    }

    std::map<std::string, std::vector<PairedComparison>> per_run;
    for (const auto& pc : plan.comparisons) {
        const std::set<std::string> wanted(pc.site_ids.begin(), pc.site_ids.end());
        auto gather = [&](const std::vector<std::string>& runs, const std::string& label) -> std::optional<std::vector<SiteMetrics>> {
            std::vector<SiteMetrics> v;
            for (const auto& r : runs) {
                auto it = metrics_by_run.find(r);
                if (it == metrics_by_run.end()) return std::nullopt;
                for (auto sm : it->second)
                    if (wanted.count(sm.site_id)) {
                        sm.model_id = label;
                        v.push_back(std::move(sm));
                    }
            }
            return v;
        };
        auto a = gather(pc.runs_a, pc.label_a);
        auto b = gather(pc.runs_b, pc.label_b);
        if (!a || !b) continue;
        for (auto metric : metrics) {
            try {
                auto cmp = compare_models(*a, *b, metric, pc.region);
                cmp.model_a = pc.label_a;
                cmp.model_b = pc.label_b;
                if (pc.runs_a.size() == 1) per_run[pc.runs_a.front()].push_back(cmp);
                result.comparisons.push_back(std::move(cmp));
            } catch (const ContractError&) {
                // every site undefined for this metric; nothing to compare
            }
        }
    }
    for (const auto& m : result.manifests) {
        if (m.status != "ok") continue;
        auto it = per_run.find(m.run_id);
        write_serialized(runs_dir / m.run_id / m.comparisons,
                         format_comparisons_csv(it == per_run.end() ? std::vector<PairedComparison>{} : it->second));
    }

    std::string all = "model_a,model_b," + std::string(kComparisonHeader) + "\n";
    const auto body = format_comparisons_csv(result.comparisons);
    std::size_t pos = body.find('\n') + 1;
    for (const auto& c : result.comparisons) {
        const auto end = body.find('\n', pos);
        all += c.model_a + "," + c.model_b + "," + body.substr(pos, end - pos) + "\n";
        pos = end + 1;
    }
    write_serialized(out / "comparisons.csv", all);
    return result;
}

std::string format_suite_summary(const SuiteResult& result, const SuitePlan& plan) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-34s %-8s %-5s %12s %12s %11s %7s %5s\n", "model_a vs model_b", "region",
                  "metric", "median_a", "median_b", "p_value", "%better", "n");
    out += line;
    for (const auto& c : result.comparisons) {
        const auto pair = c.model_a + " vs " + c.model_b;
        std::snprintf(line, sizeof(line), "%-34s %-8s %-5s %12.5g %12.5g %11.3e %7.1f %5zu\n", pair.c_str(), c.region.c_str(),
                      std::string(to_string(c.metric)).c_str(), c.median_a, c.median_b, c.wilcoxon.p_value, c.pct_better,
                      c.n());
        out += line;
    }
    std::snprintf(line, sizeof(line), "runs: %zu planned, %zu failed\n", plan.runs.size(), result.failed);
    out += line;
    return out;
}

}  // namespace synergy
