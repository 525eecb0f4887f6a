#include "synergy/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"
#include "synergy/experiment.hpp"

namespace synergy {

namespace {

struct LoadedRun {
    std::filesystem::path dir;
    RunManifest manifest;
    std::vector<SiteMetrics> metrics;
};

std::string challenger_label(const ExperimentSpec& s) {
    if (s.family == Family::GlobalLocal) return "global";
    std::string label(to_string(s.scenario));
    if (s.size_controlled) label += "/size_controlled";
    return label;
}

bool same_protocol(const ExperimentSpec& a, const ExperimentSpec& b) {
    return a.family == b.family && a.train_start == b.train_start && a.train_end == b.train_end &&
           a.test_start == b.test_start && a.test_end == b.test_end && a.data_seed == b.data_seed &&
           to_json(a.train) == to_json(b.train);
}

std::vector<SiteMetrics> restrict(const std::vector<SiteMetrics>& m, const std::set<std::string>& ids) {
    std::vector<SiteMetrics> out;
    for (const auto& s : m)
        if (ids.count(s.site_id)) out.push_back(s);
    return out;
}

std::string file_stem(std::string s) {
    for (char& c : s)
        if (c == '/' || c == ':') c = '+';
    return s;
}

BoxStats box(const std::string& region, const std::string& model, Metric metric, const std::vector<double>& v) {
    BoxStats b;
    b.region = region;
    b.model = model;
    b.metric = std::string(to_string(metric));
    b.min = *std::min_element(v.begin(), v.end());
    b.max = *std::max_element(v.begin(), v.end());
    b.q25 = quantile(v, 0.25);
    b.median = median(v);
    b.q75 = quantile(v, 0.75);
    b.n = v.size();
    return b;
}

// A challenger run paired with the baseline run(s) it is compared against.
struct Pairing {
    std::string region;
    const LoadedRun* challenger;
    std::vector<const LoadedRun*> baselines;
};

}  // namespace

Report build_report(const std::filesystem::path& runs_dir) {
    auto root = runs_dir;
    if (std::filesystem::is_directory(root / "runs")) root /= "runs";
    if (!std::filesystem::is_directory(root)) throw DataError(root.string() + ": not a directory");
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "manifest.json")) dirs.push_back(entry.path());
    if (std::filesystem::exists(root / "manifest.json")) dirs.push_back(root);
    if (dirs.empty()) throw DataError(root.string() + ": no run manifests found");
    std::sort(dirs.begin(), dirs.end());

    std::vector<LoadedRun> runs;
    for (const auto& d : dirs) {
        LoadedRun r{d, load_manifest(d / "manifest.json"), {}};
        if (r.manifest.status != "ok") continue;
        r.metrics = read_metrics_csv(d / r.manifest.metrics);
        runs.push_back(std::move(r));
    }
    std::map<std::string, const LoadedRun*> by_id;
    for (const auto& r : runs) by_id[r.manifest.run_id] = &r;

    // group key: family, model_a, model_b
    using Key = std::tuple<std::string, std::string, std::string>;
    std::map<Key, std::vector<ComparisonRow>> rows;
    std::map<Key, std::vector<Pairing>> pairings;
    std::map<Key, std::set<std::string>> metrics_seen;

    for (const auto& r : runs) {
        const auto& spec = r.manifest.run.spec;
        const bool challenger = spec.scenario == Scenario::Global || !r.manifest.run.baseline_run_id.empty();
        if (!challenger) continue;
        const Key key{std::string(to_string(spec.family)), challenger_label(spec), "local"};
        const auto cmp_path = r.dir / r.manifest.comparisons;
        if (std::filesystem::exists(cmp_path))
            for (auto& row : read_comparisons_csv(cmp_path)) {
                metrics_seen[key].insert(row.metric);
                rows[key].push_back(std::move(row));
            }
        if (spec.family == Family::GlobalLocal) {
            for (const auto& other : runs) {
                const auto& os = other.manifest.run.spec;
                if (os.scenario == Scenario::Local && same_protocol(spec, os))
                    pairings[key].push_back({os.roi, &r, {&other}});
            }
        } else if (auto it = by_id.find(r.manifest.run.baseline_run_id); it != by_id.end()) {
            pairings[key].push_back({spec.roi, &r, {it->second}});
        }
    }

    Report report;
    for (const auto& r : runs)
        for (const auto& n : r.manifest.notes)
            if (std::find(report.notes.begin(), report.notes.end(), n) == report.notes.end()) report.notes.push_back(n);
    for (auto& [key, group_rows] : rows) {
        auto& pairs = pairings[key];
        std::set<std::string> regions;
        for (const auto& row : group_rows) regions.insert(row.region);
        const bool has_all = regions.count("All") > 0;
        if (!has_all && regions.size() >= 2 && pairs.size() >= 2) {
            for (const auto& metric_name : metrics_seen[key]) {
                const auto metric = parse_metric(metric_name);
                std::vector<SiteMetrics> a, b;
                for (const auto& p : pairs) {
                    std::set<std::string> ids(p.challenger->manifest.run.eval_site_ids.begin(),
                                              p.challenger->manifest.run.eval_site_ids.end());
                    auto ra = restrict(p.challenger->metrics, ids);
                    a.insert(a.end(), ra.begin(), ra.end());
                    for (const auto* base : p.baselines) {
                        auto rb = restrict(base->metrics, ids);
                        b.insert(b.end(), rb.begin(), rb.end());
                    }
                }
                try {
                    const auto pc = compare_models(a, b, metric, "All");
                    group_rows.push_back({"All", metric_name, pc.wilcoxon.p_value, pc.median_a, pc.median_b, pc.pct_better, pc.n()});
                } catch (const ContractError&) {
                }
            }
        }
        std::stable_sort(group_rows.begin(), group_rows.end(), [](const auto& x, const auto& y) {
            const bool xa = x.region == "All", ya = y.region == "All";
            if (xa != ya) return ya;
            return x.region < y.region;
        });
        for (const auto& row : group_rows)
            report.rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), row});

        BoxGroup bg;
        bg.name = file_stem(std::get<0>(key) + "__" + std::get<1>(key) + "__vs__" + std::get<2>(key));
        std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return x.region < y.region; });
        for (const auto& metric_name : metrics_seen[key]) {
            const auto metric = parse_metric(metric_name);
            std::vector<double> all_a, all_b;
            for (const auto& p : pairs) {
                const auto* base = p.baselines.front();
                std::set<std::string> ids(base->manifest.run.eval_site_ids.begin(), base->manifest.run.eval_site_ids.end());
                try {
                    const auto pc = compare_models(restrict(p.challenger->metrics, ids), restrict(base->metrics, ids), metric, p.region);
                    bg.boxes.push_back(box(p.region, std::get<1>(key), metric, pc.values_a));
                    bg.boxes.push_back(box(p.region, std::get<2>(key), metric, pc.values_b));
                    all_a.insert(all_a.end(), pc.values_a.begin(), pc.values_a.end());
                    all_b.insert(all_b.end(), pc.values_b.begin(), pc.values_b.end());
                } catch (const ContractError&) {
                }
            }
            if (pairs.size() >= 2 && !all_a.empty()) {
                bg.boxes.push_back(box("All", std::get<1>(key), metric, all_a));
                bg.boxes.push_back(box("All", std::get<2>(key), metric, all_b));
            }
        }
        report.boxes.push_back(std::move(bg));
    }
    return report;
}

std::string format_significance_csv(const Report& report) {
    std::string out = "family,model_a,model_b,region,metric,p_value,median_a,median_b,pct_better,n\n";
    for (const auto& r : report.rows)
        out += r.family + "," + r.model_a + "," + r.model_b + "," + r.row.region + "," + r.row.metric + "," +
               format_double(r.row.p_value) + "," + format_double(r.row.median_a) + "," + format_double(r.row.median_b) +
               "," + format_double(r.row.pct_better) + "," + std::to_string(r.row.n) + "\n";
    return out;
}

std::string format_significance_text(const Report& report) {
    std::string out;
    char line[320];
    std::snprintf(line, sizeof(line), "%-20s %-34s %-10s %-8s %-5s %11s %12s %12s %8s %6s\n", "family", "model_a",
                  "model_b", "region", "metric", "p_value", "median_a", "median_b", "%better", "n");
    out += line;
    for (const auto& r : report.rows) {
        std::snprintf(line, sizeof(line), "%-20s %-34s %-10s %-8s %-5s %11.3e %12.5g %12.5g %8.1f %6zu\n",
                      r.family.c_str(), r.model_a.c_str(), r.model_b.c_str(), r.row.region.c_str(), r.row.metric.c_str(),
                      r.row.p_value, r.row.median_a, r.row.median_b, r.row.pct_better, r.row.n);
        out += line;
    }
    for (const auto& n : report.notes) out += "note: " + n + "\n";
    return out;
}

void write_report(const Report& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir / "boxplot");
    write_text_file(out_dir / "significance.csv", format_significance_csv(report));
    write_text_file(out_dir / "significance.txt", format_significance_text(report));
    for (const auto& g : report.boxes) {
        std::string csv = "region,model,metric,min,q25,median,q75,max,n\n";
        for (const auto& b : g.boxes)
            csv += b.region + "," + b.model + "," + b.metric + "," + format_double(b.min) + "," + format_double(b.q25) + "," +
                   format_double(b.median) + "," + format_double(b.q75) + "," + format_double(b.max) + "," +
                   std::to_string(b.n) + "\n";
        write_text_file(out_dir / "boxplot" / (g.name + ".csv"), csv);
    }
}

}  // namespace synergy
