#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synergy/dataset.hpp"
#include "synergy/evaluation.hpp"
#include "synergy/region.hpp"
#include "synergy/rng.hpp"
#include "synergy/training.hpp"

namespace synergy {

inline constexpr const char* kSoftwareVersion = "synergy 1.0.0";

enum class Family { GlobalLocal, SimilarDissimilar };
enum class Scenario { Global, Local, LocalPlusClose, LocalPlusFar, LocalPlusDissimilar };
enum class SizeControl { Off, On, Both };

std::string_view to_string(Family f);
std::string_view to_string(Scenario s);
Family parse_family(std::string_view s);
Scenario parse_scenario(std::string_view s);

/// Declarative description of one training scenario.
struct ExperimentSpec {
    Family family = Family::GlobalLocal;
    Scenario scenario = Scenario::Global;
    std::string roi;  // level-III code, sub-region id, or "all" for the global model
    bool size_controlled = false;
    std::string train_start, train_end;  // ISO dates, [start, end)
    std::string test_start, test_end;
    TrainConfig train;
    std::uint64_t data_seed = 0;
    std::uint64_t sampling_seed = 0;

    /// Throws ConfigError when scenario and family disagree.
    void validate() const;
    std::string model_id() const;
    /// Stable 16-hex-digit hash of the canonical JSON form.
    std::string run_id() const;
};

nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Experiment-level options shared by every spec of a suite.
struct ExperimentConfig {
    Family family = Family::GlobalLocal;
    SizeControl size_control = SizeControl::Off;
    std::vector<std::string> rois;  // empty: every level-III region with >= min_roi_sites sites
    int min_roi_sites = 10;
    std::string train_start = "2015-04-01";
    std::string train_end = "2016-04-01";
    std::string test_start = "2016-04-01";
    std::string test_end = "2017-03-31";
    std::optional<std::uint64_t> sampling_seed;
    std::string taxonomy = "taxonomy.csv";  // "builtin" or a path relative to the data directory
};

/// Resolved time windows as indices into the dataset time axis.
struct TimeWindows {
    std::size_t train_begin = 0, train_end = 0;
    std::size_t test_begin = 0, test_end = 0;
};

/// Throws ConfigError for reversed, overlapping or out-of-range windows.
TimeWindows resolve_windows(const Dataset& ds, const std::string& train_start, const std::string& train_end,
                            const std::string& test_start, const std::string& test_end);

/// model id -> training dataset: "global" plus "local:<letter>" for every populated sub-region.
std::map<std::string, Dataset> build_global_local(const Dataset& ds, const SubRegionTable& table);

/// The four training compositions for one level-III region of interest.
std::map<Scenario, Dataset> build_similar_dissimilar(const Dataset& ds, const RegionCode& roi);

/// Equalize added (non-ROI) sites across the three augmented scenarios at the
/// smallest pool size, sampling without replacement. Local is untouched.
std::map<Scenario, Dataset> apply_size_control(const std::map<Scenario, Dataset>& scenarios, const RegionCode& roi,
                                               Rng& rng);

/// One training run with its resolved site lists.
struct PlannedRun {
    ExperimentSpec spec;
    std::vector<std::string> train_site_ids;
    std::vector<std::string> eval_site_ids;
    std::size_t added_site_count = 0;
    std::string baseline_run_id;  // run this model is compared against; empty for baselines
};

/// Challenger runs against baseline runs over one region's sites. Several runs
/// per side pool their sites, as in the "All" rows.
struct PlannedComparison {
    std::vector<std::string> runs_a;
    std::vector<std::string> runs_b;
    std::string label_a;
    std::string label_b;
    std::string region;
    std::vector<std::string> site_ids;
};

struct SuitePlan {
    std::vector<PlannedRun> runs;
    std::vector<PlannedComparison> comparisons;
};

SuitePlan plan_suite(const Dataset& ds, const SubRegionTable& table, const ExperimentConfig& cfg,
                     const TrainConfig& train, std::uint64_t data_seed);

struct RunManifest {
    PlannedRun run;
    std::string run_id;
    std::string status = "pending";  // ok | failed
    std::string error;
    std::size_t iterations = 0;
    NormStats norm;
    std::string checkpoint = "checkpoint.bin";
    std::string metrics = "metrics.csv";
    std::string comparisons = "comparisons.csv";
    std::string train_log = "train_log.csv";
    std::string software_version = kSoftwareVersion;
    std::vector<std::string> notes;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
RunManifest load_manifest(const std::filesystem::path& path);

/// Products of training one planned run.
struct TrainedRun {
    ModelParams params;
    NormStats norm;
    std::vector<EpochLog> log;
    std::size_t iterations = 0;
};

TrainedRun train_run(const Dataset& ds, const PlannedRun& run);

/// Per-site metrics over the test window. Predictions run from the start of
/// the time axis so the training period serves as spin-up.
std::vector<SiteMetrics> evaluate_run(const Dataset& ds, const PlannedRun& run, const ModelParams& params,
                                      const NormStats& norm);

/// Train and evaluate one run, writing its files into `dir`.
RunManifest execute_run(const Dataset& ds, const PlannedRun& run, const std::filesystem::path& dir);

struct SuiteResult {
    std::vector<RunManifest> manifests;
    std::vector<PairedComparison> comparisons;  // every planned comparison x metric, in plan order
    std::size_t failed = 0;
};

/// Execute all runs (up to `workers` in parallel), then comparisons; writes
/// `<out>/runs/<run-id>/` for each run.
SuiteResult run_suite(const Dataset& ds, const SuitePlan& plan, const std::vector<Metric>& metrics,
                      const std::filesystem::path& out, int workers = 1);

/// Aligned text table of suite comparisons.
std::string format_suite_summary(const SuiteResult& result, const SuitePlan& plan);

}  // namespace synergy
