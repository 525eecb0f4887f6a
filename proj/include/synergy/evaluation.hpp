#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synergy {

// Series metrics. Missing observations are NaN and are skipped together with
// the matching prediction. An empty optional means the metric is undefined.

std::optional<double> rmse(std::span<const double> obs, std::span<const double> pred);
std::optional<double> pearson_corr(std::span<const double> obs, std::span<const double> pred);
std::optional<double> nse(std::span<const double> obs, std::span<const double> pred);

enum class Metric { Rmse, Corr, Nse };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);
bool lower_is_better(Metric m);

struct SiteMetrics {
    std::string site_id;
    std::string region;
    std::string model_id;
    std::optional<double> rmse;
    std::optional<double> corr;
    std::optional<double> nse;
    std::size_t n_obs = 0;

    std::optional<double> get(Metric m) const;
};

SiteMetrics compute_site_metrics(std::string site_id, std::string region, std::string model_id,
                                 std::span<const double> obs, std::span<const double> pred);

enum class WilcoxonMethod { Auto, Exact, Normal };

struct WilcoxonResult {
    double p_value = 1.0;     // two-sided
    double statistic = 0.0;   // min(W+, W-)
    std::size_t n_effective = 0;  // pairs with nonzero difference
    bool degenerate = false;  // every difference was zero
    bool exact = false;
};

/// Largest n for which Auto uses the exact null distribution.
inline constexpr std::size_t kWilcoxonExactMax = 25;

/**
 * Two-sided Wilcoxon signed-rank test on paired samples.
 *
 * Zero differences are dropped; tied |differences| share average ranks.
 * The exact p counts sign assignments over the actual (possibly tied) ranks.
 * The normal approximation uses the tie-corrected variance and a 0.5
 * continuity correction.
 */
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

/// Average ranks (1-based) of the absolute values.
std::vector<double> average_ranks(std::span<const double> abs_values);

/// Linear-interpolation quantile (R type 7) of unsorted values.
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

struct PairedComparison {
    std::string region;
    Metric metric = Metric::Rmse;
    std::string model_a;
    std::string model_b;
    std::vector<std::string> site_ids;
    std::vector<double> values_a;
    std::vector<double> values_b;
    WilcoxonResult wilcoxon;
    double median_a = 0.0;
    double median_b = 0.0;
    double pct_better = 0.0;  // share of sites where A is strictly better, in percent
    std::size_t excluded = 0;  // sites present in both inputs but undefined in either

    std::size_t n() const { return site_ids.size(); }
};

/// Pair models by site id. Throws ContractError on an empty intersection.
PairedComparison compare_models(const std::vector<SiteMetrics>& metrics_a, const std::vector<SiteMetrics>& metrics_b,
                                Metric metric, std::string region = "All");

std::string format_metrics_csv(const std::vector<SiteMetrics>& metrics);
std::vector<SiteMetrics> read_metrics_csv(const std::filesystem::path& path);

inline constexpr std::string_view kComparisonHeader = "region,metric,p_value,median_a,median_b,pct_better,n";
std::string format_comparisons_csv(const std::vector<PairedComparison>& comparisons);

struct ComparisonRow {
    std::string region;
    std::string metric;
    double p_value = 1.0;
    double median_a = 0.0;
    double median_b = 0.0;
    double pct_better = 0.0;
    std::size_t n = 0;
};
std::vector<ComparisonRow> read_comparisons_csv(const std::filesystem::path& path);

}  // namespace synergy
