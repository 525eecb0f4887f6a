#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "synergy/region.hpp"

namespace synergy {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Date = std::chrono::sys_days;

/// Missing targets are stored as quiet NaN in memory and as `NA` in files.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline constexpr std::string_view kMissingToken = "NA";
inline bool is_missing(double v) { return std::isnan(v); }

Date parse_date(std::string_view iso);
std::string format_date(Date d);

/// One prediction unit: a pixel or a basin.
struct Site {
    std::string id;
    RegionCode region;
    std::vector<double> static_attrs;  // length A
    RowMatrix forcing;                 // T x F, complete
    std::vector<double> target;        // length T, NaN where unobserved

    std::size_t observed_count() const;
};

/// Sites sharing one time axis, feature set and attribute set.
struct Dataset {
    std::vector<Site> sites;
    std::vector<Date> time_axis;
    std::vector<std::string> feature_names;
    std::vector<std::string> attr_names;
    bool synthetic = false;  // generated world rather than observations

    std::size_t num_steps() const { return time_axis.size(); }
    std::size_t num_features() const { return feature_names.size(); }
    std::size_t num_attrs() const { return attr_names.size(); }
    bool empty() const { return sites.empty(); }

    /// Throws DataError on duplicate ids, non-level-III regions or shape mismatch.
    void validate() const;

    const Site& site(std::string_view id) const;
    /// Index of `d` on the time axis, or the first index after it when `d` is absent.
    std::size_t lower_index(Date d) const;
};

struct MeanStd {
    double mean = 0.0;
    double std = 1.0;
};

/// Per-feature standardization statistics fitted on training data.
struct NormStats {
    std::vector<MeanStd> forcing;
    std::vector<MeanStd> attrs;
    MeanStd target;

    double normalize_target(double v) const { return (v - target.mean) / target.std; }
    double denormalize_target(double z) const { return z * target.std + target.mean; }
};

/// Population moments over observed entries; zero-variance columns get std 1.
NormStats fit_normalization(const Dataset& train);
Dataset apply_normalization(const Dataset& ds, const NormStats& stats);
Dataset invert_normalization(const Dataset& ds, const NormStats& stats);

/// Sites whose region satisfies `keep`, in original order.
Dataset subset_by_region(const Dataset& ds, const std::function<bool(const RegionCode&)>& keep);
Dataset subset_by_ids(const Dataset& ds, const std::vector<std::string>& ids);
/// Time steps in [begin, end) on every site.
Dataset slice_time(const Dataset& ds, std::size_t begin, std::size_t end);

/// Directory holding sites.csv, forcing.csv and target.csv.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace synergy
