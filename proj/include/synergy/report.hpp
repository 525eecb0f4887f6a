#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "synergy/evaluation.hpp"

namespace synergy {

/// One row of the merged significance table.
struct SignificanceRow {
    std::string family;
    std::string model_a;
    std::string model_b;
    ComparisonRow row;
};

/// Five-number summary of one model's per-site metric in one region.
struct BoxStats {
    std::string region;
    std::string model;
    std::string metric;
    double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
    std::size_t n = 0;
};

struct BoxGroup {
    std::string name;  // file stem
    std::vector<BoxStats> boxes;
};

struct Report {
    std::vector<SignificanceRow> rows;
    std::vector<BoxGroup> boxes;
    std::vector<std::string> notes;  // distinct manifest notes, first-seen order
};

/// Merge every run under `runs_dir` (or `runs_dir/runs`). Throws DataError
/// when no manifest is found.
Report build_report(const std::filesystem::path& runs_dir);

std::string format_significance_csv(const Report& report);
std::string format_significance_text(const Report& report);

/// Writes significance.csv, significance.txt and boxplot/<group>.csv under `out_dir`.
void write_report(const Report& report, const std::filesystem::path& out_dir);

}  // namespace synergy
