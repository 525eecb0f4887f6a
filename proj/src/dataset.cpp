#include "synergy/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy {

namespace {

int parse_int_field(std::string_view s, std::string_view whole) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("invalid date '" + std::string(whole) + "'");
    return v;
}

// Two-pass moments for numerical stability on large columns.
struct Accumulator {
    std::vector<double> values;
    void add(double v) { values.push_back(v); }
    MeanStd finish() const {
        MeanStd m;
        if (values.empty()) return m;
        double sum = 0.0;
        for (double v : values) sum += v;
        m.mean = sum / static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values) ss += (v - m.mean) * (v - m.mean);
        double var = ss / static_cast<double>(values.size());
        double scale = std::max(1.0, std::abs(m.mean));
        m.std = var > 1e-24 * scale * scale ? std::sqrt(var) : 1.0;
        return m;
    }
};

void check_dims(const Dataset& ds, const NormStats& stats) {
    if (stats.forcing.size() != ds.num_features() || stats.attrs.size() != ds.num_attrs())
        throw ContractError("normalization statistics do not match dataset dimensions");
    for (const auto& s : ds.sites)
        if (static_cast<std::size_t>(s.forcing.cols()) != ds.num_features() || s.static_attrs.size() != ds.num_attrs())
            throw ContractError("site " + s.id + " does not match dataset dimensions");
}

}  // namespace

Date parse_date(std::string_view iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw ParseError("invalid date '" + std::string(iso) + "'");
    int y = parse_int_field(iso.substr(0, 4), iso);
    int m = parse_int_field(iso.substr(5, 2), iso);
    int d = parse_int_field(iso.substr(8, 2), iso);
    std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(static_cast<unsigned>(m)),
                                    std::chrono::day(static_cast<unsigned>(d))};
    if (!ymd.ok()) throw ParseError("invalid date '" + std::string(iso) + "'");
    return Date(ymd);
}

std::string format_date(Date d) {
    std::chrono::year_month_day ymd(d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::size_t Site::observed_count() const {
    return static_cast<std::size_t>(std::count_if(target.begin(), target.end(), [](double v) { return !is_missing(v); }));
}

void Dataset::validate() const {
    std::set<std::string, std::less<>> ids;
    for (std::size_t i = 1; i < time_axis.size(); ++i)
        if (time_axis[i] <= time_axis[i - 1]) throw DataError("time axis is not strictly increasing");
    for (const auto& s : sites) {
        if (!ids.insert(s.id).second) throw DataError("duplicate site id '" + s.id + "'");
        if (!s.region.is_level3()) throw DataError("site " + s.id + ": region '" + s.region.str() + "' is not level-III");
        if (static_cast<std::size_t>(s.forcing.rows()) != num_steps() ||
            static_cast<std::size_t>(s.forcing.cols()) != num_features())
            throw DataError("site " + s.id + ": forcing shape mismatch");
        if (s.target.size() != num_steps()) throw DataError("site " + s.id + ": target length mismatch");
        if (s.static_attrs.size() != num_attrs()) throw DataError("site " + s.id + ": attribute count mismatch");
        if (!s.forcing.allFinite()) throw DataError("site " + s.id + ": forcing has missing or non-finite entries");
    }
}

const Site& Dataset::site(std::string_view id) const {
    for (const auto& s : sites)
        if (s.id == id) return s;
    throw DataError("unknown site '" + std::string(id) + "'");
}

std::size_t Dataset::lower_index(Date d) const {
    return static_cast<std::size_t>(std::lower_bound(time_axis.begin(), time_axis.end(), d) - time_axis.begin());
}

NormStats fit_normalization(const Dataset& train) {
    if (train.empty()) throw ContractError("fit_normalization: empty training dataset");
    const auto F = train.num_features();
    const auto A = train.num_attrs();
    std::vector<Accumulator> f_acc(F), a_acc(A);
    Accumulator t_acc;
    for (const auto& s : train.sites) {
        for (Eigen::Index t = 0; t < s.forcing.rows(); ++t)
            for (std::size_t f = 0; f < F; ++f) f_acc[f].add(s.forcing(t, static_cast<Eigen::Index>(f)));
        for (std::size_t a = 0; a < A; ++a) a_acc[a].add(s.static_attrs[a]);
        for (double v : s.target)
            if (!is_missing(v)) t_acc.add(v);
    }
    NormStats stats;
    for (auto& acc : f_acc) stats.forcing.push_back(acc.finish());
    for (auto& acc : a_acc) stats.attrs.push_back(acc.finish());
    stats.target = t_acc.finish();
    return stats;
}

Dataset apply_normalization(const Dataset& ds, const NormStats& stats) {
    check_dims(ds, stats);
    Dataset out = ds;
    for (auto& s : out.sites) {
        for (Eigen::Index f = 0; f < s.forcing.cols(); ++f) {
            const auto& m = stats.forcing[static_cast<std::size_t>(f)];
            s.forcing.col(f) = (s.forcing.col(f).array() - m.mean) / m.std;
        }
        for (std::size_t a = 0; a < s.static_attrs.size(); ++a)
            s.static_attrs[a] = (s.static_attrs[a] - stats.attrs[a].mean) / stats.attrs[a].std;
        for (double& v : s.target)
            if (!is_missing(v)) v = stats.normalize_target(v);
    }
    return out;
}

Dataset invert_normalization(const Dataset& ds, const NormStats& stats) {
    check_dims(ds, stats);
    Dataset out = ds;
    for (auto& s : out.sites) {
        for (Eigen::Index f = 0; f < s.forcing.cols(); ++f) {
            const auto& m = stats.forcing[static_cast<std::size_t>(f)];
            s.forcing.col(f) = s.forcing.col(f).array() * m.std + m.mean;
        }
        for (std::size_t a = 0; a < s.static_attrs.size(); ++a)
            s.static_attrs[a] = s.static_attrs[a] * stats.attrs[a].std + stats.attrs[a].mean;
        for (double& v : s.target)
            if (!is_missing(v)) v = stats.denormalize_target(v);
    }
    return out;
}

Dataset subset_by_region(const Dataset& ds, const std::function<bool(const RegionCode&)>& keep) {
    Dataset out;
    out.time_axis = ds.time_axis;
    out.feature_names = ds.feature_names;
    out.attr_names = ds.attr_names;
    for (const auto& s : ds.sites)
        if (keep(s.region)) out.sites.push_back(s);
    return out;
}

Dataset subset_by_ids(const Dataset& ds, const std::vector<std::string>& ids) {
    std::unordered_map<std::string, const Site*> index;
    for (const auto& s : ds.sites) index.emplace(s.id, &s);
    Dataset out;
    out.time_axis = ds.time_axis;
    out.feature_names = ds.feature_names;
    out.attr_names = ds.attr_names;
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw DataError("unknown site '" + id + "'");
        out.sites.push_back(*it->second);
    }
    return out;
}

Dataset slice_time(const Dataset& ds, std::size_t begin, std::size_t end) {
    if (begin > end || end > ds.num_steps()) throw ContractError("slice_time: window out of range");
    const auto len = static_cast<Eigen::Index>(end - begin);
    Dataset out;
    out.time_axis.assign(ds.time_axis.begin() + static_cast<std::ptrdiff_t>(begin),
                         ds.time_axis.begin() + static_cast<std::ptrdiff_t>(end));
    out.feature_names = ds.feature_names;
    out.attr_names = ds.attr_names;
    out.sites.reserve(ds.sites.size());
    for (const auto& s : ds.sites) {
        Site c;
        c.id = s.id;
        c.region = s.region;
        c.static_attrs = s.static_attrs;
        c.forcing = s.forcing.middleRows(static_cast<Eigen::Index>(begin), len);
        c.target.assign(s.target.begin() + static_cast<std::ptrdiff_t>(begin),
                        s.target.begin() + static_cast<std::ptrdiff_t>(end));
        out.sites.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// File ingestion

namespace {

struct SeriesRows {
    std::vector<Date> dates;
    std::vector<std::vector<double>> values;
    std::size_t first_line = 0;
};

std::map<std::string, SeriesRows> read_series(const std::filesystem::path& path, std::vector<std::string>& value_names,
                                              bool allow_missing, const std::set<std::string, std::less<>>& known) {
    CsvReader reader(path);
    auto header = reader.expect_header({"site_id", "date"});
    value_names.assign(header.begin() + 2, header.end());
    if (value_names.empty()) reader.fail("no value columns");
    std::map<std::string, SeriesRows> rows;
    std::string current;
    std::set<std::string> finished;
    while (auto row = reader.next()) {
        if (row->size() != header.size())
            reader.fail("expected " + std::to_string(header.size()) + " columns, found " + std::to_string(row->size()));
        const auto& id = (*row)[0];
        if (!known.count(id)) reader.fail("site '" + id + "' not listed in sites.csv");
        if (id != current) {
            if (finished.count(id)) reader.fail("rows for site '" + id + "' are not contiguous");
            if (!current.empty()) finished.insert(current);
            current = id;
        }
        auto& series = rows[id];
        if (series.dates.empty()) series.first_line = reader.line();
        Date d;
        try {
            d = parse_date((*row)[1]);
        } catch (const ParseError& e) {
            reader.fail(e.what());
        }
        if (!series.dates.empty() && d <= series.dates.back()) reader.fail("dates for site '" + id + "' not increasing");
        series.dates.push_back(d);
        std::vector<double> vals;
        vals.reserve(value_names.size());
        for (std::size_t c = 2; c < row->size(); ++c) {
            const auto& cell = (*row)[c];
            if (cell == kMissingToken) {
                if (!allow_missing) reader.fail("missing value in column " + header[c] + " (forcing must be complete)");
                vals.push_back(kMissing);
            } else {
                vals.push_back(reader.parse_double(cell, header[c]));
            }
        }
        series.values.push_back(std::move(vals));
    }
    return rows;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ds.synthetic = std::filesystem::exists(dir / "latent_truth.csv");
    const auto sites_path = dir / "sites.csv";
    std::set<std::string, std::less<>> known;
    {
        CsvReader reader(sites_path);
        auto header = reader.expect_header({"site_id", "region"});
        ds.attr_names.assign(header.begin() + 2, header.end());
        while (auto row = reader.next()) {
            if (row->size() != header.size())
                reader.fail("expected " + std::to_string(header.size()) + " columns, found " + std::to_string(row->size()));
            Site s;
            s.id = (*row)[0];
            if (s.id.empty()) reader.fail("empty site id");
            if (!known.insert(s.id).second) reader.fail("duplicate site id '" + s.id + "'");
            try {
                s.region = parse_region_code((*row)[1]);
            } catch (const ParseError& e) {
                reader.fail(e.what());
            }
            if (!s.region.is_level3()) reader.fail("region '" + s.region.str() + "' is not a level-III code");
            for (std::size_t c = 2; c < row->size(); ++c) s.static_attrs.push_back(reader.parse_double((*row)[c], header[c]));
            ds.sites.push_back(std::move(s));
        }
    }
    if (ds.sites.empty()) throw DataError(sites_path.string() + ": no sites");

    const auto forcing_path = dir / "forcing.csv";
    auto forcing = read_series(forcing_path, ds.feature_names, false, known);
    std::vector<std::string> target_names;
    const auto target_path = dir / "target.csv";
    auto target = read_series(target_path, target_names, true, known);
    if (target_names.size() != 1 || target_names[0] != "value")
        throw DataError(target_path.string() + ":1: header must be site_id,date,value");

    for (auto& s : ds.sites) {
        auto fit = forcing.find(s.id);
        if (fit == forcing.end()) throw DataError(forcing_path.string() + ": no rows for site '" + s.id + "'");
        if (ds.time_axis.empty()) ds.time_axis = fit->second.dates;
        if (fit->second.dates != ds.time_axis)
            throw DataError(forcing_path.string() + ":" + std::to_string(fit->second.first_line) + ": site '" + s.id +
                            "' has a ragged time axis (" + std::to_string(fit->second.dates.size()) + " rows, expected " +
                            std::to_string(ds.time_axis.size()) + ")");
        auto tit = target.find(s.id);
        if (tit == target.end()) throw DataError(target_path.string() + ": no rows for site '" + s.id + "'");
        if (tit->second.dates != ds.time_axis)
            throw DataError(target_path.string() + ":" + std::to_string(tit->second.first_line) + ": site '" + s.id +
                            "' has a ragged time axis");
        const auto T = ds.time_axis.size();
        s.forcing.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(ds.feature_names.size()));
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t f = 0; f < ds.feature_names.size(); ++f)
                s.forcing(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f)) = fit->second.values[t][f];
        s.target.resize(T);
        for (std::size_t t = 0; t < T; ++t) s.target[t] = tit->second.values[t][0];
    }
    ds.validate();
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::string sites = "site_id,region";
    for (const auto& a : ds.attr_names) sites += "," + a;
    sites += '\n';
    for (const auto& s : ds.sites) {
        sites += s.id + "," + s.region.str();
        for (double v : s.static_attrs) sites += "," + format_double(v);
        sites += '\n';
    }
    write_text_file(dir / "sites.csv", sites);

    std::vector<std::string> dates;
    dates.reserve(ds.time_axis.size());
    for (auto d : ds.time_axis) dates.push_back(format_date(d));

    std::string forcing = "site_id,date";
    for (const auto& f : ds.feature_names) forcing += "," + f;
    forcing += '\n';
    std::string target = "site_id,date,value\n";
    for (const auto& s : ds.sites) {
        for (std::size_t t = 0; t < ds.time_axis.size(); ++t) {
            forcing += s.id;
            forcing += ',';
            forcing += dates[t];
            for (Eigen::Index f = 0; f < s.forcing.cols(); ++f) {
                forcing += ',';
                forcing += format_double(s.forcing(static_cast<Eigen::Index>(t), f));
            }
            forcing += '\n';
            target += s.id;
            target += ',';
            target += dates[t];
            target += ',';
            target += is_missing(s.target[t]) ? std::string(kMissingToken) : format_double(s.target[t]);
            target += '\n';
        }
    }
    write_text_file(dir / "forcing.csv", forcing);
    write_text_file(dir / "target.csv", target);
}

}  // namespace synergy
