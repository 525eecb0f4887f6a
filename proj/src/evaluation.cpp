#include "synergy/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "synergy/csv.hpp"
#include "synergy/dataset.hpp"
#include "synergy/error.hpp"

namespace synergy {

namespace {

struct Observed {
    std::vector<double> obs;
    std::vector<double> pred;
};

Observed observed_pairs(std::span<const double> obs, std::span<const double> pred) {
    if (obs.size() != pred.size()) throw ContractError("metric: observation and prediction lengths differ");
    Observed o;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (is_missing(obs[i])) continue;
        o.obs.push_back(obs[i]);
        o.pred.push_back(pred[i]);
    }
    return o;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::string format_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(kMissingToken); }

std::optional<double> parse_opt(const CsvReader& reader, const std::string& cell, std::string_view column) {
    if (cell == kMissingToken) return std::nullopt;
    return reader.parse_double(cell, column);
}

}  // namespace

std::optional<double> rmse(std::span<const double> obs, std::span<const double> pred) {
    auto o = observed_pairs(obs, pred);
    if (o.obs.empty()) return std::nullopt;
    double sse = 0.0;
    for (std::size_t i = 0; i < o.obs.size(); ++i) sse += (o.pred[i] - o.obs[i]) * (o.pred[i] - o.obs[i]);
    return std::sqrt(sse / static_cast<double>(o.obs.size()));
}

std::optional<double> pearson_corr(std::span<const double> obs, std::span<const double> pred) {
    auto o = observed_pairs(obs, pred);
    if (o.obs.size() < 2) return std::nullopt;
    const double mo = mean_of(o.obs);
    const double mp = mean_of(o.pred);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < o.obs.size(); ++i) {
        const double dx = o.obs[i] - mo;
        const double dy = o.pred[i] - mp;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> nse(std::span<const double> obs, std::span<const double> pred) {
    auto o = observed_pairs(obs, pred);
    if (o.obs.size() < 2) return std::nullopt;
    const double mo = mean_of(o.obs);
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < o.obs.size(); ++i) {
        sse += (o.obs[i] - o.pred[i]) * (o.obs[i] - o.pred[i]);
        sst += (o.obs[i] - mo) * (o.obs[i] - mo);
    }
    if (sst == 0.0) return std::nullopt;
    return 1.0 - sse / sst;
}

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::Rmse: return "rmse";
        case Metric::Corr: return "corr";
        case Metric::Nse: return "nse";
    }
    return "?";
}

Metric parse_metric(std::string_view name) {
    if (name == "rmse") return Metric::Rmse;
    if (name == "corr") return Metric::Corr;
    if (name == "nse") return Metric::Nse;
    throw ParseError("unknown metric '" + std::string(name) + "'");
}

bool lower_is_better(Metric m) { return m == Metric::Rmse; }

std::optional<double> SiteMetrics::get(Metric m) const {
    switch (m) {
        case Metric::Rmse: return rmse;
        case Metric::Corr: return corr;
        case Metric::Nse: return nse;
    }
    return std::nullopt;
}

SiteMetrics compute_site_metrics(std::string site_id, std::string region, std::string model_id,
                                 std::span<const double> obs, std::span<const double> pred) {
    SiteMetrics m;
    m.site_id = std::move(site_id);
    m.region = std::move(region);
    m.model_id = std::move(model_id);
    m.rmse = synergy::rmse(obs, pred);
    m.corr = pearson_corr(obs, pred);
    m.nse = synergy::nse(obs, pred);
    m.n_obs = static_cast<std::size_t>(std::count_if(obs.begin(), obs.end(), [](double v) { return !is_missing(v); }));
    return m;
}

std::vector<double> average_ranks(std::span<const double> values) {
    const auto n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return values[i] < values[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMethod method) {
    if (a.size() != b.size()) throw ContractError("wilcoxon_signed_rank: samples are not paired");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    WilcoxonResult res;
    res.n_effective = diffs.size();
    if (diffs.empty()) {
        res.degenerate = true;
        res.p_value = 1.0;
        return res;
    }
    std::vector<double> mags(diffs.size());
    std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::abs(d); });
    const auto ranks = average_ranks(mags);
    double w_plus = 0.0, w_minus = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i) (diffs[i] > 0 ? w_plus : w_minus) += ranks[i];
    res.statistic = std::min(w_plus, w_minus);
    const auto n = diffs.size();

    const bool exact = method == WilcoxonMethod::Exact || (method == WilcoxonMethod::Auto && n <= kWilcoxonExactMax);
    res.exact = exact;
    if (exact) {
        // Average ranks are multiples of 1/2, so doubled ranks are integers and the
        // number of sign assignments reaching each doubled W+ can be counted exactly.
        std::vector<long> doubled(n);
        long total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            doubled[i] = std::lround(2.0 * ranks[i]);
            total += doubled[i];
        }
        std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
        counts[0] = 1.0;
        long reach = 0;
        for (long r : doubled) {
            for (long s = reach; s >= 0; --s)
                if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
            reach += r;
        }
        const long w2 = std::lround(2.0 * res.statistic);
        double tail = 0.0;
        for (long s = 0; s <= w2; ++s) tail += counts[static_cast<std::size_t>(s)];
        res.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
    } else {
        const double nn = static_cast<double>(n);
        const double mean = nn * (nn + 1.0) / 4.0;
        double tie = 0.0;
        std::vector<double> sorted = mags;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j < n && sorted[j] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i);
            tie += t * t * t - t;
            i = j;
        }
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie / 48.0;
        if (var <= 0.0) {
            res.p_value = 1.0;
        } else {
            const double z = std::max(0.0, std::abs(res.statistic - mean) - 0.5) / std::sqrt(var);
            res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
        }
    }
    return res;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ContractError("quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) {
    if (values.empty()) throw ContractError("median of empty sample");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

PairedComparison compare_models(const std::vector<SiteMetrics>& metrics_a, const std::vector<SiteMetrics>& metrics_b,
                                Metric metric, std::string region) {
    std::map<std::string, const SiteMetrics*> b_index;
    for (const auto& m : metrics_b) b_index.emplace(m.site_id, &m);
    PairedComparison pc;
    pc.region = std::move(region);
    pc.metric = metric;
    if (!metrics_a.empty()) pc.model_a = metrics_a.front().model_id;
    if (!metrics_b.empty()) pc.model_b = metrics_b.front().model_id;
    std::size_t common = 0;
    for (const auto& ma : metrics_a) {
        auto it = b_index.find(ma.site_id);
        if (it == b_index.end()) continue;
        ++common;
        const auto va = ma.get(metric);
        const auto vb = it->second->get(metric);
        if (!va || !vb) {
            ++pc.excluded;
            continue;
        }
        pc.site_ids.push_back(ma.site_id);
        pc.values_a.push_back(*va);
        pc.values_b.push_back(*vb);
    }
    if (common == 0) throw ContractError("compare_models: no common sites");
    if (pc.site_ids.empty()) throw ContractError("compare_models: no site with a defined " + std::string(to_string(metric)) + " in both models");
    pc.median_a = median(pc.values_a);
    pc.median_b = median(pc.values_b);
    std::size_t better = 0;
    for (std::size_t i = 0; i < pc.n(); ++i) {
        const bool a_better = lower_is_better(metric) ? pc.values_a[i] < pc.values_b[i] : pc.values_a[i] > pc.values_b[i];
        if (a_better) ++better;
    }
    pc.pct_better = 100.0 * static_cast<double>(better) / static_cast<double>(pc.n());
    pc.wilcoxon = wilcoxon_signed_rank(pc.values_a, pc.values_b);
    return pc;
}

std::string format_metrics_csv(const std::vector<SiteMetrics>& metrics) {
    std::string out = "site_id,region,model_id,rmse,corr,nse,n_obs\n";
    for (const auto& m : metrics)
        out += m.site_id + "," + m.region + "," + m.model_id + "," + format_opt(m.rmse) + "," + format_opt(m.corr) + "," +
               format_opt(m.nse) + "," + std::to_string(m.n_obs) + "\n";
    return out;
}

std::vector<SiteMetrics> read_metrics_csv(const std::filesystem::path& path) {
    CsvReader reader(path);
    reader.expect_header({"site_id", "region", "model_id", "rmse", "corr", "nse", "n_obs"});
    std::vector<SiteMetrics> out;
    while (auto row = reader.next()) {
        if (row->size() != 7) reader.fail("expected 7 columns");
        SiteMetrics m;
        m.site_id = (*row)[0];
        m.region = (*row)[1];
        m.model_id = (*row)[2];
        m.rmse = parse_opt(reader, (*row)[3], "rmse");
        m.corr = parse_opt(reader, (*row)[4], "corr");
        m.nse = parse_opt(reader, (*row)[5], "nse");
        m.n_obs = static_cast<std::size_t>(reader.parse_double((*row)[6], "n_obs"));
        out.push_back(std::move(m));
    }
    return out;
}

std::string format_comparisons_csv(const std::vector<PairedComparison>& comparisons) {
    std::string out(kComparisonHeader);
    out += '\n';
    for (const auto& c : comparisons)
        out += c.region + "," + std::string(to_string(c.metric)) + "," + format_double(c.wilcoxon.p_value) + "," +
               format_double(c.median_a) + "," + format_double(c.median_b) + "," + format_double(c.pct_better) + "," +
               std::to_string(c.n()) + "\n";
    return out;
}

std::vector<ComparisonRow> read_comparisons_csv(const std::filesystem::path& path) {
    CsvReader reader(path);
    reader.expect_header({"region", "metric", "p_value", "median_a", "median_b", "pct_better", "n"});
    std::vector<ComparisonRow> out;
    while (auto row = reader.next()) {
        if (row->size() != 7) reader.fail("expected 7 columns");
        ComparisonRow r;
        r.region = (*row)[0];
        r.metric = (*row)[1];
        r.p_value = reader.parse_double((*row)[2], "p_value");
        r.median_a = reader.parse_double((*row)[3], "median_a");
        r.median_b = reader.parse_double((*row)[4], "median_b");
        r.pct_better = reader.parse_double((*row)[5], "pct_better");
        r.n = static_cast<std::size_t>(reader.parse_double((*row)[6], "n"));
        out.push_back(r);
    }
    return out;
}

}  // namespace synergy
