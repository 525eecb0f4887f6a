#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the library code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace oracle {

inline bool missing(double v) { return v != v; }

inline std::optional<double> rmse(const std::vector<double>& obs, const std::vector<double>& pred) {
    double s = 0;
    int n = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (missing(obs[i])) continue;
        s += std::pow(obs[i] - pred[i], 2);
        ++n;
    }
    if (n == 0) return std::nullopt;
    return std::sqrt(s / n);
}

// Pairwise-difference form: r = sum_{i<j} dx dy / sqrt(sum dx^2 sum dy^2), with
// dx = x_i - x_j. Avoids means entirely.
inline std::optional<double> corr(const std::vector<double>& obs, const std::vector<double>& pred) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < obs.size(); ++i)
        if (!missing(obs[i])) {
            x.push_back(obs[i]);
            y.push_back(pred[i]);
        }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
    if (x.size() < 2 || sxx == 0 || syy == 0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

inline std::optional<double> nse(const std::vector<double>& obs, const std::vector<double>& pred) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < obs.size(); ++i)
        if (!missing(obs[i])) {
            x.push_back(obs[i]);
            y.push_back(pred[i]);
        }
    if (x.size() < 2) return std::nullopt;
    // variance via pairwise differences: sum (x - mean)^2 = sum_{i<j} (x_i - x_j)^2 / n
    double sst = 0, sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sse += (x[i] - y[i]) * (x[i] - y[i]);
        for (std::size_t j = i + 1; j < x.size(); ++j) sst += (x[i] - x[j]) * (x[i] - x[j]);
    }
    sst /= static_cast<double>(x.size());
    if (sst == 0) return std::nullopt;
    return 1.0 - sse / sst;
}

// Brute-force ranks: rank_i = 1 + #{j: v_j < v_i} + (#{j: v_j == v_i} - 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (v[j] < v[i]) ++less;
            if (v[j] == v[i]) ++equal;
        }
        r[i] = 1 + less + (equal - 1) / 2;
    }
    return r;
}

struct Wilcoxon {
    double p = 1;
    double statistic = 0;
    std::size_t n = 0;
};

/// Enumerates all 2^n sign patterns over the observed ranks.
inline Wilcoxon wilcoxon_enumerate(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] - b[i] != 0) d.push_back(a[i] - b[i]);
    Wilcoxon w;
    w.n = d.size();
    if (d.empty()) return w;
    std::vector<double> mag(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
    auto r = ranks(mag);
    double wp = 0, wm = 0;
    for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? wp : wm) += r[i];
    w.statistic = std::min(wp, wm);
    const std::uint64_t patterns = 1ULL << d.size();
    std::uint64_t as_extreme = 0;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        double plus = 0, minus = 0;
        for (std::size_t i = 0; i < d.size(); ++i) ((mask >> i) & 1 ? plus : minus) += r[i];
        if (std::min(plus, minus) <= w.statistic + 1e-9) ++as_extreme;
    }
    w.p = std::min(1.0, static_cast<double>(as_extreme) / static_cast<double>(patterns));
    return w;
}

/// Central finite difference of f over a flat parameter vector.
inline std::vector<double> central_difference(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                                              double step = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + step;
        const double up = f(x);
        x[i] = orig - step;
        const double down = f(x);
        x[i] = orig;
        g[i] = (up - down) / (2 * step);
    }
    return g;
}

inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace oracle
