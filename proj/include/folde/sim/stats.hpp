#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "folde/error.hpp"

namespace folde {

// Linear interpolation between order statistics; q in [0, 1].
inline double percentile(std::span<const double> values, double q) {
    if (values.empty()) throw InvariantError("percentile of empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw InvariantError("percentile fraction must be in [0, 1]");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double h = q * double(v.size() - 1);
    const auto lo = std::size_t(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = 0.5 * double(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = double(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) throw NumericError("correlation undefined: zero variance");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

// Rank correlation, average ranks for ties.
inline double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw InvariantError("spearman needs equal lengths >= 2");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

struct WilcoxonResult {
    double p_value = 1.0;
    double statistic = 0.0;  // W+, sum of ranks of positive differences
    std::size_t n = 0;       // nonzero differences
    bool exact = false;
};

inline constexpr std::size_t kWilcoxonExactLimit = 25;

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// One-sided signed-rank test of "differences tend to be positive". Zeros are
// dropped, ties get average ranks. Exact for n <= 25 (distribution of W+ over
// all 2^n sign patterns by dynamic programming on doubled ranks), normal
// approximation with tie and continuity correction above.
inline WilcoxonResult wilcoxon_one_sided(std::span<const double> differences) {
    std::vector<double> d;
    for (double x : differences) {
        if (!std::isfinite(x)) throw InvariantError("Wilcoxon: non-finite difference");
        if (x != 0.0) d.push_back(x);
    }
    if (d.empty()) throw InvariantError("Wilcoxon: all differences are zero");
    std::vector<double> mags(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) mags[i] = std::abs(d[i]);
    const auto ranks = average_ranks(mags);

    WilcoxonResult res;
    res.n = d.size();
    // Doubled ranks are integers even with ties.
    std::vector<std::uint64_t> r2(d.size());
    std::uint64_t w2 = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        r2[i] = std::uint64_t(std::llround(2.0 * ranks[i]));
        if (d[i] > 0) w2 += r2[i];
    }
    res.statistic = double(w2) / 2.0;

    if (d.size() <= kWilcoxonExactLimit) {
        const std::uint64_t total = std::accumulate(r2.begin(), r2.end(), std::uint64_t{0});
        std::vector<std::uint64_t> count(total + 1, 0);
        count[0] = 1;
        std::uint64_t reach = 0;
        for (auto r : r2) {
            reach += r;
            for (std::uint64_t s = reach; s >= r; --s) {
                count[s] += count[s - r];
                if (s == r) break;
            }
        }
        std::uint64_t tail = 0;
        for (std::uint64_t s = w2; s <= total; ++s) tail += count[s];
        res.p_value = double(tail) / std::ldexp(1.0, int(d.size()));
        res.exact = true;
        return res;
    }

    const double n = double(d.size());
    double tie_term = 0.0;
    {
        std::vector<double> sorted = ranks;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            const double t = double(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    const double mean = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (res.statistic - 0.5 - mean) / std::sqrt(var);
    res.p_value = normal_upper_tail(z);
    return res;
}

inline double mean_of(std::span<const double> v) {
    if (v.empty()) throw InvariantError("mean of empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

inline double median_of(std::span<const double> v) { return percentile(v, 0.5); }

}  // namespace folde
