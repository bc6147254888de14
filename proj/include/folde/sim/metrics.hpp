#pragma once

#include <algorithm>
#include <set>
#include <span>
#include <vector>

#include "folde/core/dataset.hpp"
#include "folde/error.hpp"
#include "folde/sim/stats.hpp"

namespace folde {

inline constexpr double kTopDecileQuantile = 0.90;
inline constexpr double kTopPercentileQuantile = 0.99;
inline constexpr double kDifficultyQuantile = 0.99375;

// Activity cut-offs computed on the full dataset (visible and held out).
struct HitThresholds {
    double top_decile = 0.0;
    double top_percentile = 0.0;

    static HitThresholds of(const Dataset& ds) {
        const auto a = ds.activities();
        return {percentile(a, kTopDecileQuantile), percentile(a, kTopPercentileQuantile)};
    }
};

namespace detail {

inline double activity_of(const Dataset& ds, const Variant& v) {
    const auto idx = ds.find(v);
    if (!idx) throw InvariantError("variant " + render(v) + " is not in the dataset");
    return ds[*idx].activity;
}

}  // namespace detail

// Selected variants at or above the dataset's 90th activity percentile.
inline std::size_t top_decile_hits(std::span<const Variant> selected, const Dataset& ds) {
    const double t = HitThresholds::of(ds).top_decile;
    return std::size_t(std::count_if(selected.begin(), selected.end(),
                                     [&](const Variant& v) { return detail::activity_of(ds, v) >= t; }));
}

// True iff some selected variant is at or above the 99th percentile.
inline bool top_percentile_success(std::span<const Variant> selected, const Dataset& ds) {
    const double t = HitThresholds::of(ds).top_percentile;
    return std::any_of(selected.begin(), selected.end(),
                       [&](const Variant& v) { return detail::activity_of(ds, v) >= t; });
}

struct LociDiversity {
    std::size_t unique_loci = 0;
    std::size_t new_loci = 0;  // unique loci never mutated in `history`

    friend bool operator==(const LociDiversity&, const LociDiversity&) = default;
};

inline LociDiversity batch_loci_diversity(std::span<const Variant> batch, std::span<const Variant> history) {
    std::set<std::uint32_t> seen;
    for (const auto& v : history)
        for (const auto& m : v.mutations()) seen.insert(m.position);
    std::set<std::uint32_t> loci;
    for (const auto& v : batch)
        for (const auto& m : v.mutations()) loci.insert(m.position);
    LociDiversity d;
    d.unique_loci = loci.size();
    d.new_loci = std::size_t(std::count_if(loci.begin(), loci.end(), [&](auto p) { return !seen.contains(p); }));
    return d;
}

// (A_99.375% - A_min) / (A_max - A_min): how far random screening of ten
// 16-variant rounds is expected to get.
inline double difficulty(std::span<const double> activities) {
    if (activities.size() < 2) throw InvariantError("difficulty needs at least 2 activities");
    const auto [lo, hi] = std::minmax_element(activities.begin(), activities.end());
    if (*hi == *lo) throw InvariantError("difficulty undefined: all activities equal");
    return (percentile(activities, kDifficultyQuantile) - *lo) / (*hi - *lo);
}

inline double difficulty(const Dataset& ds) { return difficulty(ds.activities()); }

}  // namespace folde
