#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "kselect/errors.hpp"
#include "kselect/kmeans.hpp"

namespace kselect {

// Cross-tabulation of two labelings of the same points. Label values may be
// arbitrary integers; they are mapped to dense indices.
struct ContingencyTable {
    std::size_t r = 0;  // distinct labels in a
    std::size_t s = 0;  // distinct labels in b
    std::vector<std::int64_t> counts;  // r x s, row-major
    std::vector<std::int64_t> row_sums;
    std::vector<std::int64_t> col_sums;
    std::int64_t total = 0;

    std::int64_t at(std::size_t i, std::size_t j) const { return counts[i * s + j]; }
};

inline ContingencyTable contingency_table(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw LengthMismatch(a.size(), b.size());
    if (a.size() < 2) throw LengthMismatch(a.size(), 2);
    std::map<int, std::size_t> index_a, index_b;
    for (int v : a) index_a.emplace(v, 0);
    for (int v : b) index_b.emplace(v, 0);
    std::size_t next = 0;
    for (auto& [value, idx] : index_a) idx = next++;
    next = 0;
    for (auto& [value, idx] : index_b) idx = next++;

    ContingencyTable table;
    table.r = index_a.size();
    table.s = index_b.size();
    table.counts.assign(table.r * table.s, 0);
    table.row_sums.assign(table.r, 0);
    table.col_sums.assign(table.s, 0);
    table.total = static_cast<std::int64_t>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t ia = index_a[a[i]];
        const std::size_t ib = index_b[b[i]];
        ++table.counts[ia * table.s + ib];
        ++table.row_sums[ia];
        ++table.col_sums[ib];
    }
    return table;
}

namespace detail {

inline double choose2(std::int64_t x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

}  // namespace detail

// Proportion of point pairs grouped consistently in both labelings.
inline double rand_index(std::span<const int> a, std::span<const int> b) {
    const ContingencyTable t = contingency_table(a, b);
    double same_both = 0.0;
    for (std::int64_t c : t.counts) same_both += detail::choose2(c);
    double same_a = 0.0, same_b = 0.0;
    for (std::int64_t c : t.row_sums) same_a += detail::choose2(c);
    for (std::int64_t c : t.col_sums) same_b += detail::choose2(c);
    const double pairs = detail::choose2(t.total);
    return (pairs + 2.0 * same_both - same_a - same_b) / pairs;
}

// Hubert-Arabie adjusted Rand index. When the adjustment denominator is zero
// (both partitions trivial), identical partitions score 1 and anything else 0.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    const ContingencyTable t = contingency_table(a, b);
    double same_both = 0.0;
    for (std::int64_t c : t.counts) same_both += detail::choose2(c);
    double same_a = 0.0, same_b = 0.0;
    for (std::int64_t c : t.row_sums) same_a += detail::choose2(c);
    for (std::int64_t c : t.col_sums) same_b += detail::choose2(c);
    const double expected = same_a * same_b / detail::choose2(t.total);
    const double maximum = 0.5 * (same_a + same_b);
    if (maximum == expected) return same_both == expected ? 1.0 : 0.0;
    return (same_both - expected) / (maximum - expected);
}

// The k in the series whose fit agrees best with the ground truth; ties go to
// the smaller k. Bounds what any selector can achieve on this series.
inline std::pair<int, double> ideal_selection(const FitSeries& series, std::span<const int> truth) {
    int best_k = series.k_min;
    double best_ari = -std::numeric_limits<double>::infinity();
    for (int k = series.k_min; k <= series.k_max; ++k) {
        const double value = adjusted_rand_index(series.at(k).assignments, truth);
        if (value > best_ari) {
            best_ari = value;
            best_k = k;
        }
    }
    return {best_k, best_ari};
}

// Multiple ground-truth label sets: maximises the mean ARI across them.
inline std::pair<int, double> ideal_selection(const FitSeries& series,
                                              std::span<const std::vector<int>> truths) {
    if (truths.empty()) throw ConfigError("need at least one ground-truth label set");
    int best_k = series.k_min;
    double best_ari = -std::numeric_limits<double>::infinity();
    for (int k = series.k_min; k <= series.k_max; ++k) {
        double mean = 0.0;
        for (const auto& truth : truths)
            mean += adjusted_rand_index(series.at(k).assignments, truth);
        mean /= static_cast<double>(truths.size());
        if (mean > best_ari) {
            best_ari = mean;
            best_k = k;
        }
    }
    return {best_k, best_ari};
}

inline double normalized_regret(double ari_ideal, double ari_method) {
    if (ari_ideal <= 0.0)
        throw NonpositiveIdeal("ideal ARI is not positive; regret is undefined");
    return (ari_ideal - ari_method) / ari_ideal;
}

// Quantile with linear interpolation between order statistics (the "type 7"
// convention): h = (n-1) p/100, interpolate between floor(h) and floor(h)+1.
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ConfigError("percentile of an empty list");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

struct Summary {
    double median = 0.0;
    std::vector<double> centiles;        // requested percentile levels
    std::vector<double> centile_values;  // matching values
};

inline Summary summarize(std::span<const double> values,
                         std::span<const double> centiles = std::span<const double>{}) {
    std::vector<double> copy(values.begin(), values.end());
    Summary summary;
    summary.median = percentile(copy, 50.0);
    for (double p : centiles) {
        summary.centiles.push_back(p);
        summary.centile_values.push_back(percentile(copy, p));
    }
    return summary;
}

}  // namespace kselect
