#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kselect/edf.hpp"
#include "kselect/kmeans.hpp"
#include "kselect/matrix.hpp"
#include "kselect/parallel.hpp"
#include "kselect/rng.hpp"

namespace kselect {

enum class Method { BicEdf, BicNaive, Gap, Fk, Silhouette, Jump };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::BicEdf: return "bic_edf";
        case Method::BicNaive: return "bic_naive";
        case Method::Gap: return "gap";
        case Method::Fk: return "fk";
        case Method::Silhouette: return "silhouette";
        case Method::Jump: return "jump";
    }
    return "?";
}

inline std::optional<Method> method_from_name(const std::string& name) {
    for (Method m : {Method::BicEdf, Method::BicNaive, Method::Gap, Method::Fk,
                     Method::Silhouette, Method::Jump})
        if (name == method_name(m)) return m;
    return std::nullopt;
}

struct SelectionResult {
    Method method = Method::BicEdf;
    int k_hat = 1;
    std::vector<int> ks;          // k values covered by scores
    std::vector<double> scores;   // per-k trace; semantics depend on the method
    std::vector<double> aux;      // optional per-k extras (df used, gap s_k); may be empty
    double runtime_ms = 0.0;      // wall time of the selector, excluding the shared fits
};

// Smallest k strictly below its left neighbour and no greater than its right
// neighbour; with no such interior dip, the endpoint with the lower score
// (ties toward the smaller k).
inline int first_local_minimum(std::span<const double> scores, std::span<const int> ks) {
    if (scores.size() != ks.size()) throw LengthMismatch(scores.size(), ks.size());
    if (scores.size() < 2) throw ConfigError("need at least two scores");
    for (std::size_t i = 1; i + 1 < scores.size(); ++i)
        if (scores[i] < scores[i - 1] && scores[i] <= scores[i + 1]) return ks[i];
    return scores.front() <= scores.back() ? ks.front() : ks.back();
}

namespace detail {

inline std::vector<double> rss_over_range(const FitSeries& series) {
    std::vector<double> rss;
    rss.reserve(static_cast<std::size_t>(series.k_max - series.k_min + 1));
    for (int k = series.k_min; k <= series.k_max; ++k) rss.push_back(series.at(k).within_ss);
    return rss;
}

inline std::vector<int> ks_over_range(const FitSeries& series) {
    std::vector<int> ks;
    ks.reserve(static_cast<std::size_t>(series.k_max - series.k_min + 1));
    for (int k = series.k_min; k <= series.k_max; ++k) ks.push_back(k);
    return ks;
}

}  // namespace detail

// BIC over the fit series with the supplied per-k degrees of freedom:
//
//   bic(k) = n d log(max(RSS_k, eps)) + log(n d) df_k
//
// where eps floors the RSS at 1e-12 of the total SS so the log stays finite.
// Chooses k by the first-local-minimum rule.
inline SelectionResult bic_select(const DataMatrix& x, const FitSeries& series,
                                  std::span<const double> df, Method method) {
    const std::vector<int> ks = detail::ks_over_range(series);
    if (df.size() != ks.size()) throw LengthMismatch(df.size(), ks.size());
    const std::vector<double> rss = detail::rss_over_range(series);
    const double eps = 1e-12 * total_ss(x);
    if (std::all_of(rss.begin(), rss.end(), [&](double r) { return r <= eps; }))
        throw AllDegenerate("every fit in the series has numerically zero residual");
    const double nd = static_cast<double>(x.n()) * static_cast<double>(x.d());
    SelectionResult result;
    result.method = method;
    result.ks = ks;
    result.scores.resize(ks.size());
    result.aux.assign(df.begin(), df.end());
    for (std::size_t i = 0; i < ks.size(); ++i)
        result.scores[i] = nd * std::log(std::max(rss[i], eps)) + std::log(nd) * df[i];
    result.k_hat = first_local_minimum(result.scores, result.ks);
    return result;
}

inline SelectionResult bic_edf_select(const DataMatrix& x, const FitSeries& series,
                                      const DfCurve& curve, bool use_smoothed = true) {
    return bic_select(x, series, use_smoothed ? curve.smoothed_df : curve.raw_df, Method::BicEdf);
}

inline SelectionResult bic_naive_select(const DataMatrix& x, const FitSeries& series) {
    std::vector<double> df;
    for (int k = series.k_min; k <= series.k_max; ++k)
        df.push_back(static_cast<double>(k) * static_cast<double>(x.d()));
    return bic_select(x, series, df, Method::BicNaive);
}

namespace detail {

// Row-order-invariant content hash, so that the Gap reference draws do not
// change under a permutation of the data rows.
inline std::uint64_t sorted_data_hash(const DataMatrix& x) {
    std::vector<std::size_t> order(x.n());
    for (std::size_t i = 0; i < x.n(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(x.row(a).begin(), x.row(a).end(), x.row(b).begin(),
                                            x.row(b).end());
    });
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    auto mix_bytes = [&h](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    };
    for (std::size_t i : order)
        for (double v : x.row(i)) mix_bytes(v);
    return h;
}

}  // namespace detail

// Gap statistic with a per-feature uniform reference distribution over the
// observed ranges. Reference solutions use a single initialisation. Picks the
// smallest k with Gap(k) >= Gap(k+1) - s_{k+1}, falling back to k_max.
inline SelectionResult gap_select(const DataMatrix& x, const FitSeries& series, int B,
                                  std::uint64_t seed, int threads = 1) {
    if (B < 2) throw ConfigError("gap statistic needs B >= 2 reference data sets");
    const std::vector<int> ks = detail::ks_over_range(series);
    const std::size_t n_k = ks.size();
    std::vector<double> lo(x.d()), hi(x.d());
    for (std::size_t j = 0; j < x.d(); ++j) {
        lo[j] = hi[j] = x(0, j);
        for (std::size_t i = 1; i < x.n(); ++i) {
            lo[j] = std::min(lo[j], x(i, j));
            hi[j] = std::max(hi[j], x(i, j));
        }
    }
    const std::uint64_t ref_seed = derive_seed(seed, {detail::sorted_data_hash(x)});
    // log W*_k(b) for every reference draw and k.
    std::vector<double> ref_log(static_cast<std::size_t>(B) * n_k);
    parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
        Rng rng(derive_seed(ref_seed, {0x9abu, b}));
        Matrix ref(x.n(), x.d());
        for (std::size_t i = 0; i < x.n(); ++i)
            for (std::size_t j = 0; j < x.d(); ++j) ref(i, j) = rng.uniform(lo[j], hi[j]);
        DataMatrix ref_x(std::move(ref));
        for (std::size_t ki = 0; ki < n_k; ++ki) {
            const KMeansFit fit =
                best_of_inits(ref_x, ks[ki], 1, derive_seed(ref_seed, {0xb0fu, b, ki}));
            ref_log[b * n_k + ki] = std::log(std::max(fit.within_ss, 1e-300));
        }
    });
    SelectionResult result;
    result.method = Method::Gap;
    result.ks = ks;
    result.scores.resize(n_k);
    result.aux.resize(n_k);
    for (std::size_t ki = 0; ki < n_k; ++ki) {
        double mean = 0.0;
        for (int b = 0; b < B; ++b) mean += ref_log[static_cast<std::size_t>(b) * n_k + ki];
        mean /= static_cast<double>(B);
        double var = 0.0;
        for (int b = 0; b < B; ++b) {
            const double diff = ref_log[static_cast<std::size_t>(b) * n_k + ki] - mean;
            var += diff * diff;
        }
        var /= static_cast<double>(B);
        result.scores[ki] = mean - std::log(std::max(series.at(ks[ki]).within_ss, 1e-300));
        result.aux[ki] = std::sqrt(var) * std::sqrt(1.0 + 1.0 / static_cast<double>(B));
    }
    result.k_hat = ks.back();
    for (std::size_t ki = 0; ki + 1 < n_k; ++ki)
        if (result.scores[ki] >= result.scores[ki + 1] - result.aux[ki + 1]) {
            result.k_hat = ks[ki];
            break;
        }
    return result;
}

// Decision rule of the gap statistic on precomputed values; exposed for
// direct checks against worked examples.
inline int gap_rule(std::span<const double> gap, std::span<const double> s,
                    std::span<const int> ks) {
    for (std::size_t i = 0; i + 1 < gap.size(); ++i)
        if (gap[i] >= gap[i + 1] - s[i + 1]) return ks[i];
    return ks.back();
}

// The f(K) statistic: ratio of successive within-cluster sums of squares
// against its expected decay under a single cluster, with dimension weights
//
//   alpha_2 = 1 - 3/(4d),   alpha_{K+1} = alpha_K + (1 - alpha_K)/6.
//
// Selects argmin f if the minimum falls below 0.85, otherwise one cluster.
inline SelectionResult fk_select(const DataMatrix& x, const FitSeries& series) {
    if (x.d() < 2) throw ConfigError("f(K) requires at least two dimensions");
    const std::vector<int> ks = detail::ks_over_range(series);
    std::vector<double> alpha(static_cast<std::size_t>(series.k_max) + 1, 0.0);
    if (series.k_max >= 2) {
        alpha[2] = 1.0 - 3.0 / (4.0 * static_cast<double>(x.d()));
        for (int k = 3; k <= series.k_max; ++k)
            alpha[static_cast<std::size_t>(k)] =
                alpha[static_cast<std::size_t>(k - 1)] +
                (1.0 - alpha[static_cast<std::size_t>(k - 1)]) / 6.0;
    }
    SelectionResult result;
    result.method = Method::Fk;
    result.ks = ks;
    result.scores.resize(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const int k = ks[i];
        if (k == series.k_min) {
            result.scores[i] = 1.0;
            continue;
        }
        const double prev = series.at(k - 1).within_ss;
        result.scores[i] =
            prev == 0.0 ? 1.0 : series.at(k).within_ss / (alpha[static_cast<std::size_t>(k)] * prev);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.scores.size(); ++i)
        if (result.scores[i] < result.scores[best]) best = i;
    result.k_hat = result.scores[best] < 0.85 ? ks[best] : 1;
    return result;
}

// Mean silhouette width over k in [max(2, k_min), min(k_max, n-1)]; singleton
// clusters contribute zero. Selects the k with the largest mean.
inline SelectionResult silhouette_select(const DataMatrix& x, const FitSeries& series) {
    const std::size_t n = x.n();
    const int k_lo = std::max(2, series.k_min);
    const int k_hi = std::min<int>(series.k_max, static_cast<int>(n) - 1);
    if (k_lo > k_hi) throw ConfigError("silhouette needs some k in [2, n-1]");
    // Full pairwise distances: quadratic in n, acceptable for the data sizes
    // this library targets.
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = i + 1; m < n; ++m) {
            const double dd = std::sqrt(squared_distance(x.row(i), x.row(m)));
            dist[i * n + m] = dd;
            dist[m * n + i] = dd;
        }
    SelectionResult result;
    result.method = Method::Silhouette;
    for (int k = k_lo; k <= k_hi; ++k) {
        const KMeansFit& fit = series.at(k);
        std::vector<double> cluster_sum(static_cast<std::size_t>(k));
        double mean_s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(cluster_sum.begin(), cluster_sum.end(), 0.0);
            for (std::size_t m = 0; m < n; ++m)
                cluster_sum[static_cast<std::size_t>(fit.assignments[m])] += dist[i * n + m];
            const int c = fit.assignments[i];
            const int size_c = fit.cluster_sizes[static_cast<std::size_t>(c)];
            if (size_c <= 1) continue;  // singleton: s(i) = 0
            const double a = cluster_sum[static_cast<std::size_t>(c)] / (size_c - 1);
            double b = std::numeric_limits<double>::infinity();
            for (int l = 0; l < k; ++l) {
                if (l == c) continue;
                b = std::min(b, cluster_sum[static_cast<std::size_t>(l)] /
                                    fit.cluster_sizes[static_cast<std::size_t>(l)]);
            }
            const double denom = std::max(a, b);
            if (denom > 0.0) mean_s += (b - a) / denom;
        }
        result.ks.push_back(k);
        result.scores.push_back(mean_s / static_cast<double>(n));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.scores.size(); ++i)
        if (result.scores[i] > result.scores[best]) best = i;
    result.k_hat = result.ks[best];
    return result;
}

// Jump statistic: distortions D_k = W_k/(n d) transformed by D^(-Y) with
// Y = d/2 by default; selects the largest first difference. The transform of
// the empty model is zero, and distortions are floored like the BIC RSS.
inline SelectionResult jump_select(const DataMatrix& x, const FitSeries& series,
                                   std::optional<double> power = std::nullopt) {
    const std::vector<int> ks = detail::ks_over_range(series);
    const double y = power.value_or(static_cast<double>(x.d()) / 2.0);
    const double nd = static_cast<double>(x.n()) * static_cast<double>(x.d());
    const double eps = 1e-12 * total_ss(x) / nd;
    SelectionResult result;
    result.method = Method::Jump;
    result.ks = ks;
    result.scores.resize(ks.size());
    double prev_t = 0.0;  // transformed distortion of the empty model
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double distortion = std::max(series.at(ks[i]).within_ss / nd, eps);
        const double t = std::pow(distortion, -y);
        result.scores[i] = t - prev_t;
        prev_t = t;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.scores.size(); ++i)
        if (result.scores[i] > result.scores[best]) best = i;
    result.k_hat = ks[best];
    return result;
}

struct SelectConfig {
    std::set<Method> methods = {Method::BicEdf, Method::BicNaive, Method::Gap,
                                Method::Fk,     Method::Silhouette, Method::Jump};
    double bandwidth = 3.0;
    bool use_smoothed = true;
    int gap_B = 50;
    std::optional<double> jump_power;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct SelectAllOutcome {
    std::vector<SelectionResult> results;
    std::vector<std::pair<Method, std::string>> failures;
    std::optional<DfCurve> df;  // present when bic_edf ran
};

// Runs every enabled selector against the same fit series. A failing method
// is recorded and does not abort the others.
inline SelectAllOutcome select_all(const DataMatrix& x, const FitSeries& series,
                                   const SelectConfig& config) {
    SelectAllOutcome outcome;
    auto run = [&](Method m, auto&& fn) {
        if (!config.methods.contains(m)) return;
        const auto start = std::chrono::steady_clock::now();
        try {
            SelectionResult result = fn();
            result.runtime_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                    .count();
            outcome.results.push_back(std::move(result));
        } catch (const std::exception& e) {
            outcome.failures.emplace_back(m, e.what());
        }
    };
    run(Method::BicEdf, [&] {
        DfCurve curve = df_curve(x, series, config.bandwidth, config.threads);
        SelectionResult r = bic_edf_select(x, series, curve, config.use_smoothed);
        outcome.df = std::move(curve);
        return r;
    });
    run(Method::BicNaive, [&] { return bic_naive_select(x, series); });
    run(Method::Gap, [&] { return gap_select(x, series, config.gap_B, config.seed, config.threads); });
    run(Method::Fk, [&] { return fk_select(x, series); });
    run(Method::Silhouette, [&] { return silhouette_select(x, series); });
    run(Method::Jump, [&] { return jump_select(x, series, config.jump_power); });
    return outcome;
}

}  // namespace kselect
