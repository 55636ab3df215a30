#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "kselect/errors.hpp"
#include "kselect/matrix.hpp"
#include "kselect/parallel.hpp"
#include "kselect/rng.hpp"

namespace kselect {

struct KMeansFit {
    int k = 0;
    Matrix centroids;              // k x d
    std::vector<int> assignments;  // length n, values in [0, k)
    std::vector<int> cluster_sizes;
    double within_ss = 0.0;
    bool converged = false;
    int iterations = 0;

    std::size_t d() const { return centroids.cols(); }
};

// Fitted-value matrix: row i is the centroid of the cluster containing row i.
inline Matrix fitted_values(const KMeansFit& fit) {
    Matrix out(fit.assignments.size(), fit.centroids.cols());
    for (std::size_t i = 0; i < fit.assignments.size(); ++i) {
        const auto src = fit.centroids.row(static_cast<std::size_t>(fit.assignments[i]));
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

namespace detail {

inline std::size_t count_distinct_rows(const DataMatrix& x) {
    std::vector<std::size_t> order(x.n());
    for (std::size_t i = 0; i < x.n(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(x.row(a).begin(), x.row(a).end(), x.row(b).begin(),
                                            x.row(b).end());
    });
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < order.size(); ++i)
        if (!std::equal(x.row(order[i]).begin(), x.row(order[i]).end(),
                        x.row(order[i - 1]).begin()))
            ++distinct;
    return distinct;
}

inline bool rows_equal(std::span<const double> a, std::span<const double> b) {
    return std::equal(a.begin(), a.end(), b.begin());
}

// Forgy initialisation: k rows sampled uniformly, distinct as points.
inline Matrix forgy_init(const DataMatrix& x, int k, Rng& rng) {
    std::vector<std::size_t> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    // Termination is guaranteed by the caller's distinct-rows check; the cap
    // only guards against a broken precondition.
    for (long attempts = 0; std::cmp_less(chosen.size(), k); ++attempts) {
        if (attempts > 100000L * k) throw Error("internal: Forgy sampling failed to find distinct rows");
        const std::size_t i = rng.uniform_index(x.n());
        bool duplicate = false;
        for (std::size_t c : chosen)
            if (rows_equal(x.row(i), x.row(c))) {
                duplicate = true;
                break;
            }
        if (!duplicate) chosen.push_back(i);
    }
    Matrix centroids(static_cast<std::size_t>(k), x.d());
    for (std::size_t l = 0; std::cmp_less(l, k); ++l) {
        const auto src = x.row(chosen[l]);
        std::copy(src.begin(), src.end(), centroids.row(l).begin());
    }
    return centroids;
}

// Nearest centroid; ties resolved toward the lowest cluster index.
inline int nearest_centroid(std::span<const double> point, const Matrix& centroids) {
    int best = 0;
    double best_dist = squared_distance(point, centroids.row(0));
    for (std::size_t l = 1; l < centroids.rows(); ++l) {
        const double dist = squared_distance(point, centroids.row(l));
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(l);
        }
    }
    return best;
}

}  // namespace detail

// Lloyd's algorithm with Forgy initialisation. Stops when the assignments
// stop changing, when the relative objective change drops below tol, or after
// max_iter iterations. If a cluster empties, the point farthest from its
// current centroid is moved into it, so cluster sizes stay positive.
inline KMeansFit lloyd_fit(const DataMatrix& x, int k, std::uint64_t seed, int max_iter = 100,
                           double tol = 1e-10) {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (std::cmp_greater(k, x.n())) throw KTooLarge(k, x.n());
    if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
    if (tol < 0.0) throw ConfigError("tol must be nonnegative");
    if (k > 1 && detail::count_distinct_rows(x) < static_cast<std::size_t>(k))
        throw DegenerateData("fewer than k distinct rows");

    const std::size_t n = x.n();
    const std::size_t d = x.d();
    Rng rng(seed);
    Matrix centroids = detail::forgy_init(x, k, rng);
    std::vector<int> assign(n, -1);
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    double prev_obj = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iter = 0;

    for (; iter < max_iter; ++iter) {
        std::vector<int> new_assign(n);
        for (std::size_t i = 0; i < n; ++i)
            new_assign[i] = detail::nearest_centroid(x.row(i), centroids);

        std::fill(sizes.begin(), sizes.end(), 0);
        for (int a : new_assign) ++sizes[static_cast<std::size_t>(a)];

        // Empty-cluster repair: donate the globally worst-fit point, skipping
        // singleton donors.
        for (int l = 0; l < k; ++l) {
            if (sizes[static_cast<std::size_t>(l)] > 0) continue;
            std::size_t farthest = n;
            double far_dist = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[static_cast<std::size_t>(new_assign[i])] < 2) continue;
                const double dist =
                    squared_distance(x.row(i), centroids.row(static_cast<std::size_t>(new_assign[i])));
                if (dist > far_dist) {
                    far_dist = dist;
                    farthest = i;
                }
            }
            if (farthest == n) throw DegenerateData("cannot repair empty cluster");
            --sizes[static_cast<std::size_t>(new_assign[farthest])];
            new_assign[farthest] = l;
            ++sizes[static_cast<std::size_t>(l)];
        }

        Matrix new_centroids(static_cast<std::size_t>(k), d);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.row(i);
            auto dst = new_centroids.row(static_cast<std::size_t>(new_assign[i]));
            for (std::size_t j = 0; j < d; ++j) dst[j] += row[j];
        }
        for (int l = 0; l < k; ++l) {
            auto row = new_centroids.row(static_cast<std::size_t>(l));
            for (std::size_t j = 0; j < d; ++j) row[j] /= sizes[static_cast<std::size_t>(l)];
        }

        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            obj += squared_distance(x.row(i), new_centroids.row(static_cast<std::size_t>(new_assign[i])));

        const bool same_assignment = (new_assign == assign);
        assign = std::move(new_assign);
        centroids = std::move(new_centroids);
        if (same_assignment) {
            converged = true;
            ++iter;
            break;
        }
        if (std::isfinite(prev_obj) &&
            std::abs(prev_obj - obj) <= tol * std::max(prev_obj, std::numeric_limits<double>::min())) {
            converged = true;
            ++iter;
            break;
        }
        prev_obj = obj;
    }

    // Final within-cluster SS against the final centroids and assignments.
    double wss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        wss += squared_distance(x.row(i), centroids.row(static_cast<std::size_t>(assign[i])));

    KMeansFit fit;
    fit.k = k;
    fit.centroids = std::move(centroids);
    fit.assignments = std::move(assign);
    fit.cluster_sizes = std::move(sizes);
    fit.within_ss = wss;
    fit.converged = converged;
    fit.iterations = iter;
    return fit;
}

// Best of n_init Lloyd runs by within-cluster SS; exact ties keep the run
// with the lowest init index. Sub-seeds are derived per init, so the result
// is a pure function of (x, k, n_init, seed).
inline KMeansFit best_of_inits(const DataMatrix& x, int k, int n_init, std::uint64_t seed,
                               int max_iter = 100, double tol = 1e-10) {
    if (n_init < 1) throw ConfigError("n_init must be at least 1");
    KMeansFit best;
    bool have_best = false;
    for (int init = 0; init < n_init; ++init) {
        KMeansFit fit = lloyd_fit(x, k, derive_seed(seed, {static_cast<std::uint64_t>(k),
                                                           static_cast<std::uint64_t>(init)}),
                                  max_iter, tol);
        if (!have_best || fit.within_ss < best.within_ss) {
            best = std::move(fit);
            have_best = true;
        }
    }
    return best;
}

// Fits for every k in [k_min, k_max + 1] over the same data. The extra fit at
// k_max + 1 supplies the nuisance parameters for degrees-of-freedom
// estimation downstream.
struct FitSeries {
    int k_min = 1;
    int k_max = 1;
    std::vector<KMeansFit> fits;  // index 0 holds k_min, back() holds k_max + 1

    int k_max_plus() const { return k_max + 1; }

    const KMeansFit& at(int k) const {
        if (k < k_min || k > k_max + 1) throw Error("k outside fitted range");
        return fits[static_cast<std::size_t>(k - k_min)];
    }
};

inline FitSeries fit_series(const DataMatrix& x, int k_min, int k_max, int n_init,
                            std::uint64_t seed, int threads = 1, int max_iter = 100,
                            double tol = 1e-10) {
    if (k_min < 1 || k_min > k_max) throw ConfigError("need 1 <= k_min <= k_max");
    if (std::cmp_greater(k_max + 1, x.n())) throw KTooLarge(k_max + 1, x.n());
    FitSeries series;
    series.k_min = k_min;
    series.k_max = k_max;
    series.fits.resize(static_cast<std::size_t>(k_max + 2 - k_min));
    parallel_for(series.fits.size(), threads, [&](std::size_t idx) {
        const int k = k_min + static_cast<int>(idx);
        series.fits[idx] = best_of_inits(x, k, n_init, seed, max_iter, tol);
    });
    return series;
}

}  // namespace kselect
