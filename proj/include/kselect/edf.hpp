#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "kselect/kmeans.hpp"
#include "kselect/matrix.hpp"
#include "kselect/parallel.hpp"
#include "kselect/rng.hpp"
#include "kselect/smooth.hpp"

namespace kselect {

// Plug-in mean matrix and residual scale taken from a model with k' clusters,
// used when evaluating the degrees of freedom of smaller models.
struct NuisanceParams {
    Matrix mu_tilde;           // n x d fitted values of the k' model
    double sigma_tilde = 0.0;  // RMS residual about mu_tilde
    int k_prime = 0;
};

inline NuisanceParams nuisance_from_fit(const DataMatrix& x, const KMeansFit& fit_kprime) {
    if (fit_kprime.assignments.size() != x.n() || fit_kprime.d() != x.d())
        throw Error("nuisance fit does not match the data matrix");
    if (fit_kprime.within_ss <= 0.0)
        throw ZeroResidual("k' model has zero residual; reduce k'");
    NuisanceParams nuis;
    nuis.mu_tilde = fitted_values(fit_kprime);
    nuis.sigma_tilde =
        std::sqrt(fit_kprime.within_ss / (static_cast<double>(x.n()) * static_cast<double>(x.d())));
    nuis.k_prime = fit_kprime.k;
    return nuis;
}

// The coordinate shift delta at which a datum's nearest centroid switches
// from its own cluster to a given other cluster, or no such shift.
struct DeltaSolution {
    double delta = 0.0;
    int target_cluster = -1;
    bool exists = false;
};

// Solves for the shift delta along coordinate j at which the datum, dragging
// its own centroid along at rate 1/n_c, becomes equidistant from the other
// cluster's centroid:
//
//   || x + delta e_j - mu_c - (delta/n_c) e_j ||^2 = || x + delta e_j - mu_l ||^2
//
// Expanding with a = 1 - 1/n_c, u = x - mu_c, w = x - mu_l gives
//
//   delta^2 (a^2 - 1) + 2 delta (a u_j - w_j) + (||u||^2 - ||w||^2) = 0.
//
// The root of smaller magnitude is returned; when both roots have equal
// magnitude the negative one is kept. A negative discriminant means no shift
// along this coordinate ever reassigns the datum (exists = false). The larger
// root is computed as -(b + sign(b) sqrt(disc))/2 and the smaller from the
// root product, which avoids cancellation.
inline DeltaSolution reassignment_delta(std::span<const double> x_row, std::size_t j,
                                        std::span<const double> mu_c, int n_c,
                                        std::span<const double> mu_l, int target_cluster = -1) {
    DeltaSolution sol;
    sol.target_cluster = target_cluster;
    const double a = 1.0 - 1.0 / static_cast<double>(n_c);
    double uu = 0.0, ww = 0.0;
    for (std::size_t m = 0; m < x_row.size(); ++m) {
        const double u = x_row[m] - mu_c[m];
        const double w = x_row[m] - mu_l[m];
        uu += u * u;
        ww += w * w;
    }
    const double qa = a * a - 1.0;  // always negative: a lies in [0, 1)
    const double qb = 2.0 * (a * (x_row[j] - mu_c[j]) - (x_row[j] - mu_l[j]));
    const double qc = uu - ww;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return sol;
    const double sqrt_disc = std::sqrt(disc);
    const double q = -0.5 * (qb + std::copysign(sqrt_disc, qb));
    const double root_big = q / qa;
    const double root_small = q != 0.0 ? qc / q : 0.0;
    double delta;
    if (std::abs(root_small) < std::abs(root_big))
        delta = root_small;
    else if (std::abs(root_big) < std::abs(root_small))
        delta = root_big;
    else
        delta = std::min(root_big, root_small);
    sol.delta = delta;
    sol.exists = true;
    return sol;
}

// Size of the jump in the datum's fitted value across the reassignment point,
// oriented as (limit from above) - (limit from below). On the own-cluster
// side the fitted value is mu_c_j + delta/n_c; on the other side it is the
// mean of cluster l after absorbing the shifted datum. delta = 0 uses the
// positive-side orientation.
inline double discontinuity_magnitude(double x_ij, double delta_l, double mu_c_j, double mu_l_j,
                                      int n_c, int n_l) {
    const double nl = static_cast<double>(n_l);
    const double jump = mu_c_j - nl / (nl + 1.0) * mu_l_j - x_ij / (nl + 1.0) +
                        delta_l * (nl + 1.0 - static_cast<double>(n_c)) /
                            (static_cast<double>(n_c) * (nl + 1.0));
    return delta_l < 0.0 ? jump : -jump;
}

// Excess degrees of freedom: over all matrix entries and all candidate
// reassignment targets, the Gaussian density at the reassignment point times
// the size of the fitted-value jump there, scaled by the residual level.
// Entry/target pairs with no reassignment shift contribute zero.
inline double excess_df(const DataMatrix& x, const KMeansFit& fit, const NuisanceParams& nuis) {
    if (!(nuis.sigma_tilde > 0.0)) throw ZeroResidual("nuisance sigma must be positive");
    if (nuis.mu_tilde.rows() != x.n() || nuis.mu_tilde.cols() != x.d())
        throw Error("nuisance dimensions do not match the data matrix");
    const std::size_t n = x.n();
    const std::size_t d = x.d();
    const int k = fit.k;
    const double inv_sigma = 1.0 / nuis.sigma_tilde;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = fit.assignments[i];
        const auto x_row = x.row(i);
        const auto mu_c = fit.centroids.row(static_cast<std::size_t>(c));
        const int n_c = fit.cluster_sizes[static_cast<std::size_t>(c)];
        for (int l = 0; l < k; ++l) {
            if (l == c) continue;
            const auto mu_l = fit.centroids.row(static_cast<std::size_t>(l));
            const int n_l = fit.cluster_sizes[static_cast<std::size_t>(l)];
            for (std::size_t j = 0; j < d; ++j) {
                const DeltaSolution sol = reassignment_delta(x_row, j, mu_c, n_c, mu_l, l);
                if (!sol.exists) continue;
                const double jump =
                    discontinuity_magnitude(x(i, j), sol.delta, mu_c[j], mu_l[j], n_c, n_l);
                // The orientation convention keeps the jump nonnegative;
                // the absolute value below also covers near-boundary
                // geometries where the drag term flips the sign.
                assert(jump >= -1e-9);
                const double z = (x(i, j) + sol.delta - nuis.mu_tilde(i, j)) * inv_sigma;
                sum += gaussian_density(z) * std::abs(jump) * inv_sigma;
            }
        }
    }
    return sum;
}

// Effective degrees of freedom: explicit model dimension plus the excess.
inline double total_df(const KMeansFit& fit, double excess) {
    if (excess < 0.0) throw Error("excess degrees of freedom must be nonnegative");
    return static_cast<double>(fit.k) * static_cast<double>(fit.d()) + excess;
}

// Raw and smoothed effective-df estimates for every k in the series' range,
// with nuisance parameters taken from the k_max + 1 fit.
struct DfCurve {
    std::vector<int> ks;
    std::vector<double> raw_df;
    std::vector<double> excess_df;
    std::vector<double> smoothed_df;
    NuisanceParams nuisance;
};

inline DfCurve df_curve(const DataMatrix& x, const FitSeries& series, double bandwidth = 3.0,
                        int threads = 1) {
    DfCurve curve;
    curve.nuisance = nuisance_from_fit(x, series.at(series.k_max_plus()));
    const std::size_t count = static_cast<std::size_t>(series.k_max - series.k_min + 1);
    curve.ks.resize(count);
    curve.raw_df.resize(count);
    curve.excess_df.resize(count);
    parallel_for(count, threads, [&](std::size_t idx) {
        const int k = series.k_min + static_cast<int>(idx);
        const KMeansFit& fit = series.at(k);
        const double excess = excess_df(x, fit, curve.nuisance);
        curve.ks[idx] = k;
        curve.excess_df[idx] = excess;
        curve.raw_df[idx] = total_df(fit, excess);
    });
    std::vector<double> kd(count);
    for (std::size_t i = 0; i < count; ++i) kd[i] = static_cast<double>(curve.ks[i]);
    curve.smoothed_df = local_linear_smooth(kd, curve.raw_df, bandwidth);
    return curve;
}

// Effective df of a fixed k-cluster model under nuisance parameters from a
// range of k' models, one fresh fit per k'. The k' = k entry, where the model
// supplies its own nuisance values, under-estimates the df and shows up as a
// dip in the curve.
inline std::vector<std::pair<int, double>> df_vs_kprime_curve(const DataMatrix& x, int k,
                                                              int kprime_lo, int kprime_hi,
                                                              int n_init, std::uint64_t seed,
                                                              int threads = 1) {
    if (kprime_lo < 1 || kprime_lo > kprime_hi || std::cmp_greater(kprime_hi, x.n() - 1))
        throw ConfigError("k' range must lie within [1, n-1]");
    const KMeansFit fit = best_of_inits(x, k, n_init, derive_seed(seed, {0xf17u}));
    std::vector<std::pair<int, double>> out(static_cast<std::size_t>(kprime_hi - kprime_lo + 1));
    parallel_for(out.size(), threads, [&](std::size_t idx) {
        const int kp = kprime_lo + static_cast<int>(idx);
        const KMeansFit fit_kp = best_of_inits(x, kp, n_init, derive_seed(seed, {0x5eedu}));
        const NuisanceParams nuis = nuisance_from_fit(x, fit_kp);
        out[idx] = {kp, total_df(fit, excess_df(x, fit, nuis))};
    });
    return out;
}

// Direct Monte-Carlo estimate of the effective degrees of freedom: draws
// n_reps data sets around the fixed mean matrix, fits k-means to each, and
// sums the per-entry sample covariances between fitted values and data,
// divided by sigma^2. Uses the n_reps - 1 covariance denominator.
inline double monte_carlo_df_oracle(const Matrix& mu_truth, double sigma, int k, int n_reps,
                                    int n_init, std::uint64_t seed, int threads = 1) {
    if (n_reps < 2) throw ConfigError("need at least 2 replicates");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    const std::size_t n = mu_truth.rows();
    const std::size_t d = mu_truth.cols();
    std::vector<Matrix> fitted(static_cast<std::size_t>(n_reps));
    std::vector<Matrix> data(static_cast<std::size_t>(n_reps));
    parallel_for(static_cast<std::size_t>(n_reps), threads, [&](std::size_t rep) {
        Rng rng(derive_seed(seed, {0x0dacu, rep}));
        Matrix draw(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) draw(i, j) = mu_truth(i, j) + sigma * rng.normal();
        DataMatrix x(draw);
        const KMeansFit fit = best_of_inits(x, k, n_init, derive_seed(seed, {0xf1fu, rep}));
        fitted[rep] = fitted_values(fit);
        data[rep] = std::move(draw);
    });
    Matrix fitted_mean(n, d);
    Matrix data_mean(n, d);
    for (int rep = 0; rep < n_reps; ++rep)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                fitted_mean(i, j) += fitted[static_cast<std::size_t>(rep)](i, j);
                data_mean(i, j) += data[static_cast<std::size_t>(rep)](i, j);
            }
    const double inv_reps = 1.0 / static_cast<double>(n_reps);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            fitted_mean(i, j) *= inv_reps;
            data_mean(i, j) *= inv_reps;
        }
    double cov_sum = 0.0;
    for (int rep = 0; rep < n_reps; ++rep)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                cov_sum += (fitted[static_cast<std::size_t>(rep)](i, j) - fitted_mean(i, j)) *
                           (data[static_cast<std::size_t>(rep)](i, j) - data_mean(i, j));
    cov_sum /= static_cast<double>(n_reps - 1);
    return cov_sum / (sigma * sigma);
}

// Monte-Carlo check of the covariance identity for the one-dimensional step
// model f(x) = 1[x > threshold] under X ~ N(mu, sigma^2):
//
//   Cov(f(X), X) / sigma^2 = phi((threshold - mu)/sigma) / sigma.
//
// Returns the empirical left side, the closed-form right side, and the
// standard error of the left side.
struct SteinCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double se = 0.0;
};

inline SteinCheck stein_identity_check(double mu, double sigma, double threshold, int n_draws,
                                       std::uint64_t seed) {
    if (n_draws < 1000) throw ConfigError("need at least 1000 draws");
    Rng rng(seed);
    std::vector<double> xs(static_cast<std::size_t>(n_draws));
    std::vector<double> fs(static_cast<std::size_t>(n_draws));
    double x_mean = 0.0, f_mean = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = mu + sigma * rng.normal();
        fs[i] = xs[i] > threshold ? 1.0 : 0.0;
        x_mean += xs[i];
        f_mean += fs[i];
    }
    x_mean /= static_cast<double>(n_draws);
    f_mean /= static_cast<double>(n_draws);
    double cov = 0.0, term_var = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double term = (fs[i] - f_mean) * (xs[i] - x_mean);
        cov += term;
        term_var += term * term;
    }
    const double mean_term = cov / static_cast<double>(n_draws);
    cov /= static_cast<double>(n_draws - 1);
    term_var = term_var / static_cast<double>(n_draws) - mean_term * mean_term;

    SteinCheck check;
    check.lhs = cov / (sigma * sigma);
    check.rhs = gaussian_density((threshold - mu) / sigma) / sigma;
    check.se = std::sqrt(term_var / static_cast<double>(n_draws)) / (sigma * sigma);
    return check;
}

}  // namespace kselect
