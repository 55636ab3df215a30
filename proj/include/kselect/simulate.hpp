#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kselect/evaluate.hpp"
#include "kselect/kmeans.hpp"
#include "kselect/matrix.hpp"
#include "kselect/parallel.hpp"
#include "kselect/rng.hpp"
#include "kselect/selection.hpp"

namespace kselect {

enum class Scheme {
    AssumptionsMet,   // isotropic Gaussian components, shared scale
    VaryingScale,     // per-component isotropic scale in [0.5, 2] sigma
    VaryingShape,     // per-component random covariance, eigenvalues in [0.25, 4] sigma^2
    TTails,           // iid t_3 coordinates scaled by sigma
    UniformClusters,  // iid uniform coordinates with variance sigma^2
    Nonconvex         // Gaussian sample warped away from the component mean
};

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::AssumptionsMet: return "assumptions_met";
        case Scheme::VaryingScale: return "varying_scale";
        case Scheme::VaryingShape: return "varying_shape";
        case Scheme::TTails: return "t_tails";
        case Scheme::UniformClusters: return "uniform_clusters";
        case Scheme::Nonconvex: return "nonconvex";
    }
    return "?";
}

inline std::optional<Scheme> scheme_from_name(const std::string& name) {
    for (Scheme s : {Scheme::AssumptionsMet, Scheme::VaryingScale, Scheme::VaryingShape,
                     Scheme::TTails, Scheme::UniformClusters, Scheme::Nonconvex})
        if (name == scheme_name(s)) return s;
    return std::nullopt;
}

struct MixtureSpec {
    Scheme scheme = Scheme::AssumptionsMet;
    int k = 1;
    int d = 1;
    int n = 1;
    std::uint64_t seed = 0;
    double separation = 4.0;  // minimum pairwise mean distance, in units of base_sigma
    double base_sigma = 1.0;
};

struct LabeledDataset {
    DataMatrix x;
    std::vector<int> labels;  // generating component of each row, in [0, k)
    Matrix means;             // k x d component means
    MixtureSpec spec;
};

namespace detail {

// Component means are sampled uniformly in a hypercube and redrawn until all
// pairwise distances reach separation * base_sigma. The cube side grows with
// k so that the constraint stays satisfiable; if it is not, sampling gives up
// after 1e5 draws.
inline Matrix sample_means(int k, int d, double separation, double base_sigma, Rng& rng) {
    const double min_dist = separation * base_sigma;
    const double side =
        min_dist * (0.1 + std::pow(2.0 * static_cast<double>(k), 1.0 / static_cast<double>(d)));
    Matrix means(static_cast<std::size_t>(k), static_cast<std::size_t>(d));
    std::vector<double> candidate(static_cast<std::size_t>(d));
    long attempts = 0;
    for (int c = 0; c < k;) {
        if (++attempts > 100000)
            throw RejectionFailure("could not place component means: separation too large");
        for (auto& v : candidate) v = rng.uniform(0.0, side);
        bool ok = true;
        for (int q = 0; q < c && ok; ++q)
            ok = squared_distance(candidate, means.row(static_cast<std::size_t>(q))) >=
                 min_dist * min_dist;
        if (!ok) continue;
        std::copy(candidate.begin(), candidate.end(), means.row(static_cast<std::size_t>(c)).begin());
        ++c;
    }
    return means;
}

// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
inline Matrix random_orthogonal(int d, Rng& rng) {
    const std::size_t dim = static_cast<std::size_t>(d);
    Matrix q(dim, dim);
    for (std::size_t col = 0; col < dim; ++col) {
        std::vector<double> v(dim);
        double norm = 0.0;
        while (norm < 1e-12) {
            for (auto& value : v) value = rng.normal();
            for (std::size_t prev = 0; prev < col; ++prev) {
                double dot = 0.0;
                for (std::size_t i = 0; i < dim; ++i) dot += v[i] * q(i, prev);
                for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * q(i, prev);
            }
            norm = 0.0;
            for (double value : v) norm += value * value;
            norm = std::sqrt(norm);
        }
        for (std::size_t i = 0; i < dim; ++i) q(i, col) = v[i] / norm;
    }
    return q;
}

}  // namespace detail

// Draws a labelled mixture sample. Component sizes are balanced to within one
// point; rows are grouped by component.
inline LabeledDataset generate(const MixtureSpec& spec) {
    if (spec.k < 1 || spec.d < 1 || spec.n < spec.k)
        throw ConfigError("mixture spec needs k >= 1, d >= 1, n >= k");
    if (!(spec.separation > 0.0) || !(spec.base_sigma > 0.0))
        throw ConfigError("separation and base_sigma must be positive");
    Rng rng(spec.seed);
    const Matrix means = detail::sample_means(spec.k, spec.d, spec.separation, spec.base_sigma, rng);
    const std::size_t n = static_cast<std::size_t>(spec.n);
    const std::size_t d = static_cast<std::size_t>(spec.d);
    Matrix x(n, d);
    std::vector<int> labels(n);

    std::vector<std::size_t> sizes(static_cast<std::size_t>(spec.k), n / static_cast<std::size_t>(spec.k));
    for (std::size_t c = 0; c < n % static_cast<std::size_t>(spec.k); ++c) ++sizes[c];

    // Per-component residual generators for the two heterogeneous schemes.
    std::vector<double> comp_sigma;
    std::vector<Matrix> comp_transform;  // Q diag(sqrt(lambda)) for varying_shape
    if (spec.scheme == Scheme::VaryingScale)
        for (int c = 0; c < spec.k; ++c) comp_sigma.push_back(rng.uniform(0.5, 2.0) * spec.base_sigma);
    if (spec.scheme == Scheme::VaryingShape)
        for (int c = 0; c < spec.k; ++c) {
            Matrix q = detail::random_orthogonal(spec.d, rng);
            for (std::size_t col = 0; col < d; ++col) {
                const double lambda = rng.uniform(0.25, 4.0) * spec.base_sigma * spec.base_sigma;
                const double scale = std::sqrt(lambda);
                for (std::size_t row = 0; row < d; ++row) q(row, col) *= scale;
            }
            comp_transform.push_back(std::move(q));
        }

    const double uniform_half_width = std::sqrt(3.0) * spec.base_sigma;
    std::size_t row = 0;
    std::vector<double> z(d);
    for (int c = 0; c < spec.k; ++c) {
        const auto mean = means.row(static_cast<std::size_t>(c));
        for (std::size_t m = 0; m < sizes[static_cast<std::size_t>(c)]; ++m, ++row) {
            labels[row] = c;
            switch (spec.scheme) {
                case Scheme::AssumptionsMet:
                case Scheme::Nonconvex:
                    for (std::size_t j = 0; j < d; ++j)
                        x(row, j) = mean[j] + spec.base_sigma * rng.normal();
                    break;
                case Scheme::VaryingScale:
                    for (std::size_t j = 0; j < d; ++j)
                        x(row, j) = mean[j] + comp_sigma[static_cast<std::size_t>(c)] * rng.normal();
                    break;
                case Scheme::VaryingShape: {
                    for (auto& value : z) value = rng.normal();
                    const Matrix& t = comp_transform[static_cast<std::size_t>(c)];
                    for (std::size_t j = 0; j < d; ++j) {
                        double value = 0.0;
                        for (std::size_t m2 = 0; m2 < d; ++m2) value += t(j, m2) * z[m2];
                        x(row, j) = mean[j] + value;
                    }
                    break;
                }
                case Scheme::TTails:
                    // t_3 residuals keep their natural variance of 3 sigma^2.
                    for (std::size_t j = 0; j < d; ++j)
                        x(row, j) = mean[j] + spec.base_sigma * rng.student_t3();
                    break;
                case Scheme::UniformClusters:
                    for (std::size_t j = 0; j < d; ++j)
                        x(row, j) = mean[j] + rng.uniform(-uniform_half_width, uniform_half_width);
                    break;
            }
        }
    }

    if (spec.scheme == Scheme::Nonconvex) {
        // Push each point away from its component mean, harder the closer it
        // sits to a point of another component. A stand-in for generators
        // that bend clusters around their neighbours.
        const double magnitude = 3.0 * spec.base_sigma;
        const double length_scale = 2.0 * spec.base_sigma;
        Matrix shifted = x;
        for (std::size_t i = 0; i < n; ++i) {
            double nearest_other = std::numeric_limits<double>::infinity();
            for (std::size_t m = 0; m < n; ++m)
                if (labels[m] != labels[i])
                    nearest_other = std::min(nearest_other, squared_distance(x.row(i), x.row(m)));
            nearest_other = std::sqrt(nearest_other);
            const auto mean = means.row(static_cast<std::size_t>(labels[i]));
            double norm = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x(i, j) - mean[j];
                norm += diff * diff;
            }
            norm = std::sqrt(norm);
            if (norm < 1e-12) continue;
            const double push = magnitude * std::exp(-nearest_other / length_scale);
            for (std::size_t j = 0; j < d; ++j)
                shifted(i, j) = x(i, j) + push * (x(i, j) - mean[j]) / norm;
        }
        x = std::move(shifted);
    }

    return LabeledDataset{DataMatrix(std::move(x)), std::move(labels), means, spec};
}

struct ScenarioConfig {
    int k_min = 1;
    int k_max = 30;
    int n_init = 10;
    bool standardize = true;
    double bandwidth = 3.0;
    int gap_B = 50;
    std::set<Method> methods = {Method::BicEdf, Method::BicNaive, Method::Gap,
                                Method::Fk,     Method::Silhouette, Method::Jump};
    std::optional<double> jump_power;
    int threads = 1;
};

struct MethodScenario {
    Method method;
    std::vector<double> k_hats;    // per completed rep
    std::vector<double> ari100s;   // 100 * ARI per completed rep
    Summary k_hat_summary;
    Summary ari_summary;
};

struct ScenarioSummary {
    std::vector<MethodScenario> methods;
    std::vector<std::pair<int, std::string>> failures;  // rep index, message
    int reps = 0;
};

// Generates `reps` data sets from the spec (sub-seeded per rep), runs the fit
// series and the enabled selectors on each, and summarises per-method k-hat
// and 100*ARI with median and 10th/90th centiles.
inline ScenarioSummary run_scenario(const MixtureSpec& spec, int reps, const ScenarioConfig& config,
                                    std::uint64_t seed) {
    if (reps < 1) throw ConfigError("need at least one replicate");
    struct RepOutcome {
        std::map<Method, std::pair<double, double>> by_method;  // k_hat, 100*ARI
        std::optional<std::string> failure;
    };
    std::vector<RepOutcome> outcomes(static_cast<std::size_t>(reps));
    parallel_for(static_cast<std::size_t>(reps), config.threads, [&](std::size_t rep) {
        try {
            MixtureSpec rep_spec = spec;
            rep_spec.seed = derive_seed(seed, {0xda7au, rep});
            const LabeledDataset data = generate(rep_spec);
            const DataMatrix x = config.standardize ? standardize(data.x) : data.x;
            const FitSeries series =
                fit_series(x, config.k_min, config.k_max, config.n_init,
                           derive_seed(seed, {0xf17u, rep}), 1);
            SelectConfig select_config;
            select_config.methods = config.methods;
            select_config.bandwidth = config.bandwidth;
            select_config.gap_B = config.gap_B;
            select_config.jump_power = config.jump_power;
            select_config.seed = derive_seed(seed, {0x6a9u, rep});
            const SelectAllOutcome selected = select_all(x, series, select_config);
            if (!selected.failures.empty())
                throw Error(std::string(method_name(selected.failures.front().first)) + ": " +
                            selected.failures.front().second);
            for (const SelectionResult& result : selected.results) {
                const double ari =
                    adjusted_rand_index(series.at(result.k_hat).assignments, data.labels);
                outcomes[rep].by_method[result.method] = {static_cast<double>(result.k_hat),
                                                          100.0 * ari};
            }
        } catch (const std::exception& e) {
            outcomes[rep].failure = e.what();
        }
    });

    ScenarioSummary summary;
    summary.reps = reps;
    for (std::size_t rep = 0; rep < outcomes.size(); ++rep)
        if (outcomes[rep].failure)
            summary.failures.emplace_back(static_cast<int>(rep), *outcomes[rep].failure);
    for (Method m : config.methods) {
        MethodScenario ms;
        ms.method = m;
        for (const RepOutcome& outcome : outcomes) {
            const auto it = outcome.by_method.find(m);
            if (it == outcome.by_method.end()) continue;
            ms.k_hats.push_back(it->second.first);
            ms.ari100s.push_back(it->second.second);
        }
        if (!ms.k_hats.empty()) {
            const double centiles[] = {10.0, 90.0};
            ms.k_hat_summary = summarize(ms.k_hats, centiles);
            ms.ari_summary = summarize(ms.ari100s, centiles);
        }
        summary.methods.push_back(std::move(ms));
    }
    return summary;
}

}  // namespace kselect
