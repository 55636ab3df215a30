#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "kselect/errors.hpp"

namespace kselect {

inline double gaussian_density(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Local-linear regression of y on x with a Gaussian kernel, evaluated at each
// x[i]. Reproduces affine sequences exactly. Bandwidths below 1e-6 are
// treated as the degenerate kernel, returning y unchanged.
inline std::vector<double> local_linear_smooth(std::span<const double> x,
                                               std::span<const double> y, double bandwidth) {
    if (x.size() != y.size()) throw LengthMismatch(x.size(), y.size());
    std::vector<double> out(y.begin(), y.end());
    if (bandwidth < 1e-6 || x.size() < 2) return out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
        for (std::size_t m = 0; m < x.size(); ++m) {
            const double dx = x[m] - x0;
            const double w = gaussian_density(dx / bandwidth);
            s0 += w;
            s1 += w * dx;
            s2 += w * dx * dx;
            t0 += w * y[m];
            t1 += w * dx * y[m];
        }
        const double denom = s0 * s2 - s1 * s1;
        // denom vanishes only when all kernel mass sits at x0.
        out[i] = denom > 1e-300 ? (s2 * t0 - s1 * t1) / denom : t0 / s0;
    }
    return out;
}

}  // namespace kselect
