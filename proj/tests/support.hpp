#pragma once

// Shared test utilities: independent oracles and data generators. Nothing in
// here is used by the library itself.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cpw/innovation.hpp"
#include "cpw/rng.hpp"

namespace testsupport {

/// Kolmogorov-Smirnov distance of a sample to the uniform distribution on [0,1].
inline double ks_uniform(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(std::abs(xs[i] - lo), std::abs(xs[i] - hi)));
    }
    return d;
}

/// KS distance to an arbitrary CDF.
inline double ks_to_cdf(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max(d, std::max(std::abs(f - static_cast<double>(i) / n),
                                 std::abs(f - static_cast<double>(i + 1) / n)));
    }
    return d;
}

/// Gauss-Legendre nodes and weights on [0,1], by Newton iteration on the
/// Legendre recurrence. Serves as the quadrature oracle for kernel
/// orthonormality checks.
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline Quadrature gauss_legendre_unit(std::size_t n) {
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Initial guess (Chebyshev-like), then Newton on P_n.
        double x = std::cos(3.14159265358979323846 * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 1; k < n; ++k) {
                const double p2 = ((2.0 * k + 1.0) * x * p1 - static_cast<double>(k) * p0) /
                                  (static_cast<double>(k) + 1.0);
                p0 = p1;
                p1 = p2;
            }
            const double dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 1; k < n; ++k) {
            const double p2 = ((2.0 * k + 1.0) * x * p1 - static_cast<double>(k) * p0) /
                              (static_cast<double>(k) + 1.0);
            p0 = p1;
            p1 = p2;
        }
        const double dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        q.nodes[i] = 0.5 * (x + 1.0);
        q.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);  // includes the 1/2 interval scaling
    }
    return q;
}

/// Stationary AR(p) sample path: exact stationary start for p == 1, long
/// burn-in otherwise. Deliberately independent of the library's generators.
inline std::vector<double> gen_ar(std::span<const double> coeffs, double sigma,
                                  std::size_t n, cpw::Rng& rng, double mean = 0.0) {
    const std::size_t p = coeffs.size();
    std::vector<double> x;
    x.reserve(n + p);
    if (p == 1) {
        const double a = coeffs[0];
        x.push_back(sigma / std::sqrt(1.0 - a * a) * rng.normal());
    } else {
        for (std::size_t i = 0; i < p; ++i) x.push_back(0.0);
    }
    const std::size_t burn = p <= 1 ? 0 : 5000;
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t t = 0; t < burn + n; ++t) {
        double v = sigma * rng.normal();
        for (std::size_t i = 0; i < p && i < x.size(); ++i) {
            v += coeffs[i] * x[x.size() - 1 - i];
        }
        x.push_back(v);
        if (x.size() > p + 1) x.erase(x.begin());
        if (t >= burn) out.push_back(mean + v);
    }
    return out;
}

/// Lag-k sample autocorrelation.
inline double autocorr(std::span<const double> xs, std::size_t lag) {
    const double m = cpw::math::mean(xs);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        den += (xs[t] - m) * (xs[t] - m);
        if (t >= lag) num += (xs[t] - m) * (xs[t - lag] - m);
    }
    return num / den;
}

} // namespace testsupport
