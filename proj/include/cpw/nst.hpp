#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cpw/innovation.hpp"
#include "cpw/math.hpp"

namespace cpw::nst {

inline constexpr std::size_t max_order = 16;

enum class Hypothesis { H0, H1 };

struct NstConfig {
    std::size_t K = 4;       // number of Legendre kernels
    double epsilon = 0.05;   // target false-positive rate

    void validate() const {
        if (K < 1 || K > max_order) {
            throw std::invalid_argument("NstConfig: K must be in [1,16]");
        }
        if (!(epsilon > 0.0 && epsilon < 1.0)) {
            throw std::invalid_argument("NstConfig: epsilon must be in (0,1)");
        }
    }
};

struct NstResult {
    double statistic = 0.0;           // T
    double threshold = 0.0;           // phi_eps(K)
    Hypothesis decision = Hypothesis::H0;
    std::size_t n = 0;
    std::vector<double> components;   // per-kernel normalized sums before squaring
};

namespace detail {

/// P_0..P_K at u via the three-term recurrence
/// (n+1) P_{n+1}(u) = (2n+1) u P_n(u) - n P_{n-1}(u).
inline void legendre_all(double u, std::size_t K, std::span<double> out) {
    out[0] = 1.0;
    if (K == 0) return;
    out[1] = u;
    for (std::size_t n = 1; n < K; ++n) {
        out[n + 1] = ((2.0 * n + 1.0) * u * out[n] - static_cast<double>(n) * out[n - 1]) /
                     (static_cast<double>(n) + 1.0);
    }
}

} // namespace detail

/// Orthonormal shifted-Legendre kernel pi_k(x) = sqrt(2k+1) P_k(2x - 1)
/// on [0,1].
inline double legendre_kernel(std::size_t k, double x) {
    if (k < 1 || k > max_order) {
        throw std::invalid_argument("legendre_kernel: k must be in [1,16]");
    }
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::invalid_argument("legendre_kernel: x must be in [0,1]");
    }
    double p[max_order + 1];
    detail::legendre_all(2.0 * x - 1.0, k, std::span<double>(p, k + 1));
    return std::sqrt(2.0 * static_cast<double>(k) + 1.0) * p[k];
}

/// (prob)-quantile of the chi-square distribution with K degrees of freedom,
/// by bisection on the regularized lower incomplete gamma function.
inline double chi_square_quantile(std::size_t K, double prob) {
    if (K < 1) throw std::invalid_argument("chi_square_quantile: K must be >= 1");
    if (!(prob > 0.0 && prob < 1.0)) {
        throw std::invalid_argument("chi_square_quantile: prob must be in (0,1)");
    }
    const double a = static_cast<double>(K) / 2.0;
    const auto cdf = [a](double q) { return math::gamma_p(a, q / 2.0); };
    double lo = 0.0;
    double hi = static_cast<double>(K) + 10.0;
    while (cdf(hi) < prob) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < prob) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-10) break;
    }
    return 0.5 * (lo + hi);
}

/// Neyman smooth statistic T = sum_k ( N^{-1/2} sum_t pi_k(v_t) )^2 together
/// with the per-kernel normalized sums. Terms are accumulated over a sorted
/// copy of the input, making the result exactly permutation-invariant.
inline std::pair<double, std::vector<double>> nst_statistic(std::span<const double> v,
                                                            std::size_t K) {
    if (v.empty()) throw std::invalid_argument("nst_statistic: empty input");
    if (K < 1 || K > max_order) {
        throw std::invalid_argument("nst_statistic: K must be in [1,16]");
    }
    for (double x : v) {
        if (!(x >= 0.0 && x <= 1.0)) {
            throw std::invalid_argument("nst_statistic: values must lie in [0,1]");
        }
    }
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> sums(K, 0.0);
    double p[max_order + 1];
    for (double x : sorted) {
        detail::legendre_all(2.0 * x - 1.0, K, std::span<double>(p, K + 1));
        for (std::size_t k = 1; k <= K; ++k) {
            sums[k - 1] += std::sqrt(2.0 * static_cast<double>(k) + 1.0) * p[k];
        }
    }
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(v.size()));
    double t = 0.0;
    for (double& s : sums) {
        s *= inv_sqrt_n;
        t += s * s;
    }
    return {t, std::move(sums)};
}

/// Fixed-sample smooth test of IID-uniformity at level epsilon.
inline NstResult nst_test(std::span<const double> v, const NstConfig& cfg) {
    cfg.validate();
    auto [t, comps] = nst_statistic(v, cfg.K);
    NstResult r;
    r.statistic = t;
    r.threshold = chi_square_quantile(cfg.K, 1.0 - cfg.epsilon);
    r.decision = t > r.threshold ? Hypothesis::H1 : Hypothesis::H0;
    r.n = v.size();
    r.components = std::move(comps);
    return r;
}

/// Composite-dictionary novelty detection: the stream is assigned to the
/// first dictionary model whose innovations pass the smooth test; if every
/// model rejects, the stream is novel.
struct NoveltyResult {
    std::optional<std::size_t> known_class;  // set when some model accepts
    std::vector<NstResult> per_model;
    bool is_novelty() const { return !known_class.has_value(); }
};

inline NoveltyResult detect_novelty(std::span<const ArInnovationModel> models,
                                    const WaveformSeries& x, const NstConfig& cfg) {
    if (models.empty()) throw std::invalid_argument("detect_novelty: empty dictionary");
    NoveltyResult out;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto v = encode(models[i], x);
        auto r = nst_test(v.values, cfg);
        const bool accept = r.decision == Hypothesis::H0;
        out.per_model.push_back(std::move(r));
        if (accept && !out.known_class) {
            out.known_class = i;
            break;
        }
    }
    return out;
}

} // namespace cpw::nst
