#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cpw/config.hpp"
#include "cpw/errors.hpp"
#include "cpw/nst.hpp"
#include "cpw/series.hpp"

namespace cpw::relay {

/// Inverse-time curve constants t = TD * (A / (M^p - 1) + B). Defaults are
/// the moderately-inverse constant set.
struct InverseTimeCurve {
    double A = 0.0515;
    double B = 0.1140;
    double p = 0.02;

    void validate() const {
        if (!(A > 0.0) || !(B > 0.0) || !(p > 0.0 && p <= 2.0)) {
            throw std::invalid_argument("InverseTimeCurve: A, B > 0 and p in (0,2]");
        }
    }
};

struct OvercurrentConfig {
    double pickup_current = 0.0;  // amperes
    double time_dial = 0.1;
    InverseTimeCurve curve;
    std::size_t block_len = 32;  // samples per decision block

    void validate() const {
        if (!(pickup_current > 0.0) || !(time_dial > 0.0) || block_len < 2) {
            throw std::invalid_argument(
                "OvercurrentConfig: pickup, time_dial > 0 and block_len >= 2");
        }
        curve.validate();
    }
};

struct AocrConfig {
    double alpha = 0.4;       // weight on the moving-average current
    double beta = 1.0;        // weight on the minimum zone fault current
    double avg_window = 10.0; // seconds
    double i_fault_min = 0.0; // amperes
    double time_dial = 0.1;
    InverseTimeCurve curve;
    std::size_t block_len = 32;

    void validate() const {
        if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta > 0.0)) {
            throw std::invalid_argument("AocrConfig: alpha, beta >= 0 with alpha + beta > 0");
        }
        if (!(avg_window > 0.0) || !(i_fault_min > 0.0) || !(time_dial > 0.0) || block_len < 2) {
            throw std::invalid_argument("AocrConfig: avg_window, i_fault_min, time_dial > 0");
        }
        curve.validate();
    }
};

/// Observation window for a detection decision, in absolute seconds.
struct TimeWindow {
    double start = 0.0;
    double end = 0.0;
};

struct BlockMax {
    std::size_t block = 0;   // block index from the start of the series
    double max_abs = 0.0;    // max |current| within the block
};

/// Max |current| over non-overlapping blocks; the last partial block is
/// dropped.
inline std::vector<BlockMax> rectified_block_max(const WaveformSeries& x,
                                                 std::size_t block_len) {
    if (block_len < 2) throw std::invalid_argument("rectified_block_max: block_len >= 2");
    std::vector<BlockMax> out;
    out.reserve(x.size() / block_len);
    for (std::size_t b = 0; (b + 1) * block_len <= x.size(); ++b) {
        double m = 0.0;
        for (std::size_t i = b * block_len; i < (b + 1) * block_len; ++i) {
            m = std::max(m, std::abs(x.samples[i]));
        }
        out.push_back({b, m});
    }
    return out;
}

/// Inverse-time trip delay for multiple-of-pickup M; no-trip when M <= 1.
inline std::optional<double> inverse_time_delay(double M, double time_dial,
                                                const InverseTimeCurve& curve) {
    if (!(M > 0.0)) throw std::invalid_argument("inverse_time_delay: M must be > 0");
    if (M <= 1.0) return std::nullopt;
    return time_dial * (curve.A / (std::pow(M, curve.p) - 1.0) + curve.B);
}

inline std::optional<double> inverse_time_delay(double M, const OvercurrentConfig& cfg) {
    return inverse_time_delay(M, cfg.time_dial, cfg.curve);
}

inline std::optional<double> inverse_time_delay(double M, const AocrConfig& cfg) {
    return inverse_time_delay(M, cfg.time_dial, cfg.curve);
}

/// Decision record for the overcurrent baselines.
struct DetectionOutcome {
    nst::Hypothesis decision = nst::Hypothesis::H0;
    std::optional<double> trip_time_s;    // absolute trip instant
    std::optional<double> delay_seconds;  // trip instant minus window start
    double statistic = 0.0;               // method's decision statistic (max over blocks)
    double threshold = 0.0;               // pickup (conventional) / 0 margin (AOCR)
};

namespace detail {

/// Shared trip machinery: every in-window block whose multiple-of-pickup
/// exceeds 1 starts an inverse-time timer; the relay trips at the earliest
/// timer expiry that still lands inside the window.
template <typename PickupAt>
DetectionOutcome run_inverse_time(const WaveformSeries& x, const TimeWindow& window,
                                  std::size_t block_len, double time_dial,
                                  const InverseTimeCurve& curve, double sample_rate,
                                  PickupAt&& pickup_at, bool statistic_is_margin) {
    DetectionOutcome out;
    const auto blocks = rectified_block_max(x, block_len);
    const double block_s = static_cast<double>(block_len) / sample_rate;
    double best_trip = std::numeric_limits<double>::infinity();
    bool any = false;
    out.statistic = -std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) {
        const double t_block = x.t0 + static_cast<double>(b.block) * block_s;
        if (t_block < window.start || t_block + block_s > window.end) continue;
        const double pickup = pickup_at(b.block);
        if (!(pickup > 0.0)) throw std::invalid_argument("inverse-time: pickup must be > 0");
        any = true;
        out.statistic = std::max(out.statistic,
                                 statistic_is_margin ? b.max_abs - pickup : b.max_abs);
        const double M = b.max_abs / pickup;
        if (const auto d = inverse_time_delay(M, time_dial, curve)) {
            best_trip = std::min(best_trip, t_block + block_s + *d);
        }
    }
    if (!any) out.statistic = 0.0;
    if (best_trip <= window.end) {
        out.decision = nst::Hypothesis::H1;
        out.trip_time_s = best_trip;
        out.delay_seconds = best_trip - window.start;
    }
    return out;
}

} // namespace detail

/// Conventional fixed-pickup overcurrent relay over the observation window.
inline DetectionOutcome conventional_detect(const WaveformSeries& x, const TimeWindow& window,
                                            const OvercurrentConfig& cfg, double sample_rate) {
    cfg.validate();
    x.validate();
    auto out = detail::run_inverse_time(
        x, window, cfg.block_len, cfg.time_dial, cfg.curve, sample_rate,
        [&](std::size_t) { return cfg.pickup_current; }, false);
    out.threshold = cfg.pickup_current;
    return out;
}

/// Adaptive overcurrent relay: per-block pickup is a linear function of the
/// trailing moving-average block maximum and the minimum zone fault current.
inline DetectionOutcome aocr_detect(const WaveformSeries& x, const TimeWindow& window,
                                    const AocrConfig& cfg, double sample_rate) {
    cfg.validate();
    x.validate();
    if (window.start - x.t0 < cfg.avg_window) {
        throw std::invalid_argument("aocr_detect: needs avg_window seconds of pre-window data");
    }
    const auto blocks = rectified_block_max(x, cfg.block_len);
    const double block_s = static_cast<double>(cfg.block_len) / sample_rate;
    const std::size_t trail = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.avg_window / block_s)));

    // Prefix sums of block maxima for O(1) trailing means.
    std::vector<double> prefix(blocks.size() + 1, 0.0);
    for (std::size_t i = 0; i < blocks.size(); ++i) prefix[i + 1] = prefix[i] + blocks[i].max_abs;

    auto pickup_at = [&](std::size_t block) {
        const std::size_t hi = block;  // trailing window ends just before this block
        const std::size_t lo = hi >= trail ? hi - trail : 0;
        const double mean = hi > lo ? (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo)
                                    : blocks.front().max_abs;
        return cfg.alpha * mean + cfg.beta * cfg.i_fault_min;
    };
    auto out = detail::run_inverse_time(x, window, cfg.block_len, cfg.time_dial, cfg.curve,
                                        sample_rate, pickup_at, true);
    out.threshold = 0.0;  // statistic is the margin block_max - pickup_t
    return out;
}

// ---------------------------------------------------------------------------
// FPR-targeted calibration
// ---------------------------------------------------------------------------

struct CalibrationInfeasibleError : std::runtime_error {
    CalibrationInfeasibleError(const std::string& msg, double best_fpr)
        : std::runtime_error(msg), best_fpr(best_fpr) {}
    double best_fpr = 0.0;
};

namespace detail {

template <typename Eval>
std::pair<double, double> grid_search(std::span<const double> grid, double target_fpr,
                                      std::size_t n_runs, Eval&& fpr_of) {
    if (n_runs < 100) {
        throw std::invalid_argument("calibrate: needs at least 100 no-fault runs");
    }
    std::vector<double> sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end());
    double best = std::numeric_limits<double>::infinity();
    for (double g : sorted) {
        const double fpr = fpr_of(g);
        best = std::min(best, fpr);
        if (fpr <= target_fpr) return {g, fpr};
    }
    throw CalibrationInfeasibleError("calibrate: no grid point meets the FPR target", best);
}

} // namespace detail

/// Smallest pickup on the grid whose empirical FPR over the no-fault runs is
/// at or below the target. Returns the calibrated config; *achieved_fpr (when
/// given) receives the empirical FPR at the chosen point.
inline OvercurrentConfig calibrate_conventional(const std::vector<WaveformSeries>& no_fault_runs,
                                                const TimeWindow& window,
                                                OvercurrentConfig base,
                                                std::span<const double> pickup_grid,
                                                double target_fpr, double sample_rate,
                                                double* achieved_fpr = nullptr) {
    auto fpr_of = [&](double pickup) {
        OvercurrentConfig c = base;
        c.pickup_current = pickup;
        std::size_t fp = 0;
        for (const auto& run : no_fault_runs) {
            if (conventional_detect(run, window, c, sample_rate).decision ==
                nst::Hypothesis::H1) {
                ++fp;
            }
        }
        return static_cast<double>(fp) / static_cast<double>(no_fault_runs.size());
    };
    const auto [pickup, fpr] =
        detail::grid_search(pickup_grid, target_fpr, no_fault_runs.size(), fpr_of);
    if (achieved_fpr) *achieved_fpr = fpr;
    base.pickup_current = pickup;
    return base;
}

/// Smallest beta (the i_fault_min margin weight) on the grid meeting the FPR
/// target, with alpha kept from the base config.
inline AocrConfig calibrate_aocr(const std::vector<WaveformSeries>& no_fault_runs,
                                 const TimeWindow& window, AocrConfig base,
                                 std::span<const double> beta_grid, double target_fpr,
                                 double sample_rate, double* achieved_fpr = nullptr) {
    auto fpr_of = [&](double beta) {
        AocrConfig c = base;
        c.beta = beta;
        std::size_t fp = 0;
        for (const auto& run : no_fault_runs) {
            if (aocr_detect(run, window, c, sample_rate).decision == nst::Hypothesis::H1) ++fp;
        }
        return static_cast<double>(fp) / static_cast<double>(no_fault_runs.size());
    };
    const auto [beta, fpr] =
        detail::grid_search(beta_grid, target_fpr, no_fault_runs.size(), fpr_of);
    if (achieved_fpr) *achieved_fpr = fpr;
    base.beta = beta;
    return base;
}

// ---------------------------------------------------------------------------
// Config-file serialization (same dialect as scenario files)
// ---------------------------------------------------------------------------

inline void overcurrent_to_config(const OvercurrentConfig& c, cfg::Table& t) {
    t.set("pickup_current_a", cfg::Value::of(c.pickup_current));
    t.set("time_dial", cfg::Value::of(c.time_dial));
    t.set("curve_a", cfg::Value::of(c.curve.A));
    t.set("curve_b", cfg::Value::of(c.curve.B));
    t.set("curve_p", cfg::Value::of(c.curve.p));
    t.set("block_len", cfg::Value::of(static_cast<std::int64_t>(c.block_len)));
}

inline OvercurrentConfig overcurrent_from_config(const cfg::Table& t) {
    OvercurrentConfig c;
    c.pickup_current = t.require_real("pickup_current_a");
    c.time_dial = t.get_real("time_dial", c.time_dial);
    c.curve.A = t.get_real("curve_a", c.curve.A);
    c.curve.B = t.get_real("curve_b", c.curve.B);
    c.curve.p = t.get_real("curve_p", c.curve.p);
    c.block_len = static_cast<std::size_t>(t.get_int("block_len", 32));
    return c;
}

inline void aocr_to_config(const AocrConfig& c, cfg::Table& t) {
    t.set("alpha", cfg::Value::of(c.alpha));
    t.set("beta", cfg::Value::of(c.beta));
    t.set("avg_window_s", cfg::Value::of(c.avg_window));
    t.set("i_fault_min_a", cfg::Value::of(c.i_fault_min));
    t.set("time_dial", cfg::Value::of(c.time_dial));
    t.set("curve_a", cfg::Value::of(c.curve.A));
    t.set("curve_b", cfg::Value::of(c.curve.B));
    t.set("curve_p", cfg::Value::of(c.curve.p));
    t.set("block_len", cfg::Value::of(static_cast<std::int64_t>(c.block_len)));
}

inline AocrConfig aocr_from_config(const cfg::Table& t) {
    AocrConfig c;
    c.alpha = t.get_real("alpha", c.alpha);
    c.beta = t.require_real("beta");
    c.avg_window = t.get_real("avg_window_s", c.avg_window);
    c.i_fault_min = t.require_real("i_fault_min_a");
    c.time_dial = t.get_real("time_dial", c.time_dial);
    c.curve.A = t.get_real("curve_a", c.curve.A);
    c.curve.B = t.get_real("curve_b", c.curve.B);
    c.curve.p = t.get_real("curve_p", c.curve.p);
    c.block_len = static_cast<std::size_t>(t.get_int("block_len", 32));
    return c;
}

} // namespace cpw::relay
