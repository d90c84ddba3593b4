#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpw/innovation.hpp"
#include "cpw/nst.hpp"
#include "cpw/series.hpp"

namespace cpw::isfd {

/// Doubling-search sequential test configuration. The window schedule is
/// N_i = round(2^i * C) for i = 1..floor(log2(lambda_sep)); windows are
/// nested, so samples drawn at earlier iterations are retained and the
/// statistic is recomputed over the full window.
struct IsfdConfig {
    std::size_t K = 4;
    double epsilon = 0.05;
    double C = 42.5;
    double lambda_sep = 20.0;
    bool bonferroni = false;          // split epsilon across iterations
    bool round_up_iterations = false; // ceil(log2(lambda_sep)) instead of floor

    std::size_t max_iterations() const {
        const double l = std::log2(lambda_sep);
        const double m = round_up_iterations ? std::ceil(l) : std::floor(l);
        return static_cast<std::size_t>(m);
    }

    std::vector<std::size_t> window_schedule() const {
        std::vector<std::size_t> ns;
        for (std::size_t i = 1; i <= max_iterations(); ++i) {
            ns.push_back(static_cast<std::size_t>(std::llround(std::pow(2.0, i) * C)));
        }
        return ns;
    }

    void validate() const {
        if (K < 1 || K > nst::max_order) throw std::invalid_argument("IsfdConfig: K in [1,16]");
        if (!(epsilon > 0.0 && epsilon < 1.0)) {
            throw std::invalid_argument("IsfdConfig: epsilon in (0,1)");
        }
        if (!(C > 0.0)) throw std::invalid_argument("IsfdConfig: C must be > 0");
        if (!(lambda_sep > 1.0) || max_iterations() < 1) {
            throw std::invalid_argument("IsfdConfig: lambda_sep must give >= 1 iteration");
        }
    }
};

struct IsfdOutcome {
    struct TracePoint {
        std::size_t n = 0;
        double statistic = 0.0;
        double threshold = 0.0;
    };

    nst::Hypothesis decision = nst::Hypothesis::H0;
    std::size_t samples_consumed = 0;
    std::size_t iterations_run = 0;
    std::vector<TracePoint> statistic_trace;
    std::optional<double> delay_seconds;  // present iff decision == H1
};

/// The innovation stream ended before the schedule completed.
struct TruncatedStreamError : std::runtime_error {
    explicit TruncatedStreamError(IsfdOutcome partial)
        : std::runtime_error("isfd: innovation source exhausted before the window schedule"),
          partial(std::move(partial)) {}
    IsfdOutcome partial;
};

/// Pull-based innovation source; returns std::nullopt when exhausted.
using InnovationSource = std::function<std::optional<double>()>;

/// Sequential Neyman smooth test with doubling windows, consuming
/// innovations from the declared test start. Stops at the first rejection.
inline IsfdOutcome isfd_detect(const InnovationSource& source, double sample_rate,
                               const IsfdConfig& cfg) {
    cfg.validate();
    if (!(sample_rate > 0.0)) throw std::invalid_argument("isfd_detect: sample_rate must be > 0");
    const std::size_t imax = cfg.max_iterations();
    const double eps_eff =
        cfg.bonferroni ? cfg.epsilon / static_cast<double>(imax) : cfg.epsilon;
    const double threshold = nst::chi_square_quantile(cfg.K, 1.0 - eps_eff);
    const auto schedule = cfg.window_schedule();

    IsfdOutcome out;
    std::vector<double> window;
    window.reserve(schedule.back());
    for (std::size_t i = 0; i < imax; ++i) {
        while (window.size() < schedule[i]) {
            auto v = source();
            if (!v) {
                out.samples_consumed = window.size();
                throw TruncatedStreamError(out);
            }
            if (!(*v >= 0.0 && *v <= 1.0)) {
                throw std::invalid_argument("isfd_detect: innovation outside [0,1]");
            }
            window.push_back(*v);
        }
        const auto [t, comps] = nst::nst_statistic(window, cfg.K);
        out.statistic_trace.push_back({window.size(), t, threshold});
        out.iterations_run = i + 1;
        out.samples_consumed = window.size();
        if (t > threshold) {
            out.decision = nst::Hypothesis::H1;
            out.delay_seconds = static_cast<double>(window.size()) / sample_rate;
            return out;
        }
    }
    out.decision = nst::Hypothesis::H0;
    return out;
}

/// Composition glue: causally encode the waveform with the model and expose
/// the innovations from t_start onward to the sequential detector. Delay is
/// measured in innovation samples from t_start, converted to seconds at the
/// innovation rate.
inline IsfdOutcome run_isfd_on_waveform(const ArInnovationModel& model, const WaveformSeries& x,
                                        double t_start, const IsfdConfig& cfg) {
    x.validate();
    if (!(t_start >= x.t0 && t_start <= x.t0 + x.duration())) {
        throw std::invalid_argument("run_isfd_on_waveform: t_start outside the series");
    }
    const auto v = encode(model, x);
    if (v.t0 > t_start + 0.5 / v.rate_hz) {
        throw std::invalid_argument(
            "run_isfd_on_waveform: model warm-up not satisfiable before t_start");
    }
    std::size_t k = static_cast<std::size_t>(
        std::ceil((t_start - v.t0) * v.rate_hz - 1e-9));
    auto source = [&v, k]() mutable -> std::optional<double> {
        if (k >= v.values.size()) return std::nullopt;
        return v.values[k++];
    };
    return isfd_detect(source, v.rate_hz, cfg);
}

inline nlohmann::ordered_json to_json(const IsfdOutcome& o) {
    nlohmann::ordered_json j;
    j["decision"] = o.decision == nst::Hypothesis::H1 ? "H1" : "H0";
    j["samples_consumed"] = o.samples_consumed;
    j["iterations_run"] = o.iterations_run;
    if (o.delay_seconds) {
        j["delay_seconds"] = *o.delay_seconds;
    } else {
        j["delay_seconds"] = nullptr;
    }
    nlohmann::ordered_json trace = nlohmann::ordered_json::array();
    for (const auto& p : o.statistic_trace) {
        trace.push_back({{"n", p.n}, {"statistic", p.statistic}, {"threshold", p.threshold}});
    }
    j["trace"] = std::move(trace);
    return j;
}

} // namespace cpw::isfd
