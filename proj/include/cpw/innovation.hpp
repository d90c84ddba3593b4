#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpw/errors.hpp"
#include "cpw/math.hpp"
#include "cpw/series.hpp"

namespace cpw {

enum class InnovationMode { uniform, gaussian };

/// Latent stream produced by an innovation encoder. Values are in [0,1] in
/// uniform mode and unbounded in gaussian mode. The leading model warm-up is
/// already dropped; `warmup_dropped` records how many inputs were consumed
/// before the first emitted value.
struct InnovationSequence {
    std::vector<double> values;
    InnovationMode mode = InnovationMode::uniform;
    std::size_t warmup_dropped = 0;
    double rate_hz = 0.0;  // rate of the innovation stream
    double t0 = 0.0;       // time of values.front()
};

namespace ar {

/// Levinson-Durbin recursion on autocovariances gamma[0..p].
/// Returns one-step predictor weights a_1..a_p and writes the prediction
/// error variance to sigma2.
inline std::vector<double> levinson_durbin(std::span<const double> gamma, double* sigma2) {
    if (gamma.empty()) throw std::invalid_argument("levinson_durbin: no autocovariances");
    const std::size_t p = gamma.size() - 1;
    const double g0 = gamma[0];
    if (!(g0 > 0.0)) {
        throw DegenerateInputError("levinson_durbin: zero-variance input");
    }
    std::vector<double> a;  // current predictor weights
    double err = g0;
    for (std::size_t m = 1; m <= p; ++m) {
        double acc = gamma[m];
        for (std::size_t i = 1; i < m; ++i) acc -= a[i - 1] * gamma[m - i];
        const double k = acc / err;
        if (!(std::abs(k) < 1.0) || !std::isfinite(k)) {
            throw DegenerateInputError(
                "levinson_durbin: reflection coefficient outside (-1,1) at order " +
                std::to_string(m));
        }
        std::vector<double> next(m);
        next[m - 1] = k;
        for (std::size_t i = 1; i < m; ++i) next[i - 1] = a[i - 1] - k * a[m - 1 - i];
        a = std::move(next);
        err *= 1.0 - k * k;
        if (!(err > 0.0)) {
            throw DegenerateInputError("levinson_durbin: non-positive prediction error");
        }
    }
    if (sigma2) *sigma2 = err;
    return a;
}

/// Reflection coefficients of predictor weights a_1..a_p via the step-down
/// recursion. Used for stability checks: stable iff all lie inside (-1,1).
inline std::vector<double> reflection_coefficients(std::span<const double> coeffs) {
    std::vector<double> a(coeffs.begin(), coeffs.end());
    std::vector<double> ks(a.size());
    for (std::size_t m = a.size(); m >= 1; --m) {
        const double k = a[m - 1];
        ks[m - 1] = k;
        if (std::abs(k) >= 1.0) break;  // already unstable; remaining ks unused
        std::vector<double> prev(m - 1);
        const double denom = 1.0 - k * k;
        for (std::size_t i = 1; i < m; ++i) {
            prev[i - 1] = (a[i - 1] + k * a[m - 1 - i]) / denom;
        }
        a = std::move(prev);
    }
    return ks;
}

inline bool is_stable(std::span<const double> coeffs) {
    for (double k : reflection_coefficients(coeffs)) {
        if (!(std::abs(k) < 1.0)) return false;
    }
    return true;
}

/// Biased sample autocovariances gamma[0..max_lag] about the sample mean.
inline std::vector<double> sample_autocovariance(std::span<const double> xs,
                                                 std::size_t max_lag) {
    if (xs.size() <= max_lag) {
        throw std::invalid_argument("sample_autocovariance: series shorter than max lag");
    }
    const double m = math::mean(xs);
    const std::size_t n = xs.size();
    std::vector<double> gamma(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double acc = 0.0;
        for (std::size_t t = k; t < n; ++t) acc += (xs[t] - m) * (xs[t - k] - m);
        gamma[k] = acc / static_cast<double>(n);
    }
    return gamma;
}

/// Stationary autocovariances gamma[0..p] of an AR(p) process with the given
/// predictor weights and innovation variance, by solving the Yule-Walker
/// system with Gaussian elimination.
inline std::vector<double> ar_autocovariances(std::span<const double> coeffs, double sigma2) {
    const std::size_t p = coeffs.size();
    const std::size_t n = p + 1;
    // Unknowns gamma_0..gamma_p. Equations:
    //   gamma_0 - sum_i a_i gamma_i = sigma2
    //   gamma_k - sum_i a_i gamma_{|k-i|} = 0   (k = 1..p)
    std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
    std::vector<double> b(n, 0.0);
    b[0] = sigma2;
    for (std::size_t k = 0; k < n; ++k) {
        A[k][k] += 1.0;
        for (std::size_t i = 1; i <= p; ++i) {
            const std::size_t lag = (k >= i) ? k - i : i - k;
            A[k][lag] -= coeffs[i - 1];
        }
    }
    // Partial-pivot elimination; the system is tiny (p <= 16 in practice).
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        }
        if (std::abs(A[piv][col]) < 1e-300) {
            throw DegenerateInputError("ar_autocovariances: singular Yule-Walker system");
        }
        std::swap(A[col], A[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = A[r][col] / A[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> gamma(n);
    for (std::size_t i = 0; i < n; ++i) gamma[i] = b[i] / A[i][i];
    return gamma;
}

} // namespace ar

// ---------------------------------------------------------------------------
// Envelope feature extraction
// ---------------------------------------------------------------------------

/// Demodulated fundamental-envelope increments on a phase-aligned
/// quarter-cycle grid.
///
/// The extractor estimates the fundamental phase from the leading cycles,
/// lays a quarter-cycle window grid aligned to that phase, takes the
/// least-squares in-phase fundamental amplitude per window, and emits first
/// differences of those amplitudes. Differencing makes slow load/SDG drift
/// structurally invisible to the downstream whitener (the composed filter
/// has an exact zero at DC) while waveform-shape distortion such as injected
/// harmonics survives as a persistent alternating pattern.
struct EnvelopeFeatures {
    std::vector<double> increments;
    double rate_hz = 0.0;   // 4 * f0
    double t0 = 0.0;        // completion time of increments.front()
    double phase = 0.0;     // estimated fundamental phase at series t0
    std::size_t waveform_samples_consumed = 0;  // leading samples used before the first feature
};

namespace detail {

/// Phase of the fundamental over the first `cycles` full cycles.
inline double estimate_fundamental_phase(const WaveformSeries& x, double f0,
                                         std::size_t cycles) {
    const double omega = math::two_pi * f0;
    const std::size_t n = static_cast<std::size_t>(
        std::floor(static_cast<double>(cycles) * x.sample_rate / f0));
    if (n < 8 || n > x.size()) {
        throw std::invalid_argument("estimate_fundamental_phase: series too short");
    }
    std::complex<double> z{0.0, 0.0};
    const std::complex<double> rot = std::exp(std::complex<double>(0.0, -omega / x.sample_rate));
    std::complex<double> w{1.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
        z += x.samples[t] * w;
        w *= rot;
    }
    // x_t = E sin(omega t + phi) demodulates to (n E / 2) e^{j(phi - pi/2)}.
    return std::arg(z) + math::pi / 2.0;
}

} // namespace detail

inline EnvelopeFeatures extract_envelope_increments(const WaveformSeries& x, double f0,
                                                    std::size_t phase_cycles = 8) {
    x.validate();
    if (!(f0 > 0.0)) throw std::invalid_argument("extract_envelope_increments: f0 must be > 0");
    if (x.sample_rate < 4.0 * f0) {
        throw ConfigError("extract_envelope_increments: sample rate below 4*f0");
    }
    const double omega = math::two_pi * f0;
    const double phi = detail::estimate_fundamental_phase(x, f0, phase_cycles);
    const double quarter_s = 1.0 / (4.0 * f0);

    // First quarter boundary (in run-local time units of samples) at or
    // after the phase-estimation window, aligned so that the fundamental is
    // zero and rising at each full-cycle boundary.
    const double align_t = -phi / omega;  // a time where omega*t + phi == 0
    const double est_end = static_cast<double>(phase_cycles) / f0;
    double k0 = std::ceil((est_end - align_t) / quarter_s - 1e-9);
    std::vector<double> amps;
    std::vector<double> ends;
    const std::size_t n = x.size();
    for (double k = k0;; k += 1.0) {
        const double wstart = align_t + k * quarter_s;
        const double wend = wstart + quarter_s;
        const std::size_t s0 = static_cast<std::size_t>(std::llround(wstart * x.sample_rate));
        const std::size_t s1 = static_cast<std::size_t>(std::llround(wend * x.sample_rate));
        if (s1 > n) break;
        double num = 0.0, den = 0.0;
        for (std::size_t t = s0; t < s1; ++t) {
            const double s = std::sin(omega * (static_cast<double>(t) / x.sample_rate) + phi);
            num += x.samples[t] * s;
            den += s * s;
        }
        if (den < 1e-12) continue;  // cannot happen for sane grids; skip defensively
        amps.push_back(num / den);
        ends.push_back(x.t0 + wend);
    }
    if (amps.size() < 3) {
        throw std::invalid_argument("extract_envelope_increments: series too short for features");
    }
    EnvelopeFeatures out;
    out.increments.resize(amps.size() - 1);
    for (std::size_t i = 0; i + 1 < amps.size(); ++i) {
        out.increments[i] = amps[i + 1] - amps[i];
    }
    out.rate_hz = 4.0 * f0;
    out.t0 = ends[1];
    out.phase = phi;
    out.waveform_samples_consumed =
        static_cast<std::size_t>(std::llround((ends[1] - x.t0) * x.sample_rate));
    return out;
}

// ---------------------------------------------------------------------------
// Analytic AR innovation model
// ---------------------------------------------------------------------------

/// Gaussian-AR innovation autoencoder: a one-step linear predictor whose
/// standardized residuals are mapped through the normal CDF. For data drawn
/// from the model's own AR law the output is IID-uniform, and the decoder
/// inverts the encoder exactly.
///
/// With envelope_mode set, the model operates on the demodulated
/// fundamental-envelope increments of the waveform (see
/// extract_envelope_increments) instead of the raw samples.
struct ArInnovationModel {
    std::size_t order = 0;
    std::vector<double> ar_coeffs;  // a_1..a_p
    double innovation_std = 0.0;    // sigma
    double mean = 0.0;              // mu
    bool envelope_mode = false;
    double fundamental_hz = 0.0;

    void validate() const {
        if (ar_coeffs.size() != order) {
            throw std::invalid_argument("ArInnovationModel: order/coefficient mismatch");
        }
        if (!(innovation_std > 0.0)) {
            throw std::invalid_argument("ArInnovationModel: innovation_std must be > 0");
        }
        if (!ar::is_stable(ar_coeffs)) {
            throw std::invalid_argument("ArInnovationModel: AR polynomial is unstable");
        }
        if (envelope_mode && !(fundamental_hz > 0.0)) {
            throw std::invalid_argument("ArInnovationModel: envelope_mode requires fundamental_hz");
        }
    }
};

inline ArInnovationModel estimate_ar_model(const WaveformSeries& train, std::size_t order,
                                           bool envelope_mode = false,
                                           double fundamental_hz = 0.0) {
    train.validate();
    std::vector<double> data;
    if (envelope_mode) {
        data = extract_envelope_increments(train, fundamental_hz).increments;
    } else {
        data = train.samples;
    }
    if (data.size() < 10 * std::max<std::size_t>(order, 1)) {
        throw std::invalid_argument("estimate_ar_model: training series too short");
    }
    const auto gamma = ar::sample_autocovariance(data, order);
    const double scale = math::mean(std::span<const double>(data));
    if (!(gamma[0] > 1e-24 * std::max(1.0, scale * scale))) {
        throw DegenerateInputError("estimate_ar_model: input has (near-)zero variance");
    }
    ArInnovationModel model;
    model.order = order;
    double sigma2 = gamma[0];
    model.ar_coeffs = ar::levinson_durbin(gamma, &sigma2);
    model.innovation_std = std::sqrt(sigma2);
    model.mean = scale;
    model.envelope_mode = envelope_mode;
    model.fundamental_hz = fundamental_hz;
    model.validate();
    return model;
}

namespace detail {

/// One-step prediction residuals e_t = (x_t - mu) - sum_i a_i (x_{t-i} - mu)
/// for t >= p. Strictly causal.
inline std::vector<double> ar_residuals(const ArInnovationModel& m,
                                        std::span<const double> xs) {
    const std::size_t p = m.order;
    if (xs.size() <= p) {
        throw std::invalid_argument("ar_residuals: series no longer than model order");
    }
    std::vector<double> e(xs.size() - p);
    for (std::size_t t = p; t < xs.size(); ++t) {
        double pred = 0.0;
        for (std::size_t i = 1; i <= p; ++i) pred += m.ar_coeffs[i - 1] * (xs[t - i] - m.mean);
        e[t - p] = (xs[t] - m.mean) - pred;
    }
    return e;
}

inline void encode_common(const ArInnovationModel& m, const WaveformSeries& x,
                          InnovationSequence& out) {
    m.validate();
    if (m.envelope_mode) {
        const auto feats = extract_envelope_increments(x, m.fundamental_hz);
        out.values = ar_residuals(m, feats.increments);
        out.rate_hz = feats.rate_hz;
        out.warmup_dropped = m.order + feats.waveform_samples_consumed;
        out.t0 = feats.t0 + static_cast<double>(m.order) / feats.rate_hz;
    } else {
        out.values = ar_residuals(m, x.samples);
        out.rate_hz = x.sample_rate;
        out.warmup_dropped = m.order;
        out.t0 = x.time_at(m.order);
    }
}

} // namespace detail

/// Innovation encoder, uniform mode: v_t = Phi(e_t / sigma).
inline InnovationSequence encode(const ArInnovationModel& m, const WaveformSeries& x) {
    InnovationSequence out;
    detail::encode_common(m, x, out);
    out.mode = InnovationMode::uniform;
    for (double& v : out.values) v = math::normal_cdf(v / m.innovation_std);
    return out;
}

/// Innovation encoder, gaussian mode: standardized residuals e_t / sigma.
inline InnovationSequence encode_gaussian(const ArInnovationModel& m, const WaveformSeries& x) {
    InnovationSequence out;
    detail::encode_common(m, x, out);
    out.mode = InnovationMode::gaussian;
    for (double& v : out.values) v /= m.innovation_std;
    return out;
}

/// Exact inverse of encode. `warmup` supplies the first p series values.
/// Inputs exactly 0 or 1 are clamped to [1e-12, 1-1e-12]; each clamp bumps
/// *clamp_count when provided.
inline WaveformSeries decode(const ArInnovationModel& m, const InnovationSequence& v,
                             std::span<const double> warmup,
                             std::size_t* clamp_count = nullptr) {
    m.validate();
    if (v.mode != InnovationMode::uniform) {
        throw std::invalid_argument("decode: expected uniform-mode innovations");
    }
    if (warmup.size() != m.order) {
        throw std::invalid_argument("decode: warmup must supply exactly p values");
    }
    constexpr double eps_clip = 1e-12;
    const std::size_t p = m.order;
    WaveformSeries out;
    out.sample_rate = v.rate_hz > 0.0 ? v.rate_hz : 1.0;
    out.t0 = v.t0 - static_cast<double>(p) / out.sample_rate;
    out.samples.resize(p + v.values.size());
    for (std::size_t i = 0; i < p; ++i) out.samples[i] = warmup[i];
    for (std::size_t t = p; t < out.samples.size(); ++t) {
        double u = v.values[t - p];
        if (u <= 0.0 || u >= 1.0) {
            u = std::clamp(u, eps_clip, 1.0 - eps_clip);
            if (clamp_count) ++*clamp_count;
        }
        double pred = 0.0;
        for (std::size_t i = 1; i <= p; ++i) {
            pred += m.ar_coeffs[i - 1] * (out.samples[t - i] - m.mean);
        }
        out.samples[t] = m.mean + pred + m.innovation_std * math::normal_quantile(u);
    }
    return out;
}

/// Inverse of encode_gaussian: x_t = mu + sum_i a_i (x_{t-i} - mu) + sigma e_t.
inline WaveformSeries decode_gaussian(const ArInnovationModel& m, std::span<const double> e,
                                      std::span<const double> warmup, double rate_hz = 1.0,
                                      double t0 = 0.0) {
    m.validate();
    if (warmup.size() != m.order) {
        throw std::invalid_argument("decode_gaussian: warmup must supply exactly p values");
    }
    const std::size_t p = m.order;
    WaveformSeries out;
    out.sample_rate = rate_hz;
    out.t0 = t0;
    out.samples.resize(p + e.size());
    for (std::size_t i = 0; i < p; ++i) out.samples[i] = warmup[i];
    for (std::size_t t = p; t < out.samples.size(); ++t) {
        double pred = 0.0;
        for (std::size_t i = 1; i <= p; ++i) {
            pred += m.ar_coeffs[i - 1] * (out.samples[t - i] - m.mean);
        }
        out.samples[t] = m.mean + pred + m.innovation_std * e[t - p];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization (versioned JSON; field names are part of the contract)
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const ArInnovationModel& m) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["order"] = m.order;
    j["ar_coeffs"] = m.ar_coeffs;
    j["innovation_std"] = m.innovation_std;
    j["mean"] = m.mean;
    j["envelope_mode"] = m.envelope_mode;
    j["fundamental_hz"] = m.fundamental_hz;
    return j;
}

inline ArInnovationModel ar_model_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != 1) {
        throw ConfigError("ArInnovationModel: unsupported serialization version");
    }
    ArInnovationModel m;
    m.order = j.at("order").get<std::size_t>();
    m.ar_coeffs = j.at("ar_coeffs").get<std::vector<double>>();
    m.innovation_std = j.at("innovation_std").get<double>();
    m.mean = j.at("mean").get<double>();
    m.envelope_mode = j.at("envelope_mode").get<bool>();
    m.fundamental_hz = j.value("fundamental_hz", 0.0);
    m.validate();
    return m;
}

} // namespace cpw
