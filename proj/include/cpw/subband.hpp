#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpw/errors.hpp"
#include "cpw/math.hpp"
#include "cpw/series.hpp"

namespace cpw::subband {

enum class FilterWindow { hamming, blackman };

/// Harmonic subband decomposition geometry: m bands centered at k*f0 for
/// k = 1..m, each with a two-sided passband width of W Hz, extracted with a
/// linear-phase windowed-sinc lowpass and decimated.
struct SubbandPlan {
    double f0 = 60.0;
    std::size_t m = 3;
    double W = 4.0;
    double fs = 1920.0;
    std::size_t decimation = 32;
    std::size_t filter_taps = 255;
    FilterWindow window = FilterWindow::blackman;

    double band_rate() const { return fs / static_cast<double>(decimation); }

    void validate() const {
        if (!(f0 > 0.0) || m < 1 || !(W > 0.0) || !(fs > 0.0)) {
            throw ConfigError("SubbandPlan: f0, m, W, fs must be positive");
        }
        if (!(static_cast<double>(m) * f0 + W / 2.0 < fs / 2.0)) {
            throw ConfigError("SubbandPlan: highest subband exceeds the Nyquist band");
        }
        if (decimation < 1 ||
            static_cast<double>(decimation) > std::floor(fs / (2.0 * W))) {
            throw ConfigError("SubbandPlan: decimation must be in [1, floor(fs/(2W))]");
        }
        if (filter_taps < 3 || filter_taps % 2 == 0) {
            throw ConfigError("SubbandPlan: filter_taps must be odd and >= 3");
        }
    }
};

/// Complex baseband of one harmonic subband.
struct SubbandSignal {
    std::vector<std::complex<double>> baseband;
    double center_freq = 0.0;
    double rate = 0.0;  // Hz, post-decimation
};

/// Unity-DC-gain windowed-sinc lowpass passing [0, W/2]. The design cutoff
/// sits half a transition width beyond the passband edge so that the whole
/// W-band lies in the flat region.
inline std::vector<double> design_lowpass(const SubbandPlan& plan) {
    plan.validate();
    const std::size_t n = plan.filter_taps;
    const double transition =
        (plan.window == FilterWindow::hamming ? 3.3 : 5.5) / static_cast<double>(n);
    const double fc = (plan.W / 2.0) / plan.fs + transition / 2.0;  // cycles/sample
    const double mid = static_cast<double>(n - 1) / 2.0;
    std::vector<double> h(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) - mid;
        const double sinc = t == 0.0 ? 2.0 * fc
                                     : std::sin(math::two_pi * fc * t) / (math::pi * t);
        const double u = static_cast<double>(i) / static_cast<double>(n - 1);
        double w;
        if (plan.window == FilterWindow::hamming) {
            w = 0.54 - 0.46 * std::cos(math::two_pi * u);
        } else {
            w = 0.42 - 0.5 * std::cos(math::two_pi * u) + 0.08 * std::cos(2.0 * math::two_pi * u);
        }
        h[i] = sinc * w;
        sum += h[i];
    }
    for (double& v : h) v /= sum;
    return h;
}

namespace detail {

/// Zero-phase FIR response of the (zero-padded) sequence at one index.
template <typename Seq>
std::complex<double> filtered_at(const Seq& y, const std::vector<double>& h,
                                 std::ptrdiff_t center) {
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(h.size() - 1) / 2;
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(y.size());
    std::complex<double> acc{0.0, 0.0};
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(h.size()); ++j) {
        const std::ptrdiff_t idx = center + half - j;
        if (idx >= 0 && idx < n) acc += h[static_cast<std::size_t>(j)] * y[static_cast<std::size_t>(idx)];
    }
    return acc;
}

} // namespace detail

/// Mixes each harmonic down to baseband, lowpasses, and decimates. The
/// linear-phase filter is applied with centered alignment, so baseband
/// sample i corresponds to input sample i * decimation with no residual
/// group delay (edge transients span half the filter length).
inline std::vector<SubbandSignal> subband_decompose(const WaveformSeries& x,
                                                    const SubbandPlan& plan) {
    plan.validate();
    x.validate();
    if (std::abs(x.sample_rate - plan.fs) > 1e-6 * plan.fs) {
        throw ConfigError("subband_decompose: series rate does not match the plan");
    }
    const auto h = design_lowpass(plan);
    const std::size_t n = x.size();
    const std::size_t out_len = (n + plan.decimation - 1) / plan.decimation;

    std::vector<SubbandSignal> bands;
    bands.reserve(plan.m);
    std::vector<std::complex<double>> mixed(n);
    for (std::size_t k = 1; k <= plan.m; ++k) {
        const double fk = static_cast<double>(k) * plan.f0;
        const std::complex<double> rot =
            std::exp(std::complex<double>(0.0, -math::two_pi * fk / plan.fs));
        std::complex<double> w{1.0, 0.0};
        for (std::size_t t = 0; t < n; ++t) {
            mixed[t] = x.samples[t] * w;
            w *= rot;
        }
        SubbandSignal s;
        s.center_freq = fk;
        s.rate = plan.band_rate();
        s.baseband.resize(out_len);
        for (std::size_t i = 0; i < out_len; ++i) {
            s.baseband[i] = detail::filtered_at(
                mixed, h, static_cast<std::ptrdiff_t>(i * plan.decimation));
        }
        bands.push_back(std::move(s));
    }
    return bands;
}

/// Upsamples, re-filters, remodulates and sums the subbands back to a real
/// waveform of the requested length.
inline WaveformSeries subband_reconstruct(const std::vector<SubbandSignal>& bands,
                                          const SubbandPlan& plan, std::size_t length) {
    plan.validate();
    if (bands.size() != plan.m) {
        throw std::invalid_argument("subband_reconstruct: band count does not match the plan");
    }
    for (const auto& b : bands) {
        if (std::abs(b.rate - plan.band_rate()) > 1e-6 * plan.band_rate()) {
            throw std::invalid_argument("subband_reconstruct: band rate does not match the plan");
        }
    }
    const auto h = design_lowpass(plan);
    WaveformSeries out;
    out.sample_rate = plan.fs;
    out.samples.assign(length, 0.0);

    std::vector<std::complex<double>> up(length);
    for (std::size_t k = 1; k <= plan.m; ++k) {
        const auto& band = bands[k - 1];
        std::fill(up.begin(), up.end(), std::complex<double>{0.0, 0.0});
        for (std::size_t i = 0; i < band.baseband.size(); ++i) {
            const std::size_t t = i * plan.decimation;
            if (t < length) up[t] = band.baseband[i];
        }
        const double fk = static_cast<double>(k) * plan.f0;
        const std::complex<double> rot =
            std::exp(std::complex<double>(0.0, math::two_pi * fk / plan.fs));
        std::complex<double> w{1.0, 0.0};
        const double gain = static_cast<double>(plan.decimation);
        for (std::size_t t = 0; t < length; ++t) {
            const auto z = detail::filtered_at(up, h, static_cast<std::ptrdiff_t>(t));
            out.samples[t] += 2.0 * gain * (z * w).real();
            w *= rot;
        }
    }
    return out;
}

} // namespace cpw::subband
