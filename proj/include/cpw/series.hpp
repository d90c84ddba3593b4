#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpw/math.hpp"

namespace cpw {

/// Uniformly sampled real-valued measurement stream.
struct WaveformSeries {
    std::vector<double> samples;   // amperes
    double sample_rate = 0.0;      // Hz
    double t0 = 0.0;               // seconds

    std::size_t size() const { return samples.size(); }
    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
    double time_at(std::size_t i) const { return t0 + static_cast<double>(i) / sample_rate; }

    /// Index of the first sample at or after time t (clamped to [0, size]).
    std::size_t index_at_or_after(double t) const {
        const double k = std::ceil((t - t0) * sample_rate - 1e-9);
        if (k <= 0.0) return 0;
        if (k >= static_cast<double>(samples.size())) return samples.size();
        return static_cast<std::size_t>(k);
    }

    void validate() const {
        if (!(sample_rate > 0.0)) {
            throw std::invalid_argument("WaveformSeries: sample_rate must be > 0");
        }
        if (samples.empty()) {
            throw std::invalid_argument("WaveformSeries: must hold at least one sample");
        }
        if (!math::all_finite(samples)) {
            throw std::invalid_argument("WaveformSeries: samples must be finite");
        }
    }
};

} // namespace cpw
