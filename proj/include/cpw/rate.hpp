#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "cpw/math.hpp"

namespace cpw::rd {

/// Inverse water-filling result for parallel Gaussian sources.
struct RateAllocation {
    std::vector<double> variances;    // sigma_i^2
    std::vector<double> distortions;  // D_i = min(theta, sigma_i^2)
    double water_level = 0.0;         // theta
    double total_rate = 0.0;          // nats per sample vector
};

/// Distortion allocation by inverse water-filling: all actively coded bands
/// share the water level theta with sum(min(theta, sigma_i^2)) = D_target;
/// when D_target covers the total power no coding is needed.
inline RateAllocation allocate_distortion(std::span<const double> variances, double d_target) {
    if (!(d_target > 0.0)) {
        throw std::invalid_argument("allocate_distortion: D_target must be > 0");
    }
    if (variances.empty()) {
        throw std::invalid_argument("allocate_distortion: needs at least one variance");
    }
    double total = 0.0;
    double maxv = 0.0;
    for (double v : variances) {
        if (v < 0.0 || !std::isfinite(v)) {
            throw std::invalid_argument("allocate_distortion: variances must be finite and >= 0");
        }
        total += v;
        maxv = std::max(maxv, v);
    }
    if (!(maxv > 0.0)) {
        throw std::invalid_argument("allocate_distortion: at least one variance must be > 0");
    }

    RateAllocation out;
    out.variances.assign(variances.begin(), variances.end());
    out.distortions.resize(variances.size());

    if (d_target >= total) {
        out.water_level = maxv;
        out.distortions = out.variances;
        out.total_rate = 0.0;
        return out;
    }

    auto filled = [&](double theta) {
        double s = 0.0;
        for (double v : variances) s += std::min(theta, v);
        return s;
    };
    double lo = 0.0, hi = maxv;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (filled(mid) < d_target) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-15 * maxv) break;
    }
    out.water_level = 0.5 * (lo + hi);
    // Exact sum: distribute the bisection residue over the active bands so
    // that sum(D_i) == D_target to full precision.
    std::size_t active = 0;
    double inactive_sum = 0.0;
    for (double v : variances) {
        if (v > out.water_level) {
            ++active;
        } else {
            inactive_sum += v;
        }
    }
    if (active > 0) out.water_level = (d_target - inactive_sum) / static_cast<double>(active);
    out.total_rate = 0.0;
    for (std::size_t i = 0; i < out.variances.size(); ++i) {
        out.distortions[i] = std::min(out.water_level, out.variances[i]);
        if (out.distortions[i] > 0.0 && out.variances[i] > out.distortions[i]) {
            out.total_rate += 0.5 * std::log(out.variances[i] / out.distortions[i]);
        }
    }
    return out;
}

/// Midpoint-reconstruction uniform scalar quantizer spanning mean +- 4 std.
struct ScalarCodebook {
    double mean = 0.0;
    double step = 0.0;          // 0 when there is a single level
    std::uint32_t levels = 1;

    double reconstruct(std::uint32_t index) const {
        if (levels <= 1) return mean;
        const double lo = mean - 4.0 * extent();
        return lo + (static_cast<double>(index) + 0.5) * step;
    }
    double extent() const { return step * static_cast<double>(levels) / 8.0; }
};

struct QuantizedStream {
    std::vector<std::uint32_t> indices;
    ScalarCodebook codebook;
    std::uint32_t bits_per_index = 0;
};

/// Quantizes a stream at the requested rate (nats per sample) using
/// 2^ceil(rate/ln2) levels across mean +- 4 sample standard deviations.
/// Rate 0 produces a single level, so the decoder reproduces the mean.
inline QuantizedStream quantize_gaussian(std::span<const double> z, double rate_per_sample) {
    if (rate_per_sample < 0.0) {
        throw std::invalid_argument("quantize_gaussian: rate must be >= 0");
    }
    if (z.empty()) throw std::invalid_argument("quantize_gaussian: empty input");
    const double bits_f = std::ceil(rate_per_sample / std::log(2.0) - 1e-9);
    const std::uint32_t bits = static_cast<std::uint32_t>(std::max(0.0, bits_f));
    if (bits > 24) throw std::invalid_argument("quantize_gaussian: rate above 24 bits/sample");
    const std::uint32_t levels = static_cast<std::uint32_t>(1u) << bits;

    const double mean = math::mean(z);
    const double stddev = std::sqrt(math::variance(z));

    QuantizedStream out;
    out.codebook.mean = mean;
    out.codebook.levels = levels;
    out.bits_per_index = bits;
    out.indices.resize(z.size());
    if (levels <= 1 || stddev == 0.0) {
        out.codebook.levels = 1;
        out.codebook.step = 0.0;
        out.bits_per_index = 0;
        std::fill(out.indices.begin(), out.indices.end(), 0u);
        return out;
    }
    const double span = 8.0 * stddev;
    out.codebook.step = span / static_cast<double>(levels);
    const double lo = mean - 4.0 * stddev;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double idx = std::floor((z[i] - lo) / out.codebook.step);
        idx = std::clamp(idx, 0.0, static_cast<double>(levels - 1));
        out.indices[i] = static_cast<std::uint32_t>(idx);
    }
    return out;
}

inline std::vector<double> dequantize(std::span<const std::uint32_t> indices,
                                      const ScalarCodebook& codebook) {
    std::vector<double> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= codebook.levels) {
            throw std::invalid_argument("dequantize: index outside the codebook");
        }
        out[i] = codebook.reconstruct(indices[i]);
    }
    return out;
}

} // namespace cpw::rd
