#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpw/errors.hpp"
#include "cpw/innovation.hpp"
#include "cpw/rate.hpp"
#include "cpw/series.hpp"
#include "cpw/subband.hpp"

namespace cpw::codec {

/// One trained innovation model per I/Q component of a subband.
using SubbandModels = std::array<ArInnovationModel, 2>;

/// End-to-end compressed representation. The header is kept as the exact
/// JSON byte string written to disk so that round trips are bit-exact.
struct CompressedBlob {
    std::string header_json;
    std::vector<std::vector<std::uint8_t>> payloads;  // one per band, header order

    nlohmann::json header() const { return nlohmann::json::parse(header_json); }
};

namespace detail {

inline void pack_bits(std::vector<std::uint8_t>& out, std::span<const std::uint32_t> indices,
                      std::uint32_t bits) {
    if (bits == 0) return;
    std::size_t bitpos = 0;
    out.assign((indices.size() * bits + 7) / 8, 0u);
    for (std::uint32_t idx : indices) {
        for (std::uint32_t b = 0; b < bits; ++b) {
            if (idx & (1u << b)) out[bitpos >> 3] |= static_cast<std::uint8_t>(1u << (bitpos & 7));
            ++bitpos;
        }
    }
}

inline std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes,
                                              std::size_t count, std::uint32_t bits) {
    std::vector<std::uint32_t> out(count, 0u);
    if (bits == 0) return out;
    if (bytes.size() * 8 < count * bits) {
        throw ConfigError("blob payload shorter than the header promises");
    }
    std::size_t bitpos = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t v = 0;
        for (std::uint32_t b = 0; b < bits; ++b) {
            if (bytes[bitpos >> 3] & (1u << (bitpos & 7))) v |= (1u << b);
            ++bitpos;
        }
        out[i] = v;
    }
    return out;
}

inline nlohmann::ordered_json plan_to_json(const subband::SubbandPlan& p) {
    return {{"f0", p.f0},
            {"m", p.m},
            {"W", p.W},
            {"fs", p.fs},
            {"decimation", p.decimation},
            {"filter_taps", p.filter_taps},
            {"window", p.window == subband::FilterWindow::blackman ? "blackman" : "hamming"}};
}

inline subband::SubbandPlan plan_from_json(const nlohmann::json& j) {
    subband::SubbandPlan p;
    p.f0 = j.at("f0").get<double>();
    p.m = j.at("m").get<std::size_t>();
    p.W = j.at("W").get<double>();
    p.fs = j.at("fs").get<double>();
    p.decimation = j.at("decimation").get<std::size_t>();
    p.filter_taps = j.at("filter_taps").get<std::size_t>();
    p.window = j.at("window").get<std::string>() == "hamming" ? subband::FilterWindow::hamming
                                                              : subband::FilterWindow::blackman;
    p.validate();
    return p;
}

inline nlohmann::ordered_json codebook_to_json(const rd::ScalarCodebook& c) {
    return {{"mean", c.mean}, {"step", c.step}, {"levels", c.levels}};
}

inline rd::ScalarCodebook codebook_from_json(const nlohmann::json& j) {
    rd::ScalarCodebook c;
    c.mean = j.at("mean").get<double>();
    c.step = j.at("step").get<double>();
    c.levels = j.at("levels").get<std::uint32_t>();
    return c;
}

// Granular-noise constant of the +-4 sigma uniform quantizer: MSE at L
// levels is about (16/3) sigma^2 / L^2, so hitting distortion d needs
// L >= sqrt((16/3) sigma^2 / d).
inline std::uint32_t bits_for_distortion(double sigma2, double d) {
    if (!(d > 0.0) || sigma2 <= 0.0) return 0;
    const double levels = std::sqrt((16.0 / 3.0) * sigma2 / d);
    if (levels <= 1.0) return 0;
    const double bits = std::ceil(std::log2(levels) - 1e-12);
    return static_cast<std::uint32_t>(std::min(bits, 20.0));
}

} // namespace detail

/// Trains one gaussian-innovation model per I/Q component of each subband
/// from anomaly-free data.
inline std::vector<SubbandModels> train_subband_models(const WaveformSeries& train,
                                                       const subband::SubbandPlan& plan,
                                                       std::size_t order = 8) {
    const auto bands = subband_decompose(train, plan);
    std::vector<SubbandModels> models;
    models.reserve(bands.size());
    for (const auto& band : bands) {
        WaveformSeries comp;
        comp.sample_rate = band.rate;
        comp.samples.resize(band.baseband.size());
        SubbandModels pair;
        for (int c = 0; c < 2; ++c) {
            for (std::size_t i = 0; i < band.baseband.size(); ++i) {
                comp.samples[i] = c == 0 ? band.baseband[i].real() : band.baseband[i].imag();
            }
            try {
                pair[static_cast<std::size_t>(c)] = estimate_ar_model(comp, order);
            } catch (const DegenerateInputError&) {
                // Inactive band (e.g. a harmonic that never appears): model
                // it as a constant level.
                ArInnovationModel m;
                m.order = 0;
                m.innovation_std = 1e-9 * std::max(1.0, std::abs(math::mean(comp.samples)));
                m.mean = math::mean(comp.samples);
                pair[static_cast<std::size_t>(c)] = m;
            }
        }
        models.push_back(std::move(pair));
    }
    return models;
}

/// Innovation-based subband compression: decompose, whiten each component
/// with its model, allocate reconstruction distortion across components by
/// inverse water-filling, scalar-quantize the innovations and pack the
/// indices. `d_target` is the acceptable time-domain reconstruction MSE (in
/// squared amperes). `state_flags` is the per-block normal/fault sequence
/// from local analytics; when every block is flagged normal the harmonic
/// subbands are suppressed from the payload entirely.
inline CompressedBlob compress_pipeline(const WaveformSeries& x, const subband::SubbandPlan& plan,
                                        double d_target,
                                        const std::vector<SubbandModels>& models,
                                        const std::vector<int>& state_flags = {}) {
    plan.validate();
    x.validate();
    if (!(d_target > 0.0)) throw std::invalid_argument("compress_pipeline: D_target must be > 0");
    if (models.size() != plan.m) {
        throw ConfigError("compress_pipeline: need one model pair per subband");
    }
    const auto bands = subband_decompose(x, plan);

    bool all_normal = !state_flags.empty();
    for (int f : state_flags) all_normal = all_normal && f == 0;

    // Component streams in band-major order: (band0 I, band0 Q, band1 I, ...)
    struct Component {
        std::vector<double> samples;
        std::vector<double> innovations;
        std::vector<double> warmup;
        double recon_variance = 0.0;  // sample variance, decode-gain referred
        double innov_variance = 0.0;
        bool suppressed = false;
    };
    std::vector<Component> comps(2 * plan.m);
    for (std::size_t k = 0; k < plan.m; ++k) {
        const bool suppress = all_normal && k >= 1;  // keep the fundamental only
        for (int c = 0; c < 2; ++c) {
            auto& comp = comps[2 * k + static_cast<std::size_t>(c)];
            comp.suppressed = suppress;
            comp.samples.resize(bands[k].baseband.size());
            for (std::size_t i = 0; i < comp.samples.size(); ++i) {
                comp.samples[i] = c == 0 ? bands[k].baseband[i].real()
                                         : bands[k].baseband[i].imag();
            }
            const auto& model = models[k][static_cast<std::size_t>(c)];
            WaveformSeries tmp;
            tmp.sample_rate = bands[k].rate;
            tmp.samples = comp.samples;
            const auto innov = encode_gaussian(model, tmp);
            comp.innovations = innov.values;
            comp.warmup.assign(comp.samples.begin(),
                               comp.samples.begin() + static_cast<std::ptrdiff_t>(model.order));
            comp.recon_variance = math::variance(comp.samples);
            comp.innov_variance =
                model.innovation_std * model.innovation_std * math::variance(innov.values);
        }
    }

    // Time-domain MSE of band k is 2 (D_I + D_Q) of its baseband components;
    // budget the baseband allocation at half the time-domain target.
    std::vector<double> variances;
    for (const auto& comp : comps) {
        variances.push_back(comp.suppressed ? 0.0 : comp.recon_variance);
    }
    const auto allocation = rd::allocate_distortion(variances, d_target / 2.0);

    nlohmann::ordered_json header;
    header["format_version"] = 1;
    header["plan"] = detail::plan_to_json(plan);
    header["length"] = x.size();
    header["t0"] = x.t0;
    header["d_target"] = d_target;
    header["allocation"] = {{"variances", allocation.variances},
                            {"distortions", allocation.distortions},
                            {"water_level", allocation.water_level},
                            {"total_rate_nats", allocation.total_rate}};
    if (!state_flags.empty()) header["state_flags"] = state_flags;

    CompressedBlob blob;
    nlohmann::ordered_json bands_json = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < plan.m; ++k) {
        nlohmann::ordered_json band_json;
        band_json["center_freq"] = bands[k].center_freq;
        band_json["rate"] = bands[k].rate;
        band_json["suppressed"] = comps[2 * k].suppressed;
        nlohmann::ordered_json comps_json = nlohmann::ordered_json::array();
        std::vector<std::uint8_t> payload;
        for (int c = 0; c < 2; ++c) {
            auto& comp = comps[2 * k + static_cast<std::size_t>(c)];
            const auto& model = models[k][static_cast<std::size_t>(c)];
            nlohmann::ordered_json cj;
            cj["model"] = to_json(model);
            cj["warmup"] = comp.warmup;
            cj["count"] = comp.innovations.size();
            if (comp.suppressed) {
                cj["bits"] = 0;
                cj["codebook"] = detail::codebook_to_json(rd::ScalarCodebook{});
            } else {
                // Reconstruction-referred distortion maps to the innovation
                // domain through the decode gain (variance ratio).
                const double d_recon = allocation.distortions[2 * k + static_cast<std::size_t>(c)];
                const double gain = comp.innov_variance > 0.0
                                        ? comp.recon_variance / comp.innov_variance
                                        : 1.0;
                const double d_innov = d_recon / std::max(gain, 1e-30);
                const std::uint32_t bits =
                    detail::bits_for_distortion(comp.innov_variance, d_innov);
                const auto q = rd::quantize_gaussian(comp.innovations,
                                                     static_cast<double>(bits) * std::log(2.0));
                cj["bits"] = q.bits_per_index;
                cj["codebook"] = detail::codebook_to_json(q.codebook);
                std::vector<std::uint8_t> packed;
                detail::pack_bits(packed, q.indices, q.bits_per_index);
                payload.insert(payload.end(), packed.begin(), packed.end());
            }
            comps_json.push_back(std::move(cj));
        }
        band_json["components"] = std::move(comps_json);
        band_json["payload_bytes"] = payload.size();
        bands_json.push_back(std::move(band_json));
        blob.payloads.push_back(std::move(payload));
    }
    header["bands"] = std::move(bands_json);
    blob.header_json = header.dump();
    return blob;
}

/// Inverts compress_pipeline: unpack, dequantize, innovation-decode each
/// component, reassemble subbands and reconstruct the waveform.
inline WaveformSeries decompress_pipeline(const CompressedBlob& blob) {
    const auto header = blob.header();
    if (header.at("format_version").get<int>() != 1) {
        throw ConfigError("decompress_pipeline: unsupported format version");
    }
    const auto plan = detail::plan_from_json(header.at("plan"));
    const std::size_t length = header.at("length").get<std::size_t>();
    const auto& bands_json = header.at("bands");
    if (bands_json.size() != plan.m || blob.payloads.size() != plan.m) {
        throw ConfigError("decompress_pipeline: band count mismatch");
    }

    std::vector<subband::SubbandSignal> bands(plan.m);
    for (std::size_t k = 0; k < plan.m; ++k) {
        const auto& bj = bands_json[k];
        const auto& payload = blob.payloads[k];
        std::size_t offset = 0;
        std::array<std::vector<double>, 2> components;
        for (int c = 0; c < 2; ++c) {
            const auto& cj = bj.at("components").at(static_cast<std::size_t>(c));
            const auto model = ar_model_from_json(cj.at("model"));
            const auto warmup = cj.at("warmup").get<std::vector<double>>();
            const std::size_t count = cj.at("count").get<std::size_t>();
            const std::uint32_t bits = cj.at("bits").get<std::uint32_t>();
            const auto codebook = detail::codebook_from_json(cj.at("codebook"));

            std::vector<double> innov;
            if (bj.at("suppressed").get<bool>()) {
                innov.assign(count, 0.0);
            } else {
                const std::size_t nbytes = (count * bits + 7) / 8;
                if (offset + nbytes > payload.size()) {
                    throw ConfigError("decompress_pipeline: payload truncated");
                }
                const auto indices = detail::unpack_bits(
                    std::span<const std::uint8_t>(payload.data() + offset, nbytes), count, bits);
                offset += nbytes;
                const auto recon = rd::dequantize(indices, codebook);
                innov.resize(count);
                for (std::size_t i = 0; i < count; ++i) {
                    innov[i] = bits == 0 ? codebook.mean : recon[i];
                }
            }
            const auto series =
                decode_gaussian(model, innov, warmup, bj.at("rate").get<double>());
            components[static_cast<std::size_t>(c)] = series.samples;
        }
        bands[k].center_freq = bj.at("center_freq").get<double>();
        bands[k].rate = bj.at("rate").get<double>();
        const std::size_t n = std::min(components[0].size(), components[1].size());
        bands[k].baseband.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            bands[k].baseband[i] = {components[0][i], components[1][i]};
        }
    }
    auto out = subband_reconstruct(bands, plan, length);
    out.t0 = header.at("t0").get<double>();
    return out;
}

// ---------------------------------------------------------------------------
// Binary blob layout: "CPW1" | u32 LE header length | header JSON | payloads
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> serialize_blob(const CompressedBlob& blob) {
    std::vector<std::uint8_t> out;
    const char magic[4] = {'C', 'P', 'W', '1'};
    out.insert(out.end(), magic, magic + 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(blob.header_json.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((hlen >> (8 * i)) & 0xFF));
    out.insert(out.end(), blob.header_json.begin(), blob.header_json.end());
    for (const auto& p : blob.payloads) out.insert(out.end(), p.begin(), p.end());
    return out;
}

inline CompressedBlob parse_blob(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "CPW1", 4) != 0) {
        throw ConfigError("parse_blob: bad magic");
    }
    std::uint32_t hlen = 0;
    for (int i = 0; i < 4; ++i) {
        hlen |= static_cast<std::uint32_t>(bytes[4 + static_cast<std::size_t>(i)]) << (8 * i);
    }
    if (bytes.size() < 8 + hlen) throw ConfigError("parse_blob: truncated header");
    CompressedBlob blob;
    blob.header_json.assign(reinterpret_cast<const char*>(bytes.data() + 8), hlen);
    const auto header = nlohmann::json::parse(blob.header_json);
    std::size_t offset = 8 + hlen;
    for (const auto& bj : header.at("bands")) {
        const std::size_t n = bj.at("payload_bytes").get<std::size_t>();
        if (offset + n > bytes.size()) throw ConfigError("parse_blob: truncated payload");
        blob.payloads.emplace_back(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(offset + n));
        offset += n;
    }
    return blob;
}

inline void write_blob_file(const CompressedBlob& blob, const std::string& path) {
    const auto bytes = serialize_blob(blob);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write blob file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

inline CompressedBlob read_blob_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open blob file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_blob(bytes);
}

} // namespace cpw::codec
