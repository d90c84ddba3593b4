#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cpw/config.hpp"
#include "cpw/errors.hpp"
#include "cpw/ingest.hpp"
#include "cpw/innovation.hpp"
#include "cpw/math.hpp"
#include "cpw/rng.hpp"
#include "cpw/series.hpp"

namespace cpw::sim {

enum class SdgKind { ar_gaussian, bootstrap };

/// Stochastic distributed generation feed. The AR path draws a stationary
/// Gaussian AR process; the bootstrap path resamples contiguous blocks of an
/// ingested profile.
struct SdgProcess {
    SdgKind kind = SdgKind::ar_gaussian;
    std::vector<double> ar_coeffs;
    double noise_std = 0.0;
    double mean_power = 0.0;  // amperes of envelope contribution
    std::shared_ptr<const WaveformSeries> bootstrap_source;
    std::size_t block_len = 1;

    void validate() const {
        if (kind == SdgKind::ar_gaussian) {
            if (noise_std < 0.0) throw ConfigError("SdgProcess: noise_std must be >= 0");
            if (!ar::is_stable(ar_coeffs)) {
                throw ConfigError("SdgProcess: AR coefficients are unstable");
            }
        } else {
            if (!bootstrap_source) {
                throw ConfigError("SdgProcess: bootstrap requested without a source profile");
            }
            if (block_len == 0 || bootstrap_source->size() < block_len) {
                throw ConfigError("SdgProcess: bootstrap source shorter than block_len");
            }
        }
    }
};

struct FaultSpec {
    double onset = 0.0;                        // seconds
    double envelope_multiplier = 1.0;          // post/pre fundamental envelope ratio, > 0
    double transient_tau = 0.005;              // seconds, exponential approach
    std::map<int, double> harmonic_injection;  // harmonic index -> amplitude (amperes)
    double sdg_offset_a = 0.0;                 // fault-coupled SDG feed opposing the relay current
};

enum class RelayRole { primary, backup, sympathetic, blinded_primary, unaffected };

inline std::string to_string(RelayRole r) {
    switch (r) {
        case RelayRole::primary: return "primary";
        case RelayRole::backup: return "backup";
        case RelayRole::sympathetic: return "sympathetic";
        case RelayRole::blinded_primary: return "blinded_primary";
        case RelayRole::unaffected: return "unaffected";
    }
    return "unaffected";
}

inline RelayRole relay_role_from_string(const std::string& s) {
    if (s == "primary") return RelayRole::primary;
    if (s == "backup") return RelayRole::backup;
    if (s == "sympathetic") return RelayRole::sympathetic;
    if (s == "blinded_primary") return RelayRole::blinded_primary;
    if (s == "unaffected") return RelayRole::unaffected;
    throw ConfigError("unknown relay role: " + s);
}

struct RelaySpec {
    std::string name;
    RelayRole role = RelayRole::unaffected;
    double base_envelope = 100.0;  // amperes
    double sdg_coupling = 0.0;     // dimensionless weight of the SDG contribution
    std::optional<FaultSpec> fault;
};

struct FeederScenario {
    std::string name = "scenario";
    std::vector<RelaySpec> relays;
    double duration = 1.0;           // seconds
    double sample_rate = 1920.0;     // Hz
    double fundamental_freq = 60.0;  // Hz
    std::uint64_t seed = 0;
    SdgProcess sdg;
    double sensor_noise_frac = 0.005;  // sensor noise std as a fraction of base_envelope

    void validate() const {
        if (relays.empty()) throw ConfigError("FeederScenario: needs at least one relay");
        if (!(duration > 0.0) || !(sample_rate > 0.0) || !(fundamental_freq > 0.0)) {
            throw ConfigError("FeederScenario: duration, sample_rate, fundamental_freq must be > 0");
        }
        int max_harmonic = 1;
        for (const auto& r : relays) {
            if (r.fault) {
                const auto& f = *r.fault;
                if (!(f.onset >= 0.0 && f.onset < duration)) {
                    throw ConfigError("FeederScenario: fault onset outside scenario duration");
                }
                if (!(f.envelope_multiplier > 0.0) || !std::isfinite(f.envelope_multiplier)) {
                    throw ConfigError("FeederScenario: envelope_multiplier must be finite and > 0");
                }
                if (!(f.transient_tau > 0.0)) {
                    throw ConfigError("FeederScenario: transient_tau must be > 0");
                }
                for (const auto& [h, amp] : f.harmonic_injection) {
                    if (h < 1) throw ConfigError("FeederScenario: harmonic index must be >= 1");
                    max_harmonic = std::max(max_harmonic, h);
                    (void)amp;
                }
            }
            if ((r.role == RelayRole::sympathetic || r.role == RelayRole::blinded_primary)) {
                if (!r.fault || !(r.fault->envelope_multiplier > 1.0)) {
                    throw ConfigError("FeederScenario: role '" + to_string(r.role) +
                                      "' requires a fault with multiplier > 1");
                }
            }
        }
        if (sample_rate < 2.0 * fundamental_freq * max_harmonic) {
            throw ConfigError("FeederScenario: sample_rate below twice the highest harmonic");
        }
        sdg.validate();
    }
};

namespace detail {

/// Lower Cholesky factor of a small symmetric positive-definite matrix.
inline std::vector<std::vector<double>> cholesky(const std::vector<std::vector<double>>& a) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            if (i == j) {
                if (!(s > 0.0)) {
                    throw DegenerateInputError("cholesky: matrix not positive definite");
                }
                l[i][j] = std::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    return l;
}

} // namespace detail

namespace detail {

inline std::vector<double> sample_ar_stationary(std::span<const double> coeffs, double sigma,
                                                double mean, std::size_t n, Rng& rng) {
    const std::size_t p = coeffs.size();
    std::vector<double> out(n);
    if (p == 0 || sigma == 0.0) {
        for (auto& x : out) x = mean + sigma * rng.normal();
        return out;
    }
    const auto gamma = ar::ar_autocovariances(coeffs, sigma * sigma);
    std::vector<std::vector<double>> cov(p, std::vector<double>(p));
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            cov[i][j] = gamma[static_cast<std::size_t>(std::llabs(
                static_cast<long long>(i) - static_cast<long long>(j)))];
        }
    }
    const auto l = cholesky(cov);
    std::vector<double> state(p, 0.0);  // state[0] is the most recent value
    std::vector<double> z(p);
    for (auto& e : z) e = rng.normal();
    for (std::size_t i = 0; i < p; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j <= i; ++j) s += l[i][j] * z[j];
        state[p - 1 - i] = s;  // oldest first in generation order
    }
    for (std::size_t t = 0; t < n; ++t) {
        double x = sigma * rng.normal();
        for (std::size_t i = 0; i < p; ++i) x += coeffs[i] * state[i];
        for (std::size_t i = p; i-- > 1;) state[i] = state[i - 1];
        state[0] = x;
        out[t] = mean + x;
    }
    return out;
}

} // namespace detail

/// Draws n samples of the SDG process. The AR path starts from an exact
/// stationary state (no burn-in transient survives); the bootstrap path
/// concatenates uniformly chosen contiguous blocks of the source profile.
inline std::vector<double> sample_sdg_trajectory(const SdgProcess& process, std::size_t n,
                                                 std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("sample_sdg_trajectory: n must be >= 1");
    process.validate();
    if (process.kind == SdgKind::bootstrap) {
        return ingest::block_bootstrap(*process.bootstrap_source, process.block_len, n, seed);
    }
    Rng rng(seed);
    return detail::sample_ar_stationary(process.ar_coeffs, process.noise_std,
                                        process.mean_power, n, rng);
}

/// Simulates every relay of the scenario. Deterministic given the scenario
/// seed: the SDG trajectory and fundamental phase are shared across relays,
/// sensor noise is drawn per relay, and fault terms modify nothing before
/// their onset, so fault and no-fault variants of the same seed share the
/// pre-onset sample path bit for bit.
///
/// Per relay the waveform is envelope(t) * sin(2 pi f0 t + phi) plus injected
/// harmonic terms plus white sensor noise. The SDG level is sampled at the
/// quarter-cycle rate and held constant within each quarter. Post-onset
/// behaviour depends on the relay role:
///   primary/backup: the whole envelope scales toward multiplier * pre-fault,
///   sympathetic:    a clean additive swell ramps in through the SDG feed,
///   blinded:        the base scales toward the multiplier but the
///                   fault-coupled SDG feed offsets part of the rise.
inline std::map<std::string, WaveformSeries> simulate_scenario(const FeederScenario& sc) {
    sc.validate();
    const double f0 = sc.fundamental_freq;
    const double fs = sc.sample_rate;
    const std::size_t n = static_cast<std::size_t>(std::llround(sc.duration * fs));
    const double quarter_rate = 4.0 * f0;
    const std::size_t n_quarters = static_cast<std::size_t>(sc.duration * quarter_rate) + 2;

    const auto sdg = sample_sdg_trajectory(sc.sdg, n_quarters, derive_seed(sc.seed, 0));
    const double phi = Rng(derive_seed(sc.seed, 1)).uniform(0.0, math::two_pi);
    const double harmonic_phase = math::pi / 2.0;  // quadrature to the fundamental

    std::map<std::string, WaveformSeries> out;
    for (std::size_t ri = 0; ri < sc.relays.size(); ++ri) {
        const auto& relay = sc.relays[ri];
        Rng noise_rng(derive_seed(sc.seed, 100 + ri));
        const double sigma_noise = sc.sensor_noise_frac * relay.base_envelope;

        WaveformSeries w;
        w.sample_rate = fs;
        w.t0 = 0.0;
        w.samples.resize(n);
        const double omega = math::two_pi * f0;
        for (std::size_t t = 0; t < n; ++t) {
            const double tt = static_cast<double>(t) / fs;
            const std::size_t qi = static_cast<std::size_t>(tt * quarter_rate);
            const double sdg_level = relay.sdg_coupling * sdg[qi];

            double env;
            double harmonics = 0.0;
            if (!relay.fault || tt < relay.fault->onset) {
                env = relay.base_envelope + sdg_level;
            } else {
                const auto& f = *relay.fault;
                const double ramp = 1.0 - std::exp(-(tt - f.onset) / f.transient_tau);
                const double gain = 1.0 + (f.envelope_multiplier - 1.0) * ramp;
                switch (relay.role) {
                    case RelayRole::sympathetic:
                        env = relay.base_envelope + sdg_level +
                              (f.envelope_multiplier - 1.0) * relay.base_envelope * ramp;
                        break;
                    case RelayRole::blinded_primary:
                        env = relay.base_envelope * gain + sdg_level -
                              relay.sdg_coupling * f.sdg_offset_a * ramp;
                        break;
                    default:
                        env = (relay.base_envelope + sdg_level) * gain;
                        break;
                }
                for (const auto& [h, amp] : f.harmonic_injection) {
                    harmonics += amp * ramp *
                                 std::sin(static_cast<double>(h) * (omega * tt + phi) +
                                          harmonic_phase);
                }
            }
            w.samples[t] = env * std::sin(omega * tt + phi) + harmonics +
                           sigma_noise * noise_rng.normal();
        }
        out.emplace(relay.name, std::move(w));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Default scenario catalog
// ---------------------------------------------------------------------------

/// Builds the default five-relay radial feeder. `fault_case` selects the
/// injected fault: "F1" (fault in R3's zone; R2 backs up; R4 sees a
/// sympathetic SDG swell), "F2" (fault in R5's zone under protection
/// blinding; R4 backs up), "F3" (fault in R2's zone; R1 backs up; R4
/// sympathetic), or "none" for the anomaly-free variant.
inline FeederScenario default_scenario(const std::string& fault_case, std::uint64_t seed = 1) {
    FeederScenario sc;
    sc.name = fault_case;
    sc.duration = 40.0;
    sc.sample_rate = 1920.0;
    sc.fundamental_freq = 60.0;
    sc.seed = seed;
    sc.sensor_noise_frac = 0.005;
    sc.sdg.kind = SdgKind::ar_gaussian;
    sc.sdg.ar_coeffs = {0.9999};    // at the quarter-cycle rate
    sc.sdg.noise_std = 0.113;       // stationary swing around 8 A
    sc.sdg.mean_power = 0.0;

    const double onset = 8.0;
    auto relay = [](std::string name, double coupling) {
        RelaySpec r;
        r.name = std::move(name);
        r.base_envelope = 100.0;
        r.sdg_coupling = coupling;
        return r;
    };
    RelaySpec r1 = relay("R1", 0.15);
    RelaySpec r2 = relay("R2", 0.20);
    RelaySpec r3 = relay("R3", 0.35);
    RelaySpec r4 = relay("R4", 1.0);
    RelaySpec r5 = relay("R5", 1.0);

    auto zone_fault = [&](double multiplier) {
        FaultSpec f;
        f.onset = onset;
        f.envelope_multiplier = multiplier;
        f.transient_tau = 0.005;
        f.harmonic_injection[3] = 0.10 * multiplier * 100.0;
        return f;
    };
    auto swell_fault = [&](double multiplier) {
        FaultSpec f;
        f.onset = onset;
        f.envelope_multiplier = multiplier;
        f.transient_tau = 25.0;  // SDG feed ramps with the generation timescale
        return f;
    };

    if (fault_case == "F1") {
        r3.role = RelayRole::primary;
        r3.fault = zone_fault(6.0);
        r2.role = RelayRole::backup;
        r2.fault = zone_fault(3.0);
        r4.role = RelayRole::sympathetic;
        r4.fault = swell_fault(1.6);
    } else if (fault_case == "F2") {
        r5.role = RelayRole::blinded_primary;
        r5.fault = zone_fault(1.8);
        r5.fault->sdg_offset_a = 62.0;
        r4.role = RelayRole::backup;
        r4.fault = zone_fault(3.0);
    } else if (fault_case == "F3") {
        r2.role = RelayRole::primary;
        r2.fault = zone_fault(6.0);
        r1.role = RelayRole::backup;
        r1.fault = zone_fault(3.0);
        r4.role = RelayRole::sympathetic;
        r4.fault = swell_fault(1.6);
    } else if (fault_case != "none") {
        throw ConfigError("default_scenario: unknown fault case '" + fault_case + "'");
    }
    sc.relays = {r1, r2, r3, r4, r5};
    return sc;
}

// ---------------------------------------------------------------------------
// Scenario config files (one table per relay)
// ---------------------------------------------------------------------------

inline cfg::Table scenario_to_config(const FeederScenario& sc) {
    cfg::Table root;
    auto& s = root.table("scenario");
    s.set("name", cfg::Value::of(sc.name));
    s.set("duration_s", cfg::Value::of(sc.duration));
    s.set("sample_rate_hz", cfg::Value::of(sc.sample_rate));
    s.set("fundamental_hz", cfg::Value::of(sc.fundamental_freq));
    s.set("seed", cfg::Value::of(static_cast<std::int64_t>(sc.seed)));
    s.set("sensor_noise_frac", cfg::Value::of(sc.sensor_noise_frac));

    auto& g = root.table("sdg");
    g.set("kind", cfg::Value::of(std::string(sc.sdg.kind == SdgKind::ar_gaussian
                                                 ? "ar_gaussian"
                                                 : "bootstrap")));
    g.set("ar_coeffs", cfg::Value::of(sc.sdg.ar_coeffs));
    g.set("noise_std", cfg::Value::of(sc.sdg.noise_std));
    g.set("mean_power", cfg::Value::of(sc.sdg.mean_power));
    g.set("block_len", cfg::Value::of(static_cast<std::int64_t>(sc.sdg.block_len)));

    auto& relays = root.table("relay");
    for (const auto& r : sc.relays) {
        auto& t = relays.table(r.name);
        t.set("role", cfg::Value::of(to_string(r.role)));
        t.set("base_envelope_a", cfg::Value::of(r.base_envelope));
        t.set("sdg_coupling", cfg::Value::of(r.sdg_coupling));
        if (r.fault) {
            const auto& f = *r.fault;
            t.set("fault_onset_s", cfg::Value::of(f.onset));
            t.set("fault_envelope_multiplier", cfg::Value::of(f.envelope_multiplier));
            t.set("fault_transient_tau_s", cfg::Value::of(f.transient_tau));
            t.set("fault_sdg_offset_a", cfg::Value::of(f.sdg_offset_a));
            for (const auto& [h, amp] : f.harmonic_injection) {
                t.set("fault_harmonic_" + std::to_string(h) + "_a", cfg::Value::of(amp));
            }
        }
    }
    return root;
}

inline FeederScenario scenario_from_config(const cfg::Table& root) {
    FeederScenario sc;
    const cfg::Table* s = root.find_table("scenario");
    if (!s) throw ConfigError("scenario config: missing [scenario] table");
    sc.name = s->get_string("name", "scenario");
    sc.duration = s->require_real("duration_s");
    sc.sample_rate = s->require_real("sample_rate_hz");
    sc.fundamental_freq = s->require_real("fundamental_hz");
    sc.seed = static_cast<std::uint64_t>(s->get_int("seed", 0));
    sc.sensor_noise_frac = s->get_real("sensor_noise_frac", 0.005);

    if (const cfg::Table* g = root.find_table("sdg")) {
        const std::string kind = g->get_string("kind", "ar_gaussian");
        if (kind == "ar_gaussian") {
            sc.sdg.kind = SdgKind::ar_gaussian;
        } else if (kind == "bootstrap") {
            sc.sdg.kind = SdgKind::bootstrap;
        } else {
            throw ConfigError("scenario config: unknown sdg kind '" + kind + "'");
        }
        if (const cfg::Value* v = g->find("ar_coeffs")) sc.sdg.ar_coeffs = v->as_real_array();
        sc.sdg.noise_std = g->get_real("noise_std", 0.0);
        sc.sdg.mean_power = g->get_real("mean_power", 0.0);
        sc.sdg.block_len = static_cast<std::size_t>(g->get_int("block_len", 1));
        if (sc.sdg.kind == SdgKind::bootstrap) {
            const std::string path = g->get_string("source_csv", "");
            if (!path.empty()) {
                auto ds = ingest::read_waveform_csv(path, g->get_string("time_col", "time_s"),
                                                    g->get_string("value_col", "current_a"));
                sc.sdg.bootstrap_source =
                    std::make_shared<WaveformSeries>(std::move(ds.series));
            }
        }
    }

    const cfg::Table* relays = root.find_table("relay");
    if (!relays) throw ConfigError("scenario config: missing [relay.*] tables");
    for (const auto& [name, t] : relays->tables) {
        RelaySpec r;
        r.name = name;
        r.role = relay_role_from_string(t.get_string("role", "unaffected"));
        r.base_envelope = t.require_real("base_envelope_a");
        r.sdg_coupling = t.get_real("sdg_coupling", 0.0);
        if (t.has("fault_onset_s")) {
            FaultSpec f;
            f.onset = t.require_real("fault_onset_s");
            f.envelope_multiplier = t.require_real("fault_envelope_multiplier");
            f.transient_tau = t.get_real("fault_transient_tau_s", 0.005);
            f.sdg_offset_a = t.get_real("fault_sdg_offset_a", 0.0);
            for (const auto& [key, val] : t.values) {
                if (key.rfind("fault_harmonic_", 0) == 0 && key.size() > 17 &&
                    key.substr(key.size() - 2) == "_a") {
                    const int h = std::stoi(key.substr(15, key.size() - 17));
                    f.harmonic_injection[h] = val.as_real();
                }
            }
            r.fault = f;
        }
        sc.relays.push_back(std::move(r));
    }
    sc.validate();
    return sc;
}

} // namespace cpw::sim
