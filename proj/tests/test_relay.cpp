#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cpw/relay.hpp"
#include "cpw/sim.hpp"
#include "support.hpp"

using namespace cpw;
using namespace cpw::relay;
using nst::Hypothesis;

namespace {

WaveformSeries sinusoid(double amp, double f0, double fs, double dur, double phase = 0.3) {
    WaveformSeries w;
    w.sample_rate = fs;
    w.samples.resize(static_cast<std::size_t>(dur * fs));
    for (std::size_t t = 0; t < w.samples.size(); ++t) {
        w.samples[t] = amp * std::sin(math::two_pi * f0 * t / fs + phase);
    }
    return w;
}

} // namespace

TEST_CASE("block maxima of a constant-amplitude sinusoid") {
    const auto w = sinusoid(100.0, 60.0, 1920.0, 1.0);
    const auto blocks = rectified_block_max(w, 32);  // one cycle per block
    REQUIRE(blocks.size() == 60);
    for (const auto& b : blocks) {
        CHECK(b.max_abs == Catch::Approx(100.0).epsilon(0.005));
    }
}

TEST_CASE("block maxima of zero and stepped signals") {
    WaveformSeries z;
    z.sample_rate = 100.0;
    z.samples.assign(1000, 0.0);
    for (const auto& b : rectified_block_max(z, 10)) CHECK(b.max_abs == 0.0);

    // Amplitude step at a block boundary.
    auto w = sinusoid(100.0, 60.0, 1920.0, 2.0);
    for (std::size_t t = w.size() / 2; t < w.size(); ++t) w.samples[t] *= 5.0;
    const auto blocks = rectified_block_max(w, 32);
    CHECK(blocks[20].max_abs == Catch::Approx(100.0).epsilon(0.005));
    CHECK(blocks[100].max_abs == Catch::Approx(500.0).epsilon(0.005));

    // Last partial block dropped.
    WaveformSeries odd;
    odd.sample_rate = 10.0;
    odd.samples.assign(25, 1.0);
    CHECK(rectified_block_max(odd, 10).size() == 2);
}

TEST_CASE("inverse time delay reference value and properties") {
    InverseTimeCurve curve;  // A = 0.0515, B = 0.114, p = 0.02
    CHECK_FALSE(inverse_time_delay(1.0, 1.0, curve).has_value());
    CHECK_FALSE(inverse_time_delay(0.5, 1.0, curve).has_value());
    CHECK_THROWS_AS(inverse_time_delay(0.0, 1.0, curve), std::invalid_argument);

    const auto t2 = inverse_time_delay(2.0, 1.0, curve);
    REQUIRE(t2.has_value());
    CHECK(*t2 == Catch::Approx(3.803).margin(2e-3));

    // Strictly decreasing in M for M > 1.
    double prev = 1e300;
    for (double M = 1.01; M < 20.0; M *= 1.3) {
        const auto d = inverse_time_delay(M, 0.7, curve);
        REQUIRE(d.has_value());
        CHECK(*d < prev);
        prev = *d;
    }
}

TEST_CASE("conventional relay trips on faults inside the window") {
    const double fs = 1920.0;
    auto w = sinusoid(100.0, 60.0, fs, 4.0);
    for (std::size_t t = w.size() / 2; t < w.size(); ++t) w.samples[t] *= 6.0;

    OvercurrentConfig cfg;
    cfg.pickup_current = 150.0;
    cfg.time_dial = 0.1;
    cfg.block_len = 32;
    const TimeWindow window{2.0, 4.0};
    const auto out = conventional_detect(w, window, cfg, fs);
    CHECK(out.decision == Hypothesis::H1);
    REQUIRE(out.delay_seconds.has_value());
    CHECK(*out.delay_seconds > 0.0);
    CHECK(*out.delay_seconds < 0.5);
    CHECK(out.statistic == Catch::Approx(600.0).epsilon(0.01));
    CHECK(out.threshold == 150.0);

    // No-fault variant stays quiet.
    const auto quiet = sinusoid(100.0, 60.0, fs, 4.0);
    CHECK(conventional_detect(quiet, window, cfg, fs).decision == Hypothesis::H0);
}

TEST_CASE("conventional decisions are scale covariant") {
    const double fs = 1920.0;
    auto w = sinusoid(100.0, 60.0, fs, 4.0);
    Rng rng(5);
    for (auto& x : w.samples) x += 0.5 * rng.normal();
    for (std::size_t t = w.size() / 2; t < w.size(); ++t) w.samples[t] *= 2.1;

    OvercurrentConfig cfg;
    cfg.pickup_current = 130.0;
    cfg.block_len = 32;
    const TimeWindow window{2.0, 4.0};
    const auto base = conventional_detect(w, window, cfg, fs);

    const double k = 7.25;
    auto scaled = w;
    for (auto& x : scaled.samples) x *= k;
    OvercurrentConfig scaled_cfg = cfg;
    scaled_cfg.pickup_current *= k;
    const auto other = conventional_detect(scaled, window, scaled_cfg, fs);

    CHECK(base.decision == other.decision);
    CHECK(base.trip_time_s.has_value() == other.trip_time_s.has_value());
    if (base.trip_time_s) {
        CHECK(*base.trip_time_s == Catch::Approx(*other.trip_time_s).margin(1e-9));
    }
}

TEST_CASE("AOCR pickup tracks slow load growth that trips the fixed relay") {
    // Envelope ramps 100 -> 140 over 20 s: a fixed 125 A pickup trips, the
    // adaptive pickup follows the trailing average and stays quiet.
    const double fs = 1920.0, f0 = 60.0;
    WaveformSeries w;
    w.sample_rate = fs;
    w.samples.resize(static_cast<std::size_t>(30.0 * fs));
    for (std::size_t t = 0; t < w.size(); ++t) {
        const double tt = t / fs;
        const double env = 100.0 + 40.0 * std::clamp((tt - 5.0) / 20.0, 0.0, 1.0);
        w.samples[t] = env * std::sin(math::two_pi * f0 * tt + 0.4);
    }
    const TimeWindow window{10.0, 30.0};

    OvercurrentConfig fixed;
    fixed.pickup_current = 125.0;
    fixed.block_len = 32;
    CHECK(conventional_detect(w, window, fixed, fs).decision == Hypothesis::H1);

    AocrConfig adaptive;
    adaptive.alpha = 1.0;
    adaptive.beta = 1.0;
    adaptive.avg_window = 8.0;
    adaptive.i_fault_min = 20.0;
    adaptive.block_len = 32;
    CHECK(aocr_detect(w, window, adaptive, fs).decision == Hypothesis::H0);
}

TEST_CASE("AOCR requires pre-window history") {
    const auto w = sinusoid(100.0, 60.0, 1920.0, 5.0);
    AocrConfig cfg;
    cfg.avg_window = 10.0;
    cfg.i_fault_min = 50.0;
    cfg.block_len = 32;
    CHECK_THROWS_AS(aocr_detect(w, TimeWindow{2.0, 5.0}, cfg, 1920.0), std::invalid_argument);
}

TEST_CASE("adaptive pickup is translation responsive") {
    // Adding a constant envelope increment to the trailing window raises the
    // adaptive pickup by alpha * increment (block maxima scale with the
    // envelope).
    const double fs = 1920.0, f0 = 60.0;
    auto statistic_with_offset = [&](double delta) {
        WaveformSeries w;
        w.sample_rate = fs;
        w.samples.resize(static_cast<std::size_t>(14.0 * fs));
        for (std::size_t t = 0; t < w.size(); ++t) {
            const double tt = t / fs;
            w.samples[t] = (100.0 + delta) * std::sin(math::two_pi * f0 * tt);
        }
        AocrConfig cfg;
        cfg.alpha = 0.7;
        cfg.beta = 1.0;
        cfg.avg_window = 6.0;
        cfg.i_fault_min = 60.0;
        cfg.block_len = 32;
        return aocr_detect(w, TimeWindow{8.0, 14.0}, cfg, fs).statistic;
    };
    const double s0 = statistic_with_offset(0.0);
    const double s1 = statistic_with_offset(25.0);
    // statistic = blockmax - alpha*avg - beta*i_fmin shifts by (1 - alpha)*delta.
    CHECK(s1 - s0 == Catch::Approx((1.0 - 0.7) * 25.0).margin(0.2));
}

TEST_CASE("calibration finds the smallest feasible grid point") {
    // 100 tiny no-fault runs of pure noise around a 100 A carrier.
    const double fs = 1920.0;
    std::vector<WaveformSeries> runs;
    for (int r = 0; r < 100; ++r) {
        auto w = sinusoid(100.0, 60.0, fs, 1.0, 0.1 * r);
        Rng rng(static_cast<std::uint64_t>(r));
        for (auto& x : w.samples) x += 0.5 * rng.normal();
        runs.push_back(std::move(w));
    }
    const TimeWindow window{0.0, 1.0};
    OvercurrentConfig base;
    base.pickup_current = 1.0;
    base.block_len = 32;

    // target_fpr = 1.0: the smallest grid point wins.
    std::vector<double> grid{90.0, 110.0, 130.0};
    double achieved = -1.0;
    auto cal = calibrate_conventional(runs, window, base, grid, 1.0, fs, &achieved);
    CHECK(cal.pickup_current == 90.0);
    CHECK(achieved >= 0.0);

    // Pickups above the noise ceiling give zero FPR at feasible points.
    std::vector<double> high_grid{105.0, 120.0};
    cal = calibrate_conventional(runs, window, base, high_grid, 0.05, fs, &achieved);
    CHECK(cal.pickup_current == 105.0);
    CHECK(achieved == 0.0);

    // Impossible target: every run trips at pickup 50.
    std::vector<double> low_grid{50.0};
    try {
        calibrate_conventional(runs, window, base, low_grid, 0.01, fs, nullptr);
        FAIL("expected CalibrationInfeasibleError");
    } catch (const CalibrationInfeasibleError& e) {
        CHECK(e.best_fpr == 1.0);
    }

    // Needs at least 100 runs.
    std::vector<WaveformSeries> few(runs.begin(), runs.begin() + 50);
    CHECK_THROWS_AS(calibrate_conventional(few, window, base, grid, 0.05, fs, nullptr),
                    std::invalid_argument);
}

TEST_CASE("baseline config serialization round trip") {
    OvercurrentConfig oc;
    oc.pickup_current = 142.5;
    oc.time_dial = 0.07;
    oc.block_len = 48;
    cfg::Table t;
    overcurrent_to_config(oc, t);
    const auto oc2 = overcurrent_from_config(cfg::parse(cfg::serialize(t)));
    CHECK(oc2.pickup_current == oc.pickup_current);
    CHECK(oc2.time_dial == oc.time_dial);
    CHECK(oc2.block_len == oc.block_len);

    AocrConfig ac;
    ac.alpha = 0.35;
    ac.beta = 1.2;
    ac.i_fault_min = 77.0;
    ac.avg_window = 6.5;
    cfg::Table t2;
    aocr_to_config(ac, t2);
    const auto ac2 = aocr_from_config(cfg::parse(cfg::serialize(t2)));
    CHECK(ac2.alpha == ac.alpha);
    CHECK(ac2.beta == ac.beta);
    CHECK(ac2.i_fault_min == ac.i_fault_min);
    CHECK(ac2.avg_window == ac.avg_window);
}
