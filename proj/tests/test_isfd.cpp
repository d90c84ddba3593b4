#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cpw/isfd.hpp"
#include "cpw/sim.hpp"
#include "support.hpp"

using namespace cpw;
using namespace cpw::isfd;
using nst::Hypothesis;

namespace {

InnovationSource vector_source(std::vector<double> values) {
    auto data = std::make_shared<std::vector<double>>(std::move(values));
    auto idx = std::make_shared<std::size_t>(0);
    return [data, idx]() -> std::optional<double> {
        if (*idx >= data->size()) return std::nullopt;
        return (*data)[(*idx)++];
    };
}

InnovationSource uniform_source(std::uint64_t seed) {
    auto rng = std::make_shared<Rng>(seed);
    return [rng]() -> std::optional<double> { return rng->uniform01(); };
}

} // namespace

TEST_CASE("window schedule and delay quantization") {
    IsfdConfig cfg;  // C = 42.5, lambda = 20
    CHECK(cfg.max_iterations() == 4);
    CHECK(cfg.window_schedule() == std::vector<std::size_t>{85, 170, 340, 680});

    IsfdConfig up = cfg;
    up.round_up_iterations = true;
    CHECK(up.max_iterations() == 5);

    // At 50 kHz the only possible H1 delays are the schedule counts over the
    // rate. Force rejections at each iteration and check exact quantization.
    const double rate = 50000.0;
    const std::vector<double> allowed{85.0 / rate, 170.0 / rate, 340.0 / rate, 680.0 / rate};
    for (int target = 0; target < 4; ++target) {
        // Uniform head followed by a saturated tail placed to trip at the
        // desired iteration.
        std::vector<double> vals;
        Rng rng(7 + static_cast<std::uint64_t>(target));
        const std::size_t head = target == 0 ? 0 : cfg.window_schedule()[target - 1];
        for (std::size_t i = 0; i < head; ++i) vals.push_back(rng.uniform01());
        for (std::size_t i = head; i < 680; ++i) vals.push_back(0.999);
        const auto out = isfd_detect(vector_source(vals), rate, cfg);
        REQUIRE(out.decision == Hypothesis::H1);
        REQUIRE(out.delay_seconds.has_value());
        bool is_allowed = false;
        for (double d : allowed) is_allowed = is_allowed || *out.delay_seconds == d;
        CHECK(is_allowed);
        CHECK(out.samples_consumed == cfg.window_schedule()[out.iterations_run - 1]);
    }
}

TEST_CASE("gross fault trips at the first window") {
    IsfdConfig cfg;
    const auto out = isfd_detect(vector_source(std::vector<double>(680, 0.999)), 50000.0, cfg);
    CHECK(out.decision == Hypothesis::H1);
    CHECK(out.iterations_run == 1);
    CHECK(out.samples_consumed == 85);
    CHECK(*out.delay_seconds == 85.0 / 50000.0);
}

TEST_CASE("IID uniform false alarm rate stays in the expected band") {
    IsfdConfig cfg;
    const int reps = 10000;
    int h1 = 0;
    for (int r = 0; r < reps; ++r) {
        const auto out = isfd_detect(uniform_source(1000 + static_cast<std::uint64_t>(r)),
                                     50000.0, cfg);
        if (out.decision == Hypothesis::H1) ++h1;
    }
    const double frac = static_cast<double>(h1) / reps;
    // Union bound over 4 correlated nested tests at eps = 0.05.
    CHECK(frac <= 0.19);
    CHECK(frac >= 0.04);
}

TEST_CASE("all-accept path consumes the full schedule") {
    IsfdConfig cfg;
    const auto out = isfd_detect(uniform_source(5), 50000.0, cfg);
    if (out.decision == Hypothesis::H0) {
        CHECK(out.samples_consumed == 680);
        CHECK(out.iterations_run == 4);
        CHECK_FALSE(out.delay_seconds.has_value());
    }
}

TEST_CASE("stopping correctness: all pre-rejection looks accepted") {
    IsfdConfig cfg;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        // Mild drift so that some paths reject at later iterations.
        std::vector<double> vals(680);
        for (std::size_t i = 0; i < vals.size(); ++i) {
            vals[i] = std::min(1.0, rng.uniform01() * 1.12);
        }
        const auto out = isfd_detect(vector_source(vals), 1000.0, cfg);
        for (std::size_t i = 0; i + 1 < out.statistic_trace.size(); ++i) {
            CHECK(out.statistic_trace[i].statistic <= out.statistic_trace[i].threshold);
        }
        if (out.decision == Hypothesis::H1) {
            CHECK(out.statistic_trace.back().statistic > out.statistic_trace.back().threshold);
            CHECK(out.samples_consumed == out.statistic_trace.back().n);
        }
    }
}

TEST_CASE("bonferroni correction never flips H0 to H1 on a fixed path") {
    IsfdConfig plain;
    IsfdConfig bonf = plain;
    bonf.bonferroni = true;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        Rng rng(seed * 13 + 1);
        std::vector<double> vals(680);
        for (auto& v : vals) v = std::min(1.0, rng.uniform01() * 1.08);
        const auto a = isfd_detect(vector_source(vals), 1000.0, plain);
        const auto b = isfd_detect(vector_source(vals), 1000.0, bonf);
        if (a.decision == Hypothesis::H0) {
            CHECK(b.decision == Hypothesis::H0);
        }
    }
}

TEST_CASE("exhausted source raises a truncated-stream error with partial trace") {
    IsfdConfig cfg;
    Rng rng(3);
    std::vector<double> vals(200);
    for (auto& v : vals) v = rng.uniform01();
    try {
        isfd_detect(vector_source(vals), 1000.0, cfg);
        FAIL("expected TruncatedStreamError");
    } catch (const TruncatedStreamError& e) {
        CHECK(e.partial.statistic_trace.size() >= 1);
        CHECK(e.partial.samples_consumed == 200);
    }
}

TEST_CASE("out-of-range innovations are rejected") {
    IsfdConfig cfg;
    CHECK_THROWS_AS(isfd_detect(vector_source(std::vector<double>(100, 1.5)), 1000.0, cfg),
                    std::invalid_argument);
}

TEST_CASE("determinism given the source path") {
    IsfdConfig cfg;
    Rng rng(44);
    std::vector<double> vals(680);
    for (auto& v : vals) v = rng.uniform01();
    const auto a = isfd_detect(vector_source(vals), 1000.0, cfg);
    const auto b = isfd_detect(vector_source(vals), 1000.0, cfg);
    CHECK(a.decision == b.decision);
    CHECK(a.samples_consumed == b.samples_consumed);
    REQUIRE(a.statistic_trace.size() == b.statistic_trace.size());
    for (std::size_t i = 0; i < a.statistic_trace.size(); ++i) {
        CHECK(a.statistic_trace[i].statistic == b.statistic_trace[i].statistic);
    }
}

TEST_CASE("outcome serializes to JSON") {
    IsfdConfig cfg;
    const auto out = isfd_detect(vector_source(std::vector<double>(680, 0.999)), 50000.0, cfg);
    const auto j = to_json(out);
    CHECK(j.at("decision") == "H1");
    CHECK(j.at("samples_consumed") == 85);
    CHECK(j.at("trace").size() == 1);
    CHECK(j.at("delay_seconds").get<double>() == 85.0 / 50000.0);
}

TEST_CASE("waveform-level detection on the default feeder") {
    // Train an envelope-mode model on anomaly-free data from R3, then test
    // both the no-fault (H0, full schedule) and primary-fault (H1 at the
    // first window) paths.
    auto train_sc = sim::default_scenario("none", 7001);
    train_sc.duration = 60.0;
    const auto train = sim::simulate_scenario(train_sc).at("R3");
    const auto model = estimate_ar_model(train, 12, true, train_sc.fundamental_freq);

    IsfdConfig cfg;
    cfg.bonferroni = true;

    auto nofault = sim::default_scenario("none", 7002);
    nofault.duration = 14.0;
    const auto w0 = sim::simulate_scenario(nofault).at("R3");
    const auto out0 = run_isfd_on_waveform(model, w0, 8.0, cfg);
    CHECK(out0.decision == Hypothesis::H0);
    CHECK(out0.samples_consumed == 680);

    auto faulted = sim::default_scenario("F1", 7002);
    faulted.duration = 14.0;
    const auto w1 = sim::simulate_scenario(faulted).at("R3");
    const auto out1 = run_isfd_on_waveform(model, w1, 8.0, cfg);
    CHECK(out1.decision == Hypothesis::H1);
    CHECK(out1.samples_consumed == 85);

    // t_start before the model warm-up is an argument error.
    CHECK_THROWS_AS(run_isfd_on_waveform(model, w1, 0.0, cfg), std::invalid_argument);
}
