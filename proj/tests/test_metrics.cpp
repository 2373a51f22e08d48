#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "psm/metrics.hpp"
#include "psm/motion.hpp"
#include "support/oracles.hpp"

using namespace psm;

namespace {

// long-double route of the same definition, used as the second opinion
std::vector<double> impedance_oracle(const std::vector<double>& et,
                                     const std::vector<double>& ew, double pw, double vw) {
    long double nt = 0.0L, nw = 0.0L;
    for (double v : et) nt += static_cast<long double>(v) * v;
    for (double v : ew) nw += static_cast<long double>(v) * v;
    nt = std::sqrt(nt);
    nw = std::sqrt(nw);
    std::vector<double> out(et.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const long double pos = nt == 0.0L ? 0.0L : pw * (et[i] / nt);
        const long double vel = nw == 0.0L ? 0.0L : vw * (ew[i] / nw);
        out[i] = static_cast<double>(pos + vel);
    }
    return out;
}

}  // namespace

TEST_CASE("weight validation") {
    CHECK_NOTHROW(validate(PriorityWeights{}));
    auto expect_invalid = [](double p, double v) {
        try {
            validate(PriorityWeights{p, v});
            FAIL("expected throw");
        } catch (const MetricsError& e) {
            CHECK(e.kind() == MetricsError::Kind::InvalidWeights);
        }
    };
    expect_invalid(-0.1, 1.1);
    expect_invalid(0.5, 0.6);
    expect_invalid(0.2, 0.2);
}

TEST_CASE("impedance error: worked examples") {
    // all-zero window stays all zero (0/0 contributes nothing)
    auto z = impedance_error(std::vector<double>(4, 0.0), std::vector<double>(4, 0.0),
                             PriorityWeights{});
    for (double v : z) CHECK(v == 0.0);

    // position-only series against a silent velocity channel
    auto e = impedance_error(std::vector<double>{3.0, 4.0}, std::vector<double>{0.0, 0.0},
                             PriorityWeights{0.6, 0.4});
    REQUIRE(e.size() == 2);
    CHECK(std::abs(e[0] - 0.36) <= 1e-15);
    CHECK(std::abs(e[1] - 0.48) <= 1e-15);

    // unit vectors split the weights across the two samples
    e = impedance_error(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0},
                        PriorityWeights{0.4, 0.6});
    CHECK(e[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(e[1] == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("impedance error: input guards") {
    try {
        impedance_error(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0},
                        PriorityWeights{});
        FAIL("expected throw");
    } catch (const MetricsError& e) {
        CHECK(e.kind() == MetricsError::Kind::LengthMismatch);
    }
    CHECK_THROWS_AS(impedance_error(std::vector<double>{1.0}, std::vector<double>{1.0},
                                    PriorityWeights{0.7, 0.7}),
                    MetricsError);
}

TEST_CASE("impedance error: bounded, scale-free, weight-symmetric") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(0.0, 5.0);
    std::uniform_int_distribution<int> len(1, 120);

    for (int round = 0; round < 300; ++round) {
        const std::size_t n = static_cast<std::size_t>(len(rng));
        std::vector<double> et(n), ew(n);
        for (auto& v : et) v = uni(rng);
        for (auto& v : ew) v = uni(rng);
        if (round % 7 == 0) std::fill(et.begin(), et.end(), 0.0);
        if (round % 11 == 0) std::fill(ew.begin(), ew.end(), 0.0);

        const PriorityWeights w{0.4, 0.6};
        const auto e = impedance_error(et, ew, w);
        const auto ref = impedance_oracle(et, ew, w.position_weight, w.velocity_weight);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(e[i] - ref[i]) <= 1e-15);
            CHECK(std::abs(e[i]) <= 1.0 + 1e-12);  // bounded by P + D
        }

        // scaling one series by a power of two cancels exactly
        std::vector<double> et_scaled(n), ew_scaled(n);
        for (std::size_t i = 0; i < n; ++i) {
            et_scaled[i] = et[i] * 1024.0;
            ew_scaled[i] = ew[i] * 0.03125;
        }
        CHECK(impedance_error(et_scaled, ew, w) == e);
        CHECK(impedance_error(et, ew_scaled, w) == e);

        // swapping the series and the weights is the same sum
        CHECK(impedance_error(ew, et, PriorityWeights{0.6, 0.4}) == e);
    }
}

TEST_CASE("frequency error: silence and bin-aligned tones") {
    std::vector<double> zero(80, 0.0);
    CHECK(frequency_error(zero, 40.0, {10.0, 20.0}, 80) == 0.0);

    // 5 Hz lands exactly on bin 10 of an 80-sample window at 40 Hz
    const double amp = 1.3;
    std::vector<double> tone(80);
    for (std::size_t i = 0; i < tone.size(); ++i) {
        tone[i] = amp * std::sin(2.0 * oracle::kPi * 5.0 * static_cast<double>(i) / 40.0);
    }
    const double n2 = 80.0 * 80.0;
    CHECK(frequency_error(tone, 40.0, {4.9, 5.1}, 80) ==
          doctest::Approx(amp / n2).epsilon(1e-9));
    // [4, 6] holds five bins at 0.5 Hz spacing, only one of them charged
    CHECK(frequency_error(tone, 40.0, {4.0, 6.0}, 80) ==
          doctest::Approx(amp / (n2 * 5.0)).epsilon(1e-9));
}

TEST_CASE("frequency error matches the direct-definition oracle") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t len : {std::size_t{80}, std::size_t{100}}) {
        std::vector<double> x(len);
        for (double& v : x) v = gauss(rng);
        for (auto band : {FrequencyBand{0.5, 20.0}, FrequencyBand{10.0, 20.0}}) {
            const double got = frequency_error(x, 40.0, band, 80);
            const double want = oracle::naive_band_mean(x, 40.0, band.low, band.high, 80);
            CHECK(std::abs(got - want) <= 1e-9 * std::abs(want));
        }
    }
}

TEST_CASE("frequency error: band guards") {
    std::vector<double> x(16, 1.0);
    auto expect_kind = [&](FrequencyBand band, double rate, std::size_t n,
                           MetricsError::Kind kind) {
        try {
            frequency_error(x, rate, band, n);
            FAIL("expected throw");
        } catch (const MetricsError& e) {
            CHECK(e.kind() == kind);
        }
    };
    expect_kind({0.0, 10.0}, 40.0, 16, MetricsError::Kind::InvalidBand);
    expect_kind({10.0, 5.0}, 40.0, 16, MetricsError::Kind::InvalidBand);
    expect_kind({10.0, 21.0}, 40.0, 16, MetricsError::Kind::InvalidBand);
    expect_kind({10.0, 20.0}, 40.0, 0, MetricsError::Kind::InvalidBand);
    // 16 samples at 40 Hz puts bins every 2.5 Hz; (3, 4) falls between them
    expect_kind({3.0, 4.0}, 40.0, 16, MetricsError::Kind::EmptyBand);
    // the Nyquist edge itself is legal
    CHECK_NOTHROW(frequency_error(x, 40.0, {19.9, 20.0}, 16));
}

TEST_CASE("session normalization shares one denominator") {
    auto one = normalize_session({{0.1, 0.2, 0.4}});
    CHECK(one.session_max == 0.4);
    CHECK(one.series[0][0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(one.series[0][1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(one.series[0][2] == doctest::Approx(1.0).epsilon(1e-15));

    auto two = normalize_session({{0.5}, {0.25, 0.1}});
    CHECK(two.session_max == 0.5);
    CHECK(two.series[0][0] == 1.0);
    CHECK(two.series[1][0] == 0.5);
    CHECK(two.series[1][1] == doctest::Approx(0.2).epsilon(1e-15));

    try {
        normalize_session({{0.0, 0.0}, {0.0}});
        FAIL("expected throw");
    } catch (const MetricsError& e) {
        CHECK(e.kind() == MetricsError::Kind::AllZero);
    }
    CHECK_THROWS_AS(normalize_session({}), MetricsError);
}

TEST_CASE("threshold validation") {
    CHECK_NOTHROW(validate(SafetyThresholds{}));
    auto expect_invalid = [](SafetyThresholds th) {
        try {
            validate(th);
            FAIL("expected throw");
        } catch (const MetricsError& e) {
            CHECK(e.kind() == MetricsError::Kind::InvalidThresholds);
        }
    };
    SafetyThresholds th;
    th.caution_peak = th.safe_level;  // must be strictly increasing
    expect_invalid(th);
    th = SafetyThresholds{};
    th.warning_level = 0.14;
    expect_invalid(th);
    th = SafetyThresholds{};
    th.hazard_level = 0.2;
    expect_invalid(th);
    th = SafetyThresholds{};
    th.safe_level = 0.0;
    expect_invalid(th);
    th = SafetyThresholds{};
    th.normalized_safe_fraction = 0.0;
    expect_invalid(th);
    th = SafetyThresholds{};
    th.normalized_safe_fraction = 1.0;
    expect_invalid(th);
}

TEST_CASE("classification bands: edges belong to the class above") {
    const SafetyThresholds th;
    CHECK(classify_value(0.0, th) == SafetyClass::Safe);
    CHECK(classify_value(0.09, th) == SafetyClass::Safe);
    CHECK(classify_value(0.1, th) == SafetyClass::Safe);  // below the caution edge
    CHECK(classify_value(0.15, th) == SafetyClass::Caution);
    CHECK(classify_value(0.2, th) == SafetyClass::Caution);
    CHECK(classify_value(0.25, th) == SafetyClass::Warning);
    CHECK(classify_value(0.26, th) == SafetyClass::Warning);
    CHECK(classify_value(0.3, th) == SafetyClass::Hazard);
    CHECK(classify_value(0.9, th) == SafetyClass::Hazard);

    // monotone in the input
    SafetyClass prev = SafetyClass::Safe;
    for (double e = 0.0; e <= 0.5; e += 0.001) {
        const SafetyClass cls = classify_value(e, th);
        CHECK(cls >= prev);
        prev = cls;
    }
}

TEST_CASE("instantaneous classification: one verdict per sample") {
    const SafetyThresholds th;
    std::vector<double> t{0.0, 0.25, 0.5, 0.75};
    std::vector<double> e{0.09, 0.09, 0.09, 0.09};
    auto v = classify(t, e, {}, th, ClassifyMode::Instantaneous);
    REQUIRE(v.size() == 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(v[i].cls == SafetyClass::Safe);
        CHECK(v[i].trigger_value == 0.09);
        CHECK(v[i].trigger_time == t[i]);
        CHECK(v[i].metric == TriggerMetric::Impedance);
    }

    e = {0.09, 0.18, 0.26, 0.32};
    v = classify(t, e, {}, th, ClassifyMode::Instantaneous);
    CHECK(v[0].cls == SafetyClass::Safe);
    CHECK(v[1].cls == SafetyClass::Caution);
    CHECK(v[2].cls == SafetyClass::Warning);
    CHECK(v[3].cls == SafetyClass::Hazard);
}

TEST_CASE("windowed classification answers with the worst sample") {
    const SafetyThresholds th;
    std::vector<double> t{6.0, 6.2, 6.4, 6.6};

    auto v = classify(t, std::vector<double>{0.05, 0.32, 0.07, 0.06}, {}, th,
                      ClassifyMode::Windowed);
    REQUIRE(v.size() == 1);
    CHECK(v[0].cls == SafetyClass::Hazard);
    CHECK(v[0].trigger_time == 6.2);
    CHECK(v[0].trigger_value == 0.32);

    v = classify(t, std::vector<double>{0.05, 0.07, 0.26, 0.06}, {}, th,
                 ClassifyMode::Windowed);
    CHECK(v[0].cls == SafetyClass::Warning);
    CHECK(v[0].trigger_time == 6.4);

    CHECK(classify({}, {}, {}, th, ClassifyMode::Windowed).empty());
    CHECK(classify({}, {}, {}, th, ClassifyMode::Instantaneous).empty());
}

TEST_CASE("a no-mass flag forces at least a warning") {
    const SafetyThresholds th;
    std::vector<double> t{0.0, 0.25, 0.5};
    std::vector<double> e{0.05, 0.05, 0.35};

    std::vector<std::uint8_t> flags{0, 1, 0};
    auto v = classify(t, e, flags, th, ClassifyMode::Instantaneous);
    CHECK(v[0].cls == SafetyClass::Safe);
    CHECK(v[0].metric == TriggerMetric::Impedance);
    CHECK(v[1].cls == SafetyClass::Warning);  // raised from Safe
    CHECK(v[1].metric == TriggerMetric::NoMassCue);
    CHECK(v[1].trigger_value == 0.05);
    CHECK(v[2].cls == SafetyClass::Hazard);  // already above, class kept
    CHECK(v[2].metric == TriggerMetric::Impedance);

    // a flagged hazard sample keeps its class but reports the cue
    flags = {0, 0, 1};
    v = classify(t, e, flags, th, ClassifyMode::Instantaneous);
    CHECK(v[2].cls == SafetyClass::Hazard);
    CHECK(v[2].metric == TriggerMetric::NoMassCue);

    // windowed: flag elsewhere in the span raises a safe worst-sample
    flags = {0, 1, 0};
    std::vector<double> quiet{0.02, 0.03, 0.04};
    v = classify(t, quiet, flags, th, ClassifyMode::Windowed);
    REQUIRE(v.size() == 1);
    CHECK(v[0].cls == SafetyClass::Warning);
    CHECK(v[0].metric == TriggerMetric::NoMassCue);

    // windowed: a hazard worst sample outranks the cue
    v = classify(t, e, flags, th, ClassifyMode::Windowed);
    CHECK(v[0].cls == SafetyClass::Hazard);
    CHECK(v[0].metric == TriggerMetric::Impedance);
}

TEST_CASE("classification guards and context") {
    const SafetyThresholds th;
    std::vector<double> t{0.0, 1.0};
    std::vector<double> e{0.1, 0.2};
    try {
        classify(t, std::vector<double>{0.1}, {}, th, ClassifyMode::Instantaneous);
        FAIL("expected throw");
    } catch (const MetricsError& err) {
        CHECK(err.kind() == MetricsError::Kind::LengthMismatch);
    }
    CHECK_THROWS_AS(
        classify(t, e, std::vector<std::uint8_t>{1}, th, ClassifyMode::Instantaneous),
        MetricsError);

    SafetyThresholds bad;
    bad.hazard_level = bad.warning_level;
    CHECK_THROWS_AS(classify(t, e, {}, bad, ClassifyMode::Instantaneous), MetricsError);

    VerdictContext ctx;
    ctx.label = TraceLabel{Task::PickPlace, Intensity::High};
    ctx.weights = PriorityWeights{0.3, 0.7};
    auto v = classify(t, e, {}, th, ClassifyMode::Windowed, ctx);
    REQUIRE(v.size() == 1);
    REQUIRE(v[0].context.label.has_value());
    CHECK(v[0].context.label->task == Task::PickPlace);
    CHECK(v[0].context.weights.velocity_weight == 0.7);
}
