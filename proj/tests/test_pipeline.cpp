#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <vector>

#include "psm/config.hpp"
#include "psm/pipeline.hpp"
#include "psm/report.hpp"
#include "psm/stream.hpp"
#include "psm/synth.hpp"
#include "support/oracles.hpp"

using namespace psm;

namespace {

std::shared_ptr<const SafetyDataset> uniform_dataset() {
    GridSpec spec;
    spec.theta_min = 0.0;
    spec.theta_max = 1.2;
    spec.omega_min = 0.0;
    spec.omega_max = 3.0;
    spec.n_theta = 8;
    spec.n_omega = 8;
    spec.smoothing_sigma = 0.0;
    std::vector<double> p(64, 1.0 / 64.0);
    DatasetMeta meta;
    return std::make_shared<SafetyDataset>(spec, std::move(p), meta);
}

MotionTrace medium_trace(double duration = 12.0, double rate = 40.0) {
    ScenarioSpec spec;
    spec.task = Task::Fastening;
    spec.intensity = Intensity::Medium;
    spec.duration = duration;
    spec.rate = rate;
    spec.seed = 21;
    return generate(spec).trace;
}

bool rows_equal(const ErrorRow& a, const ErrorRow& b) {
    return a.t == b.t && a.e_theta == b.e_theta && a.e_omega == b.e_omega &&
           a.e_imp == b.e_imp && a.no_mass == b.no_mass;
}

}  // namespace

TEST_CASE("pipeline config validation") {
    CHECK_NOTHROW(validate(PipelineConfig{}));

    auto broken = [](auto mutate) {
        PipelineConfig c;
        mutate(c);
        CHECK_THROWS_AS(validate(c), ConfigError);
    };
    broken([](PipelineConfig& c) { c.rate = 0.0; });
    broken([](PipelineConfig& c) { c.hop_seconds = 3.0; });       // hop > window
    broken([](PipelineConfig& c) { c.window_seconds = -1.0; });
    broken([](PipelineConfig& c) { c.gravity = 0.0; });
    broken([](PipelineConfig& c) { c.radius_theta = 0.0; });
    broken([](PipelineConfig& c) { c.radius_omega = -0.5; });
    broken([](PipelineConfig& c) { c.band.high = 21.0; });        // above Nyquist
    broken([](PipelineConfig& c) { c.band.low = 0.0; });
    broken([](PipelineConfig& c) { c.kalman.q_angle = 0.0; });
    broken([](PipelineConfig& c) { c.model.mass = 0.0; });
    broken([](PipelineConfig& c) { c.fir.cutoff = 25.0; });       // above rate/2
    broken([](PipelineConfig& c) { c.weights.position_weight = 0.7; });
    broken([](PipelineConfig& c) { c.thresholds.hazard_level = 0.01; });
}

TEST_CASE("run config parsing") {
    SUBCASE("empty object keeps defaults") {
        const auto cfg = parse_run_config("{}");
        CHECK(cfg.pipeline.rate == 40.0);
        CHECK(cfg.pipeline.fir.cutoff == 10.0);
        CHECK(cfg.pipeline.weights.position_weight == 0.4);
        CHECK(cfg.queue_capacity == 256);
        CHECK(dump_run_config(cfg) == dump_run_config(RunConfig{}));
    }

    SUBCASE("partial override touches only the named keys") {
        const auto cfg = parse_run_config(R"({
            "rate": 80.0,
            "window": {"seconds": 1.5},
            "band": {"high_hz": 30.0},
            "classify_mode": "windowed",
            "grid": {"n_theta": 16}
        })");
        CHECK(cfg.pipeline.rate == 80.0);
        CHECK(cfg.pipeline.window_seconds == 1.5);
        CHECK(cfg.pipeline.hop_seconds == 0.25);
        CHECK(cfg.pipeline.band.low == 10.0);
        CHECK(cfg.pipeline.band.high == 30.0);
        CHECK(cfg.pipeline.classify_mode == ClassifyMode::Windowed);
        CHECK(cfg.grid.n_theta == 16);
        CHECK(cfg.grid.n_omega == 64);
    }

    SUBCASE("unknown keys are refused, root and nested") {
        CHECK_THROWS_AS(parse_run_config(R"({"ratez": 40})"), ConfigError);
        CHECK_THROWS_AS(parse_run_config(R"({"filter": {"cutof": 5}})"), ConfigError);
        CHECK_THROWS_AS(parse_run_config(R"({"thresholds": {"hazard": 0.4}})"),
                        ConfigError);
    }

    SUBCASE("type and syntax errors") {
        CHECK_THROWS_AS(parse_run_config("{"), ConfigError);
        CHECK_THROWS_AS(parse_run_config("[]"), ConfigError);
        CHECK_THROWS_AS(parse_run_config(R"({"rate": "fast"})"), ConfigError);
        CHECK_THROWS_AS(parse_run_config(R"({"filter": {"mode": "iir"}})"), ConfigError);
        CHECK_THROWS_AS(parse_run_config(R"({"model": {"stiffness": [1, 2]}})"),
                        ConfigError);
    }

    SUBCASE("semantic validation still applies") {
        CHECK_THROWS_AS(parse_run_config(R"({"rate": -1})"), ConfigError);
        CHECK_THROWS_AS(parse_run_config(R"({"weights": {"position": 0.9}})"),
                        ConfigError);
        CHECK_THROWS_AS(parse_run_config(R"({"stream": {"queue_capacity": 0}})"),
                        ConfigError);
    }

    SUBCASE("dump then parse is the identity") {
        auto cfg = parse_run_config(R"({
            "rate": 50.0,
            "filter": {"cutoff_hz": 8.0, "mode": "causal"},
            "weights": {"position": 0.25, "velocity": 0.75},
            "band": {"low_hz": 5.0, "high_hz": 22.0}
        })");
        const auto text = dump_run_config(cfg);
        const auto again = parse_run_config(text);
        CHECK(dump_run_config(again) == text);
    }

    SUBCASE("loading from a file") {
        oracle::TmpDir dir;
        const auto path = dir.file("run.json");
        {
            std::ofstream f(path);
            f << R"({"rate": 40.0, "stream": {"queue_capacity": 32}})";
        }
        const auto cfg = load_run_config(path);
        CHECK(cfg.queue_capacity == 32);
        CHECK_THROWS_AS(load_run_config(dir.file("absent.json")), ConfigError);
    }
}

TEST_CASE("batch analysis shape") {
    const auto trace = medium_trace();
    PipelineConfig cfg;
    const auto result = analyze_trace(trace, cfg, uniform_dataset());

    const std::size_t n = trace.samples.size();
    CHECK(result.samples_in == n);
    CHECK(result.rows.size() == n);
    CHECK(result.fused_orient.size() == n);
    CHECK(result.reference.size() == n);
    CHECK(result.targets.size() == n);
    CHECK(result.verdicts.size() == n);  // instantaneous: one per sample
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        CHECK(result.rows[i].t > result.rows[i - 1].t);
    }
    for (const auto& row : result.rows) {
        CHECK(std::isfinite(row.e_imp));
        CHECK(row.e_theta >= 0.0);
        CHECK(row.e_omega >= 0.0);
    }

    // label from the trace flows into the verdict context
    REQUIRE(result.verdicts.front().context.label.has_value());
    CHECK(result.verdicts.front().context.label->task == Task::Fastening);
    CHECK(result.verdicts.front().context.label->intensity == Intensity::Medium);

    // spectral report fields
    CHECK(result.freq.n == 80);
    CHECK(result.freq.band.low == 10.0);
    CHECK(result.freq.band.high == 20.0);
    CHECK(result.freq.e_m_theta >= 0.0);
    CHECK(result.freq.e_m_omega >= 0.0);
    CHECK(std::isfinite(result.freq.e_m_theta));
}

TEST_CASE("windowed mode emits one verdict per hop") {
    const auto trace = medium_trace();
    PipelineConfig cfg;
    cfg.classify_mode = ClassifyMode::Windowed;
    const auto result = analyze_trace(trace, cfg, uniform_dataset());

    const std::size_t n = trace.samples.size();  // 481
    const std::size_t window = 80, hop = 10;
    std::size_t expected = (n - window) / hop + 1;
    const std::size_t last_emitted = window + ((n - window) / hop) * hop;
    if (last_emitted < n) ++expected;  // final partial flush
    CHECK(result.verdicts.size() == expected);
    CHECK(result.rows.size() == n);
    for (const auto& v : result.verdicts) {
        CHECK(v.trigger_value >= 0.0);
    }
}

TEST_CASE("per-sample push matches the batch entry point") {
    const auto trace = medium_trace();
    PipelineConfig cfg;
    const auto dataset = uniform_dataset();
    const auto batch = analyze_trace(trace, cfg, dataset);

    PipelineConfig manual_cfg = cfg;
    manual_cfg.label = trace.label;
    AnalysisPipeline pipe(manual_cfg, dataset);
    std::vector<ErrorRow> streamed_rows;
    std::vector<std::string> streamed_verdicts;
    pipe.on_row([&](const ErrorRow& r) { streamed_rows.push_back(r); });
    pipe.on_verdict([&](const SafetyVerdict& v) {
        streamed_verdicts.push_back(verdict_json_line(v));
    });
    for (const auto& s : trace.samples) pipe.push(s);
    pipe.finish();
    const auto live = pipe.take_result();

    REQUIRE(live.rows.size() == batch.rows.size());
    for (std::size_t i = 0; i < live.rows.size(); ++i) {
        CHECK(rows_equal(live.rows[i], batch.rows[i]));
    }
    REQUIRE(live.verdicts.size() == batch.verdicts.size());
    for (std::size_t i = 0; i < live.verdicts.size(); ++i) {
        CHECK(verdict_json_line(live.verdicts[i]) == verdict_json_line(batch.verdicts[i]));
    }
    // callbacks observed exactly the accumulated session, in order
    REQUIRE(streamed_rows.size() == live.rows.size());
    for (std::size_t i = 0; i < streamed_rows.size(); ++i) {
        CHECK(rows_equal(streamed_rows[i], live.rows[i]));
    }
    REQUIRE(streamed_verdicts.size() == live.verdicts.size());
    for (std::size_t i = 0; i < streamed_verdicts.size(); ++i) {
        CHECK(streamed_verdicts[i] == verdict_json_line(live.verdicts[i]));
    }
}

TEST_CASE("an unpaced replay into the pipeline reproduces the batch verdicts") {
    const auto trace = medium_trace();
    PipelineConfig cfg;
    const auto dataset = uniform_dataset();
    const auto batch = analyze_trace(trace, cfg, dataset);

    PipelineConfig live_cfg = cfg;
    live_cfg.label = trace.label;
    AnalysisPipeline pipe(live_cfg, dataset);
    const auto report = replay(trace, std::numeric_limits<double>::infinity(),
                               [&](const ImuSample& s) {
                                   pipe.push(s);
                                   return true;
                               });
    pipe.finish();
    const auto live = pipe.take_result();

    CHECK(report.delivered == trace.samples.size());
    CHECK(report.dropped == 0);
    REQUIRE(live.verdicts.size() == batch.verdicts.size());
    for (std::size_t i = 0; i < live.verdicts.size(); ++i) {
        CHECK(verdict_json_line(live.verdicts[i]) == verdict_json_line(batch.verdicts[i]));
    }
    REQUIRE(live.rows.size() == batch.rows.size());
    for (std::size_t i = 0; i < live.rows.size(); ++i) {
        CHECK(rows_equal(live.rows[i], batch.rows[i]));
    }
}

TEST_CASE("repeat runs are deterministic") {
    const auto trace = medium_trace(6.0);
    PipelineConfig cfg;
    const auto a = analyze_trace(trace, cfg, uniform_dataset());
    const auto b = analyze_trace(trace, cfg, uniform_dataset());
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(rows_equal(a.rows[i], b.rows[i]));
    }
    CHECK(a.freq.e_m_theta == b.freq.e_m_theta);
}

TEST_CASE("traces off the pipeline rate are resampled onto it") {
    const auto trace = medium_trace(6.0, 80.0);
    REQUIRE(trace.samples.size() == 481);
    PipelineConfig cfg;  // 40 Hz
    const auto result = analyze_trace(trace, cfg, uniform_dataset());
    CHECK(result.rows.size() == 241);  // 6 s at 40 Hz
    CHECK(result.samples_in == 241);
    CHECK(result.rows.back().t == doctest::Approx(6.0));
}

TEST_CASE("losing the attractor forces the caution path end to end") {
    const auto trace = medium_trace(8.0);

    // all probability mass far from the observed gravity angle, tiny search
    GridSpec spec;
    spec.theta_min = 0.0;
    spec.theta_max = 1.2;
    spec.omega_min = 0.0;
    spec.omega_max = 3.0;
    spec.n_theta = 8;
    spec.n_omega = 8;
    std::vector<double> p(64, 0.0);
    p[63] = 1.0;  // theta ~1.125, omega ~2.8
    auto dataset = std::make_shared<SafetyDataset>(spec, std::move(p), DatasetMeta{});

    PipelineConfig cfg;
    cfg.radius_theta = 0.01;
    cfg.radius_omega = 0.01;
    const auto result = analyze_trace(trace, cfg, dataset);

    REQUIRE_FALSE(result.rows.empty());
    for (const auto& row : result.rows) {
        CHECK(row.no_mass);
    }
    for (const auto& v : result.verdicts) {
        CHECK(v.cls >= SafetyClass::Warning);
        CHECK(v.metric == TriggerMetric::NoMassCue);
    }
}

TEST_CASE("a finished pipeline refuses more input") {
    PipelineConfig cfg;
    AnalysisPipeline pipe(cfg, uniform_dataset());
    ImuSample s;
    s.accel = {0.0, 0.0, 9.81};
    for (int k = 0; k < 100; ++k) {
        s.t = k * 0.025;
        pipe.push(s);
    }
    pipe.finish();
    CHECK_THROWS_AS(pipe.push(s), StreamError);
    CHECK(pipe.samples_in() == 100);
}
