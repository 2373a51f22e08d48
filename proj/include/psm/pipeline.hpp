#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "psm/dataset.hpp"
#include "psm/dsp.hpp"
#include "psm/metrics.hpp"
#include "psm/model.hpp"
#include "psm/motion.hpp"

namespace psm {

struct PipelineConfig {
    double rate = 40.0;  // Hz the pipeline runs at
    FirSpec fir{};       // fir.sample_rate is forced to `rate`
    FilterMode filter_mode = FilterMode::ZeroPhase;
    bool filter_accel = true;
    bool filter_gyro = true;
    KalmanParams kalman{};
    double gravity = 9.81;
    PsmParams model{};
    double radius_theta = 0.4;   // rad, dataset search ellipse
    double radius_omega = 1.5;   // rad/s
    PriorityWeights weights{};
    SafetyThresholds thresholds{};
    double window_seconds = 2.0;
    double hop_seconds = 0.25;
    FrequencyBand band{};
    ClassifyMode classify_mode = ClassifyMode::Instantaneous;
    std::optional<TraceLabel> label;  // carried into verdict context
};

void validate(const PipelineConfig& config);

struct ErrorRow {
    double t = 0.0;
    double e_theta = 0.0;  // rad, L2 over the three axes
    double e_omega = 0.0;  // rad/s
    double e_imp = 0.0;    // windowed impedance error
    bool no_mass = false;
};

struct AnalysisResult {
    std::vector<ErrorRow> rows;
    std::vector<SafetyVerdict> verdicts;
    std::vector<Vec3> fused_orient;
    std::vector<PsmState> reference;
    std::vector<GravityAngleState> targets;
    FusionDiagnostics fusion;
    FrequencyErrorReport freq;
    std::uint64_t samples_in = 0;
};

// Sequential evaluation chain: condition -> fuse -> reference -> window ->
// classify. Both the batch entry point and the live feed push samples
// through this same object, which is what keeps their outputs identical.
class AnalysisPipeline {
public:
    AnalysisPipeline(const PipelineConfig& config,
                     std::shared_ptr<const SafetyDataset> dataset);

    void on_row(std::function<void(const ErrorRow&)> fn) { row_cb_ = std::move(fn); }
    void on_verdict(std::function<void(const SafetyVerdict&)> fn) { verdict_cb_ = std::move(fn); }

    void push(const ImuSample& raw);
    void finish();

    std::uint64_t samples_in() const noexcept { return samples_in_; }
    const std::vector<ErrorRow>& rows() const noexcept { return rows_; }
    const std::vector<SafetyVerdict>& verdicts() const noexcept { return verdicts_; }

    // Moves the accumulated session out; call after finish().
    AnalysisResult take_result();

private:
    void consume_ready();
    void handle_fused(const ImuSample& fused);
    void emit_windows(bool final_flush);

    PipelineConfig cfg_;
    std::shared_ptr<const SafetyDataset> dataset_;
    std::vector<double> coeffs_;
    std::vector<std::optional<FirStage>> stages_;  // ax ay az gx gy gz
    std::vector<std::vector<double>> stage_out_;
    std::deque<ImuSample> pending_;
    std::size_t fused_count_ = 0;

    TiltKalman kx_, ky_, kz_;
    bool fusion_started_ = false;
    Vec3 prev_gyro_{};
    double prev_t_ = 0.0;
    FusionDiagnostics fusion_;

    ReferencePredictor predictor_;

    std::size_t window_len_ = 0;
    std::size_t hop_len_ = 0;
    std::vector<double> ts_, eth_, eom_;
    std::vector<std::uint8_t> flags_;
    std::size_t emitted_ = 0;

    std::vector<ErrorRow> rows_;
    std::vector<SafetyVerdict> verdicts_;
    std::vector<Vec3> fused_orient_;
    std::vector<PsmState> reference_;
    std::vector<GravityAngleState> targets_;
    std::uint64_t samples_in_ = 0;
    bool finished_ = false;

    std::function<void(const ErrorRow&)> row_cb_;
    std::function<void(const SafetyVerdict&)> verdict_cb_;
};

// Validates, resamples onto config.rate when the trace disagrees, runs the
// pipeline to completion and attaches the frequency-domain report.
AnalysisResult analyze_trace(const MotionTrace& trace, const PipelineConfig& config,
                             std::shared_ptr<const SafetyDataset> dataset);

}  // namespace psm
