#pragma once

#include <complex>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "psm/errors.hpp"
#include "psm/motion.hpp"

namespace psm {

struct FirSpec {
    double cutoff = 10.0;       // Hz
    int order = 20;             // taps = order + 1
    double kaiser_beta = 3.0;
    double sample_rate = 40.0;  // Hz
};

// Kaiser-windowed sinc lowpass, normalized to unit DC gain. Coefficients
// are exactly symmetric (the second half mirrors the first).
std::vector<double> design_kaiser_lowpass(const FirSpec& spec);

enum class FilterMode { ZeroPhase, Causal };

// Streaming FIR stage. Zero-phase mode applies the forward-backward
// composite kernel over mirror-padded input; causal mode runs a single
// pass shifted by the group delay. Batch and sample-at-a-time use go
// through the same accumulation, so they agree bit for bit.
class FirStage {
public:
    FirStage(std::vector<double> coeffs, FilterMode mode);

    // Feeds one input sample; appends any outputs that became available.
    void push(double x, std::vector<double>& out);

    // Flushes the tail using mirror padding. Throws SignalTooShort when
    // fewer samples than filter taps were pushed.
    void finish(std::vector<double>& out);

    void reset();

    // How many future input samples an output waits for.
    std::size_t lookahead() const noexcept { return lookahead_; }

private:
    double emit_at(std::size_t e, std::size_t n_known) const;

    std::vector<double> kernel_;
    long jmin_ = 0;  // kernel support is [jmin, jmin + kernel size - 1]
    std::size_t taps_ = 0;
    std::size_t lookahead_ = 0;
    std::deque<double> buf_;
    std::size_t base_ = 0;   // input index of buf_.front()
    std::size_t count_ = 0;  // inputs seen
    std::size_t next_ = 0;   // next output index to emit
};

// Whole-signal helpers built on FirStage. Zero-phase variant is the
// default conditioning step; the causal one trades accuracy for latency.
std::vector<double> apply_fir(const std::vector<double>& signal,
                              const std::vector<double>& coeffs);
std::vector<double> apply_fir_causal(const std::vector<double>& signal,
                                     const std::vector<double>& coeffs);

struct KalmanParams {
    double q_angle = 1e-3;    // angle process noise
    double q_bias = 3e-5;     // gyro bias random walk
    double r_measure = 1e-2;  // tilt measurement noise
};

// Two-state (angle, gyro bias) filter for one axis. The caller supplies
// the trapezoid midpoint of consecutive gyro readings to predict().
class TiltKalman {
public:
    explicit TiltKalman(const KalmanParams& params);

    void seed(double angle);
    void predict(double gyro_mid, double dt);
    void update(double measured_angle);

    double angle() const noexcept { return angle_; }
    double bias() const noexcept { return bias_; }
    double min_covariance_eig() const noexcept;

private:
    KalmanParams p_;
    double angle_ = 0.0;
    double bias_ = 0.0;
    double p00_ = 0.5, p01_ = 0.0, p11_ = 0.05;
};

struct FusionDiagnostics {
    int degenerate_updates = 0;  // frames where accel was too small to trust
    bool yaw_aided = false;      // yaw is gyro integration only
    Vec3 bias_estimate{};        // final per-axis bias states
    double min_covariance_eig = 0.0;
};

// Fills sample.orient for the whole trace: accel tilt corrects roll and
// pitch, yaw integrates the gyro. Accel frames below 0.1 g are skipped
// and counted. Gravity is the local magnitude in m/s^2.
MotionTrace estimate_orientation(const MotionTrace& trace, const KalmanParams& params,
                                 double gravity, FusionDiagnostics* diag = nullptr);

// Collapses an oriented sample to the (theta_g, omega) plane. theta_g is
// the angle between the arm axis and gravity, omega the gyro norm.
GravityAngleState gravity_angle(const ImuSample& sample);

struct Spectrum {
    std::vector<double> freqs;  // Hz, DC..Nyquist
    std::vector<double> mags;   // one-sided amplitudes
};

// One-sided amplitude spectrum: 1/N scaling, interior bins doubled.
Spectrum dft_magnitude(const std::vector<double>& signal, double sample_rate);

// Two-sided unnormalized transform (radix-2 when possible, Bluestein
// otherwise), exposed for property checks.
std::vector<std::complex<double>> dft_complex(std::span<const double> signal);

}  // namespace psm
