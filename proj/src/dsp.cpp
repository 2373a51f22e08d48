#include "psm/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace psm {

namespace {

constexpr double kPi = std::numbers::pi;

double bessel_i0(double x) {
    // power series, plenty for the beta range used here
    double sum = 1.0;
    double term = 1.0;
    const double half = x / 2.0;
    for (int m = 1; m < 64; ++m) {
        const double f = half / m;
        term *= f * f;
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum;
}

void validate_fir(const FirSpec& spec) {
    if (!(spec.sample_rate > 0.0)) {
        throw DspError(DspError::Kind::InvalidSpec, "sample rate must be positive");
    }
    if (!(spec.cutoff > 0.0) || spec.cutoff >= spec.sample_rate / 2.0) {
        throw DspError(DspError::Kind::InvalidSpec,
                       "cutoff must lie in (0, rate/2), got " + std::to_string(spec.cutoff) +
                           " Hz at rate " + std::to_string(spec.sample_rate) + " Hz");
    }
    if (spec.order < 2) {
        throw DspError(DspError::Kind::InvalidSpec, "filter order must be at least 2");
    }
    if (!(spec.kaiser_beta >= 0.0)) {
        throw DspError(DspError::Kind::InvalidSpec, "kaiser beta must be non-negative");
    }
}

}  // namespace

std::vector<double> design_kaiser_lowpass(const FirSpec& spec) {
    validate_fir(spec);
    const int order = spec.order;
    const double m = static_cast<double>(order);
    const double fc = spec.cutoff / spec.sample_rate;  // cycles per sample
    const double i0_beta = bessel_i0(spec.kaiser_beta);

    std::vector<double> h(static_cast<std::size_t>(order) + 1);
    for (int k = 0; k <= order / 2; ++k) {
        const double x = k - m / 2.0;
        const double sinc = (x == 0.0) ? 2.0 * fc : std::sin(2.0 * kPi * fc * x) / (kPi * x);
        const double r = 2.0 * k / m - 1.0;
        const double w = bessel_i0(spec.kaiser_beta * std::sqrt(1.0 - r * r)) / i0_beta;
        h[k] = sinc * w;
        h[order - k] = h[k];  // mirror for exact symmetry
    }
    double dc = 0.0;
    for (double v : h) dc += v;
    for (double& v : h) v /= dc;
    return h;
}

FirStage::FirStage(std::vector<double> coeffs, FilterMode mode) {
    if (coeffs.empty()) {
        throw DspError(DspError::Kind::InvalidSpec, "empty coefficient vector");
    }
    taps_ = coeffs.size();
    const long m = static_cast<long>(taps_) - 1;
    if (mode == FilterMode::ZeroPhase) {
        // forward pass followed by reverse pass collapses to one symmetric
        // kernel r = conv(h, h), support [-m, m]
        kernel_.assign(2 * taps_ - 1, 0.0);
        for (std::size_t a = 0; a < taps_; ++a) {
            for (std::size_t b = 0; b < taps_; ++b) {
                kernel_[a + b] += coeffs[a] * coeffs[b];
            }
        }
        jmin_ = -m;
    } else {
        // out[i] = sum_k h[k] x[i + d - k], d = group delay
        const long d = m / 2;
        kernel_.assign(coeffs.rbegin(), coeffs.rend());
        jmin_ = d - m;
    }
    const long jmax = jmin_ + static_cast<long>(kernel_.size()) - 1;
    lookahead_ = static_cast<std::size_t>(std::max(jmax, -jmin_));
}

void FirStage::reset() {
    buf_.clear();
    base_ = 0;
    count_ = 0;
    next_ = 0;
}

double FirStage::emit_at(std::size_t e, std::size_t n_known) const {
    const long last = static_cast<long>(n_known) - 1;
    double acc = 0.0;
    for (std::size_t jj = 0; jj < kernel_.size(); ++jj) {
        long idx = static_cast<long>(e) + jmin_ + static_cast<long>(jj);
        // mirror padding; during push() the emit condition keeps idx in range
        if (idx < 0) idx = -idx;
        if (idx > last) idx = 2 * last - idx;
        acc += kernel_[jj] * buf_[static_cast<std::size_t>(idx) - base_];
    }
    return acc;
}

void FirStage::push(double x, std::vector<double>& out) {
    buf_.push_back(x);
    ++count_;
    const std::size_t s = count_ - 1;  // index just written
    while (next_ + lookahead_ <= s) {
        out.push_back(emit_at(next_, count_));
        ++next_;
        // drop history no future output can reach
        while (static_cast<long>(base_) < static_cast<long>(next_) + jmin_) {
            buf_.pop_front();
            ++base_;
        }
    }
}

void FirStage::finish(std::vector<double>& out) {
    if (count_ < taps_) {
        throw DspError(DspError::Kind::SignalTooShort,
                       "signal shorter than filter length (" + std::to_string(count_) + " < " +
                           std::to_string(taps_) + ")");
    }
    while (next_ < count_) {
        out.push_back(emit_at(next_, count_));
        ++next_;
    }
}

namespace {

std::vector<double> run_fir(const std::vector<double>& signal, const std::vector<double>& coeffs,
                            FilterMode mode) {
    if (signal.size() < coeffs.size()) {
        throw DspError(DspError::Kind::SignalTooShort,
                       "signal shorter than filter length (" + std::to_string(signal.size()) +
                           " < " + std::to_string(coeffs.size()) + ")");
    }
    FirStage stage(coeffs, mode);
    std::vector<double> out;
    out.reserve(signal.size());
    for (double v : signal) stage.push(v, out);
    stage.finish(out);
    return out;
}

}  // namespace

std::vector<double> apply_fir(const std::vector<double>& signal,
                              const std::vector<double>& coeffs) {
    return run_fir(signal, coeffs, FilterMode::ZeroPhase);
}

std::vector<double> apply_fir_causal(const std::vector<double>& signal,
                                     const std::vector<double>& coeffs) {
    return run_fir(signal, coeffs, FilterMode::Causal);
}

TiltKalman::TiltKalman(const KalmanParams& params) : p_(params) {
    if (!(params.q_angle > 0.0) || !(params.q_bias > 0.0) || !(params.r_measure > 0.0)) {
        throw DspError(DspError::Kind::InvalidSpec, "kalman gains must be strictly positive");
    }
}

void TiltKalman::seed(double angle) {
    angle_ = angle;
    bias_ = 0.0;
    p00_ = 0.5;
    p01_ = 0.0;
    p11_ = 0.05;
}

void TiltKalman::predict(double gyro_mid, double dt) {
    angle_ += dt * (gyro_mid - bias_);
    p00_ += dt * (dt * p11_ - 2.0 * p01_ + p_.q_angle);
    p01_ -= dt * p11_;
    p11_ += p_.q_bias * dt;
}

void TiltKalman::update(double measured_angle) {
    const double s = p00_ + p_.r_measure;
    const double k0 = p00_ / s;
    const double k1 = p01_ / s;
    const double y = measured_angle - angle_;
    angle_ += k0 * y;
    bias_ += k1 * y;
    const double p00 = p00_, p01 = p01_;
    p00_ = (1.0 - k0) * p00;
    p01_ = (1.0 - k0) * p01;
    p11_ -= k1 * p01;
}

double TiltKalman::min_covariance_eig() const noexcept {
    const double tr = p00_ + p11_;
    const double det = std::sqrt((p00_ - p11_) * (p00_ - p11_) + 4.0 * p01_ * p01_);
    return 0.5 * (tr - det);
}

namespace {

// tilt from a gravity-dominated accel frame
double roll_of(const Vec3& a) { return std::atan2(a[1], a[2]); }
double pitch_of(const Vec3& a) { return std::atan2(-a[0], std::hypot(a[1], a[2])); }

}  // namespace

MotionTrace estimate_orientation(const MotionTrace& trace, const KalmanParams& params,
                                 double gravity, FusionDiagnostics* diag) {
    if (!(gravity > 0.0)) {
        throw DspError(DspError::Kind::InvalidSpec, "gravity must be positive");
    }
    MotionTrace out = trace;
    auto& s = out.samples;
    if (s.empty()) return out;

    TiltKalman kx(params), ky(params), kz(params);
    const double accel_floor = 0.1 * gravity;
    int degenerate = 0;

    {
        const Vec3& a0 = s[0].accel;
        const double n0 = std::hypot(a0[0], a0[1], a0[2]);
        if (n0 >= accel_floor) {
            kx.seed(roll_of(a0));
            ky.seed(pitch_of(a0));
        } else {
            kx.seed(0.0);
            ky.seed(0.0);
            ++degenerate;
        }
        kz.seed(0.0);
        s[0].orient = Vec3{kx.angle(), ky.angle(), kz.angle()};
    }

    double min_eig = std::min({kx.min_covariance_eig(), ky.min_covariance_eig(),
                               kz.min_covariance_eig()});
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double dt = s[i].t - s[i - 1].t;
        for (int ax = 0; ax < 3; ++ax) {
            const double mid = 0.5 * (s[i - 1].gyro[ax] + s[i].gyro[ax]);
            (ax == 0 ? kx : ax == 1 ? ky : kz).predict(mid, dt);
        }
        const Vec3& a = s[i].accel;
        const double norm = std::hypot(a[0], a[1], a[2]);
        if (norm >= accel_floor) {
            kx.update(roll_of(a));
            ky.update(pitch_of(a));
        } else {
            ++degenerate;  // free-fall-ish frame, keep integrating
        }
        s[i].orient = Vec3{kx.angle(), ky.angle(), kz.angle()};
        min_eig = std::min({min_eig, kx.min_covariance_eig(), ky.min_covariance_eig(),
                            kz.min_covariance_eig()});
    }

    if (diag) {
        diag->degenerate_updates = degenerate;
        diag->yaw_aided = false;
        diag->bias_estimate = Vec3{kx.bias(), ky.bias(), kz.bias()};
        diag->min_covariance_eig = min_eig;
    }
    return out;
}

GravityAngleState gravity_angle(const ImuSample& sample) {
    if (!sample.orient) {
        throw DspError(DspError::Kind::MissingOrientation,
                       "sample has no orientation estimate");
    }
    const Vec3& o = *sample.orient;
    const double c = std::clamp(std::cos(o[0]) * std::cos(o[1]), -1.0, 1.0);
    GravityAngleState st;
    st.theta_g = std::acos(c);
    st.omega = std::hypot(sample.gyro[0], sample.gyro[1], sample.gyro[2]);
    return st;
}

namespace {

using cplx = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        for (auto& v : a) v /= static_cast<double>(n);
    }
}

// chirp-z path for lengths that are not a power of two
std::vector<cplx> bluestein(std::span<const double> x) {
    const std::size_t n = x.size();
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;

    std::vector<cplx> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the phase argument small and exact
        const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n);
        const double ang = -kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(ang), std::sin(ang));
    }

    std::vector<cplx> a(m, cplx(0.0, 0.0)), b(m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
        b[k] = std::conj(chirp[k]);
        b[m - k] = b[k];
    }

    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
    fft_pow2(a, true);

    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k];
    return out;
}

}  // namespace

std::vector<cplx> dft_complex(std::span<const double> signal) {
    const std::size_t n = signal.size();
    if (n == 0) return {};
    if (is_pow2(n)) {
        std::vector<cplx> a(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = cplx(signal[i], 0.0);
        fft_pow2(a, false);
        return a;
    }
    return bluestein(signal);
}

Spectrum dft_magnitude(const std::vector<double>& signal, double sample_rate) {
    const std::size_t n = signal.size();
    if (n < 2) {
        throw DspError(DspError::Kind::SignalTooShort, "spectrum needs at least 2 samples");
    }
    if (!(sample_rate > 0.0)) {
        throw DspError(DspError::Kind::InvalidSpec, "sample rate must be positive");
    }
    const auto full = dft_complex(signal);
    const std::size_t half = n / 2;
    Spectrum sp;
    sp.freqs.resize(half + 1);
    sp.mags.resize(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
        sp.freqs[k] = static_cast<double>(k) * sample_rate / static_cast<double>(n);
        double mag = std::abs(full[k]) / static_cast<double>(n);
        const bool nyquist = (n % 2 == 0) && (k == half);
        if (k != 0 && !nyquist) mag *= 2.0;
        sp.mags[k] = mag;
    }
    return sp;
}

}  // namespace psm
