#include "psm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

namespace psm {

namespace {

constexpr double kPi = std::numbers::pi;
// peak of sin(2 pi u) * hann(u), hit at u = 1/3
const double kPulsePeak = 3.0 * std::sqrt(3.0) / 8.0;

double amp_scale(Intensity in) {
    switch (in) {
        case Intensity::Low: return 0.55;
        case Intensity::Medium: return 1.0;
        case Intensity::High: return 1.7;
    }
    return 1.0;
}

double speed_scale(Intensity in) {
    switch (in) {
        case Intensity::Low: return 0.8;
        case Intensity::Medium: return 1.0;
        case Intensity::High: return 1.35;
    }
    return 1.0;
}

// unit-area velocity pulse, C1, supported on [0, 1]
double quintic_pulse(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const double v = 1.0 - u;
    return 30.0 * u * u * v * v;
}

// periodic raised-cosine bump filling the first `duty` of each cycle
struct Env {
    double v = 0.0;
    double dv = 0.0;
    long cycle = 0;
};

Env burst_env(double t, double hz, double duty, double phase) {
    const double u = t * hz + phase;
    const double base = std::floor(u);
    const double frac = u - base;
    Env e;
    e.cycle = static_cast<long>(base);
    if (frac < duty) {
        const double x = kPi * frac / duty;
        const double s = std::sin(x);
        e.v = s * s;
        e.dv = hz * kPi / duty * std::sin(2.0 * x);
    }
    return e;
}

// seeded per-cycle amplitude wobble; gives the high-intensity texture its
// uneven, jerky rhythm without touching the noise stream (salt 0 = off)
double cycle_jitter(long cycle, int axis, std::uint64_t salt) {
    if (salt == 0) return 1.0;
    auto h = (salt + static_cast<std::uint64_t>(cycle) * 3u +
              static_cast<std::uint64_t>(axis)) *
             0x9e3779b97f4a7c15ULL;
    h ^= h >> 29;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 32;
    // squared draw: most strokes land soft, a few land hard
    const double u = static_cast<double>(h & 1023u) / 1023.0;
    return 0.15 + 1.2 * u * u;
}

// one bounded oscillation: angle = amp * env * sin(2 pi f t + phi), emitted as
// its exact derivative so the integrated angle returns to rest after every
// burst instead of drifting
struct Tone {
    int axis;
    double amp;      // rad at medium intensity
    double f_osc;    // Hz
    double phase;
    double f_burst;  // bursts per second
    double duty;
    double bphase;
};

double tone_rate(const Tone& tn, double t, double speed, std::uint64_t salt) {
    const Env env = burst_env(t, tn.f_burst * speed, tn.duty, tn.bphase);
    if (env.v == 0.0 && env.dv == 0.0) return 0.0;
    const double j = cycle_jitter(env.cycle, tn.axis, salt);
    const double w = 2.0 * kPi * tn.f_osc * speed;
    const double c = w * t + tn.phase;
    return tn.amp * j * (env.dv * std::sin(c) + env.v * w * std::cos(c));
}

// reach - grasp - return: opposed equal-area velocity pulses, zero net travel
// per cycle
struct Arc {
    int axis;
    double amp;      // rad travelled per leg at medium intensity
    double f_cycle;  // cycles per second
    double out_at;   // cycle fraction where the outbound leg starts
    double back_at;
    double width;    // leg duration as a cycle fraction
};

double arc_rate(const Arc& a, double t, double speed, std::uint64_t salt) {
    const double hz = a.f_cycle * speed;
    const double u = t * hz;
    const double cycle = std::floor(u);
    const double frac = u - cycle;
    const double j = cycle_jitter(static_cast<long>(cycle), a.axis + 8, salt);
    const double scale = a.amp * j * hz / a.width;
    return scale * (quintic_pulse((frac - a.out_at) / a.width) -
                    quintic_pulse((frac - a.back_at) / a.width));
}

struct TaskShape {
    Vec3 theta0;
    double nominal_peak;  // dominant-axis velocity amplitude at medium
};

TaskShape shape_of(Task task) {
    // all tasks share a near-level rest posture so the safe occupancy peaks in
    // one spot and the sprung reference can truly settle there
    switch (task) {
        case Task::Fastening: return {{0.0245, 0.0, 0.0}, 3.9};
        case Task::Inspection: return {{0.0245, 0.0, 0.0}, 2.0};
        case Task::PickPlace: return {{0.0245, 0.0, 0.0}, 3.0};
    }
    return {{0.0, 0.0, 0.0}, 1.0};
}

// baseline angular rate of the wrist for each task family; each task is one
// work stroke repeated just under twice a second, so motion and rest both show
// up in every analysis window
Vec3 base_rate(Task task, double t, double amp, double speed, std::uint64_t salt) {
    Vec3 w{0.0, 0.0, 0.0};
    switch (task) {
        case Task::Fastening: {
            // driver strokes: sustained slow yaw twists with a fast rolling
            // grip ratchet and a slow nod
            static const Tone kTones[] = {
                {0, 0.23, 2.30, 0.0, 1.35, 0.44, 0.10},
                {2, 0.30, 0.55, 0.3, 1.35, 0.44, 0.10},
                {1, 0.02, 0.30, 0.8, 0.21, 0.70, 0.40},
            };
            for (const auto& tn : kTones) w[tn.axis] += tone_rate(tn, t, speed, salt);
            break;
        }
        case Task::Inspection: {
            // short roll-led scan strokes over the part, gentle pitch and yaw
            static const Tone kTones[] = {
                {0, 0.17, 1.50, 0.0, 1.45, 0.46, 0.15},
                {1, 0.10, 1.10, 1.5, 1.45, 0.46, 0.15},
                {2, 0.04, 0.70, 0.0, 1.45, 0.46, 0.15},
            };
            for (const auto& tn : kTones) w[tn.axis] += tone_rate(tn, t, speed, salt);
            break;
        }
        case Task::PickPlace: {
            // roll-led reach, touch and return with a pitched carry, yaw flick
            static const Arc kArcs[] = {
                {0, 0.28, 1.00, 0.05, 0.25, 0.20},
                {1, 0.20, 1.00, 0.05, 0.25, 0.20},
            };
            static const Tone kFlick = {2, 0.03, 2.00, 0.5, 1.00, 0.30, 0.10};
            for (const auto& a : kArcs) w[a.axis] += arc_rate(a, t, speed, salt);
            w[kFlick.axis] += tone_rate(kFlick, t, speed, salt);
            break;
        }
    }
    for (double& x : w) x *= amp;
    return w;
}

struct Spike {
    double t0 = 0.0;
    double tau = 0.2;
    int axis = 0;
    double amp = 0.0;  // peak rad/s, sign included
};

double spike_rate(const Spike& s, double t) {
    const double u = (t - s.t0) / s.tau;
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const double hann = 0.5 * (1.0 - std::cos(2.0 * kPi * u));
    return s.amp * std::sin(2.0 * kPi * u) * hann / kPulsePeak;
}

std::uint64_t mix_seed(const ScenarioSpec& spec) {
    std::uint64_t s = spec.seed;
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    s ^= static_cast<std::uint64_t>(spec.task) * 0x9e3779b97f4a7c15ULL;
    s ^= static_cast<std::uint64_t>(spec.intensity) * 0xbf58476d1ce4e5b9ULL;
    return s;
}

}  // namespace

SynthResult generate(const ScenarioSpec& spec) {
    if (!(spec.duration > 0.0) || !(spec.rate > 0.0)) {
        throw std::invalid_argument("generate: duration and rate must be positive");
    }
    const double dt = 1.0 / spec.rate;
    const auto n = static_cast<std::size_t>(std::llround(spec.duration * spec.rate)) + 1;
    const double amp = amp_scale(spec.intensity);
    const double speed = spec.speed_scaling ? speed_scale(spec.intensity) : 1.0;
    // the jerk texture rides on the intensity, not on the spike override
    const std::uint64_t jerk_salt =
        spec.intensity == Intensity::High ? (mix_seed(spec) | 1) : 0;
    const TaskShape shape = shape_of(spec.task);

    std::mt19937_64 rng(mix_seed(spec));

    // spike schedule first so the noise stream does not depend on it
    std::vector<Spike> spikes;
    const bool want_spikes = spec.spikes.value_or(spec.intensity == Intensity::High);
    if (want_spikes) {
        const double v_ref = shape.nominal_peak * amp;
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const double lam = 0.15 * std::max(spec.duration - 2.0, 0.0);
        std::poisson_distribution<int> extra(lam > 0.0 ? lam : 0.1);
        const int count = 1 + extra(rng);
        for (int i = 0; i < count; ++i) {
            Spike s;
            if (i == 0 && spec.duration >= 8.0) {
                // keep one excursion in a predictable mid-trace slot
                s.t0 = 6.0 + u01(rng) * (std::min(10.0, spec.duration - 1.0) - 6.0);
            } else {
                s.t0 = 1.0 + u01(rng) * (spec.duration - 2.0);
            }
            s.tau = 0.12 + u01(rng) * 0.16;
            // jerks hit the gravity axis most often: drops and snags tilt the arm
            const double ax = u01(rng);
            s.axis = ax < 0.45 ? 0 : (ax < 0.70 ? 1 : 2);
            const double mult = 2.5 + u01(rng) * 1.5;
            const double sign = u01(rng) < 0.5 ? -1.0 : 1.0;
            s.amp = sign * mult * v_ref;
            spikes.push_back(s);
        }
    }

    SynthResult out;
    out.trace.nominal_rate = spec.rate;
    out.trace.label = TraceLabel{spec.task, spec.intensity};
    out.trace.samples.resize(n);
    out.true_orient.resize(n);
    out.true_rate.resize(n);
    for (const auto& s : spikes) out.spike_windows.emplace_back(s.t0, s.t0 + s.tau);

    // clean rates, then angles by trapezoid integration
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        Vec3 w = base_rate(spec.task, t, amp, speed, jerk_salt);
        for (const auto& s : spikes) {
            w[s.axis] += spike_rate(s, t);
        }
        out.true_rate[k] = w;
    }
    out.true_orient[0] = shape.theta0;
    for (std::size_t k = 1; k < n; ++k) {
        for (int ax = 0; ax < 3; ++ax) {
            out.true_orient[k][ax] =
                out.true_orient[k - 1][ax] +
                dt * 0.5 * (out.true_rate[k - 1][ax] + out.true_rate[k][ax]);
        }
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        ImuSample& smp = out.trace.samples[k];
        smp.t = static_cast<double>(k) * dt;
        const double roll = out.true_orient[k][0];
        const double pitch = out.true_orient[k][1];
        Vec3 a{0.0, 0.0, 0.0};
        if (spec.gravity_included) {
            a[0] = -spec.gravity * std::sin(pitch);
            a[1] = spec.gravity * std::cos(pitch) * std::sin(roll);
            a[2] = spec.gravity * std::cos(pitch) * std::cos(roll);
        }
        for (int ax = 0; ax < 3; ++ax) {
            smp.gyro[ax] = out.true_rate[k][ax] + spec.noise.gyro_bias +
                           spec.noise.gyro_sigma * gauss(rng);
        }
        for (int ax = 0; ax < 3; ++ax) {
            smp.accel[ax] = a[ax] + spec.noise.accel_sigma * gauss(rng);
        }
    }
    return out;
}

}  // namespace psm
