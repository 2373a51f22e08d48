#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "psm/motion.hpp"

namespace psm {

struct NoiseSpec {
    double accel_sigma = 0.12;  // m/s^2
    double gyro_sigma = 0.02;   // rad/s
    double gyro_bias = 0.003;   // rad/s, constant offset on every axis
};

struct ScenarioSpec {
    Task task = Task::Fastening;
    Intensity intensity = Intensity::Medium;
    double duration = 20.0;  // s
    double rate = 40.0;      // Hz
    std::uint64_t seed = 1;
    NoiseSpec noise;
    bool gravity_included = true;
    double gravity = 9.81;
    // High intensity injects velocity spikes unless overridden here.
    std::optional<bool> spikes;
    // Intensity also scales tempo unless turned off (isolates amplitude).
    bool speed_scaling = true;
};

struct SynthResult {
    MotionTrace trace;                // what a sensor would emit (noise applied)
    std::vector<Vec3> true_orient;    // per-sample ground-truth angles
    std::vector<Vec3> true_rate;      // pre-noise, pre-bias angular rates
    std::vector<std::pair<double, double>> spike_windows;  // [start, end] seconds
};

// Deterministic: the same spec always yields bit-identical output.
SynthResult generate(const ScenarioSpec& spec);

}  // namespace psm
