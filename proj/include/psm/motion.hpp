#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "psm/errors.hpp"

namespace psm {

using Vec3 = std::array<double, 3>;

enum class Task { Fastening, Inspection, PickPlace };
enum class Intensity { Low, Medium, High };

const char* to_string(Task task);
const char* to_string(Intensity intensity);
std::optional<Task> task_from_string(std::string_view name);
std::optional<Intensity> intensity_from_string(std::string_view name);

struct TraceLabel {
    Task task = Task::Fastening;
    Intensity intensity = Intensity::Medium;

    bool operator==(const TraceLabel&) const = default;
};

// One wrist IMU frame. `orient` stays empty until the fusion stage fills it.
struct ImuSample {
    double t = 0.0;              // seconds since trace start
    Vec3 accel{};                // m/s^2, body frame
    Vec3 gyro{};                 // rad/s, body frame
    std::optional<Vec3> orient;  // rad, per-axis angles (roll, pitch, yaw)
};

// Angular speed above which a frame is treated as corrupt rather than motion.
inline constexpr double kMaxPlausibleGyro = 50.0;  // rad/s

struct MotionTrace {
    std::vector<ImuSample> samples;
    double nominal_rate = 0.0;  // Hz
    std::optional<TraceLabel> label;
};

// Scalar state the probability grid is built over: angle of the arm axis
// away from gravity, plus gyro norm.
struct GravityAngleState {
    double theta_g = 0.0;  // rad, in [0, pi]
    double omega = 0.0;    // rad/s, >= 0
};

// Throws ValidationError on the first offending sample; returns the trace
// untouched otherwise so calls can be chained.
const MotionTrace& validate_trace(const MotionTrace& trace);

// Linear interpolation onto a uniform grid starting at the first input
// timestamp. The last output lands within one period of the input end.
MotionTrace resample(const MotionTrace& trace, double target_rate);

}  // namespace psm
