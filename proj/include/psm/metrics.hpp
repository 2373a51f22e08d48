#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "psm/errors.hpp"
#include "psm/motion.hpp"

namespace psm {

// How much the verdict cares about position error vs velocity error.
// Must be non-negative and sum to 1; the shipped default favors velocity.
struct PriorityWeights {
    double position_weight = 0.4;
    double velocity_weight = 0.6;
};

void validate(const PriorityWeights& weights);

// Normalized impedance error over one window:
//   e[i] = P * e_theta[i]/||e_theta|| + D * e_omega[i]/||e_omega||
// with L2 norms taken over the window. A zero-norm term contributes 0,
// so the result is always finite and bounded by P + D.
std::vector<double> impedance_error(std::span<const double> e_theta,
                                    std::span<const double> e_omega,
                                    const PriorityWeights& weights);

struct FrequencyBand {
    double low = 10.0;   // Hz
    double high = 20.0;  // Hz
};

// Mean one-sided spectral magnitude of the 1/n^2-scaled error series over
// [band.low, band.high]. n is the window sample count used for scaling.
double frequency_error(std::span<const double> error_series, double sample_rate,
                       FrequencyBand band, std::size_t n);

struct FrequencyErrorReport {
    double e_m_theta = 0.0;
    double e_m_omega = 0.0;
    FrequencyBand band;
    std::size_t n = 0;
};

// Scales every session by the single largest value across all of them,
// so cross-session comparisons share one denominator.
struct NormalizedSessions {
    std::vector<std::vector<double>> series;
    double session_max = 0.0;
};

NormalizedSessions normalize_session(const std::vector<std::vector<double>>& sessions);

enum class SafetyClass { Safe, Caution, Warning, Hazard };
const char* to_string(SafetyClass cls);

struct SafetyThresholds {
    double safe_level = 0.1;
    double caution_peak = 0.15;   // lower edge of the Caution band
    double warning_level = 0.25;
    double hazard_level = 0.3;
    double normalized_safe_fraction = 0.08;
};

void validate(const SafetyThresholds& thresholds);

enum class TriggerMetric { Impedance, Frequency, NoMassCue };
const char* to_string(TriggerMetric metric);

struct VerdictContext {
    std::optional<TraceLabel> label;
    PriorityWeights weights;
};

struct SafetyVerdict {
    SafetyClass cls = SafetyClass::Safe;
    double trigger_value = 0.0;
    double trigger_time = 0.0;
    TriggerMetric metric = TriggerMetric::Impedance;
    VerdictContext context;
};

enum class ClassifyMode { Instantaneous, Windowed };

// Band edges belong to the class above them.
SafetyClass classify_value(double e, const SafetyThresholds& thresholds);

// Instantaneous: one verdict per sample. Windowed: a single verdict for
// the worst sample of the span. A set no_mass flag forces at least
// Warning for that sample and marks the verdict with the cue metric.
// `no_mass` may be empty when the dataset always answered.
std::vector<SafetyVerdict> classify(std::span<const double> t, std::span<const double> e_imp,
                                    std::span<const std::uint8_t> no_mass,
                                    const SafetyThresholds& thresholds, ClassifyMode mode,
                                    const VerdictContext& context = {});

}  // namespace psm
