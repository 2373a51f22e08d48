#include "psm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "psm/dsp.hpp"

namespace psm {

void validate(const PriorityWeights& weights) {
    if (!(weights.position_weight >= 0.0) || !(weights.velocity_weight >= 0.0)) {
        throw MetricsError(MetricsError::Kind::InvalidWeights, "weights must be non-negative");
    }
    if (std::abs(weights.position_weight + weights.velocity_weight - 1.0) > 1e-12) {
        throw MetricsError(MetricsError::Kind::InvalidWeights,
                           "weights must sum to 1, got " +
                               std::to_string(weights.position_weight + weights.velocity_weight));
    }
}

namespace {

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

std::vector<double> impedance_error(std::span<const double> e_theta,
                                    std::span<const double> e_omega,
                                    const PriorityWeights& weights) {
    validate(weights);
    if (e_theta.size() != e_omega.size()) {
        throw MetricsError(MetricsError::Kind::LengthMismatch,
                           "position and velocity error series differ in length");
    }
    const double nt = l2_norm(e_theta);
    const double nw = l2_norm(e_omega);
    std::vector<double> out(e_theta.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double pos = nt == 0.0 ? 0.0 : weights.position_weight * (e_theta[i] / nt);
        const double vel = nw == 0.0 ? 0.0 : weights.velocity_weight * (e_omega[i] / nw);
        out[i] = pos + vel;
    }
    return out;
}

double frequency_error(std::span<const double> error_series, double sample_rate,
                       FrequencyBand band, std::size_t n) {
    if (!(band.low > 0.0) || !(band.high > band.low) || !std::isfinite(band.high)) {
        throw MetricsError(MetricsError::Kind::InvalidBand,
                           "band must satisfy 0 < low < high");
    }
    if (band.high > sample_rate / 2.0 + 1e-12) {
        throw MetricsError(MetricsError::Kind::InvalidBand,
                           "band exceeds the Nyquist frequency");
    }
    if (n == 0) {
        throw MetricsError(MetricsError::Kind::InvalidBand, "window sample count must be > 0");
    }
    const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    std::vector<double> scaled(error_series.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = error_series[i] * scale;

    const Spectrum sp = dft_magnitude(scaled, sample_rate);
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < sp.freqs.size(); ++k) {
        if (sp.freqs[k] >= band.low && sp.freqs[k] <= band.high) {
            acc += sp.mags[k];
            ++count;
        }
    }
    if (count == 0) {
        throw MetricsError(MetricsError::Kind::EmptyBand,
                           "no spectral bins inside [" + std::to_string(band.low) + ", " +
                               std::to_string(band.high) + "] Hz");
    }
    return acc / static_cast<double>(count);
}

NormalizedSessions normalize_session(const std::vector<std::vector<double>>& sessions) {
    double mx = 0.0;
    bool any = false;
    for (const auto& s : sessions) {
        for (double v : s) {
            any = true;
            mx = std::max(mx, v);
        }
    }
    if (!any || !(mx > 0.0)) {
        throw MetricsError(MetricsError::Kind::AllZero,
                           "nothing to normalize: no positive values across sessions");
    }
    NormalizedSessions out;
    out.session_max = mx;
    out.series.reserve(sessions.size());
    for (const auto& s : sessions) {
        std::vector<double> n(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) n[i] = s[i] / mx;
        out.series.push_back(std::move(n));
    }
    return out;
}

const char* to_string(SafetyClass cls) {
    switch (cls) {
        case SafetyClass::Safe: return "safe";
        case SafetyClass::Caution: return "caution";
        case SafetyClass::Warning: return "warning";
        case SafetyClass::Hazard: return "hazard";
    }
    return "?";
}

const char* to_string(TriggerMetric metric) {
    switch (metric) {
        case TriggerMetric::Impedance: return "impedance";
        case TriggerMetric::Frequency: return "frequency";
        case TriggerMetric::NoMassCue: return "no_mass_cue";
    }
    return "?";
}

void validate(const SafetyThresholds& th) {
    const bool ordered = th.safe_level > 0.0 && th.safe_level < th.caution_peak &&
                         th.caution_peak < th.warning_level &&
                         th.warning_level < th.hazard_level;
    if (!ordered) {
        throw MetricsError(MetricsError::Kind::InvalidThresholds,
                           "thresholds must satisfy 0 < safe < caution < warning < hazard");
    }
    if (!(th.normalized_safe_fraction > 0.0) || !(th.normalized_safe_fraction < 1.0)) {
        throw MetricsError(MetricsError::Kind::InvalidThresholds,
                           "normalized safe fraction must lie in (0, 1)");
    }
}

SafetyClass classify_value(double e, const SafetyThresholds& th) {
    if (e >= th.hazard_level) return SafetyClass::Hazard;
    if (e >= th.warning_level) return SafetyClass::Warning;
    if (e >= th.caution_peak) return SafetyClass::Caution;
    return SafetyClass::Safe;
}

std::vector<SafetyVerdict> classify(std::span<const double> t, std::span<const double> e_imp,
                                    std::span<const std::uint8_t> no_mass,
                                    const SafetyThresholds& thresholds, ClassifyMode mode,
                                    const VerdictContext& context) {
    validate(thresholds);
    if (t.size() != e_imp.size() || (!no_mass.empty() && no_mass.size() != e_imp.size())) {
        throw MetricsError(MetricsError::Kind::LengthMismatch,
                           "time, error and flag series differ in length");
    }

    auto verdict_at = [&](std::size_t i) {
        SafetyVerdict v;
        v.trigger_value = e_imp[i];
        v.trigger_time = t[i];
        v.context = context;
        v.cls = classify_value(e_imp[i], thresholds);
        if (!no_mass.empty() && no_mass[i]) {
            v.cls = std::max(v.cls, SafetyClass::Warning);
            v.metric = TriggerMetric::NoMassCue;
        } else {
            v.metric = TriggerMetric::Impedance;
        }
        return v;
    };

    std::vector<SafetyVerdict> out;
    if (mode == ClassifyMode::Instantaneous) {
        out.reserve(e_imp.size());
        for (std::size_t i = 0; i < e_imp.size(); ++i) out.push_back(verdict_at(i));
        return out;
    }

    // windowed: the whole span answers with its worst sample
    if (e_imp.empty()) return out;
    std::size_t worst = 0;
    for (std::size_t i = 1; i < e_imp.size(); ++i) {
        if (e_imp[i] > e_imp[worst]) worst = i;
    }
    SafetyVerdict v = verdict_at(worst);
    if (!no_mass.empty()) {
        const bool any_flag =
            std::any_of(no_mass.begin(), no_mass.end(), [](std::uint8_t f) { return f != 0; });
        if (any_flag && v.cls < SafetyClass::Warning) {
            v.cls = SafetyClass::Warning;
            v.metric = TriggerMetric::NoMassCue;
        }
    }
    out.push_back(v);
    return out;
}

}  // namespace psm
