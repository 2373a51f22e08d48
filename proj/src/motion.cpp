#include "psm/motion.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace psm {

const char* to_string(Task task) {
    switch (task) {
        case Task::Fastening: return "fastening";
        case Task::Inspection: return "inspection";
        case Task::PickPlace: return "pick_place";
    }
    return "?";
}

const char* to_string(Intensity intensity) {
    switch (intensity) {
        case Intensity::Low: return "low";
        case Intensity::Medium: return "medium";
        case Intensity::High: return "high";
    }
    return "?";
}

std::optional<Task> task_from_string(std::string_view name) {
    if (name == "fastening") return Task::Fastening;
    if (name == "inspection") return Task::Inspection;
    if (name == "pick_place") return Task::PickPlace;
    return std::nullopt;
}

std::optional<Intensity> intensity_from_string(std::string_view name) {
    if (name == "low") return Intensity::Low;
    if (name == "medium") return Intensity::Medium;
    if (name == "high") return Intensity::High;
    return std::nullopt;
}

namespace {

constexpr const char* kAccelFields[3] = {"ax", "ay", "az"};
constexpr const char* kGyroFields[3] = {"gx", "gy", "gz"};
constexpr const char* kOrientFields[3] = {"ox", "oy", "oz"};

void require_finite(double v, std::size_t index, const char* field) {
    if (!std::isfinite(v)) {
        throw ValidationError(ValidationError::Kind::NonFinite,
                              "non-finite value in field '" + std::string(field) +
                                  "' at sample " + std::to_string(index),
                              index, field, v);
    }
}

}  // namespace

const MotionTrace& validate_trace(const MotionTrace& trace) {
    const auto& s = trace.samples;
    if (s.size() < 2) {
        throw ValidationError(ValidationError::Kind::TooShort,
                              "trace needs at least 2 samples, got " + std::to_string(s.size()));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        require_finite(s[i].t, i, "t");
        for (int a = 0; a < 3; ++a) {
            require_finite(s[i].accel[a], i, kAccelFields[a]);
            require_finite(s[i].gyro[a], i, kGyroFields[a]);
            if (s[i].orient) require_finite((*s[i].orient)[a], i, kOrientFields[a]);
        }
        if (i == 0 && s[0].t < 0.0) {
            throw ValidationError(ValidationError::Kind::NegativeTime,
                                  "trace starts at negative time", 0, "t", s[0].t);
        }
        if (i > 0 && !(s[i].t > s[i - 1].t)) {
            throw ValidationError(ValidationError::Kind::NonMonotonicTime,
                                  "timestamp does not increase at sample " + std::to_string(i),
                                  i, "t", s[i].t, s[i - 1].t);
        }
        for (int a = 0; a < 3; ++a) {
            if (std::abs(s[i].gyro[a]) >= kMaxPlausibleGyro) {
                throw ValidationError(ValidationError::Kind::GyroOutOfRange,
                                      "implausible angular rate at sample " + std::to_string(i),
                                      i, kGyroFields[a], s[i].gyro[a], kMaxPlausibleGyro);
            }
        }
    }
    if (!(trace.nominal_rate > 0.0)) {
        throw ValidationError(ValidationError::Kind::RateMismatch,
                              "nominal rate must be positive", 0, "rate", 0.0,
                              trace.nominal_rate);
    }
    const double span = s.back().t - s.front().t;
    const double observed = static_cast<double>(s.size() - 1) / span;
    if (std::abs(observed - trace.nominal_rate) > 0.1 * trace.nominal_rate) {
        throw ValidationError(ValidationError::Kind::RateMismatch,
                              "observed rate deviates more than 10% from nominal", 0, "rate",
                              observed, trace.nominal_rate);
    }
    return trace;
}

MotionTrace resample(const MotionTrace& trace, double target_rate) {
    if (!(target_rate > 0.0)) {
        throw std::invalid_argument("resample: target_rate must be positive");
    }
    const auto& in = trace.samples;
    if (in.size() < 2) {
        throw ValidationError(ValidationError::Kind::TooShort,
                              "resample needs at least 2 samples");
    }
    const double dt = 1.0 / target_rate;
    const double t0 = in.front().t;
    const double span = in.back().t - t0;
    const auto n_out = static_cast<std::size_t>(std::floor(span / dt + 1e-9)) + 1;

    bool with_orient = true;
    for (const auto& smp : in) with_orient = with_orient && smp.orient.has_value();

    MotionTrace out;
    out.nominal_rate = target_rate;
    out.label = trace.label;
    out.samples.reserve(n_out);

    std::size_t seg = 0;
    for (std::size_t k = 0; k < n_out; ++k) {
        const double tq = t0 + static_cast<double>(k) * dt;
        while (seg < in.size() - 2 && in[seg + 1].t <= tq) ++seg;
        const ImuSample& a = in[seg];
        const ImuSample& b = in[seg + 1];

        ImuSample s;
        s.t = tq;
        if (tq <= a.t) {
            s.accel = a.accel;
            s.gyro = a.gyro;
            if (with_orient) s.orient = a.orient;
        } else if (tq >= b.t) {
            s.accel = b.accel;
            s.gyro = b.gyro;
            if (with_orient) s.orient = b.orient;
        } else {
            const double u = (tq - a.t) / (b.t - a.t);
            for (int ax = 0; ax < 3; ++ax) {
                s.accel[ax] = a.accel[ax] + (b.accel[ax] - a.accel[ax]) * u;
                s.gyro[ax] = a.gyro[ax] + (b.gyro[ax] - a.gyro[ax]) * u;
            }
            if (with_orient) {
                Vec3 o;
                for (int ax = 0; ax < 3; ++ax) {
                    o[ax] = (*a.orient)[ax] + ((*b.orient)[ax] - (*a.orient)[ax]) * u;
                }
                s.orient = o;
            }
        }
        out.samples.push_back(s);
    }
    return out;
}

}  // namespace psm
