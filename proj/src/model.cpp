#include "psm/model.hpp"

#include <cmath>
#include <stdexcept>

#include "psm/dsp.hpp"

namespace psm {

void validate(const PsmParams& params) {
    if (!(params.mass > 0.0) || !(params.length > 0.0) || !(params.base_radius > 0.0)) {
        throw ModelError(ModelError::Kind::InvalidParams,
                         "mass, length and base radius must be positive");
    }
    for (int i = 0; i < 3; ++i) {
        if (!(params.stiffness[i] > 0.0) || !(params.damping[i] > 0.0)) {
            throw ModelError(ModelError::Kind::InvalidParams,
                             "stiffness and damping must be positive on every axis");
        }
    }
    if (!(params.gravity >= 0.0)) {
        throw ModelError(ModelError::Kind::InvalidParams, "gravity must be >= 0");
    }
    if (params.gravity_axis < 0 || params.gravity_axis > 2) {
        throw ModelError(ModelError::Kind::InvalidParams, "gravity axis must be 0, 1 or 2");
    }
}

double pendulum_height(double theta_g, const PsmParams& params) {
    return params.length * (1.0 - std::cos(theta_g));
}

namespace {

struct Deriv {
    Vec3 dtheta;
    Vec3 dtheta_dot;
};

Deriv eval(const Vec3& theta, const Vec3& theta_dot, const PsmParams& p, const Vec3& attractor) {
    Deriv d;
    for (int i = 0; i < 3; ++i) {
        double acc = -(p.stiffness[i] / p.mass) * (theta[i] - attractor[i]) -
                     (p.damping[i] / p.mass) * theta_dot[i];
        if (i == p.gravity_axis) {
            acc -= (p.gravity / p.length) * std::sin(theta[i]);
        }
        d.dtheta[i] = theta_dot[i];
        d.dtheta_dot[i] = acc;
    }
    return d;
}

}  // namespace

PsmState step(const PsmState& state, const PsmParams& params, const Vec3& attractor,
              double dt) {
    if (!(dt > 0.0) || dt > 0.1) {
        throw std::invalid_argument("step: dt must be in (0, 0.1]");
    }
    const Deriv k1 = eval(state.theta, state.theta_dot, params, attractor);

    Vec3 th2, td2;
    for (int i = 0; i < 3; ++i) {
        th2[i] = state.theta[i] + 0.5 * dt * k1.dtheta[i];
        td2[i] = state.theta_dot[i] + 0.5 * dt * k1.dtheta_dot[i];
    }
    const Deriv k2 = eval(th2, td2, params, attractor);

    Vec3 th3, td3;
    for (int i = 0; i < 3; ++i) {
        th3[i] = state.theta[i] + 0.5 * dt * k2.dtheta[i];
        td3[i] = state.theta_dot[i] + 0.5 * dt * k2.dtheta_dot[i];
    }
    const Deriv k3 = eval(th3, td3, params, attractor);

    Vec3 th4, td4;
    for (int i = 0; i < 3; ++i) {
        th4[i] = state.theta[i] + dt * k3.dtheta[i];
        td4[i] = state.theta_dot[i] + dt * k3.dtheta_dot[i];
    }
    const Deriv k4 = eval(th4, td4, params, attractor);

    PsmState out;
    out.t = state.t + dt;
    for (int i = 0; i < 3; ++i) {
        out.theta[i] = state.theta[i] +
                       dt / 6.0 *
                           (k1.dtheta[i] + 2.0 * k2.dtheta[i] + 2.0 * k3.dtheta[i] +
                            k4.dtheta[i]);
        out.theta_dot[i] = state.theta_dot[i] +
                           dt / 6.0 *
                               (k1.dtheta_dot[i] + 2.0 * k2.dtheta_dot[i] +
                                2.0 * k3.dtheta_dot[i] + k4.dtheta_dot[i]);
        if (!std::isfinite(out.theta[i]) || !std::isfinite(out.theta_dot[i])) {
            throw ModelError(ModelError::Kind::NonFiniteState,
                             "pendulum state diverged at t=" + std::to_string(out.t));
        }
    }
    return out;
}

ReferencePredictor::ReferencePredictor(const PsmParams& params,
                                       std::shared_ptr<const SafetyDataset> dataset,
                                       double radius_theta, double radius_omega)
    : params_(params),
      dataset_(std::move(dataset)),
      radius_theta_(radius_theta),
      radius_omega_(radius_omega) {
    validate(params_);
    if (!dataset_) {
        throw ModelError(ModelError::Kind::InvalidParams, "reference predictor needs a dataset");
    }
    if (!(radius_theta_ > 0.0) || !(radius_omega_ > 0.0)) {
        throw ModelError(ModelError::Kind::InvalidParams, "search radii must be positive");
    }
}

void ReferencePredictor::reset() {
    started_ = false;
    have_attractor_ = false;
    state_ = PsmState{};
    attractor_ = Vec3{};
}

ReferencePredictor::Step ReferencePredictor::observe(const ImuSample& fused) {
    if (!fused.orient) {
        throw DspError(DspError::Kind::MissingOrientation,
                       "reference prediction needs fused orientation");
    }
    const Vec3& o = *fused.orient;
    if (!started_) {
        // model starts on top of the first measurement
        state_.theta = o;
        state_.theta_dot = fused.gyro;
        state_.t = fused.t;
        started_ = true;
    } else {
        const double dt = fused.t - state_.t;
        state_ = step(state_, params_, attractor_, dt);
    }

    const GravityAngleState here = gravity_angle(fused);
    const auto target = safest_neighbor(*dataset_, here, radius_theta_, radius_omega_);

    Step result;
    if (target) {
        Vec3 a = o;  // off-axis angles track the measurement
        const int ga = params_.gravity_axis;
        a[ga] = std::copysign(target->theta_g, o[ga] == 0.0 ? 1.0 : o[ga]);
        attractor_ = a;
        have_attractor_ = true;
        result.target = *target;
    } else {
        // nothing known nearby: hold the previous pull and flag the sample
        result.target = here;
        result.no_mass = true;
        if (!have_attractor_) {
            attractor_ = o;  // nothing to aim for yet: settle where we are
            have_attractor_ = true;
        }
    }
    result.state = state_;
    return result;
}

ReferenceTrajectory predict_reference(const MotionTrace& window, const SafetyDataset& dataset,
                                      const PsmParams& params, double radius_theta,
                                      double radius_omega) {
    auto ds = std::shared_ptr<const SafetyDataset>(&dataset, [](const SafetyDataset*) {});
    ReferencePredictor pred(params, ds, radius_theta, radius_omega);
    ReferenceTrajectory traj;
    traj.states.reserve(window.samples.size());
    traj.attractor_log.reserve(window.samples.size());
    traj.no_mass.reserve(window.samples.size());
    for (const auto& smp : window.samples) {
        auto st = pred.observe(smp);
        traj.states.push_back(st.state);
        traj.attractor_log.push_back(st.target);
        traj.no_mass.push_back(st.no_mass ? 1 : 0);
    }
    return traj;
}

}  // namespace psm
