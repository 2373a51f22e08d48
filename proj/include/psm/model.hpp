#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "psm/dataset.hpp"
#include "psm/errors.hpp"
#include "psm/motion.hpp"

namespace psm {

// Virtual wrist pendulum: a point mass on a rigid link, pulled toward a
// per-axis attractor angle by a spring-damper pair, with gravity acting
// on the axis that carries theta_g.
struct PsmParams {
    double mass = 2.0;         // kg
    double length = 0.2;       // m
    double base_radius = 0.25; // m, reported with verdicts, not part of the ODE
    Vec3 stiffness{500.0, 500.0, 1200.0};  // N/m
    Vec3 damping{40.0, 40.0, 60.0};        // N s/m
    double gravity = 9.81;     // m/s^2
    int gravity_axis = 0;      // axis the theta_g target maps onto
};

void validate(const PsmParams& params);

struct PsmState {
    Vec3 theta{};      // rad
    Vec3 theta_dot{};  // rad/s
    double t = 0.0;    // s
};

// Height of the mass above its rest point for a given gravity angle.
double pendulum_height(double theta_g, const PsmParams& params);

// One fixed-step RK4 update toward `attractor`. dt must be in (0, 0.1].
PsmState step(const PsmState& state, const PsmParams& params, const Vec3& attractor,
              double dt);

struct ReferenceTrajectory {
    std::vector<PsmState> states;                 // one per measured timestamp
    std::vector<GravityAngleState> attractor_log; // dataset target chosen at each step
    std::vector<std::uint8_t> no_mass;            // 1 when the dataset had nothing nearby
};

// Streaming form of predict_reference. Feed fused samples in time order;
// each call returns the model state at that sample's timestamp.
class ReferencePredictor {
public:
    ReferencePredictor(const PsmParams& params, std::shared_ptr<const SafetyDataset> dataset,
                       double radius_theta, double radius_omega);

    struct Step {
        PsmState state;
        GravityAngleState target;
        bool no_mass = false;
    };

    Step observe(const ImuSample& fused);
    void reset();

private:
    PsmParams params_;
    std::shared_ptr<const SafetyDataset> dataset_;
    double radius_theta_;
    double radius_omega_;
    bool started_ = false;
    bool have_attractor_ = false;
    PsmState state_;
    Vec3 attractor_{};
};

// Reference trajectory for a fused window: at each measured timestamp the
// dataset suggests the nearest safe (theta_g, omega) target, the target is
// mapped onto the gravity axis with the measured sign, and the pendulum is
// stepped with the local dt. Holds the previous target when nothing is in
// radius and flags the sample.
ReferenceTrajectory predict_reference(const MotionTrace& window, const SafetyDataset& dataset,
                                      const PsmParams& params, double radius_theta,
                                      double radius_omega);

}  // namespace psm
