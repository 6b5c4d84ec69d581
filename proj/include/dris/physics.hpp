#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dris/error.hpp"
#include "dris/math.hpp"

namespace dris {

// One domain instance: the four physical properties that are randomized.
struct BallParams {
    double radius = 0.03;       // m
    double mu_static = 0.05;    // Coulomb friction, sticking
    double mu_dynamic = 0.05;   // Coulomb friction, sliding
    double restitution = 0.55;  // normal impulse ratio
};

struct BallState {
    Vec3 position;  // world frame, m
    Vec3 velocity;  // world frame, m/s
    bool finite() const { return position.finite() && velocity.finite(); }
};

struct PlateKinematics {
    Vec3 center;                        // m
    Mat3 orientation;                   // plate frame -> world, det +1
    Vec3 linear_velocity;               // m/s
    Vec3 angular_velocity;              // rad/s, world frame
    double half_length = 0.12;          // l_e, m

    Vec3 normal() const { return orientation.apply(Vec3{0, 0, 1}); }
    bool finite() const {
        return center.finite() && orientation.finite() && linear_velocity.finite() &&
               angular_velocity.finite();
    }
};

// Task-space second-order servo gains; one pair shared by the translational
// and rotational axes.
struct ServoGains {
    double stiffness = 1500.0;  // 1/s^2
    double damping = 77.4596669241483;  // 1/s, 2*sqrt(stiffness) = critical

    void validate() const {
        if (!(stiffness > 0.0) || !(damping > 0.0))
            throw ConfigError("servo gains must be strictly positive");
    }
};

// Spectral radius of the discrete (semi-implicit Euler) closed loop for one
// axis; < 1 means the tracking is stable at this substep size.
inline double servo_spectral_radius(const ServoGains& g, double dt) {
    // x' = x + h v', v' = v + h(-k x - d v)
    const double a = 1.0 - g.stiffness * dt * dt;
    const double b = dt * (1.0 - g.damping * dt);
    const double c = -g.stiffness * dt;
    const double d = 1.0 - g.damping * dt;
    const double tr = a + d, det = a * d - b * c;
    const double disc = 0.25 * tr * tr - det;
    if (disc >= 0.0) {
        const double r = std::sqrt(disc);
        return std::fmax(std::fabs(0.5 * tr + r), std::fabs(0.5 * tr - r));
    }
    return std::sqrt(det);
}

struct DomainRanges {
    double radius_lo = 0.02, radius_hi = 0.04;
    double mu_static_lo = 0.0, mu_static_hi = 0.1;
    double mu_dynamic_lo = 0.0, mu_dynamic_hi = 0.1;
    double restitution_lo = 0.4, restitution_hi = 0.7;

    void validate() const {
        auto check = [](double lo, double hi, const char* name) {
            if (!(lo <= hi))
                throw ConfigError(std::string("invalid interval for ") + name);
            if (!(std::isfinite(lo) && std::isfinite(hi)) || lo < 0.0)
                throw ConfigError(std::string("non-finite or negative interval for ") + name);
        };
        check(radius_lo, radius_hi, "radius");
        check(mu_static_lo, mu_static_hi, "mu_static");
        check(mu_dynamic_lo, mu_dynamic_hi, "mu_dynamic");
        check(restitution_lo, restitution_hi, "restitution");
    }
};

inline BallParams sample_domain_params(Rng& rng, const DomainRanges& ranges) {
    ranges.validate();
    BallParams p;
    p.radius = rng.uniform(ranges.radius_lo, ranges.radius_hi);
    p.mu_static = rng.uniform(ranges.mu_static_lo, ranges.mu_static_hi);
    p.mu_dynamic = rng.uniform(ranges.mu_dynamic_lo, ranges.mu_dynamic_hi);
    p.restitution = rng.uniform(ranges.restitution_lo, ranges.restitution_hi);
    return p;
}

struct PhysicsConfig {
    double gravity = 9.81;          // m/s^2, downward
    double ball_mass = 0.05;        // kg; cancels in the impulse model
    int substeps = 12;              // inner steps per control period (240 Hz at 20 Hz control)
    double bounce_threshold = 0.05; // m/s; impacts slower than this are fully inelastic,
                                    // which keeps resting contact quiet
    ServoGains gains;
    double plate_half_length = 0.12;
};

struct TargetPose {
    Vec3 position;
    Mat3 orientation;
    bool finite() const { return position.finite() && orientation.finite(); }
};

// One semi-implicit Euler step of the damped second-order servo, position and
// orientation treated per-axis with the shared gains. The rotational error is
// the log-map of the relative rotation in the world frame.
inline PlateKinematics plate_servo_step(const PlateKinematics& plate, const TargetPose& target,
                                        const ServoGains& gains, double dt) {
    if (!(dt > 0.0)) throw ConfigError("plate_servo_step: dt must be positive");
    if (!target.finite()) throw SimulationFault("plate_servo_step: non-finite target pose");

    PlateKinematics next = plate;

    const Vec3 acc = (target.position - plate.center) * gains.stiffness -
                     plate.linear_velocity * gains.damping;
    next.linear_velocity = plate.linear_velocity + acc * dt;
    next.center = plate.center + next.linear_velocity * dt;

    const Vec3 rot_err = log_so3(target.orientation * plate.orientation.transposed());
    const Vec3 ang_acc = rot_err * gains.stiffness - plate.angular_velocity * gains.damping;
    next.angular_velocity = plate.angular_velocity + ang_acc * dt;
    next.orientation = orthonormalize(exp_so3(next.angular_velocity * dt) * plate.orientation);

    return next;
}

// Signed distance of the ball center from the plate plane, along the normal.
inline double plate_signed_distance(const BallState& ball, const PlateKinematics& plate) {
    return plate.normal().dot(ball.position - plate.center);
}

// Contact point must project inside the square plate.
inline bool within_plate_bounds(const BallState& ball, const PlateKinematics& plate) {
    const Vec3 local = plate.orientation.apply_transposed(ball.position - plate.center);
    return std::fabs(local.x) <= plate.half_length && std::fabs(local.y) <= plate.half_length;
}

inline bool in_contact(const BallState& ball, const PlateKinematics& plate, const BallParams& params) {
    const double s = plate_signed_distance(ball, plate);
    return std::fabs(s) <= params.radius && within_plate_bounds(ball, plate);
}

// Impulse-based resolution: restitution on the normal component of the
// contact-point relative velocity, Coulomb friction (static/dynamic split) on
// the tangential component, then positional projection out of penetration.
// Called while separating it is a no-op.
inline BallState resolve_impact(const BallState& ball, const PlateKinematics& plate,
                                const BallParams& params, double bounce_threshold = 0.05) {
    const Vec3 n = plate.normal();
    const double s = n.dot(ball.position - plate.center);

    const Vec3 surface_point = ball.position - n * s;
    const Vec3 plate_point_velocity =
        plate.linear_velocity + plate.angular_velocity.cross(surface_point - plate.center);

    const Vec3 rel = ball.velocity - plate_point_velocity;
    const double rel_n = n.dot(rel);

    BallState out = ball;
    if (rel_n < 0.0) {
        const double e = (-rel_n < bounce_threshold) ? 0.0 : params.restitution;
        const double normal_impulse = -(1.0 + e) * rel_n;  // per unit mass

        Vec3 tangential = rel - n * rel_n;
        const double t_speed = tangential.norm();
        if (t_speed <= params.mu_static * normal_impulse) {
            tangential = Vec3{0, 0, 0};  // sticking
        } else if (t_speed > 0.0) {
            const double drop = params.mu_dynamic * normal_impulse;
            const double scale = std::fmax(0.0, t_speed - drop) / t_speed;
            tangential = tangential * scale;
        }
        out.velocity = plate_point_velocity + n * (-e * rel_n) + tangential;
    }
    if (s < params.radius) out.position += n * (params.radius - s);
    return out;
}

// One inner integration step for a single ball: gravity (semi-implicit
// Euler), then contact resolution against the already-updated plate. Both the
// lone-world and the instance-set paths go through this, so ensemble
// propagation is bit-equal to per-instance replay by construction. Returns
// whether the ball was in contact this substep.
inline bool substep_ball(BallState& b, const BallParams& p, const PlateKinematics& plate,
                         const Vec3& gravity, double h, double bounce_threshold) {
    b.velocity += gravity * h;
    b.position += b.velocity * h;
    const bool contact = in_contact(b, plate, p);
    if (contact) b = resolve_impact(b, plate, p, bounce_threshold);
    return contact;
}

// Advances one control period. The plate runs open-loop toward the target
// (one-way coupling: plate motion never depends on the balls), and each ball
// integrates independently against the shared plate trajectory.
inline void step_world(std::vector<BallState>& balls, const std::vector<BallParams>& params,
                       PlateKinematics& plate, const TargetPose& target,
                       const PhysicsConfig& cfg, double dt) {
    if (balls.size() != params.size())
        throw ContractViolation("step_world: balls/params size mismatch");
    const int n_sub = cfg.substeps;
    const double h = dt / n_sub;
    const Vec3 g{0, 0, -cfg.gravity};

    for (int k = 0; k < n_sub; ++k) {
        plate = plate_servo_step(plate, target, cfg.gains, h);
        for (std::size_t i = 0; i < balls.size(); ++i) {
            substep_ball(balls[i], params[i], plate, g, h, cfg.bounce_threshold);
            if (!balls[i].finite())
                throw SimulationFault("step_world: non-finite ball state", static_cast<int>(i));
        }
        if (!plate.finite()) throw SimulationFault("step_world: non-finite plate state");
    }
}

// Single-ball convenience overload.
inline void step_world(BallState& ball, const BallParams& params, PlateKinematics& plate,
                       const TargetPose& target, const PhysicsConfig& cfg, double dt) {
    std::vector<BallState> balls{ball};
    std::vector<BallParams> ps{params};
    step_world(balls, ps, plate, target, cfg, dt);
    ball = balls[0];
}

}  // namespace dris
