#pragma once

#include <cmath>

#include "dris/error.hpp"
#include "dris/math.hpp"
#include "dris/physics.hpp"

namespace dris {

// Episode-fixed frame: origin at the plate's initial center, yawed so the
// X-Z plane contains the ball at t = 0. Everything the policy sees lives in
// this frame, which makes it invariant to the incoming direction.
struct MotionFrame {
    Vec3 origin;
    double yaw = 0.0;

    Vec3 to_frame(const Vec3& world_vec) const {
        return rotation_z(yaw).apply_transposed(world_vec);
    }
    Vec3 to_world(const Vec3& frame_vec) const { return rotation_z(yaw).apply(frame_vec); }
};

// s_t = (d_t, v_t): ball displacement from the plate center and ball
// velocity, both in the motion frame.
struct TaskState {
    Vec3 displacement;
    Vec3 velocity;
};

inline constexpr double kBetaMax = kPi / 4.0 - 1e-6;

// a_t = (delta, alpha, beta). Construction clamps/wraps into the valid box;
// `clamped` records whether anything was out of range.
struct Action {
    Vec3 delta;          // motion frame, m
    double alpha = 0.0;  // [0, 2pi)
    double beta = 0.0;   // [0, pi/4)
    bool clamped = false;

    static Action from_raw(const Vec3& delta_raw, double alpha_raw, double beta_raw,
                           double delta_max) {
        Action a;
        a.delta = Vec3{clamp(delta_raw.x, -delta_max, delta_max),
                       clamp(delta_raw.y, -delta_max, delta_max),
                       clamp(delta_raw.z, -delta_max, delta_max)};
        a.alpha = wrap_angle_2pi(alpha_raw);
        a.beta = clamp(beta_raw, 0.0, kBetaMax);
        a.clamped = (a.delta.x != delta_raw.x) || (a.delta.y != delta_raw.y) ||
                    (a.delta.z != delta_raw.z) || (a.beta != beta_raw);
        return a;
    }
};

struct EpisodeConfig {
    int horizon = 20;
    double control_dt = 0.05;
    double launch_distance_lo = 1.0, launch_distance_hi = 2.0;  // m
    double flight_time_lo = 1.0, flight_time_hi = 1.5;          // s
    double catch_radius = 0.2;                                  // m
    double lead_time_lo = 0.08, lead_time_hi = 0.12;            // s
    double init_jitter_rot = 0.02;   // rad, per-axis std of plate pose jitter
    double init_jitter_pos = 0.008;  // m, per-axis std
    double delta_max = 0.15;         // m, per component of the translation command
    Vec3 home_center{0.0, 0.0, 0.3};

    void validate() const {
        if (horizon < 1 || !(control_dt > 0.0)) throw ConfigError("episode: bad horizon/dt");
        if (!(launch_distance_lo <= launch_distance_hi) || !(flight_time_lo <= flight_time_hi) ||
            !(lead_time_lo <= lead_time_hi))
            throw ConfigError("episode: invalid range");
        if (!(catch_radius > 0.0) || !(delta_max > 0.0))
            throw ConfigError("episode: radius/delta_max must be positive");
    }
};

inline MotionFrame build_motion_frame(const PlateKinematics& plate, const Vec3& ball_pos) {
    MotionFrame f;
    f.origin = plate.center;
    const double dx = ball_pos.x - plate.center.x;
    const double dy = ball_pos.y - plate.center.y;
    f.yaw = (std::sqrt(dx * dx + dy * dy) > 1e-9) ? std::atan2(dy, dx) : 0.0;
    return f;
}

inline TaskState observe_state(const BallState& ball, const PlateKinematics& plate,
                               const MotionFrame& frame) {
    return TaskState{frame.to_frame(ball.position - plate.center), frame.to_frame(ball.velocity)};
}

// Plate normal expressed in the motion frame; this is the n_t used by the
// reward and the success test.
inline Vec3 plate_normal_in_frame(const PlateKinematics& plate, const MotionFrame& frame) {
    return frame.to_frame(plate.normal());
}

// Observed tilt (alpha, beta) recovered from the plate orientation: the
// inverse of the tilt parameterization n = (sin a sin b, -cos a sin b, cos b)
// in the motion frame.
struct Tilt {
    double alpha = 0.0;
    double beta = 0.0;
};

inline Tilt observe_tilt(const PlateKinematics& plate, const MotionFrame& frame) {
    const Vec3 n = plate_normal_in_frame(plate, frame);
    Tilt t;
    t.beta = std::acos(clamp(n.z, -1.0, 1.0));
    if (std::sin(t.beta) > 1e-9) t.alpha = wrap_angle_2pi(std::atan2(n.x, -n.y));
    return t;
}

inline TargetPose apply_action(const Action& action, const MotionFrame& frame,
                               const PlateKinematics& plate) {
    TargetPose target;
    target.position = frame.to_world(action.delta) + plate.center;
    target.orientation = rotation_z(frame.yaw) * rodrigues_rotation(action.alpha, action.beta);
    return target;
}

struct RewardDecomposition {
    double d_perp, d_par, v_perp, v_par;
};

inline RewardDecomposition decompose_state(const TaskState& s, const Vec3& normal) {
    RewardDecomposition d;
    d.d_perp = s.displacement.dot(normal);
    d.d_par = (s.displacement - normal * d.d_perp).norm();
    d.v_perp = s.velocity.dot(normal);
    d.v_par = (s.velocity - normal * d.v_perp).norm();
    return d;
}

// r = r_v + r_p with
//   r_v = 1/2 exp(-v_par^2/eta^2) + 1/2 exp(-max{v_perp, -0.1}^2/eta^2)
//   r_p = -1 iff the ball is beneath or outside the plate.
inline double compute_reward(const TaskState& state, const Vec3& normal, double l_e,
                             double eta = 0.25) {
    if (std::fabs(normal.norm() - 1.0) > 1e-9)
        throw ContractViolation("compute_reward: normal must be unit length");
    const RewardDecomposition d = decompose_state(state, normal);
    const double vp = std::fmax(d.v_perp, -0.1);
    const double r_v = 0.5 * std::exp(-(d.v_par * d.v_par) / (eta * eta)) +
                       0.5 * std::exp(-(vp * vp) / (eta * eta));
    const double r_p = (d.d_perp < 0.0 || d.d_par > l_e) ? -1.0 : 0.0;
    return r_v + r_p;
}

// Success at episode end: resting on the plate. "On the plate" is
// operationalized as d_perp within [0, radius + 1cm] and d_par within the
// half length; "resting" as |v| < 0.1 m/s.
inline bool is_success(const TaskState& final_state, const Vec3& normal, double l_e,
                       double ball_radius) {
    const RewardDecomposition d = decompose_state(final_state, normal);
    return d.d_perp >= 0.0 && d.d_perp <= ball_radius + 0.01 && d.d_par <= l_e &&
           final_state.velocity.norm() < 0.1;
}

// Everything needed to start an episode, plus the ballistic bookkeeping that
// the oracles check against.
struct EpisodeInit {
    PlateKinematics plate;
    BallState ball;
    MotionFrame frame;
    Vec3 launch_position;
    Vec3 launch_velocity;
    Vec3 arrival_point;
    double flight_time = 0.0;
    double lead_time = 0.0;
};

// Samples a launch at horizontal distance [1, 2] m whose ballistic arc meets
// the catch region (plate height, radius 0.2 m) after [1, 1.5] s; the episode
// clock starts a lead time of [0.08, 0.12] s before arrival.
inline EpisodeInit init_episode(Rng& rng, const EpisodeConfig& cfg, double gravity = 9.81,
                                double plate_half_length = 0.12) {
    cfg.validate();
    EpisodeInit ep;

    const double direction = rng.uniform(0.0, kTwoPi);
    const double distance = rng.uniform(cfg.launch_distance_lo, cfg.launch_distance_hi);
    const double flight = rng.uniform(cfg.flight_time_lo, cfg.flight_time_hi);
    const double catch_r = cfg.catch_radius * std::sqrt(rng.uniform01());
    const double catch_phi = rng.uniform(0.0, kTwoPi);
    const double lead = rng.uniform(cfg.lead_time_lo, cfg.lead_time_hi);

    ep.plate.center = cfg.home_center;
    ep.plate.orientation = Mat3::identity();
    ep.plate.half_length = plate_half_length;
    if (cfg.init_jitter_rot > 0.0 || cfg.init_jitter_pos > 0.0) {
        const Vec3 rot_jit{rng.normal(0.0, cfg.init_jitter_rot), rng.normal(0.0, cfg.init_jitter_rot),
                           rng.normal(0.0, cfg.init_jitter_rot)};
        const Vec3 pos_jit{rng.normal(0.0, cfg.init_jitter_pos), rng.normal(0.0, cfg.init_jitter_pos),
                           rng.normal(0.0, cfg.init_jitter_pos)};
        ep.plate.orientation = orthonormalize(exp_so3(rot_jit) * ep.plate.orientation);
        ep.plate.center += pos_jit;
    }

    ep.arrival_point = cfg.home_center +
                       Vec3{catch_r * std::cos(catch_phi), catch_r * std::sin(catch_phi), 0.0};
    ep.launch_position =
        ep.arrival_point + Vec3{distance * std::cos(direction), distance * std::sin(direction), 0.0};

    // Solve p(T) = p0 + v0 T - (g T^2 / 2) z = arrival.
    const Vec3 g{0.0, 0.0, -gravity};
    ep.launch_velocity = (ep.arrival_point - ep.launch_position - g * (0.5 * flight * flight)) *
                         (1.0 / flight);
    if (!ep.launch_velocity.finite()) throw SimulationFault("init_episode: no ballistic solution");

    const double t0 = flight - lead;
    ep.ball.position = ep.launch_position + ep.launch_velocity * t0 + g * (0.5 * t0 * t0);
    ep.ball.velocity = ep.launch_velocity + g * t0;
    ep.flight_time = flight;
    ep.lead_time = lead;

    ep.frame = build_motion_frame(ep.plate, ep.ball.position);
    return ep;
}

// Evaluation-time observation noise: level scales a base std of 1 cm per
// position axis and 5 cm/s per velocity axis. The true simulator state is
// untouched; only the observation passed to the policy changes.
inline TaskState inject_observation_noise(const TaskState& state, int level, Rng& rng) {
    if (level == 0) return state;
    const double sp = 0.01 * level, sv = 0.05 * level;
    TaskState noisy = state;
    noisy.displacement += Vec3{rng.normal(0.0, sp), rng.normal(0.0, sp), rng.normal(0.0, sp)};
    noisy.velocity += Vec3{rng.normal(0.0, sv), rng.normal(0.0, sv), rng.normal(0.0, sv)};
    return noisy;
}

// Evaluation-time execution error: the task-space image of uniform joint
// perturbations in [-0.05, 0.05] rad; +-2 cm per translation axis and
// +-0.05 rad per rotation axis on the commanded pose.
inline TargetPose inject_execution_error(const TargetPose& target, Rng& rng, bool enabled = true,
                                         double pos_mag = 0.02, double rot_mag = 0.05) {
    if (!enabled) return target;
    TargetPose out = target;
    out.position += Vec3{rng.uniform(-pos_mag, pos_mag), rng.uniform(-pos_mag, pos_mag),
                         rng.uniform(-pos_mag, pos_mag)};
    const Vec3 rot{rng.uniform(-rot_mag, rot_mag), rng.uniform(-rot_mag, rot_mag),
                   rng.uniform(-rot_mag, rot_mag)};
    out.orientation = orthonormalize(exp_so3(rot) * target.orientation);
    return out;
}

}  // namespace dris
