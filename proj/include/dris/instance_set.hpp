#pragma once

#include <vector>

#include "dris/error.hpp"
#include "dris/physics.hpp"
#include "dris/task.hpp"

namespace dris {

// N parallel (state, params) instances sharing one plate and one action
// stream. Entries are stored in a stable order; permutation invariance is the
// encoder's job, not the container's.
struct InstanceSet {
    std::vector<BallState> states;
    std::vector<BallParams> params;
    std::vector<bool> frozen;  // divergence guard: escaped instances stop evolving

    std::size_t size() const { return states.size(); }
};

inline InstanceSet init_dris(const BallState& s0, int count, Rng& rng, const DomainRanges& ranges) {
    if (count < 1) throw ConfigError("init_dris: instance count must be >= 1");
    InstanceSet set;
    set.states.assign(static_cast<std::size_t>(count), s0);
    set.params.reserve(count);
    for (int i = 0; i < count; ++i) set.params.push_back(sample_domain_params(rng, ranges));
    set.frozen.assign(static_cast<std::size_t>(count), false);
    return set;
}

// Advances every live instance one control period against the shared plate
// trajectory. Instances whose position leaves the +-bound box freeze at
// their last in-box state. The plate is stepped exactly once.
inline void propagate(InstanceSet& set, PlateKinematics& plate, const TargetPose& target,
                      const PhysicsConfig& cfg, double dt, double bound_box = 5.0) {
    const int n_sub = cfg.substeps;
    const double h = dt / n_sub;
    const Vec3 g{0, 0, -cfg.gravity};

    for (int k = 0; k < n_sub; ++k) {
        plate = plate_servo_step(plate, target, cfg.gains, h);
        for (std::size_t i = 0; i < set.size(); ++i) {
            if (set.frozen[i]) continue;
            BallState& b = set.states[i];
            substep_ball(b, set.params[i], plate, g, h, cfg.bounce_threshold);
            if (!b.finite())
                throw SimulationFault("propagate: non-finite instance state", static_cast<int>(i));
            if (std::fabs(b.position.x) > bound_box || std::fabs(b.position.y) > bound_box ||
                std::fabs(b.position.z) > bound_box)
                set.frozen[i] = true;
        }
        if (!plate.finite()) throw SimulationFault("propagate: non-finite plate state");
    }
}

inline bool all_frozen(const InstanceSet& set) {
    for (const bool f : set.frozen)
        if (!f) return false;
    return true;
}

// Projection onto the state space: one TaskState per entry, order preserved.
inline std::vector<TaskState> project_states(const InstanceSet& set, const MotionFrame& frame,
                                             const PlateKinematics& plate) {
    std::vector<TaskState> out;
    out.reserve(set.size());
    for (const BallState& s : set.states) out.push_back(observe_state(s, plate, frame));
    return out;
}

inline double average_reward(const std::vector<TaskState>& states, const Vec3& normal, double l_e,
                             double eta = 0.25) {
    if (states.empty()) throw ContractViolation("average_reward: empty state collection");
    double sum = 0.0;
    for (const TaskState& s : states) sum += compute_reward(s, normal, l_e, eta);
    return sum / static_cast<double>(states.size());
}

}  // namespace dris
