#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dris/error.hpp"
#include "dris/graph.hpp"
#include "dris/math.hpp"
#include "dris/params.hpp"
#include "dris/task.hpp"

namespace dris {

inline constexpr int kStateDim = 6;   // (d, v)
inline constexpr int kLatentDim = 64; // d_z
inline constexpr int kActionDim = 5;  // (delta, alpha, beta)
inline constexpr int kTiltDim = 3;    // (sin a, cos a, b)

inline Tensor state_set_tensor(const std::vector<TaskState>& states) {
    Tensor t(static_cast<int>(states.size()), kStateDim);
    for (std::size_t i = 0; i < states.size(); ++i) {
        const TaskState& s = states[i];
        double* r = t.rowptr(static_cast<int>(i));
        r[0] = s.displacement.x; r[1] = s.displacement.y; r[2] = s.displacement.z;
        r[3] = s.velocity.x;     r[4] = s.velocity.y;     r[5] = s.velocity.z;
    }
    return t;
}

// Tilt conditioning encoded as (sin a, cos a, b) to avoid the wrap at 2pi.
inline Tensor tilt_tensor(const Tilt& tilt) {
    return Tensor::row({std::sin(tilt.alpha), std::cos(tilt.alpha), tilt.beta});
}

namespace arch {
inline constexpr int kEncH1 = 64, kEncH2 = 128;
inline constexpr int kDecH = 256;
inline constexpr int kFilmH = 32;
inline constexpr int kTrunkH = 128;
inline constexpr int kValueH = 128;
}  // namespace arch

inline void init_dense(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
                       double weight_scale = 1.0) {
    Tensor w = glorot_uniform(in, out, rng);
    if (weight_scale != 1.0)
        for (double& x : w.v) x *= weight_scale;
    ps.add(prefix + ".w", std::move(w));
    ps.add(prefix + ".b", Tensor(1, out));
}

inline Var dense(Graph& g, Var x, const ParamStore& ps, const std::string& prefix) {
    const Var w = g.leaf(prefix + ".w", &ps.get(prefix + ".w"));
    const Var b = g.leaf(prefix + ".b", &ps.get(prefix + ".b"));
    return g.add_rowvec(g.matmul_op(x, w), b);
}

inline Var dense_tanh(Graph& g, Var x, const ParamStore& ps, const std::string& prefix) {
    return g.tanh_op(dense(g, x, ps, prefix));
}

// ---------------------------------------------------------------------------
// Set encoder: shared per-point stack (the 1-D convolution over set elements
// is a per-row dense stack) followed by feature-wise max over elements. The
// output dimension is kLatentDim for any set size.
// ---------------------------------------------------------------------------
inline void init_encoder(ParamStore& ps, Rng& rng) {
    init_dense(ps, "enc.l1", kStateDim, arch::kEncH1, rng);
    init_dense(ps, "enc.l2", arch::kEncH1, arch::kEncH2, rng);
    init_dense(ps, "enc.l3", arch::kEncH2, kLatentDim, rng);
}

// states: (N x 6) with N >= 1. Returns (1 x 64).
inline Var set_encode(Graph& g, Var states, const ParamStore& ps) {
    if (g.value(states).rows < 1 || g.value(states).cols != kStateDim)
        throw ContractViolation("set_encode: input must be a non-empty N x 6 set");
    Var h = dense_tanh(g, states, ps, "enc.l1");
    h = dense_tanh(g, h, ps, "enc.l2");
    h = dense_tanh(g, h, ps, "enc.l3");
    return g.colwise_max(h);
}

// Batched single-state encoding: each row of `states` (B x 6) is its own
// singleton set. Max over one element is the identity, so the per-point stack
// alone reproduces set_encode row by row.
inline Var encode_singletons(Graph& g, Var states, const ParamStore& ps) {
    Var h = dense_tanh(g, states, ps, "enc.l1");
    h = dense_tanh(g, h, ps, "enc.l2");
    return dense_tanh(g, h, ps, "enc.l3");
}

inline Tensor encode_states(const std::vector<TaskState>& states, const ParamStore& ps) {
    Graph g(false);
    return g.value(set_encode(g, g.input(state_set_tensor(states)), ps));
}

// ---------------------------------------------------------------------------
// Set decoder: dense stack emitting a fixed-size reconstruction of M points.
// ---------------------------------------------------------------------------
inline void init_decoder(ParamStore& ps, int output_count, Rng& rng) {
    init_dense(ps, "dec.l1", kLatentDim, arch::kDecH, rng);
    init_dense(ps, "dec.l2", arch::kDecH, output_count * kStateDim, rng);
}

// z: (1 x 64) -> (M x 6).
inline Var set_decode(Graph& g, Var z, const ParamStore& ps, int output_count) {
    Var h = dense_tanh(g, z, ps, "dec.l1");
    h = dense(g, h, ps, "dec.l2");
    return g.reshape(h, output_count, kStateDim);
}

// Symmetric Chamfer distance between two row sets.
inline Var chamfer_loss(Graph& g, Var a, Var b) {
    if (g.value(a).rows < 1 || g.value(b).rows < 1)
        throw ContractViolation("chamfer_loss: empty set");
    const Var d = g.pairwise_sqdist(a, b);
    return g.add(g.mean_all(g.rowwise_min(d)), g.mean_all(g.colwise_min(d)));
}

// ---------------------------------------------------------------------------
// FiLM: z~ = lambda(u) (*) z + mu(u). The lambda head starts at exactly 1 and
// mu at exactly 0, so the module is the identity at initialization.
// ---------------------------------------------------------------------------
inline void init_film(ParamStore& ps, const std::string& prefix, Rng& rng) {
    init_dense(ps, prefix + ".lam.l1", kTiltDim, arch::kFilmH, rng);
    init_dense(ps, prefix + ".lam.l2", arch::kFilmH, kLatentDim, rng, 0.0);
    for (double& x : ps.get(prefix + ".lam.l2.b").v) x = 1.0;
    init_dense(ps, prefix + ".mu.l1", kTiltDim, arch::kFilmH, rng);
    init_dense(ps, prefix + ".mu.l2", arch::kFilmH, kLatentDim, rng, 0.0);
}

// z: (B x 64), u: (B x 3) -> (B x 64).
inline Var film_modulate(Graph& g, Var z, Var u, const ParamStore& ps, const std::string& prefix) {
    const Var lam = dense(g, dense_tanh(g, u, ps, prefix + ".lam.l1"), ps, prefix + ".lam.l2");
    const Var mu = dense(g, dense_tanh(g, u, ps, prefix + ".mu.l1"), ps, prefix + ".mu.l2");
    return g.add(g.mul(lam, z), mu);
}

// ---------------------------------------------------------------------------
// Policy head. The network emits the mean of a 5-D Gaussian already squashed
// into the action box: tanh for the translation, a re-normalized sin/cos pair
// for the tilt axis angle, a scaled sigmoid for the tilt magnitude. The
// log-std is a state-independent learnable vector. Sampling happens in action
// space, so the density of a sampled action is the plain diagonal Gaussian.
// ---------------------------------------------------------------------------
struct PolicyConfig {
    double delta_max = 0.15;
};

inline void init_policy(ParamStore& ps, Rng& rng) {
    init_film(ps, "pi.film", rng);
    init_dense(ps, "pi.trunk.l1", kLatentDim, arch::kTrunkH, rng);
    init_dense(ps, "pi.trunk.l2", arch::kTrunkH, arch::kTrunkH, rng);
    init_dense(ps, "pi.head.delta", arch::kTrunkH, 3, rng, 0.01);
    init_dense(ps, "pi.head.alpha", arch::kTrunkH, 2, rng, 0.01);
    ps.get("pi.head.alpha.b").at(0, 1) = 1.0;  // start near alpha = 0 with unit radius
    init_dense(ps, "pi.head.beta", arch::kTrunkH, 1, rng, 0.01);
    Tensor log_std(1, kActionDim);
    const double init[kActionDim] = {std::log(0.05), std::log(0.05), std::log(0.05),
                                     std::log(0.5), std::log(0.1)};
    for (int j = 0; j < kActionDim; ++j) log_std.at(0, j) = init[j];
    ps.add("pi.log_std", std::move(log_std));
}

struct PolicyOut {
    Var mean;     // (B x 5)
    Var log_std;  // (1 x 5)
};

inline PolicyOut policy_forward(Graph& g, Var z, Var u, const ParamStore& ps,
                                const PolicyConfig& cfg = {}) {
    const Var zt = film_modulate(g, z, u, ps, "pi.film");
    Var h = dense_tanh(g, zt, ps, "pi.trunk.l1");
    h = dense_tanh(g, h, ps, "pi.trunk.l2");

    const Var delta = g.scale(g.tanh_op(dense(g, h, ps, "pi.head.delta")), cfg.delta_max);
    const Var sc = dense(g, h, ps, "pi.head.alpha");
    const Var alpha = g.atan2_op(g.slice_cols(sc, 0, 1), g.slice_cols(sc, 1, 2));
    const Var beta = g.scale(g.sigmoid(dense(g, h, ps, "pi.head.beta")), kPi / 4.0);

    PolicyOut out;
    out.mean = g.concat_cols({delta, alpha, beta});
    out.log_std = g.leaf("pi.log_std", &ps.get("pi.log_std"));
    return out;
}

// ---------------------------------------------------------------------------
// Value head on its own FiLM-modulated latent.
// ---------------------------------------------------------------------------
inline void init_value(ParamStore& ps, Rng& rng) {
    init_film(ps, "vf.film", rng);
    init_dense(ps, "vf.l1", kLatentDim, arch::kValueH, rng);
    init_dense(ps, "vf.l2", arch::kValueH, 1, rng, 0.0);
}

// z: (B x 64), u: (B x 3) -> (B x 1).
inline Var value_forward(Graph& g, Var z, Var u, const ParamStore& ps) {
    const Var zt = film_modulate(g, z, u, ps, "vf.film");
    const Var h = dense_tanh(g, zt, ps, "vf.l1");
    return dense(g, h, ps, "vf.l2");
}

// ---------------------------------------------------------------------------
// Diagonal Gaussian utilities.
// ---------------------------------------------------------------------------
inline constexpr double kLogTwoPi = 1.8378770664093454836;

// Log-density of rows of `actions` (constant) under N(mean, exp(log_std)^2).
// Returns (B x 1).
inline Var gaussian_logp(Graph& g, Var actions, Var mean, Var log_std) {
    const Var diff = g.sub(actions, mean);
    const Var inv_var = g.exp_op(g.scale(log_std, -2.0));
    Var terms = g.scale(g.mul_rowvec(g.square(diff), inv_var), -0.5);
    terms = g.add_rowvec(terms, g.neg(log_std));
    terms = g.add_const(terms, -0.5 * kLogTwoPi);
    return g.rowwise_sum(terms);
}

// Entropy of the diagonal Gaussian (state independent): sum(log_std) + D/2 ln(2 pi e).
inline Var gaussian_entropy(Graph& g, Var log_std, int dim) {
    return g.add_const(g.sum_all(log_std), 0.5 * dim * (kLogTwoPi + 1.0));
}

inline double gaussian_logp_scalar(const std::vector<double>& a, const std::vector<double>& mean,
                                   const std::vector<double>& log_std) {
    double lp = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double s = std::exp(log_std[j]);
        const double zn = (a[j] - mean[j]) / s;
        lp += -0.5 * zn * zn - log_std[j] - 0.5 * kLogTwoPi;
    }
    return lp;
}

}  // namespace dris
