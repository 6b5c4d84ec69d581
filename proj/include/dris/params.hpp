#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dris/error.hpp"
#include "dris/graph.hpp"
#include "dris/math.hpp"
#include "dris/tensor.hpp"

namespace dris {

// Named tensors. Shapes are fixed at creation; values must stay finite, which
// the optimizer re-checks after every update.
struct ParamStore {
    std::map<std::string, Tensor> tensors;
    std::set<std::string> frozen;

    Tensor& add(const std::string& name, Tensor t) {
        auto [it, inserted] = tensors.emplace(name, std::move(t));
        if (!inserted) throw ContractViolation("ParamStore: duplicate tensor " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return tensors.count(name) != 0; }
    const Tensor& get(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ContractViolation("ParamStore: missing tensor " + name);
        return it->second;
    }
    Tensor& get(const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ContractViolation("ParamStore: missing tensor " + name);
        return it->second;
    }

    void freeze_prefix(const std::string& prefix) {
        for (const auto& [name, t] : tensors)
            if (name.rfind(prefix, 0) == 0) frozen.insert(name);
    }
    bool trainable(const std::string& name) const { return frozen.count(name) == 0; }

    void check_finite() const {
        for (const auto& [name, t] : tensors)
            if (!t.finite()) throw TrainingFault("non-finite values in tensor " + name);
    }
};

inline Tensor glorot_uniform(int rows, int cols, Rng& rng) {
    Tensor t(rows, cols);
    const double limit = std::sqrt(6.0 / (rows + cols));
    for (double& x : t.v) x = rng.uniform(-limit, limit);
    return t;
}

// Runs backward and returns one gradient per trainable tensor; tensors the
// loss does not touch get zeros.
inline std::map<std::string, Tensor> compute_gradients(Graph& graph, Var loss, const ParamStore& ps) {
    if (!std::isfinite(graph.scalar(loss))) throw TrainingFault("non-finite loss");
    graph.backward(loss);
    std::map<std::string, Tensor> grads = graph.leaf_grads();
    for (const auto& [name, t] : ps.tensors) {
        if (!ps.trainable(name)) { grads.erase(name); continue; }
        auto it = grads.find(name);
        if (it == grads.end())
            grads.emplace(name, Tensor(t.rows, t.cols));
        else if (!it->second.finite())
            throw TrainingFault("non-finite gradient for tensor " + name);
    }
    return grads;
}

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::map<std::string, Tensor> m, v;
    std::int64_t step = 0;
};

inline void adam_update(ParamStore& ps, const std::map<std::string, Tensor>& grads,
                        AdamState& state, const AdamConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (const auto& [name, g] : grads) {
        if (!ps.trainable(name)) continue;
        Tensor& p = ps.get(name);
        if (!p.same_shape(g)) throw TrainingFault("gradient shape mismatch for " + name);
        Tensor& m = state.m.try_emplace(name, Tensor(p.rows, p.cols)).first->second;
        Tensor& v = state.v.try_emplace(name, Tensor(p.rows, p.cols)).first->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m.v[i] = cfg.beta1 * m.v[i] + (1.0 - cfg.beta1) * g.v[i];
            v.v[i] = cfg.beta2 * v.v[i] + (1.0 - cfg.beta2) * g.v[i] * g.v[i];
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            p.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
    ps.check_finite();
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, format version, then per-tensor name, shape,
// and little-endian 64-bit float payload. Round-trips bit-exactly.
// ---------------------------------------------------------------------------
namespace detail {

inline constexpr char kCheckpointMagic[8] = {'D', 'R', 'I', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_u32(std::ostream& os, std::uint32_t x) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ConfigError("checkpoint: truncated file");
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return x;
}
inline void write_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}
inline double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw ConfigError("checkpoint: truncated file");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

inline void write_tensor_block(std::ostream& os, const std::string& name, const Tensor& t) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.rows));
    write_u32(os, static_cast<std::uint32_t>(t.cols));
    for (const double d : t.v) write_f64(os, d);
}

inline std::pair<std::string, Tensor> read_tensor_block(std::istream& is) {
    const std::uint32_t len = read_u32(is);
    if (len > (1u << 20)) throw ConfigError("checkpoint: implausible name length");
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw ConfigError("checkpoint: truncated file");
    const std::uint32_t rows = read_u32(is), cols = read_u32(is);
    Tensor t(static_cast<int>(rows), static_cast<int>(cols));
    for (double& d : t.v) d = read_f64(is);
    return {std::move(name), std::move(t)};
}

}  // namespace detail

inline void save_checkpoint(const ParamStore& ps, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open checkpoint for writing: " + path);
    os.write(detail::kCheckpointMagic, 8);
    detail::write_u32(os, detail::kCheckpointVersion);
    detail::write_u32(os, static_cast<std::uint32_t>(ps.tensors.size()));
    for (const auto& [name, t] : ps.tensors) detail::write_tensor_block(os, name, t);
    if (!os) throw ConfigError("checkpoint write failed: " + path);
}

inline ParamStore load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
        throw ConfigError("checkpoint: bad magic in " + path);
    const std::uint32_t version = detail::read_u32(is);
    if (version != detail::kCheckpointVersion)
        throw ConfigError("checkpoint: unsupported format version " + std::to_string(version));
    const std::uint32_t count = detail::read_u32(is);
    ParamStore ps;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, t] = detail::read_tensor_block(is);
        ps.add(name, std::move(t));
    }
    return ps;
}

// Loads a checkpoint into an existing architecture, validating shapes.
inline void load_checkpoint_into(ParamStore& ps, const std::string& path) {
    ParamStore loaded = load_checkpoint(path);
    for (auto& [name, t] : loaded.tensors) {
        if (!ps.has(name))
            throw ConfigError("checkpoint: unexpected tensor " + name + " in " + path);
        Tensor& dst = ps.get(name);
        if (!dst.same_shape(t))
            throw ConfigError("checkpoint: shape mismatch for tensor " + name + " in " + path);
        dst = std::move(t);
    }
    for (const auto& [name, t] : ps.tensors)
        if (!loaded.tensors.count(name))
            throw ConfigError("checkpoint: missing tensor " + name + " in " + path);
}

}  // namespace dris
