#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "dris/error.hpp"

namespace dris {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    double norm2() const { return dot(*this); }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Column-major 3x3 is overkill here; row-major with explicit apply keeps the
// contact code readable.
struct Mat3 {
    // m[r][c]
    std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    static Mat3 identity() { return Mat3{}; }

    Vec3 apply(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    // R^T v
    Vec3 apply_transposed(const Vec3& v) const {
        return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
                m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
                m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
                r.m[i][j] = s;
            }
        return r;
    }
    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
        return r;
    }
    Vec3 col(int j) const { return {m[0][j], m[1][j], m[2][j]}; }
    double det() const {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }
    bool finite() const {
        for (const auto& row : m)
            for (double v : row)
                if (!std::isfinite(v)) return false;
        return true;
    }
};

inline Mat3 rotation_z(double yaw) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    Mat3 r;
    r.m = {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
    return r;
}

inline Mat3 skew(const Vec3& w) {
    Mat3 r;
    r.m = {{{0, -w.z, w.y}, {w.z, 0, -w.x}, {-w.y, w.x, 0}}};
    return r;
}

// Rotation about the horizontal axis (cos a, sin a, 0) by angle b:
// I + sin(b) W + (1 - cos(b)) W^2.
inline Mat3 rodrigues_rotation(double alpha, double beta) {
    const Vec3 w{std::cos(alpha), std::sin(alpha), 0.0};
    const Mat3 W = skew(w);
    const Mat3 W2 = W * W;
    const double sb = std::sin(beta), cb = std::cos(beta);
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.m[i][j] = (i == j ? 1.0 : 0.0) + sb * W.m[i][j] + (1.0 - cb) * W2.m[i][j];
    return r;
}

// Rotation by an arbitrary axis-angle vector (magnitude = angle).
inline Mat3 exp_so3(const Vec3& w) {
    const double t = w.norm();
    if (t < 1e-12) {
        // First-order expansion keeps the map smooth at zero.
        Mat3 r = Mat3::identity();
        const Mat3 W = skew(w);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] += W.m[i][j];
        return r;
    }
    const Vec3 a = w * (1.0 / t);
    const Mat3 W = skew(a);
    const Mat3 W2 = W * W;
    const double st = std::sin(t), ct = std::cos(t);
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.m[i][j] = (i == j ? 1.0 : 0.0) + st * W.m[i][j] + (1.0 - ct) * W2.m[i][j];
    return r;
}

// Axis-angle vector of a rotation matrix (inverse of exp_so3).
inline Vec3 log_so3(const Mat3& R) {
    const double tr = R.m[0][0] + R.m[1][1] + R.m[2][2];
    double c = 0.5 * (tr - 1.0);
    c = std::fmin(1.0, std::fmax(-1.0, c));
    const double t = std::acos(c);
    const Vec3 v{R.m[2][1] - R.m[1][2], R.m[0][2] - R.m[2][0], R.m[1][0] - R.m[0][1]};
    if (t < 1e-9) return v * 0.5;
    const double s = std::sin(t);
    if (s < 1e-9) {
        // Near pi: extract axis from the symmetric part.
        Vec3 axis;
        if (R.m[0][0] >= R.m[1][1] && R.m[0][0] >= R.m[2][2]) {
            axis.x = std::sqrt(std::fmax(0.0, (R.m[0][0] + 1.0) * 0.5));
            axis.y = R.m[0][1] / (2.0 * axis.x);
            axis.z = R.m[0][2] / (2.0 * axis.x);
        } else if (R.m[1][1] >= R.m[2][2]) {
            axis.y = std::sqrt(std::fmax(0.0, (R.m[1][1] + 1.0) * 0.5));
            axis.x = R.m[0][1] / (2.0 * axis.y);
            axis.z = R.m[1][2] / (2.0 * axis.y);
        } else {
            axis.z = std::sqrt(std::fmax(0.0, (R.m[2][2] + 1.0) * 0.5));
            axis.x = R.m[0][2] / (2.0 * axis.z);
            axis.y = R.m[1][2] / (2.0 * axis.z);
        }
        return axis * t;
    }
    return v * (0.5 * t / s);
}

// Gram-Schmidt re-orthonormalization; keeps long integrations inside SO(3).
inline Mat3 orthonormalize(const Mat3& R) {
    Vec3 c0 = R.col(0), c1 = R.col(1);
    const double n0 = c0.norm();
    c0 = c0 * (1.0 / n0);
    c1 -= c0 * c0.dot(c1);
    c1 = c1 * (1.0 / c1.norm());
    const Vec3 c2 = c0.cross(c1);
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
        r.m[i][0] = (i == 0 ? c0.x : i == 1 ? c0.y : c0.z);
        r.m[i][1] = (i == 0 ? c1.x : i == 1 ? c1.y : c1.z);
        r.m[i][2] = (i == 0 ? c2.x : i == 1 ? c2.y : c2.z);
    }
    return r;
}

// Max |R^T R - I| entry.
inline double orthonormality_error(const Mat3& R) {
    const Mat3 g = R.transposed() * R;
    double e = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            e = std::fmax(e, std::fabs(g.m[i][j] - (i == j ? 1.0 : 0.0)));
    return e;
}

inline double wrap_angle_2pi(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    return r;
}

inline double clamp(double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

// ---------------------------------------------------------------------------
// Deterministic RNG. xoshiro256++ with splitmix64 seeding; the state is four
// words so training can serialize and resume streams exactly. Distributions
// are implemented here rather than taken from <random> because libstdc++
// leaves them implementation-defined and run outputs must be reproducible.
// ---------------------------------------------------------------------------
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
    }

    // Independent stream id'ed by a label; used to give each environment,
    // the initializer, the PPO shuffler, etc. their own decorrelated stream.
    static Rng stream(std::uint64_t master_seed, const std::string& label, std::uint64_t index = 0) {
        std::uint64_t h = master_seed ^ 0x9e3779b97f4a7c15ULL;
        for (const char c : label) h = (h ^ static_cast<std::uint64_t>(c)) * 0x100000001b3ULL;
        h ^= index + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2);
        return Rng(h);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) {
        if (!(lo <= hi)) throw ConfigError("uniform: empty interval [" + std::to_string(lo) +
                                           ", " + std::to_string(hi) + "]");
        return lo + (hi - lo) * uniform01();
    }

    // Standard normal via Box-Muller. Stateless across calls (the cosine
    // branch only) so serialization is just the four state words.
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    std::array<std::uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::array<std::uint64_t, 4> s_{};
};

}  // namespace dris
