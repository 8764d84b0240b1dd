#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace nocs {

/// All randomized components draw from this engine through the helpers
/// below. std::uniform_* distributions are implementation-defined, so we
/// avoid them: seeded runs must be bit-reproducible across toolchains.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53-bit resolution.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform index in [0, n). Modulo bias is below 2^-40 for any n < 2^24.
inline size_t uniform_index(Rng& rng, size_t n) {
    return static_cast<size_t>(rng() % n);
}

/// Standard normal via Box-Muller (deterministic, no std::normal_distribution).
inline double gaussian(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * EIGEN_PI * u2);
}

/// Uniformly distributed rotation (Shoemake's quaternion method).
inline Eigen::Matrix3d random_rotation(Rng& rng) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    const double u3 = uniform01(rng);
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const Eigen::Quaterniond q(a * std::sin(2.0 * EIGEN_PI * u2),
                               a * std::cos(2.0 * EIGEN_PI * u2),
                               b * std::sin(2.0 * EIGEN_PI * u3),
                               b * std::cos(2.0 * EIGEN_PI * u3));
    return q.normalized().toRotationMatrix();
}

/// Derive an independent stream for a sub-task (e.g. one frame of a batch).
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
    // splitmix64 of the pair; keeps per-frame streams decorrelated.
    uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace nocs
