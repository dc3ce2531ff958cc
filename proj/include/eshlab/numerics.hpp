#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace eshlab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

// Deterministic counter-based generator: every draw is a pure function of
// (seed, stream, counter), so results never depend on call interleaving or
// thread count.  Streams let independent consumers (volume MC, probe
// placement, test data) share one user-facing seed without overlap.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : base_(mix(seed ^ mix(stream * 0x9e3779b97f4a7c15ull))), counter_(0) {}

    std::uint64_t next_u64() { return mix(base_ + 0x9e3779b97f4a7c15ull * ++counter_); }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller (two draws per call, no cached state).
    double normal();

private:
    static std::uint64_t mix(std::uint64_t z);

    std::uint64_t base_;
    std::uint64_t counter_;
};

// Rotation matrix from intrinsic Z-Y-X Euler angles in degrees.
Mat3 rotation_from_euler_deg(double about_z, double about_y, double about_x);

// Uniformly distributed rotation drawn from a CounterRng.
Mat3 random_rotation(CounterRng& rng);

// Sum in a fixed binary-tree order.  Independent of chunking or thread
// count, and accumulates roundoff as O(log n) rather than O(n).
double pairwise_sum(const double* values, std::size_t n);
double pairwise_sum(const std::vector<double>& values);

// n near-uniform directions on the unit sphere (spherical Fibonacci
// lattice), returned in +/- antipodal pairs so that even functions attain
// ties exactly.  n is rounded up to the next even number.
std::vector<Vec3> fibonacci_sphere(int n);

// Central-difference stencils over an arbitrary scalar field f(Vec3).

template <class F>
double fd_second(F&& f, const Vec3& x, int axis, double h) {
    Vec3 e = Vec3::Zero();
    e[axis] = h;
    return (f(x + e) - 2.0 * f(x) + f(x - e)) / (h * h);
}

template <class F>
double fd_laplacian(F&& f, const Vec3& x, double h) {
    const double c = f(x);
    double acc = 0.0;
    for (int q = 0; q < 3; ++q) {
        Vec3 e = Vec3::Zero();
        e[q] = h;
        acc += f(x + e) + f(x - e) - 2.0 * c;
    }
    return acc / (h * h);
}

}  // namespace eshlab
