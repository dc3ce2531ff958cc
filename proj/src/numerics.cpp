#include "eshlab/numerics.hpp"

#include <cmath>

namespace eshlab {

std::uint64_t CounterRng::mix(std::uint64_t z) {
    // SplitMix64 finalizer.
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double CounterRng::normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

Mat3 rotation_from_euler_deg(double about_z, double about_y, double about_x) {
    const double d = kPi / 180.0;
    Eigen::AngleAxisd rz(about_z * d, Vec3::UnitZ());
    Eigen::AngleAxisd ry(about_y * d, Vec3::UnitY());
    Eigen::AngleAxisd rx(about_x * d, Vec3::UnitX());
    return (rz * ry * rx).toRotationMatrix();
}

Mat3 random_rotation(CounterRng& rng) {
    // Uniform quaternion from four normals.
    Eigen::Vector4d q;
    for (int i = 0; i < 4; ++i) q[i] = rng.normal();
    q.normalize();
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

double pairwise_sum(const double* values, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += values[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

double pairwise_sum(const std::vector<double>& values) {
    return pairwise_sum(values.data(), values.size());
}

std::vector<Vec3> fibonacci_sphere(int n) {
    const int half = (n + 1) / 2;
    std::vector<Vec3> pts;
    pts.reserve(2 * static_cast<std::size_t>(half));
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < half; ++i) {
        // Lattice on the upper half; antipode supplies the lower half.
        const double z = (i + 0.5) / half;  // (0, 1)
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        Vec3 p(r * std::cos(phi), r * std::sin(phi), z);
        pts.push_back(p);
        pts.push_back(-p);
    }
    return pts;
}

}  // namespace eshlab
