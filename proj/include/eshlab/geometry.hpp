#pragma once

#include "eshlab/numerics.hpp"

#include <array>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace eshlab {

// Regular voxel grid over an axis-aligned physical box.  padding_factor
// records how much empty margin the box was built with relative to the
// shape it hosts; solvers that need real padding check it.
struct GridSpec {
    std::array<int, 3> n{0, 0, 0};
    Vec3 origin = Vec3::Zero();
    Vec3 lengths = Vec3::Zero();
    double padding_factor = 1.0;

    Vec3 voxel_size() const {
        return {lengths[0] / n[0], lengths[1] / n[1], lengths[2] / n[2]};
    }
    double voxel_volume() const {
        const Vec3 h = voxel_size();
        return h[0] * h[1] * h[2];
    }
    std::size_t cell_count() const {
        return static_cast<std::size_t>(n[0]) * n[1] * n[2];
    }
    std::size_t linear_index(int ix, int iy, int iz) const {
        return static_cast<std::size_t>(ix) +
               static_cast<std::size_t>(n[0]) *
                   (static_cast<std::size_t>(iy) + static_cast<std::size_t>(n[1]) * iz);
    }
    Vec3 voxel_center(int ix, int iy, int iz) const {
        const Vec3 h = voxel_size();
        return origin + Vec3((ix + 0.5) * h[0], (iy + 0.5) * h[1], (iz + 0.5) * h[2]);
    }
    // Voxel containing x, clamped to the grid; returns false when x is
    // outside the box.
    bool locate(const Vec3& x, std::array<int, 3>& idx) const;

    // Throws on non-positive resolution or box; returns human-readable
    // warnings for questionable but legal grids (voxel aspect outside
    // [0.5, 2]).
    std::vector<std::string> validate() const;
};

// Occupancy-fraction mask over a grid; frac is x-fastest lexicographic.
struct VoxelMask {
    GridSpec grid;
    std::vector<float> frac;

    float at(int ix, int iy, int iz) const { return frac[grid.linear_index(ix, iy, iz)]; }
    double occupied_volume() const;
};

struct Ellipsoid {
    Vec3 center = Vec3::Zero();
    Vec3 semi_axes = Vec3::Ones();
    Mat3 rotation = Mat3::Identity();
};

struct AxisBox {
    Vec3 center = Vec3::Zero();
    Vec3 half_extents = Vec3::Ones();
};

// { x : sum_i |(x - c)_i / a_i|^p <= 1 }, axis-aligned, p >= 2.
struct Superellipsoid {
    Vec3 center = Vec3::Zero();
    Vec3 semi_axes = Vec3::Ones();
    double exponent = 2.0;
};

class InclusionShape;

struct Difference {
    std::shared_ptr<const InclusionShape> outer;
    std::shared_ptr<const InclusionShape> inner;
};

// Closed bounded inclusion domain.  convex is caller-declared metadata used
// as a precondition by the minimum-and-ellipsoid machinery, defaulted per
// kind (primitives yes, mask and difference no).
class InclusionShape {
public:
    using Payload = std::variant<Ellipsoid, AxisBox, Superellipsoid, VoxelMask, Difference>;

    explicit InclusionShape(Payload payload, bool convex);

    const Payload& payload() const { return payload_; }
    bool convex() const { return convex_; }
    const char* kind_name() const;

    template <typename T>
    const T* get_if() const {
        return std::get_if<T>(&payload_);
    }

private:
    Payload payload_;
    bool convex_;
};

// Factories validate their inputs (positive axes, degenerate semi-axis
// below 1e-9 of the largest rejected, orthonormal right-handed rotation,
// exponent >= 2, connected mask, inner-inside-outer difference).
InclusionShape make_ellipsoid(const Vec3& center, const Vec3& semi_axes,
                              const Mat3& rotation = Mat3::Identity());
InclusionShape make_box(const Vec3& center, const Vec3& half_extents);
InclusionShape make_superellipsoid(const Vec3& center, const Vec3& semi_axes,
                                   double exponent);
InclusionShape make_mask_shape(VoxelMask mask);
InclusionShape make_difference(InclusionShape outer, InclusionShape inner);

bool contains(const InclusionShape& shape, const Vec3& x);

struct Aabb {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
};

Aabb bounding_box(const InclusionShape& shape);

// Cubic grid around the shape: box edge = padding * (largest bounding-box
// extent), centered on the bounding-box center, resolution^3 voxels.
GridSpec make_grid(const InclusionShape& shape, int resolution, double padding);

// Per-voxel occupancy by subsamples^3 stratified midpoints.  Deterministic;
// rejects a grid whose box does not cover the shape.
VoxelMask voxelize(const InclusionShape& shape, const GridSpec& grid, int subsamples = 3);

struct VolumeEstimate {
    double value = 0.0;
    double std_error = 0.0;  // zero for analytic routes
};

// Analytic for ellipsoid and box, mask sums its fractions, difference
// subtracts, superellipsoid falls back to Monte Carlo driven by seed.
VolumeEstimate volume(const InclusionShape& shape, std::uint64_t seed = 0,
                      int mc_samples = 400000);

// t * e about the origin; requires e centered at the origin.
Ellipsoid scale_about_origin(const Ellipsoid& e, double t);

// Points on (or near, for masks) the boundary, suitable for sup-gauge and
// containment sampling.  Primitives get antipodally paired low-discrepancy
// lattices so symmetric extremes tie exactly.
std::vector<Vec3> boundary_samples(const InclusionShape& shape, int n);

struct ContactReport {
    double t_star = 0.0;  // smallest t with omega inside t * e
    Vec3 point = Vec3::Zero();   // sampled contact point Q on both boundaries
    Vec3 normal = Vec3::Zero();  // outward unit normal of t_star * e at Q
    bool unique = true;          // false when several samples tie within 1e-9
};

// e must be centered at the origin.  Sampled sup of the e-gauge over
// boundary_samples(omega, samples).
ContactReport contact_scale(const Ellipsoid& e, const InclusionShape& omega,
                            int samples = 20000);

// True when every boundary sample of inner lies in outer (closed, with a
// small outward tolerance).
bool sample_contained(const InclusionShape& inner, const InclusionShape& outer, int samples,
                      double tol = 1e-9);

// Centers of voxels whose full Chebyshev neighborhood of the given radius
// is fully occupied (frac >= 0.999); lexicographic order.
std::vector<Vec3> interior_centers(const VoxelMask& mask, int chebyshev_radius);

// Single 6-connected component among voxels with frac > 0.5 (and at least
// one such voxel).
bool mask_connected(const VoxelMask& mask);

// Binary mask file: magic "ESHV1", u32 dims, f64 origin and lengths, then
// float32 fractions, all little-endian, x-fastest.
void write_mask(const std::string& path, const VoxelMask& mask);
VoxelMask read_mask(const std::string& path);

}  // namespace eshlab
