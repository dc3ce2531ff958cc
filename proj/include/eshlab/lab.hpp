#pragma once

#include "eshlab/fields.hpp"
#include "eshlab/geometry.hpp"
#include "eshlab/materials.hpp"
#include "eshlab/potentials.hpp"

#include <array>
#include <optional>

namespace eshlab {

// Interior minimum of the Newtonian potential and the local Hessian there,
// measured by central differences of the quadrature gradient (step = one
// voxel edge).
struct MinimumResult {
    Vec3 point = Vec3::Zero();
    Mat3 hessian = Mat3::Zero();
};

// Coarse strided scan of N over the eroded interior followed by damped
// Newton refinement on (grad N, hess N).  The shape must be declared
// convex; a refined minimum that does not sit strictly inside the mask
// (full Chebyshev-1 neighborhood occupied) is rejected, since for a convex
// body the potential minimum cannot reach the boundary.
MinimumResult find_potential_minimum(const InclusionShape& shape, const PotentialField& field);

// Same, voxelizing the shape on the given grid first.
MinimumResult find_potential_minimum(const InclusionShape& shape, const GridSpec& grid);

// Ellipsoid whose interior potential quadratic matches a measured Hessian.
// The trace is renormalized to exactly 1 (its continuum value, since
// Laplacian N = 1 inside) before anything else, so quadrature noise in the
// trace cannot push the root-finder toward an infeasible target.  After
// diagonalizing, the two log axis ratios are solved by damped Newton so
// the interior coefficients obey 2 c_i = h_i; the coefficients only depend
// on ratios, so the absolute size is fixed by scale_hint = the longest
// semi-axis of the returned ellipsoid.  Center is the origin, rotation is
// the eigenvector frame of h.
//
// Rejects non-symmetric, non-positive-definite, or off-trace input
// (std::invalid_argument) and solutions outside axis ratios [1e-3, 1e3]
// or a non-converging iteration (std::runtime_error).
Ellipsoid ellipsoid_from_hessian(const Mat3& h, double scale_hint, double trace_tol = 1e-2);

// One run of the necessary condition behind the two-identical-eigenvalue
// uniformity theorem: if the eigenstress has eigenvalues (k1, k1, k3) with
// the distinct axis along z and the inclusion transforms it uniformly,
// there is an ellipsoid E inside Omega such that N_Omega - N_E depends
// only on (x1, x2) inside E.  The checker recovers E from the potential
// minimum and Hessian, sizes it as the largest copy fitting inside Omega,
// and measures how much of the sampled difference varies along x3.
struct Theorem1Report {
    Vec3 min_point = Vec3::Zero();
    Mat3 hessian = Mat3::Zero();  // as measured, not trace-renormalized
    bool hessian_posdef = false;
    double trace_err = 0.0;  // |trace(hessian) - 1|
    Ellipsoid ellipsoid_E;
    // RMS over column samples of the x3-deviation of D = N_Omega - N_E,
    // normalized by the sample std of N_Omega over the same points.  The
    // theorem predicts a *constant* D for ellipsoids, so normalizing by the
    // spread of D itself would divide noise by noise; the potential's own
    // spread is the stable yardstick.
    double residual_x3 = 0.0;
    // The literal noise ratio all the same: the same RMS divided by the
    // sample std of D.  Near 1 when D has no structure beyond noise, small
    // when D genuinely varies but only in (x1, x2).
    double x3_share = 0.0;
};

// material and (k1, k3) fix the premise (admissible stiffness, distinct
// eigenvalue on the z axis) and are validated, but the check itself is
// geometric: N_Omega and E depend on the shape alone.
Theorem1Report check_theorem1(const InclusionShape& shape, const LameMaterial& material,
                              double k1, double k3, const GridSpec& grid);

enum class ShapeVerdict { EllipsoidConsistent, NotEllipsoid, Skipped };

const char* shape_verdict_name(ShapeVerdict v);

// Two-material uniformity characterization: uniformity for two linearly
// independent isotropic stiffnesses forces the interior potential to be
// quadratic, which happens only for ellipsoids.  The checker gates on
// independence (lambda1 mu2 - lambda2 mu1 != 0, scaled) and then runs the
// quadratic-fit shape test; dependent pairs give verdict Skipped.
struct Theorem2Report {
    bool independent = false;
    QuadraticFitResult fit;
    ShapeVerdict verdict = ShapeVerdict::Skipped;
};

Theorem2Report check_theorem2(const InclusionShape& shape, const LameMaterial& mat1,
                              const LameMaterial& mat2, double k1, double k3,
                              const GridSpec& grid, double fit_threshold = 1e-3);

// Quadrature controls for flux_test.  resolution is the voxel count across
// the scaled-envelope box; the error estimate rebuilds the integral at half
// resolution.  cone_directions > 0 additionally reports the minimum of
// d . F over that many directions sampled inside a cone of the given half
// angle around the contact normal (off by default).
struct FluxQuadrature {
    int resolution = 96;
    int cone_directions = 0;
    double cone_half_angle_deg = 10.0;
};

// The boundary flux vector of the envelope construction.  E* = t_star E is
// the smallest scaled copy of E containing Omega, touching it at Q with
// outward normal n, and
//   F(Q) = 3 Int_{E* \ Omega} (Q3 - y3)^2 (Q - y) / (4 pi |Q - y|^5) dy.
// A nonempty shell must give n . F > 0; an empty shell (Omega = E*) must
// give F = 0 up to quadrature error.  F is purely geometric: the material
// and eigenvalues never enter the integral.
struct FluxReport {
    double t_star = 0.0;
    Vec3 Q = Vec3::Zero();
    Vec3 n = Vec3::Zero();
    Vec3 F_at_Q = Vec3::Zero();
    double n_dot_F = 0.0;
    double shell_volume = 0.0;
    double est_error = 0.0;  // |F(n) - F(n/2)| over the resolution halving
    std::optional<double> cone_min_dot;
};

// e must be centered at the origin (the envelope scales about it).  The
// shell is integrated over the common voxel grid as
// clamp(occ(E*) - occ(Omega), 0, 1); voxels closer to Q than three edges
// are subdivided so the integrable 1/r^2 singularity is resolved.
FluxReport flux_test(const Ellipsoid& e, const InclusionShape& omega,
                     const LameMaterial& material, double k1, double k3,
                     const FluxQuadrature& quad = {});

// Interior second-derivative structure checks.
//
// mixed_dev: for each axis pair, the std over interior probes of the mixed
// second derivative of N, normalized by the mean Frobenius norm of the full
// Hessian over the same probes.  Constant mixed derivatives (ellipsoids)
// give small values; a cube's corners break them.  mixed_mean is the
// normalized |mean| of the same samples: near zero only when the quadratic
// is diagonal in the lab frame (axis-aligned ellipsoid), nonzero for a
// rotated one even though its mixed_dev stays small.
//
// identical_case_err: with all eigenstress eigenvalues equal the gradient
// field collapses to grad_u = k/(lambda + 2 mu) * hess N pointwise.  The
// spectral route is compared against that on probe means (pointwise values
// ring at jump discontinuities of the occupancy); the uniform offset that
// zero-mean periodic pinning subtracts from the box (the occupied volume
// fraction times the interior value) is restored before comparing.
struct AppendixReport {
    std::array<double, 3> mixed_dev{};   // pairs (xy), (xz), (yz)
    std::array<double, 3> mixed_mean{};  // same pairs, |mean| / scale
    double identical_case_err = 0.0;
};

AppendixReport appendix_checks(const InclusionShape& shape, const GridSpec& grid);

}  // namespace eshlab
