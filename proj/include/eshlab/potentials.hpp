#pragma once

#include "eshlab/geometry.hpp"

#include <string>
#include <vector>

namespace eshlab {

// Scalar quadratic c0 + b.x + x.A.x with A symmetric.  Note the Hessian of
// the form is 2A; consumers that need the Hessian must double A.
struct QuadraticForm {
    double c0 = 0.0;
    Vec3 b = Vec3::Zero();
    Mat3 A = Mat3::Zero();

    double eval(const Vec3& x) const { return c0 + b.dot(x) + x.dot(A * x); }
};

// Interior Newtonian-type potential of an origin-centered axis-aligned
// ellipsoid, normalized so that Laplacian N = occupancy:
//   N(x) = c0 + sum_i c_i x_i^2,
//   c_i  = (a1 a2 a3 / 4) Int_0^inf ds / ((a_i^2+s) Delta(s)),
//   c0   = -(a1 a2 a3 / 4) Int_0^inf ds / Delta(s),
//   Delta = sqrt(prod_j (a_j^2 + s)).
// Evaluated through Carlson symmetric elliptic integrals (exact to machine
// precision); the substitution route below cross-checks it.
QuadraticForm newtonian_ellipsoid(const Vec3& semi_axes);

// Same coefficients by adaptive 1D quadrature after s = a1^2 u / (1 - u).
QuadraticForm newtonian_ellipsoid_by_quadrature(const Vec3& semi_axes);

// Interior potential of an arbitrarily placed ellipsoid as a quadratic in
// lab coordinates.
QuadraticForm newtonian_ellipsoid_form(const Ellipsoid& e);

enum class PotentialKind { Newtonian, Biharmonic, D2HAxis, NtildeAxis };

const char* potential_kind_name(PotentialKind kind);

struct PotentialSample {
    Vec3 x = Vec3::Zero();
    PotentialKind kind = PotentialKind::Newtonian;
    int axis = -1;  // 0..2 for the axis kinds, -1 otherwise
    double value = 0.0;
    double est_error = 0.0;
    std::string method;
};

// Volume-potential evaluator over an occupancy mask.
//
// All four scalars and both gradients are midpoint voxel sums with the cell
// containing the evaluation point replaced by closed-form rectangular-cell
// integrals (log/atan forms, plus one 1D quadrature for the mixed cubic
// moment).  Summation runs in fixed lexicographic cell order with pairwise
// accumulation, so a value is bit-reproducible for a given mask no matter
// the thread count.
//
// Kernels (r = x - y):
//   newtonian  N      = -(1/4pi) Int 1/|r|
//   biharmonic H      = -(1/8pi) Int |r|          (H normalized to vanish
//                                                  nowhere special; the
//                                                  additive gauge is fixed
//                                                  to the plain integral)
//   d2h_axis   q      = -(1/8pi) Int [ 1/|r| - r_q^2/|r|^3 ]
//   ntilde     q      = -(1/4pi) Int r_q^2/|r|^3
//   grad N           = +(1/4pi) Int r/|r|^3
//   grad ntilde_q, m = -(1/4pi) Int [ 2 d_qm r_q/|r|^3 - 3 r_q^2 r_m/|r|^5 ]
//
// A half-resolution copy of the mask (volume-conserving box average) backs
// Richardson-style error estimates |value(n) - value(n/2)|.
class PotentialField {
public:
    explicit PotentialField(VoxelMask mask);

    const VoxelMask& mask() const { return fine_.mask; }
    double voxel_edge() const { return fine_.mask.grid.voxel_size().maxCoeff(); }

    double newtonian(const Vec3& x) const;
    double biharmonic(const Vec3& x) const;
    double d2h_axis(int axis, const Vec3& x) const;
    double ntilde(int axis, const Vec3& x) const;
    Vec3 grad_newtonian(const Vec3& x) const;
    Vec3 grad_ntilde(int axis, const Vec3& x) const;

    // value + |fine - coarse| error estimate, method = "quadrature".
    PotentialSample sample(PotentialKind kind, int axis, const Vec3& x) const;
    std::vector<PotentialSample> sample_batch(PotentialKind kind, int axis,
                                              const std::vector<Vec3>& points) const;

    Vec3 grad_newtonian_coarse(const Vec3& x) const;
    Vec3 grad_ntilde_coarse(int axis, const Vec3& x) const;

    // Central differences of the quadrature gradients; step <= 0 means one
    // voxel edge.  Output symmetrized.
    Mat3 hessian_newtonian(const Vec3& x, double step = 0.0) const;
    Mat3 hessian_ntilde(int axis, const Vec3& x, double step = 0.0) const;
    // 0.5 * (hessian of N - hessian of ntilde_q).
    Mat3 hessian_d2h(int axis, const Vec3& x, double step = 0.0) const;

private:
    struct Level {
        VoxelMask mask;
        // Occupied cells, lexicographic: parallel arrays for cache locality.
        std::vector<Vec3> center;
        std::vector<double> weight;  // frac * voxel volume
        std::vector<double> frac;
        std::vector<std::size_t> linear;  // sorted grid linear indices
    };

    static Level build_level(VoxelMask mask);
    static VoxelMask downsample(const VoxelMask& mask);

    double scalar_sum(const Level& lv, PotentialKind kind, int axis, const Vec3& x) const;
    Vec3 grad_n_sum(const Level& lv, const Vec3& x) const;
    Vec3 grad_nt_sum(const Level& lv, int axis, const Vec3& x) const;

    Level fine_;
    Level coarse_;
};

// Least-squares quadratic fit.  Residual scale is normalized by the sample
// standard deviation of the values; cond is the singular-value ratio of the
// (internally centered) design matrix.  Needs >= 10 samples spanning all
// ten monomials, else throws.
struct QuadraticFitResult {
    QuadraticForm form;
    double fit_rms = 0.0;
    double fit_max = 0.0;
    double cond = 0.0;
};

QuadraticFitResult quadratic_fit(const std::vector<Vec3>& points,
                                 const std::vector<double>& values);

namespace detail {

// Corner-box integrals over [0,wa] x [0,wb] x [0,wc] (or the rectangle
// [0,wa] x [0,wb] at height h), all extents >= 0.  Used for the singular
// voxel; exposed for direct verification against brute-force quadrature.
double prism_inv_r(double wa, double wb, double wc);           // Int 1/|u|
double rect_inv_r(double wa, double wb, double h);             // Int 1/sqrt(u^2+v^2+h^2)
double prism_uq_r3(double wq, double wa, double wb);           // Int u_q / |u|^3
double prism_uq2_r3(double wq, double wa, double wb);          // Int u_q^2 / |u|^3
double prism_uq3_r5(double wq, double wa, double wb);          // Int u_q^3 / |u|^5
double prism_uq2um_r5(double wq, double wm, double wb);        // Int u_q^2 u_m / |u|^5

// The same moments over an arbitrary box in coordinates relative to the
// kernel base point (axes may straddle zero or lie on the negative side).
enum class MomentKernel { Uq_R3, Uq3_R5, Uq2Um_R5 };
double box_moment(MomentKernel k, int q, int m, const Vec3& lo, const Vec3& hi);

}  // namespace detail

}  // namespace eshlab
