#pragma once

#include "eshlab/geometry.hpp"
#include "eshlab/materials.hpp"
#include "eshlab/potentials.hpp"

namespace eshlab {

// Displacement gradient du_p/dx_l on every voxel of a grid, 9 doubles per
// cell in (p, l) row-major order.
struct GradUField {
    GridSpec grid;
    std::vector<double> data;

    Mat3 at_linear(std::size_t cell) const {
        Mat3 g;
        const double* v = data.data() + 9 * cell;
        for (int p = 0; p < 3; ++p)
            for (int l = 0; l < 3; ++l) g(p, l) = v[3 * p + l];
        return g;
    }
    Mat3 at(int ix, int iy, int iz) const {
        return at_linear(grid.linear_index(ix, iy, iz));
    }
};

// FFT solve of the uniform-eigenstress problem on the periodic padded box:
//   grad_u = IDFT[ Gamma_pl(xi) DFT(occupancy) ],
//   Gamma_pl(xi) = (L(xi) sigma* xi)_p xi_l,  Gamma(0) = 0,
// with L the acoustic inverse and xi = 2 pi k / box length per axis.
// Gamma is even in xi, so the spectrum stays Hermitian and a real inverse
// transform is valid.  Requires an admissible material, symmetric
// eigenstress, and a grid padded by at least 3x the shape (periodic images
// decay as the padding grows; smaller padding is refused rather than
// silently polluted).
GradUField solve_spectral(const VoxelMask& mask, const LameMaterial& material,
                          const Mat3& sigma_star);

// Volume-potential route to the same gradient at one point, valid for
// diagonal eigenstress (off-diagonal input is refused):
//   du_p/dx_l = (sigma_p/mu) d2 N/dx_p dx_l
//             - (lambda+mu)/(mu(2mu+lambda)) sum_q sigma_q d2(d2h_q)/dx_p dx_l.
Mat3 potential_grad_u(const PotentialField& potentials, const LameMaterial& material,
                      const Mat3& sigma_star, const Vec3& x);

// Interior-uniformity statistics of a solved field: samples are centers of
// voxels whose Chebyshev neighborhood of the erosion margin is fully
// occupied, margin = 2 voxels plus 5% of the smallest occupied semi-extent.
// Deviations are Frobenius distances to the sample mean, normalized by the
// mean's Frobenius norm.  Fewer than 20 surviving samples is an error.
struct UniformityReport {
    int samples = 0;
    int margin_voxels = 0;
    Mat3 mean = Mat3::Zero();
    double rms_dev = 0.0;
    double max_dev = 0.0;
};

UniformityReport uniformity(const GradUField& field, const VoxelMask& mask);

}  // namespace eshlab
