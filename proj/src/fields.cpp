#include "eshlab/fields.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>

namespace eshlab {

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

void require_symmetric(const Mat3& sigma) {
    if ((sigma - sigma.transpose()).norm() > 1e-12 * std::max(1.0, sigma.norm()))
        throw std::invalid_argument("eigenstress must be symmetric");
}

struct FftwBuffer {
    void* p = nullptr;
    explicit FftwBuffer(std::size_t bytes) : p(fftw_malloc(bytes)) {
        if (!p) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(p); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

}  // namespace

GradUField solve_spectral(const VoxelMask& mask, const LameMaterial& material,
                          const Mat3& sigma_star) {
    require_admissible(material);
    require_symmetric(sigma_star);
    const GridSpec& g = mask.grid;
    if (mask.frac.size() != g.cell_count())
        throw std::invalid_argument("mask size does not match its grid");
    if (g.padding_factor < 3.0 - 1e-12)
        throw std::invalid_argument(
            "spectral solve needs a grid padded by at least 3x the shape extent");

    const int nx = g.n[0], ny = g.n[1], nz = g.n[2];
    const std::size_t ncell = g.cell_count();
    const int nxh = nx / 2 + 1;
    const std::size_t nspec = static_cast<std::size_t>(nz) * ny * nxh;

    FftwBuffer real_buf(sizeof(double) * ncell);
    FftwBuffer chihat_buf(sizeof(fftw_complex) * nspec);
    FftwBuffer work_buf(sizeof(fftw_complex) * nspec);
    double* real = static_cast<double*>(real_buf.p);
    fftw_complex* chihat = static_cast<fftw_complex*>(chihat_buf.p);
    fftw_complex* work = static_cast<fftw_complex*>(work_buf.p);

    fftw_plan fwd, bwd;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        // Layout is x-fastest, so FFTW (row-major, last index fastest) sees
        // dimensions (nz, ny, nx).
        fwd = fftw_plan_dft_r2c_3d(nz, ny, nx, real, chihat, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_3d(nz, ny, nx, work, real, FFTW_ESTIMATE);
    }
    if (!fwd || !bwd) throw std::runtime_error("fftw plan creation failed");

    for (std::size_t i = 0; i < ncell; ++i) real[i] = mask.frac[i];
    fftw_execute(fwd);

    // Angular frequencies per axis index, negative branch folded in.
    const auto freq = [](int m, int n, double length) {
        const int k = (m <= n / 2) ? m : m - n;
        return 2.0 * kPi * k / length;
    };
    std::vector<double> xix(nxh), xiy(ny), xiz(nz);
    for (int m = 0; m < nxh; ++m) xix[m] = freq(m, nx, g.lengths[0]);
    for (int m = 0; m < ny; ++m) xiy[m] = freq(m, ny, g.lengths[1]);
    for (int m = 0; m < nz; ++m) xiz[m] = freq(m, nz, g.lengths[2]);

    GradUField out;
    out.grid = g;
    out.data.assign(ncell * 9, 0.0);
    const double scale = 1.0 / static_cast<double>(ncell);

    for (int p = 0; p < 3; ++p)
        for (int l = 0; l < 3; ++l) {
            std::size_t idx = 0;
            for (int mz = 0; mz < nz; ++mz)
                for (int my = 0; my < ny; ++my)
                    for (int mx = 0; mx < nxh; ++mx, ++idx) {
                        const Vec3 xi(xix[mx], xiy[my], xiz[mz]);
                        double gamma = 0.0;
                        if (xi.squaredNorm() > 0.0) {
                            const Vec3 t = acoustic_inverse(material, xi) * (sigma_star * xi);
                            gamma = t[p] * xi[l];
                        }
                        work[idx][0] = gamma * chihat[idx][0];
                        work[idx][1] = gamma * chihat[idx][1];
                    }
            fftw_execute(bwd);
            for (std::size_t c = 0; c < ncell; ++c) out.data[9 * c + 3 * p + l] = real[c] * scale;
        }

    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    return out;
}

Mat3 potential_grad_u(const PotentialField& potentials, const LameMaterial& material,
                      const Mat3& sigma_star, const Vec3& x) {
    require_admissible(material);
    require_symmetric(sigma_star);
    const double offdiag = std::abs(sigma_star(0, 1)) + std::abs(sigma_star(0, 2)) +
                           std::abs(sigma_star(1, 2));
    if (offdiag > 1e-12 * std::max(1.0, sigma_star.norm()))
        throw std::invalid_argument(
            "potential route handles diagonal eigenstress only; rotate into the "
            "principal frame first");

    const double mu = material.mu;
    const double coef = (material.lambda + mu) / (mu * (2.0 * mu + material.lambda));

    const Mat3 hess_n = potentials.hessian_newtonian(x);
    Mat3 grad = Mat3::Zero();
    for (int q = 0; q < 3; ++q) {
        const double s = sigma_star(q, q);
        if (s == 0.0) continue;
        const Mat3 hess_d2h = 0.5 * (hess_n - potentials.hessian_ntilde(q, x));
        grad += s * (-coef) * hess_d2h;
    }
    for (int p = 0; p < 3; ++p)
        for (int l = 0; l < 3; ++l) grad(p, l) += sigma_star(p, p) / mu * hess_n(p, l);
    return grad;
}

UniformityReport uniformity(const GradUField& field, const VoxelMask& mask) {
    const GridSpec& g = mask.grid;
    if (field.grid.n != g.n || field.data.size() != 9 * g.cell_count())
        throw std::invalid_argument("field and mask grids do not match");

    // Occupied bounding box (majority-occupied voxels) sets the 5% part of
    // the erosion margin.
    const Vec3 h = g.voxel_size();
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int iz = 0; iz < g.n[2]; ++iz)
        for (int iy = 0; iy < g.n[1]; ++iy)
            for (int ix = 0; ix < g.n[0]; ++ix) {
                if (mask.at(ix, iy, iz) <= 0.5f) continue;
                const Vec3 c = g.voxel_center(ix, iy, iz);
                lo = lo.cwiseMin(c - 0.5 * h);
                hi = hi.cwiseMax(c + 0.5 * h);
            }
    if (!(hi[0] >= lo[0])) throw std::invalid_argument("mask has no majority-occupied voxels");
    const double min_semi_extent = 0.5 * (hi - lo).minCoeff();
    const double hmax = h.maxCoeff();

    UniformityReport rep;
    rep.margin_voxels = 2 + static_cast<int>(std::ceil(0.05 * min_semi_extent / hmax));

    const std::vector<Vec3> centers = interior_centers(mask, rep.margin_voxels);
    if (centers.size() < 20)
        throw std::runtime_error(
            "uniformity: fewer than 20 interior samples survive the erosion margin; "
            "refine the grid or enlarge the shape");
    rep.samples = static_cast<int>(centers.size());

    std::vector<Mat3> values;
    values.reserve(centers.size());
    Mat3 mean = Mat3::Zero();
    for (const Vec3& c : centers) {
        std::array<int, 3> idx;
        if (!g.locate(c, idx)) continue;
        values.push_back(field.at(idx[0], idx[1], idx[2]));
        mean += values.back();
    }
    mean /= static_cast<double>(values.size());
    rep.mean = mean;

    const double mnorm = std::max(mean.norm(), 1e-300);
    double sq = 0.0, mx = 0.0;
    for (const Mat3& v : values) {
        const double d = (v - mean).norm();
        sq += d * d;
        mx = std::max(mx, d);
    }
    rep.rms_dev = std::sqrt(sq / values.size()) / mnorm;
    rep.max_dev = mx / mnorm;
    return rep;
}

}  // namespace eshlab
