#include "eshlab/lab.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace eshlab {

namespace {

void require_distinct_eigenvalues(double k1, double k3) {
    if (!std::isfinite(k1) || !std::isfinite(k3) ||
        std::abs(k1 - k3) <= 1e-12 * std::max({1.0, std::abs(k1), std::abs(k3)}))
        throw std::invalid_argument(
            "the repeated and distinct eigenstress eigenvalues must differ");
}

template <typename T>
std::vector<T> strided_subset(const std::vector<T>& v, std::size_t max_count) {
    if (v.size() <= max_count) return v;
    const std::size_t step = (v.size() + max_count - 1) / max_count;
    std::vector<T> out;
    out.reserve(v.size() / step + 1);
    for (std::size_t i = 0; i < v.size(); i += step) out.push_back(v[i]);
    return out;
}

double sample_std(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return std::sqrt(sq / static_cast<double>(v.size()));
}

// Deterministic quasi-uniform directions, used for fit-inside sampling.
std::vector<Vec3> fibonacci_sphere(int n) {
    std::vector<Vec3> out;
    out.reserve(n);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double t = golden * i;
        out.emplace_back(r * std::cos(t), r * std::sin(t), z);
    }
    return out;
}

bool neighborhood_occupied(const VoxelMask& mask, const Vec3& x) {
    std::array<int, 3> idx;
    if (!mask.grid.locate(x, idx)) return false;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int ix = idx[0] + dx, iy = idx[1] + dy, iz = idx[2] + dz;
                if (ix < 0 || iy < 0 || iz < 0 || ix >= mask.grid.n[0] ||
                    iy >= mask.grid.n[1] || iz >= mask.grid.n[2])
                    return false;
                if (mask.at(ix, iy, iz) < 0.999f) return false;
            }
    return true;
}

}  // namespace

MinimumResult find_potential_minimum(const InclusionShape& shape, const PotentialField& field) {
    if (!shape.convex())
        throw std::invalid_argument(
            "find_potential_minimum: shape is not declared convex; the interior "
            "minimum argument needs convexity");
    const VoxelMask& mask = field.mask();
    const std::vector<Vec3> centers = strided_subset(interior_centers(mask, 1), 320);
    if (centers.empty())
        throw std::runtime_error(
            "find_potential_minimum: no strictly interior voxels at this resolution");

    Vec3 m = centers.front();
    double fm = field.newtonian(m);
    for (const Vec3& c : centers) {
        const double fc = field.newtonian(c);
        if (fc < fm) {
            fm = fc;
            m = c;
        }
    }

    // Newton on the quadrature potential.  Inside an ellipsoid N is exactly
    // quadratic, so one undamped step lands on the minimum; backtracking
    // covers everything else.
    const double edge = field.voxel_edge();
    for (int it = 0; it < 30; ++it) {
        const Vec3 g = field.grad_newtonian(m);
        const Mat3 H = field.hessian_newtonian(m);
        Eigen::LDLT<Mat3> ldlt(H);
        Vec3 dm;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive())
            dm = -ldlt.solve(g);
        else
            dm = -(edge / std::max(g.norm(), 1e-300)) * g;
        int backtracks = 0;
        Vec3 next = m + dm;
        double fn = contains(shape, next) ? field.newtonian(next)
                                          : std::numeric_limits<double>::infinity();
        while (fn > fm && backtracks < 10) {
            dm *= 0.5;
            next = m + dm;
            fn = contains(shape, next) ? field.newtonian(next)
                                       : std::numeric_limits<double>::infinity();
            ++backtracks;
        }
        if (fn > fm) break;
        m = next;
        fm = fn;
        if (dm.norm() < 1e-10) break;
    }

    if (!neighborhood_occupied(mask, m))
        throw std::runtime_error(
            "find_potential_minimum: refined minimum is not strictly interior "
            "(boundary minimum, so the convexity declaration was wrong or the grid "
            "is too coarse)");

    return {m, field.hessian_newtonian(m)};
}

MinimumResult find_potential_minimum(const InclusionShape& shape, const GridSpec& grid) {
    if (!shape.convex())
        throw std::invalid_argument(
            "find_potential_minimum: shape is not declared convex; the interior "
            "minimum argument needs convexity");
    return find_potential_minimum(shape, PotentialField(voxelize(shape, grid)));
}

Ellipsoid ellipsoid_from_hessian(const Mat3& h, double scale_hint, double trace_tol) {
    if (!(scale_hint > 0.0) || !std::isfinite(scale_hint))
        throw std::invalid_argument("ellipsoid_from_hessian: scale_hint must be positive");
    if ((h - h.transpose()).cwiseAbs().maxCoeff() >
        1e-9 * std::max(1.0, h.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("ellipsoid_from_hessian: hessian must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(h);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument(
            "ellipsoid_from_hessian: hessian must be positive definite");
    if (std::abs(h.trace() - 1.0) >= trace_tol)
        throw std::invalid_argument(
            "ellipsoid_from_hessian: hessian trace is too far from 1, the exact "
            "trace of any interior potential Hessian");

    // Renormalized eigenvalues, ascending; they pair with descending
    // semi-axes because the interior coefficient of an axis shrinks as that
    // axis grows.
    const Vec3 d = Vec3(es.eigenvalues()) / h.trace();

    // Damped Newton for a = (e^p, e^q, 1) solving 2 c_i(a) = d_i, i = 0, 1;
    // the third equation is the trace identity and holds automatically.
    double p = 0.0, q = 0.0;
    const auto residual = [&d](double pp, double qq, double* f1, double* f2) {
        const Mat3 A = newtonian_ellipsoid({std::exp(pp), std::exp(qq), 1.0}).A;
        *f1 = 2.0 * A(0, 0) - d[0];
        *f2 = 2.0 * A(1, 1) - d[1];
    };
    double f1, f2;
    residual(p, q, &f1, &f2);
    bool converged = std::abs(f1) + std::abs(f2) < 1e-13;
    for (int it = 0; it < 100 && !converged; ++it) {
        const double fd = 1e-6;
        double f1p, f2p, f1q, f2q;
        residual(p + fd, q, &f1p, &f2p);
        residual(p, q + fd, &f1q, &f2q);
        const double j11 = (f1p - f1) / fd, j12 = (f1q - f1) / fd;
        const double j21 = (f2p - f2) / fd, j22 = (f2q - f2) / fd;
        const double det = j11 * j22 - j12 * j21;
        if (det == 0.0 || !std::isfinite(det)) break;
        double dp = -(j22 * f1 - j12 * f2) / det;
        double dq = -(-j21 * f1 + j11 * f2) / det;
        double g1, g2;
        for (int halving = 0; halving < 8; ++halving) {
            residual(p + dp, q + dq, &g1, &g2);
            if (std::abs(g1) + std::abs(g2) <= std::abs(f1) + std::abs(f2)) break;
            dp *= 0.5;
            dq *= 0.5;
        }
        p += dp;
        q += dq;
        f1 = g1;
        f2 = g2;
        converged = std::abs(f1) + std::abs(f2) < 1e-13;
        // Outside the supported ratio range the coefficients flatten out and
        // the iteration stops making progress; bail out to the range check.
        if (std::max(std::abs(p), std::abs(q)) > std::log(1e3) + 2.0) break;
    }
    const Vec3 a(std::exp(p), std::exp(q), 1.0);
    const double ratio = a.maxCoeff() / a.minCoeff();
    if (ratio > 1e3 * (1.0 + 1e-9))
        throw std::runtime_error(
            "ellipsoid_from_hessian: no solution with axis ratios inside [1e-3, 1e3]");
    if (!converged && std::abs(f1) + std::abs(f2) > 1e-10)
        throw std::runtime_error("ellipsoid_from_hessian: ratio iteration did not converge");

    Ellipsoid out;
    out.center = Vec3::Zero();
    out.semi_axes = (scale_hint / a.maxCoeff()) * a;
    Mat3 frame = es.eigenvectors();
    if (frame.determinant() < 0.0) frame.col(2) *= -1.0;
    out.rotation = frame;
    return out;
}

namespace {

// Largest t such that t * unit (rotated, centered at `center`) stays inside
// the shape, by bisection over sampled boundary directions.
double largest_fit_scale(const InclusionShape& shape, const Ellipsoid& unit,
                         const Vec3& center) {
    const std::vector<Vec3> dirs = fibonacci_sphere(800);
    const auto fits = [&](double t) {
        for (const Vec3& s : dirs) {
            const Vec3 x = center + unit.rotation * (t * unit.semi_axes.cwiseProduct(s));
            if (!contains(shape, x)) return false;
        }
        return true;
    };
    const Aabb bb = bounding_box(shape);
    double hi = (bb.hi - bb.lo).maxCoeff() / std::max(unit.semi_axes.minCoeff(), 1e-300);
    double lo = 1e-9 * hi;
    if (!fits(lo))
        throw std::runtime_error(
            "check_theorem1: recovered ellipsoid does not fit inside the shape at "
            "any scale; minimum point too close to the boundary");
    if (fits(hi)) return hi;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (fits(mid) ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace

Theorem1Report check_theorem1(const InclusionShape& shape, const LameMaterial& material,
                              double k1, double k3, const GridSpec& grid) {
    require_admissible(material);
    require_distinct_eigenvalues(k1, k3);

    const PotentialField field(voxelize(shape, grid));
    const MinimumResult mr = find_potential_minimum(shape, field);

    Theorem1Report rep;
    rep.min_point = mr.point;
    rep.hessian = mr.hessian;
    Eigen::SelfAdjointEigenSolver<Mat3> es(mr.hessian);
    rep.hessian_posdef = es.eigenvalues().minCoeff() > 0.0;
    rep.trace_err = std::abs(mr.hessian.trace() - 1.0);

    const Ellipsoid unit_e = ellipsoid_from_hessian(mr.hessian, 1.0);
    const double t = largest_fit_scale(shape, unit_e, mr.point);
    rep.ellipsoid_E = Ellipsoid{mr.point, t * unit_e.semi_axes, unit_e.rotation};

    // Column sampling of D = N_Omega - N_E along the distinct-eigenvalue
    // axis (z), on a lattice shrunk to 0.9 E so every sample is strictly
    // inside E where the closed-form interior quadratic applies.
    const Ellipsoid& E = rep.ellipsoid_E;
    const Vec3 a_s = 0.9 * E.semi_axes;
    Mat3 Qm = Mat3::Zero();
    for (int i = 0; i < 3; ++i)
        Qm += E.rotation.col(i) * E.rotation.col(i).transpose() / (a_s[i] * a_s[i]);
    Vec3 ext;
    for (int k = 0; k < 3; ++k) {
        double s = 0.0;
        for (int j = 0; j < 3; ++j) s += E.rotation(k, j) * a_s[j] * E.rotation(k, j) * a_s[j];
        ext[k] = std::sqrt(s);
    }

    struct Column {
        double x1, x2, tau_lo, tau_hi;
    };
    std::vector<Column> columns;
    const int lattice = 9;
    double max_span = 0.0;
    for (int i = 0; i < lattice; ++i)
        for (int j = 0; j < lattice; ++j) {
            const double x1 = E.center[0] + ext[0] * (2.0 * (i + 0.5) / lattice - 1.0);
            const double x2 = E.center[1] + ext[1] * (2.0 * (j + 0.5) / lattice - 1.0);
            const Vec3 v(x1 - E.center[0], x2 - E.center[1], 0.0);
            const double qa = Qm(2, 2);
            const double qb = (Qm * v)[2];
            const double qc = v.dot(Qm * v) - 1.0;
            const double disc = qb * qb - qa * qc;
            if (disc <= 0.0) continue;
            const double root = std::sqrt(disc);
            columns.push_back({x1, x2, (-qb - root) / qa, (-qb + root) / qa});
            max_span = std::max(max_span, columns.back().tau_hi - columns.back().tau_lo);
        }
    std::erase_if(columns,
                  [&](const Column& c) { return c.tau_hi - c.tau_lo < 0.25 * max_span; });
    if (columns.size() < 8)
        throw std::runtime_error(
            "check_theorem1: too few sampling columns inside the recovered "
            "ellipsoid; refine the grid");

    const QuadraticForm form_e = newtonian_ellipsoid_form(E);
    const int per_column = 7;
    std::vector<double> all_n, all_d;
    double dev_sq = 0.0;
    std::size_t n_samples = 0;
    for (const Column& c : columns) {
        const double span = c.tau_hi - c.tau_lo;
        std::vector<double> d_col(per_column);
        double mean_col = 0.0;
        for (int k = 0; k < per_column; ++k) {
            const double tau = c.tau_lo + span * (0.1 + 0.8 * k / (per_column - 1));
            const Vec3 x(c.x1, c.x2, E.center[2] + tau);
            const double n_om = field.newtonian(x);
            d_col[k] = n_om - form_e.eval(x);
            mean_col += d_col[k];
            all_n.push_back(n_om);
            all_d.push_back(d_col[k]);
        }
        mean_col /= per_column;
        for (double dk : d_col) dev_sq += (dk - mean_col) * (dk - mean_col);
        n_samples += per_column;
    }
    const double rms = std::sqrt(dev_sq / static_cast<double>(n_samples));
    rep.residual_x3 = rms / std::max(sample_std(all_n), 1e-300);
    const double std_d = sample_std(all_d);
    rep.x3_share = std_d > 0.0 ? rms / std_d : 0.0;
    return rep;
}

const char* shape_verdict_name(ShapeVerdict v) {
    switch (v) {
        case ShapeVerdict::EllipsoidConsistent:
            return "ellipsoid-consistent";
        case ShapeVerdict::NotEllipsoid:
            return "not-ellipsoid";
        case ShapeVerdict::Skipped:
            return "skipped";
    }
    return "unknown";
}

Theorem2Report check_theorem2(const InclusionShape& shape, const LameMaterial& mat1,
                              const LameMaterial& mat2, double k1, double k3,
                              const GridSpec& grid, double fit_threshold) {
    require_admissible(mat1);
    require_admissible(mat2);
    require_distinct_eigenvalues(k1, k3);
    if (!(fit_threshold > 0.0))
        throw std::invalid_argument("check_theorem2: fit_threshold must be positive");

    Theorem2Report rep;
    const double det = mat1.lambda * mat2.mu - mat2.lambda * mat1.mu;
    const double scale = std::max({std::abs(mat1.lambda * mat2.mu),
                                   std::abs(mat2.lambda * mat1.mu), mat1.mu * mat2.mu});
    rep.independent = std::abs(det) > 1e-12 * scale;

    const VoxelMask mask = voxelize(shape, grid);
    const PotentialField field(mask);
    const std::vector<Vec3> probes = strided_subset(interior_centers(mask, 1), 600);
    if (probes.size() < 10)
        throw std::runtime_error(
            "check_theorem2: fewer than 10 interior probes; refine the grid");
    std::vector<double> values;
    values.reserve(probes.size());
    for (const Vec3& x : probes) values.push_back(field.newtonian(x));
    rep.fit = quadratic_fit(probes, values);

    if (rep.independent)
        rep.verdict = rep.fit.fit_rms < fit_threshold ? ShapeVerdict::EllipsoidConsistent
                                                      : ShapeVerdict::NotEllipsoid;
    return rep;
}

namespace {

Vec3 flux_kernel(const Vec3& r) {
    const double r2 = r.squaredNorm();
    const double r5 = r2 * r2 * std::sqrt(r2);
    return (3.0 * r[2] * r[2] / (4.0 * kPi * r5)) * r;
}

// Midpoint sum over the shell weights, with cells near the (integrable)
// kernel singularity subdivided.
Vec3 shell_flux(const GridSpec& g, const VoxelMask& envelope, const VoxelMask& omega,
                const Vec3& Q, double* shell_volume) {
    const double voxvol = g.voxel_volume();
    const Vec3 h = g.voxel_size();
    const double edge = h.maxCoeff();
    const int sub = 6;
    Vec3 F = Vec3::Zero();
    double vol = 0.0;
    std::size_t idx = 0;
    for (int iz = 0; iz < g.n[2]; ++iz)
        for (int iy = 0; iy < g.n[1]; ++iy)
            for (int ix = 0; ix < g.n[0]; ++ix, ++idx) {
                const double w = std::clamp(
                    static_cast<double>(envelope.frac[idx]) - static_cast<double>(omega.frac[idx]),
                    0.0, 1.0);
                if (w <= 1e-12) continue;
                vol += w * voxvol;
                const Vec3 y = g.voxel_center(ix, iy, iz);
                const Vec3 r = Q - y;
                if (r.norm() > 3.0 * edge) {
                    F += (w * voxvol) * flux_kernel(r);
                    continue;
                }
                const double subvol = voxvol / (sub * sub * sub);
                for (int a = 0; a < sub; ++a)
                    for (int b = 0; b < sub; ++b)
                        for (int c = 0; c < sub; ++c) {
                            const Vec3 ys = y + Vec3(((a + 0.5) / sub - 0.5) * h[0],
                                                     ((b + 0.5) / sub - 0.5) * h[1],
                                                     ((c + 0.5) / sub - 0.5) * h[2]);
                            const Vec3 rs = Q - ys;
                            if (rs.norm() < edge / (2.0 * sub)) continue;
                            F += (w * subvol) * flux_kernel(rs);
                        }
            }
    if (shell_volume) *shell_volume = vol;
    return F;
}

}  // namespace

FluxReport flux_test(const Ellipsoid& e, const InclusionShape& omega,
                     const LameMaterial& material, double k1, double k3,
                     const FluxQuadrature& quad) {
    require_admissible(material);
    require_distinct_eigenvalues(k1, k3);
    if (e.center.cwiseAbs().maxCoeff() > 1e-12 * e.semi_axes.maxCoeff())
        throw std::invalid_argument(
            "flux_test: the envelope ellipsoid must be centered at the origin");
    if (quad.resolution < 16)
        throw std::invalid_argument("flux_test: quadrature resolution below 16");

    const ContactReport contact = contact_scale(e, omega);
    FluxReport rep;
    rep.t_star = contact.t_star;
    rep.Q = contact.point;
    rep.n = contact.normal;

    const Ellipsoid estar = scale_about_origin(e, contact.t_star);
    const InclusionShape estar_shape =
        make_ellipsoid(estar.center, estar.semi_axes, estar.rotation);
    // The contact scale is a sampled supremum, so points of omega between
    // contact samples can stick out by a sliver; the containment recheck
    // gets matching headroom before it counts as a real escape.
    const InclusionShape estar_loose =
        make_ellipsoid(estar.center, (1.0 + 1e-3) * estar.semi_axes, estar.rotation);
    if (!sample_contained(omega, estar_loose, 4000))
        throw std::runtime_error("flux_test: omega is not contained in the scaled envelope");

    const GridSpec fine = make_grid(estar_shape, quad.resolution, 1.05);
    rep.F_at_Q = shell_flux(fine, voxelize(estar_shape, fine), voxelize(omega, fine),
                            rep.Q, &rep.shell_volume);
    const GridSpec half = make_grid(estar_shape, std::max(16, quad.resolution / 2), 1.05);
    const Vec3 f_half = shell_flux(half, voxelize(estar_shape, half), voxelize(omega, half),
                                   rep.Q, nullptr);
    rep.est_error = (rep.F_at_Q - f_half).norm();
    rep.n_dot_F = rep.n.dot(rep.F_at_Q);

    if (quad.cone_directions > 0) {
        if (!(quad.cone_half_angle_deg > 0.0) || quad.cone_half_angle_deg >= 90.0)
            throw std::invalid_argument(
                "flux_test: cone half angle must lie in (0, 90) degrees");
        // Orthonormal frame around n, directions area-uniform in the cone.
        const Vec3 n = rep.n;
        const Vec3 seed = std::abs(n[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
        const Vec3 t1 = n.cross(seed).normalized();
        const Vec3 t2 = n.cross(t1);
        const double half_angle = quad.cone_half_angle_deg * kPi / 180.0;
        double min_dot = rep.n_dot_F;
        for (int i = 0; i < quad.cone_directions; ++i) {
            const double alpha = half_angle * std::sqrt((i + 0.5) / quad.cone_directions);
            const double phi = kPi * (3.0 - std::sqrt(5.0)) * i;
            const Vec3 d = std::cos(alpha) * n +
                           std::sin(alpha) * (std::cos(phi) * t1 + std::sin(phi) * t2);
            min_dot = std::min(min_dot, d.dot(rep.F_at_Q));
        }
        rep.cone_min_dot = min_dot;
    }
    return rep;
}

AppendixReport appendix_checks(const InclusionShape& shape, const GridSpec& grid) {
    const VoxelMask mask = voxelize(shape, grid);
    const PotentialField field(mask);
    const std::vector<Vec3> probes = strided_subset(interior_centers(mask, 1), 160);
    if (probes.size() < 8)
        throw std::runtime_error("appendix_checks: not enough interior probes");

    std::vector<Mat3> hessians;
    hessians.reserve(probes.size());
    Mat3 mean_h = Mat3::Zero();
    double norm_scale = 0.0;
    for (const Vec3& x : probes) {
        hessians.push_back(field.hessian_newtonian(x));
        mean_h += hessians.back();
        norm_scale += hessians.back().norm();
    }
    mean_h /= static_cast<double>(probes.size());
    norm_scale /= static_cast<double>(probes.size());

    AppendixReport rep;
    const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int k = 0; k < 3; ++k) {
        std::vector<double> mixed;
        mixed.reserve(hessians.size());
        double mean = 0.0;
        for (const Mat3& hss : hessians) {
            mixed.push_back(hss(pairs[k][0], pairs[k][1]));
            mean += mixed.back();
        }
        mean /= static_cast<double>(mixed.size());
        rep.mixed_dev[k] = sample_std(mixed) / std::max(norm_scale, 1e-300);
        rep.mixed_mean[k] = std::abs(mean) / std::max(norm_scale, 1e-300);
    }

    // All-equal eigenstress collapses the gradient to a Hessian multiple.
    const LameMaterial mat{1.0, 1.0};
    const double mult = 1.0 / (mat.lambda + 2.0 * mat.mu);
    const GradUField gu = solve_spectral(mask, mat, Mat3::Identity());
    Mat3 mean_g = Mat3::Zero();
    for (const Vec3& x : probes) {
        std::array<int, 3> idx;
        if (!grid.locate(x, idx))
            throw std::runtime_error("appendix_checks: probe fell outside the grid");
        mean_g += gu.at(idx[0], idx[1], idx[2]);
    }
    mean_g /= static_cast<double>(probes.size());

    const double vfrac = mask.occupied_volume() / grid.lengths.prod();
    const Mat3 ref = mult * mean_h;
    rep.identical_case_err =
        (mean_g + vfrac * ref - ref).norm() / std::max(ref.norm(), 1e-300);
    return rep;
}

}  // namespace eshlab
