#include "eshlab/potentials.hpp"

#include "doctest.h"

#include <cmath>
#include <vector>

using namespace eshlab;

namespace {

// Brute-force oracle for the corner-box integrals: geometric refinement
// toward the singular corner, 5^3 midpoints on every non-corner child.
template <class F>
double midpoint_box(F&& f, double x0, double y0, double z0, double hx, double hy, double hz) {
    constexpr int m = 5;
    double s = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                s += f(x0 + (i + 0.5) * hx / m, y0 + (j + 0.5) * hy / m, z0 + (k + 0.5) * hz / m);
    return s * (hx * hy * hz) / (m * m * m);
}

template <class F>
double graded_corner(F&& f, double a, double b, double c) {
    double total = 0.0;
    double ax = a, by = b, cz = c;
    for (int lev = 0; lev < 34; ++lev) {
        const double hx = ax / 2, hy = by / 2, hz = cz / 2;
        for (int ox = 0; ox < 2; ++ox)
            for (int oy = 0; oy < 2; ++oy)
                for (int oz = 0; oz < 2; ++oz) {
                    if (ox == 0 && oy == 0 && oz == 0) continue;
                    total += midpoint_box(f, ox * hx, oy * hy, oz * hz, hx, hy, hz);
                }
        ax = hx;
        by = hy;
        cz = hz;
    }
    return total;
}

double exact_ball_newtonian(double r) {
    return r < 1.0 ? r * r / 6.0 - 0.5 : -1.0 / (3.0 * r);
}

PotentialField ball_field(int res, double padding) {
    const InclusionShape shape = make_ellipsoid(Vec3::Zero(), Vec3::Ones());
    return PotentialField(voxelize(shape, make_grid(shape, res, padding)));
}

}  // namespace

TEST_CASE("corner-box integrals match graded refinement and exact identities") {
    using namespace eshlab::detail;
    const double triples[][3] = {{1.0, 1.0, 1.0}, {0.3, 0.7, 1.1}, {0.05, 0.9, 0.4}};
    for (const auto& t : triples) {
        const double a = t[0], b = t[1], c = t[2];
        CAPTURE(a);
        CAPTURE(b);
        CAPTURE(c);

        const double I = prism_inv_r(a, b, c);
        const double G = prism_uq_r3(c, a, b);
        const double T = prism_uq2_r3(c, a, b);
        const double P3 = prism_uq3_r5(c, a, b);
        const double Axz = prism_uq2um_r5(a, c, b);
        const double Ayz = prism_uq2um_r5(b, c, a);

        const auto rn = [](double x, double y, double z) { return std::sqrt(x * x + y * y + z * z); };
        CHECK(I == doctest::Approx(graded_corner(
                       [&](double x, double y, double z) { return 1.0 / rn(x, y, z); }, a, b, c))
                       .epsilon(5e-3));
        CHECK(G == doctest::Approx(graded_corner(
                       [&](double x, double y, double z) { return z / std::pow(rn(x, y, z), 3); },
                       a, b, c))
                       .epsilon(5e-3));
        CHECK(T == doctest::Approx(graded_corner(
                       [&](double x, double y, double z) {
                           return z * z / std::pow(rn(x, y, z), 3);
                       },
                       a, b, c))
                       .epsilon(5e-3));
        CHECK(P3 == doctest::Approx(graded_corner(
                        [&](double x, double y, double z) {
                            return z * z * z / std::pow(rn(x, y, z), 5);
                        },
                        a, b, c))
                        .epsilon(5e-3));
        CHECK(Axz == doctest::Approx(graded_corner(
                         [&](double x, double y, double z) {
                             return x * x * z / std::pow(rn(x, y, z), 5);
                         },
                         a, b, c))
                         .epsilon(5e-3));

        // Euler homogeneity: a J_x + b J_y + c J_z = 2 I, with J_q the
        // rectangle potential of the face normal to q.
        const double euler =
            a * rect_inv_r(b, c, a) + b * rect_inv_r(c, a, b) + c * rect_inv_r(a, b, c);
        CHECK(euler == doctest::Approx(2.0 * I).epsilon(1e-12));

        // The squared-direction moments tile 1/|u|.
        const double Tsum =
            prism_uq2_r3(a, b, c) + prism_uq2_r3(b, c, a) + prism_uq2_r3(c, a, b);
        CHECK(Tsum == doctest::Approx(I).epsilon(1e-12));

        // (u_x^2 + u_y^2 + u_z^2) u_z / |u|^5 = u_z / |u|^3.
        CHECK(P3 + Axz + Ayz == doctest::Approx(G).epsilon(1e-7));
    }

    SUBCASE("known closed values") {
        CHECK(prism_inv_r(1, 1, 1) == doctest::Approx(1.1900386819).epsilon(1e-9));
        CHECK(rect_inv_r(1, 1, 0) == doctest::Approx(2.0 * std::log(1.0 + std::sqrt(2.0))));
    }

    SUBCASE("zero extents vanish") {
        using namespace eshlab::detail;
        CHECK(prism_inv_r(0, 1, 1) == 0.0);
        CHECK(rect_inv_r(1, 0, 0.5) == 0.0);
        CHECK(prism_uq_r3(0, 1, 1) == 0.0);
        CHECK(prism_uq2_r3(1, 0, 1) == 0.0);
        CHECK(prism_uq3_r5(1, 1, 0) == 0.0);
        CHECK(prism_uq2um_r5(0, 1, 1) == 0.0);
    }
}

TEST_CASE("unit-ball potentials hit their closed-form values") {
    const PotentialField field = ball_field(96, 2.2);
    CHECK(field.mask().occupied_volume() ==
          doctest::Approx(4.0 * kPi / 3.0).epsilon(5e-3));

    const Vec3 pts[] = {{0, 0, 0}, {0.5, 0, 0}, {0.3, -0.4, 0.2}, {2.0, 0, 0}};
    for (const Vec3& x : pts) {
        CAPTURE(x.transpose());
        CHECK(field.newtonian(x) == doctest::Approx(exact_ball_newtonian(x.norm())).epsilon(1e-3));
    }

    CHECK(field.biharmonic(Vec3::Zero()) == doctest::Approx(-0.125).epsilon(1e-3));
    // Far field of the |r| kernel: -(V/8pi)(d + 1/(5d)) + O(d^-3).
    CHECK(field.biharmonic(Vec3(10, 0, 0)) ==
          doctest::Approx(-(10.0 + 0.02) / 6.0).epsilon(5e-4));

    for (int q = 0; q < 3; ++q) {
        CHECK(field.ntilde(q, Vec3::Zero()) == doctest::Approx(-1.0 / 6.0).epsilon(2e-3));
        CHECK(field.d2h_axis(q, Vec3::Zero()) == doctest::Approx(-1.0 / 6.0).epsilon(2e-3));
    }

    const Vec3 g = field.grad_newtonian(Vec3(0.5, 0, 0));
    CHECK(g[0] == doctest::Approx(0.5 / 3.0).epsilon(2e-3));
    CHECK(std::abs(g[1]) < 1e-4);
    CHECK(std::abs(g[2]) < 1e-4);
}

TEST_CASE("axis potentials recombine into the Newtonian one pointwise") {
    const PotentialField field = ball_field(48, 2.0);
    CounterRng rng(7, 11);
    for (int i = 0; i < 8; ++i) {
        const Vec3 x(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
        CAPTURE(x.transpose());
        const double n = field.newtonian(x);
        double nt_sum = 0.0;
        for (int q = 0; q < 3; ++q) {
            nt_sum += field.ntilde(q, x);
            CHECK(field.d2h_axis(q, x) ==
                  doctest::Approx(0.5 * (n - field.ntilde(q, x))).epsilon(1e-10));
        }
        CHECK(nt_sum == doctest::Approx(n).epsilon(1e-10));

        Vec3 gsum = Vec3::Zero();
        for (int q = 0; q < 3; ++q) gsum += field.grad_ntilde(q, x);
        const Vec3 gn = field.grad_newtonian(x);
        CHECK((gsum - gn).norm() <= 1e-7 * std::max(1.0, gn.norm()));
    }
}

TEST_CASE("quadrature ellipsoid interior matches the elliptic-integral form") {
    const InclusionShape shape = make_ellipsoid(Vec3::Zero(), Vec3(1.2, 1.0, 0.8));
    const PotentialField field(voxelize(shape, make_grid(shape, 96, 2.0)));
    const QuadraticForm exact = newtonian_ellipsoid(Vec3(1.2, 1.0, 0.8));

    const Vec3 pts[] = {{0, 0, 0}, {0.3, 0.2, -0.1}, {-0.5, 0.1, 0.3}};
    for (const Vec3& x : pts) {
        CAPTURE(x.transpose());
        CHECK(field.newtonian(x) == doctest::Approx(exact.eval(x)).epsilon(1.5e-3));
    }
}

TEST_CASE("elliptic-integral and substitution quadrature routes agree") {
    SUBCASE("ball is exact") {
        const QuadraticForm f = newtonian_ellipsoid(Vec3::Ones());
        CHECK(f.c0 == doctest::Approx(-0.5).epsilon(1e-14));
        for (int i = 0; i < 3; ++i)
            CHECK(f.A(i, i) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    }

    const Vec3 cases[] = {{1.2, 1.0, 0.8}, {3.0, 1.0, 0.4}, {1.0, 1.0, 1.0 + 1e-6}};
    for (const Vec3& axes : cases) {
        CAPTURE(axes.transpose());
        const QuadraticForm a = newtonian_ellipsoid(axes);
        const QuadraticForm b = newtonian_ellipsoid_by_quadrature(axes);
        CHECK(a.c0 == doctest::Approx(b.c0).epsilon(1e-8));
        for (int i = 0; i < 3; ++i)
            CHECK(a.A(i, i) == doctest::Approx(b.A(i, i)).epsilon(1e-8));
    }

    SUBCASE("trace normalization holds for random axes") {
        CounterRng rng(3, 5);
        for (int i = 0; i < 20; ++i) {
            const Vec3 axes(rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0));
            const QuadraticForm f = newtonian_ellipsoid(axes);
            CHECK(2.0 * f.A.trace() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(f.c0 < 0.0);
        }
    }

    SUBCASE("rotated translated form") {
        Ellipsoid e;
        e.center = Vec3(0.4, -0.2, 0.1);
        e.semi_axes = Vec3(1.2, 1.0, 0.8);
        e.rotation = rotation_from_euler_deg(30, -20, 45);
        const QuadraticForm lab = newtonian_ellipsoid_form(e);
        const QuadraticForm body = newtonian_ellipsoid(e.semi_axes);
        CounterRng rng(9, 2);
        for (int i = 0; i < 10; ++i) {
            const Vec3 u(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
            const Vec3 x = e.center + e.rotation * u;
            CHECK(lab.eval(x) == doctest::Approx(body.eval(u)).epsilon(1e-12));
        }
        CHECK(2.0 * lab.A.trace() == doctest::Approx(1.0).epsilon(1e-12));
    }

    CHECK_THROWS_AS(newtonian_ellipsoid(Vec3(1, -1, 1)), std::invalid_argument);
}

TEST_CASE("laplacian stencils recover the occupancy") {
    const PotentialField field = ball_field(96, 2.2);
    const double h = 2.0 * field.voxel_edge();
    const auto N = [&](const Vec3& y) { return field.newtonian(y); };
    const auto H = [&](const Vec3& y) { return field.biharmonic(y); };

    const Vec3 inside(0.2, 0.1, -0.15);
    const Vec3 outside(1.5, 0.3, 0.2);

    CHECK(fd_laplacian(N, inside, h) == doctest::Approx(1.0).epsilon(2e-2));
    CHECK(std::abs(fd_laplacian(N, outside, h)) < 2e-2);

    CHECK(fd_laplacian(H, inside, h) == doctest::Approx(field.newtonian(inside)).epsilon(2e-2));

    const auto lapH = [&](const Vec3& y) { return fd_laplacian(H, y, h); };
    CHECK(fd_laplacian(lapH, inside, h) == doctest::Approx(1.0).epsilon(5e-2));
    CHECK(std::abs(fd_laplacian(lapH, outside, h)) < 5e-2);
}

TEST_CASE("direct axis second derivative agrees with differencing the biharmonic") {
    const PotentialField field = ball_field(96, 2.2);
    const double h = field.voxel_edge();
    const Vec3 pts[] = {{0.25, -0.1, 0.3}, {1.4, 0.2, -0.3}};
    for (const Vec3& x : pts) {
        for (int q = 0; q < 3; ++q) {
            CAPTURE(x.transpose());
            CAPTURE(q);
            const double direct = field.d2h_axis(q, x);
            const double fd =
                fd_second([&](const Vec3& y) { return field.biharmonic(y); }, x, q, h);
            CHECK(std::abs(direct - fd) <= 1.5e-3 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST_CASE("gradients agree with differenced values and curvature is isotropic inside a ball") {
    const PotentialField field = ball_field(80, 2.2);
    const double h = field.voxel_edge();
    const Vec3 pts[] = {{0.31, 0.11, -0.22}, {1.3, -0.4, 0.25}};
    for (const Vec3& x : pts) {
        CAPTURE(x.transpose());
        const Vec3 g = field.grad_newtonian(x);
        for (int q = 0; q < 3; ++q) {
            const double fd = (field.newtonian(x + h * Vec3::Unit(q)) -
                               field.newtonian(x - h * Vec3::Unit(q))) /
                              (2.0 * h);
            CHECK(std::abs(g[q] - fd) <= 3e-4 + 2e-3 * g.norm());
        }
        const Vec3 gt = field.grad_ntilde(0, x);
        for (int q = 0; q < 3; ++q) {
            const double fd = (field.ntilde(0, x + h * Vec3::Unit(q)) -
                               field.ntilde(0, x - h * Vec3::Unit(q))) /
                              (2.0 * h);
            CHECK(std::abs(gt[q] - fd) <= 3e-4 + 2e-3 * gt.norm());
        }
    }

    const Mat3 hess = field.hessian_newtonian(Vec3(0.2, -0.1, 0.15));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double want = i == j ? 1.0 / 3.0 : 0.0;
            CHECK(hess(i, j) == doctest::Approx(want).epsilon(1e-2).scale(1.0));
        }

    const Mat3 hd = field.hessian_d2h(1, Vec3(0.2, -0.1, 0.15));
    const Mat3 hn = field.hessian_newtonian(Vec3(0.2, -0.1, 0.15));
    const Mat3 ht = field.hessian_ntilde(1, Vec3(0.2, -0.1, 0.15));
    CHECK((hd - 0.5 * (hn - ht)).norm() < 1e-12);
}

TEST_CASE("evaluator is exactly quadratic under dilation of mask and point") {
    const InclusionShape shape = make_ellipsoid(Vec3::Zero(), Vec3(1.1, 0.9, 0.7));
    const GridSpec grid = make_grid(shape, 48, 1.9);
    const VoxelMask mask = voxelize(shape, grid);

    const double t = 1.7;
    VoxelMask scaled = mask;
    scaled.grid.origin *= t;
    scaled.grid.lengths *= t;

    const PotentialField f1(mask), f2(scaled);
    const Vec3 pts[] = {{0.2, 0.1, -0.3}, {1.5, 0.2, 0.1}};
    for (const Vec3& x : pts) {
        CAPTURE(x.transpose());
        CHECK(f2.newtonian(t * x) == doctest::Approx(t * t * f1.newtonian(x)).epsilon(1e-11));
        CHECK(f2.ntilde(2, t * x) == doctest::Approx(t * t * f1.ntilde(2, x)).epsilon(1e-11));
        const Vec3 g1 = f1.grad_newtonian(x), g2 = f2.grad_newtonian(t * x);
        CHECK((g2 - t * g1).norm() <= 1e-11 * std::max(1.0, g1.norm()));
    }
}

TEST_CASE("refinement error estimate brackets the true error") {
    const PotentialField field = ball_field(96, 2.2);
    const Vec3 x(0.3, 0.2, 0.1);
    const PotentialSample s = field.sample(PotentialKind::Newtonian, -1, x);
    CHECK(s.method == "quadrature");
    CHECK(s.est_error > 0.0);
    CHECK(s.est_error < 1e-2);
    CHECK(std::abs(s.value - exact_ball_newtonian(x.norm())) <= 3.0 * s.est_error + 5e-5);

    const auto batch = field.sample_batch(PotentialKind::NtildeAxis, 1, {x, Vec3(1.5, 0, 0)});
    REQUIRE(batch.size() == 2);
    CHECK(batch[0].value == doctest::Approx(field.ntilde(1, x)).epsilon(1e-15));
    CHECK(batch[1].axis == 1);
}

TEST_CASE("quadratic fit separates ellipsoids from cubes") {
    SUBCASE("exact quadratic data is reproduced") {
        const QuadraticForm exact = newtonian_ellipsoid(Vec3(1.2, 1.0, 0.8));
        CounterRng rng(21, 4);
        std::vector<Vec3> pts;
        std::vector<double> vals;
        for (int i = 0; i < 60; ++i) {
            const Vec3 x(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
            pts.push_back(x);
            vals.push_back(exact.eval(x));
        }
        const QuadraticFitResult fit = quadratic_fit(pts, vals);
        CHECK(fit.fit_rms < 1e-10);
        CHECK(fit.fit_max < 1e-9);
        CHECK((fit.form.A - exact.A).norm() < 1e-9);
        CHECK(fit.form.b.norm() < 1e-9);
        CHECK(fit.cond < 1e4);
    }

    SUBCASE("quadrature samples over an ellipsoid fit tightly") {
        const Vec3 axes(1.2, 1.0, 0.8);
        const InclusionShape shape = make_ellipsoid(Vec3::Zero(), axes);
        const PotentialField field(voxelize(shape, make_grid(shape, 96, 2.0)));
        CounterRng rng(22, 4);
        std::vector<Vec3> pts;
        std::vector<double> vals;
        while (pts.size() < 50) {
            const Vec3 x(rng.uniform(-1.2, 1.2), rng.uniform(-1.0, 1.0), rng.uniform(-0.8, 0.8));
            if (x.cwiseQuotient(axes).squaredNorm() > 0.75 * 0.75) continue;
            pts.push_back(x);
            vals.push_back(field.newtonian(x));
        }
        const QuadraticFitResult fit = quadratic_fit(pts, vals);
        CHECK(fit.fit_rms < 1e-3);
        const QuadraticForm exact = newtonian_ellipsoid(axes);
        CHECK((fit.form.A.diagonal() - exact.A.diagonal()).cwiseAbs().maxCoeff() < 5e-3);
        CHECK(std::abs(2.0 * fit.form.A.trace() - 1.0) < 1e-2);
    }

    SUBCASE("cube interior is measurably non-quadratic") {
        const InclusionShape shape = make_box(Vec3::Zero(), Vec3::Ones());
        const PotentialField field(voxelize(shape, make_grid(shape, 64, 2.0)));
        CounterRng rng(23, 4);
        std::vector<Vec3> pts;
        std::vector<double> vals;
        for (int i = 0; i < 50; ++i) {
            const Vec3 x(rng.uniform(-0.85, 0.85), rng.uniform(-0.85, 0.85),
                         rng.uniform(-0.85, 0.85));
            pts.push_back(x);
            vals.push_back(field.newtonian(x));
        }
        CHECK(quadratic_fit(pts, vals).fit_rms > 1e-2);
    }

    SUBCASE("degenerate inputs are rejected") {
        std::vector<Vec3> pts(9, Vec3::Zero());
        std::vector<double> vals(9, 0.0);
        CHECK_THROWS_AS(quadratic_fit(pts, vals), std::invalid_argument);
        pts.resize(12, Vec3::Ones());
        CHECK_THROWS_AS(quadratic_fit(pts, vals), std::invalid_argument);
    }
}

TEST_CASE("off-center inclusions evaluate in lab coordinates") {
    const Vec3 c(0.4, -0.3, 0.7);
    const InclusionShape shape = make_ellipsoid(c, Vec3::Ones());
    const PotentialField field(voxelize(shape, make_grid(shape, 64, 2.2)));
    CHECK(field.newtonian(c) == doctest::Approx(-0.5).epsilon(2e-3));
    CHECK(field.newtonian(c + Vec3(2, 0, 0)) == doctest::Approx(-1.0 / 6.0).epsilon(2e-3));
}
