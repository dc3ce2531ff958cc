#include "eshlab/potentials.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/ellint_rd.hpp>
#include <boost/math/special_functions/ellint_rf.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eshlab {

namespace {

constexpr double kInv4Pi = 1.0 / (4.0 * kPi);
constexpr double kInv8Pi = 1.0 / (8.0 * kPi);

void require_axis(int axis) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("potential axis must be 0, 1, or 2");
}

void require_positive_axes(const Vec3& semi_axes) {
    if (!(semi_axes.minCoeff() > 0.0))
        throw std::invalid_argument("ellipsoid semi-axes must be positive");
}

}  // namespace

namespace detail {

// Int over [0,wa]x[0,wb]x[0,wc] of 1/|u|.  Every term vanishes with any of
// its extent factors, so zero-extent boxes come out as an exact 0.
double prism_inv_r(double wa, double wb, double wc) {
    if (!(wa > 0.0) || !(wb > 0.0) || !(wc > 0.0)) return 0.0;
    const double R = std::sqrt(wa * wa + wb * wb + wc * wc);
    return wa * wb * std::log((wc + R) / std::hypot(wa, wb)) +
           wb * wc * std::log((wa + R) / std::hypot(wb, wc)) +
           wc * wa * std::log((wb + R) / std::hypot(wc, wa)) -
           0.5 * wa * wa * std::atan(wb * wc / (wa * R)) -
           0.5 * wb * wb * std::atan(wc * wa / (wb * R)) -
           0.5 * wc * wc * std::atan(wa * wb / (wc * R));
}

// Int over [0,wa]x[0,wb] of 1/sqrt(u^2 + v^2 + h^2).
double rect_inv_r(double wa, double wb, double h) {
    if (!(wa > 0.0) || !(wb > 0.0)) return 0.0;
    const double R = std::sqrt(wa * wa + wb * wb + h * h);
    double val = wa * std::log((wb + R) / std::hypot(wa, h)) +
                 wb * std::log((wa + R) / std::hypot(wb, h));
    if (h > 0.0) val -= h * std::atan(wa * wb / (h * R));
    return val;
}

// Int u_q/|u|^3, q-extent first.  The inner 1D integral telescopes to a
// difference of rectangle potentials at heights 0 and wq.
double prism_uq_r3(double wq, double wa, double wb) {
    if (!(wq > 0.0) || !(wa > 0.0) || !(wb > 0.0)) return 0.0;
    return rect_inv_r(wa, wb, 0.0) - rect_inv_r(wa, wb, wq);
}

// Int u_q^2/|u|^3 = Int (1/|u| - (u_a^2+u_b^2)/|u|^3), which reduces to the
// prism Newtonian minus wq times the top-face rectangle potential.
double prism_uq2_r3(double wq, double wa, double wb) {
    if (!(wq > 0.0) || !(wa > 0.0) || !(wb > 0.0)) return 0.0;
    return prism_inv_r(wa, wb, wq) - wq * rect_inv_r(wa, wb, wq);
}

// Int u_q^3/|u|^5.
double prism_uq3_r5(double wq, double wa, double wb) {
    if (!(wq > 0.0) || !(wa > 0.0) || !(wb > 0.0)) return 0.0;
    const double R = std::sqrt(wq * wq + wa * wa + wb * wb);
    const double corner_angle = std::atan(wa * wb / (wq * R));
    return -(wq / 3.0) * corner_angle + (2.0 / 3.0) * prism_uq_r3(wq, wa, wb);
}

// Int u_q^2 u_m/|u|^5 with q the squared axis (extent wq), m the odd axis
// (extent wm) and wb the remaining extent.  Integrating the odd axis first
// leaves W(s) = Int_0^wb [ log((wq+sqrt(s^2+y^2+wq^2))/sqrt(s^2+y^2))
//                          - wq/sqrt(s^2+y^2+wq^2) ] dy
// and the box integral equals (W(0) - W(wm))/3.  W(0) has an integrable
// log endpoint, which the adaptive rule resolves.
double prism_uq2um_r5(double wq, double wm, double wb) {
    if (!(wq > 0.0) || !(wm > 0.0) || !(wb > 0.0)) return 0.0;
    const auto W = [wq, wb](double s) {
        const double s2 = s * s;
        const double wq2 = wq * wq;
        const auto integrand = [s2, wq, wq2](double y) {
            const double rho2 = s2 + y * y;
            const double R = std::sqrt(rho2 + wq2);
            return std::log((wq + R) / std::sqrt(rho2)) - wq / R;
        };
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            integrand, 0.0, wb, 12, 1e-11);
    };
    return (W(0.0) - W(wm)) / 3.0;
}

// Exact integrals of the gradient kernels over an arbitrary axis box given
// in x-relative coordinates u = y - x.  Axes straddling zero are split,
// negative-side boxes are reflected (picking up the kernel's parity sign),
// and each single-sign box becomes an alternating sum of corner integrals.
namespace {

double corner_moment(MomentKernel k, int q, int m, const double e[3]) {
    switch (k) {
        case MomentKernel::Uq_R3:
            return prism_uq_r3(e[q], e[(q + 1) % 3], e[(q + 2) % 3]);
        case MomentKernel::Uq3_R5:
            return prism_uq3_r5(e[q], e[(q + 1) % 3], e[(q + 2) % 3]);
        case MomentKernel::Uq2Um_R5:
            return prism_uq2um_r5(e[q], e[m], e[3 - q - m]);
    }
    return 0.0;
}

double box_moment_rec(MomentKernel k, int q, int m, double lo[3], double hi[3]) {
    for (int a = 0; a < 3; ++a) {
        if (lo[a] < 0.0 && hi[a] > 0.0) {
            const double save_lo = lo[a], save_hi = hi[a];
            lo[a] = save_lo;
            hi[a] = 0.0;
            const double left = box_moment_rec(k, q, m, lo, hi);
            lo[a] = 0.0;
            hi[a] = save_hi;
            const double right = box_moment_rec(k, q, m, lo, hi);
            lo[a] = save_lo;
            hi[a] = save_hi;
            return left + right;
        }
    }
    const int odd_axis = (k == MomentKernel::Uq2Um_R5) ? m : q;
    double sign = 1.0;
    double l[3], u[3];
    for (int a = 0; a < 3; ++a) {
        if (hi[a] <= 0.0) {
            l[a] = -hi[a];
            u[a] = -lo[a];
            if (a == odd_axis) sign = -sign;
        } else {
            l[a] = std::max(0.0, lo[a]);
            u[a] = hi[a];
        }
    }
    double acc = 0.0;
    for (int bits = 0; bits < 8; ++bits) {
        double e[3];
        int lowers = 0;
        for (int a = 0; a < 3; ++a) {
            const bool upper = bits & (1 << a);
            e[a] = upper ? u[a] : l[a];
            lowers += upper ? 0 : 1;
        }
        acc += ((lowers % 2) ? -1.0 : 1.0) * corner_moment(k, q, m, e);
    }
    return sign * acc;
}

}  // namespace

// Int over the box [lo,hi] (coordinates relative to the kernel's base
// point) of u_q/|u|^3, u_q^3/|u|^5, or u_q^2 u_m/|u|^5.
double box_moment(MomentKernel k, int q, int m, const Vec3& lo, const Vec3& hi) {
    double l[3] = {lo[0], lo[1], lo[2]};
    double u[3] = {hi[0], hi[1], hi[2]};
    return box_moment_rec(k, q, m, l, u);
}

}  // namespace detail

QuadraticForm newtonian_ellipsoid(const Vec3& semi_axes) {
    require_positive_axes(semi_axes);
    const double a2 = semi_axes[0] * semi_axes[0];
    const double b2 = semi_axes[1] * semi_axes[1];
    const double c2 = semi_axes[2] * semi_axes[2];
    const double prod = semi_axes.prod();

    QuadraticForm form;
    // Int_0^inf ds/Delta = 2 R_F, Int_0^inf ds/((a_i^2+s) Delta) = (2/3) R_D
    // with the distinguished argument in the last slot.
    form.c0 = -(prod / 2.0) * boost::math::ellint_rf(a2, b2, c2);
    form.A = Mat3::Zero();
    form.A(0, 0) = (prod / 6.0) * boost::math::ellint_rd(b2, c2, a2);
    form.A(1, 1) = (prod / 6.0) * boost::math::ellint_rd(c2, a2, b2);
    form.A(2, 2) = (prod / 6.0) * boost::math::ellint_rd(a2, b2, c2);
    return form;
}

QuadraticForm newtonian_ellipsoid_by_quadrature(const Vec3& semi_axes) {
    require_positive_axes(semi_axes);
    const double a2 = semi_axes[0] * semi_axes[0];
    const double b2 = semi_axes[1] * semi_axes[1];
    const double c2 = semi_axes[2] * semi_axes[2];
    const double prod = semi_axes.prod();

    // s = a1^2 u/(1-u) maps [0,inf) to [0,1); the ds/Delta integrand picks
    // up an integrable 1/sqrt(1-u) endpoint, which the additional u = 1-v^2
    // change flattens so the adaptive rule converges to full precision.
    const auto integral = [&](double shift) {
        const auto integrand = [&](double v) {
            const double om = v * v;        // om = 1 - u
            const double u = 1.0 - om;
            const double s = a2 * u / om;
            const double delta = std::sqrt((a2 + s) * (b2 + s) * (c2 + s));
            const double jac = (a2 / (om * om)) * 2.0 * v;
            const double denom = (shift >= 0.0) ? (shift + s) : 1.0;
            return jac / (denom * delta);
        };
        return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            integrand, 0.0, 1.0, 15, 1e-12);
    };

    QuadraticForm form;
    form.c0 = -(prod / 4.0) * integral(-1.0);
    form.A = Mat3::Zero();
    form.A(0, 0) = (prod / 4.0) * integral(a2);
    form.A(1, 1) = (prod / 4.0) * integral(b2);
    form.A(2, 2) = (prod / 4.0) * integral(c2);
    return form;
}

QuadraticForm newtonian_ellipsoid_form(const Ellipsoid& e) {
    const QuadraticForm body = newtonian_ellipsoid(e.semi_axes);
    QuadraticForm lab;
    lab.A = e.rotation * body.A * e.rotation.transpose();
    lab.b = -2.0 * (lab.A * e.center);
    lab.c0 = body.c0 + e.center.dot(lab.A * e.center);
    return lab;
}

const char* potential_kind_name(PotentialKind kind) {
    switch (kind) {
        case PotentialKind::Newtonian: return "newtonian";
        case PotentialKind::Biharmonic: return "biharmonic";
        case PotentialKind::D2HAxis: return "d2h_axis";
        case PotentialKind::NtildeAxis: return "ntilde";
    }
    return "unknown";
}

PotentialField::Level PotentialField::build_level(VoxelMask mask) {
    Level lv;
    const GridSpec& g = mask.grid;
    const double vol = g.voxel_volume();
    for (int iz = 0; iz < g.n[2]; ++iz)
        for (int iy = 0; iy < g.n[1]; ++iy)
            for (int ix = 0; ix < g.n[0]; ++ix) {
                const float f = mask.at(ix, iy, iz);
                if (f <= 0.0f) continue;
                lv.center.push_back(g.voxel_center(ix, iy, iz));
                lv.weight.push_back(static_cast<double>(f) * vol);
                lv.frac.push_back(f);
                lv.linear.push_back(g.linear_index(ix, iy, iz));
            }
    lv.mask = std::move(mask);
    return lv;
}

// Volume-conserving box average onto a grid with half the resolution per
// axis (the estimator pair for Richardson differences).  Handles odd sizes
// through fractional cell overlaps.
VoxelMask PotentialField::downsample(const VoxelMask& mask) {
    const GridSpec& g = mask.grid;
    GridSpec cg;
    cg.origin = g.origin;
    cg.lengths = g.lengths;
    cg.padding_factor = g.padding_factor;
    for (int q = 0; q < 3; ++q) cg.n[q] = std::max(1, g.n[q] / 2);

    // Per-axis overlap lists: for each coarse cell, the fine cells it covers
    // and the covered length.
    std::array<std::vector<std::vector<std::pair<int, double>>>, 3> ov;
    for (int q = 0; q < 3; ++q) {
        const double hf = g.lengths[q] / g.n[q];
        const double hc = cg.lengths[q] / cg.n[q];
        ov[q].resize(cg.n[q]);
        for (int J = 0; J < cg.n[q]; ++J) {
            const double lo = J * hc, hi = (J + 1) * hc;
            const int i0 = std::max(0, static_cast<int>(std::floor(lo / hf)));
            const int i1 = std::min(g.n[q] - 1, static_cast<int>(std::ceil(hi / hf)) - 1);
            for (int i = i0; i <= i1; ++i) {
                const double o = std::min(hi, (i + 1) * hf) - std::max(lo, i * hf);
                if (o > 0.0) ov[q][J].emplace_back(i, o);
            }
        }
    }

    VoxelMask coarse;
    coarse.grid = cg;
    coarse.frac.assign(cg.cell_count(), 0.0f);
    const double cvol = cg.voxel_volume();
    for (int Jz = 0; Jz < cg.n[2]; ++Jz)
        for (int Jy = 0; Jy < cg.n[1]; ++Jy)
            for (int Jx = 0; Jx < cg.n[0]; ++Jx) {
                double acc = 0.0;
                for (const auto& [iz, oz] : ov[2][Jz])
                    for (const auto& [iy, oy] : ov[1][Jy])
                        for (const auto& [ix, ox] : ov[0][Jx])
                            acc += static_cast<double>(mask.at(ix, iy, iz)) * ox * oy * oz;
                coarse.frac[cg.linear_index(Jx, Jy, Jz)] =
                    static_cast<float>(std::clamp(acc / cvol, 0.0, 1.0));
            }
    return coarse;
}

PotentialField::PotentialField(VoxelMask mask) {
    if (mask.frac.size() != mask.grid.cell_count())
        throw std::invalid_argument("mask size does not match its grid");
    coarse_ = build_level(downsample(mask));
    fine_ = build_level(std::move(mask));
    if (fine_.center.empty()) throw std::invalid_argument("mask has no occupied voxels");
}

namespace {

struct SelfCell {
    bool present = false;
    std::size_t pos = 0;       // position in the occupied-cell arrays
    double ext[3][2] = {};     // distances from x to the cell faces (lo, hi)
    double frac = 0.0;
};

SelfCell find_self(const std::vector<std::size_t>& linear, const std::vector<double>& frac,
                   const GridSpec& g, const Vec3& x) {
    SelfCell s;
    std::array<int, 3> idx;
    if (!g.locate(x, idx)) return s;
    const std::size_t lin = g.linear_index(idx[0], idx[1], idx[2]);
    const auto it = std::lower_bound(linear.begin(), linear.end(), lin);
    if (it == linear.end() || *it != lin) return s;
    s.present = true;
    s.pos = static_cast<std::size_t>(it - linear.begin());
    s.frac = frac[s.pos];
    const Vec3 h = g.voxel_size();
    for (int q = 0; q < 3; ++q) {
        const double lo = g.origin[q] + idx[q] * h[q];
        s.ext[q][0] = std::max(0.0, x[q] - lo);
        s.ext[q][1] = std::max(0.0, lo + h[q] - x[q]);
    }
    return s;
}

// Closed-form integral of the scalar kernels over the (fractionally
// occupied) cell containing x.  The occupied part of a boundary cell is not
// localized by the mask, so the full-cell integral is scaled by frac.
double self_scalar(const SelfCell& s, PotentialKind kind, int axis, double midpoint_r) {
    using namespace detail;
    double acc = 0.0;
    for (int ox = 0; ox < 2; ++ox)
        for (int oy = 0; oy < 2; ++oy)
            for (int oz = 0; oz < 2; ++oz) {
                const double w[3] = {s.ext[0][ox], s.ext[1][oy], s.ext[2][oz]};
                switch (kind) {
                    case PotentialKind::Newtonian:
                        acc += prism_inv_r(w[0], w[1], w[2]);
                        break;
                    case PotentialKind::NtildeAxis:
                        acc += prism_uq2_r3(w[axis], w[(axis + 1) % 3], w[(axis + 2) % 3]);
                        break;
                    case PotentialKind::D2HAxis:
                        acc += prism_inv_r(w[0], w[1], w[2]) -
                               prism_uq2_r3(w[axis], w[(axis + 1) % 3], w[(axis + 2) % 3]);
                        break;
                    case PotentialKind::Biharmonic:
                        break;
                }
            }
    switch (kind) {
        case PotentialKind::Newtonian:
        case PotentialKind::NtildeAxis:
            return -s.frac * kInv4Pi * acc;
        case PotentialKind::D2HAxis:
            return -s.frac * kInv8Pi * acc;
        case PotentialKind::Biharmonic:
            // |r| is regular; the midpoint value is already adequate.
            return midpoint_r;
    }
    return 0.0;
}

}  // namespace

double PotentialField::scalar_sum(const Level& lv, PotentialKind kind, int axis,
                                  const Vec3& x) const {
    const std::size_t n = lv.center.size();
    std::vector<double> terms(n);
    const SelfCell self = find_self(lv.linear, lv.frac, lv.mask.grid, x);
    for (std::size_t j = 0; j < n; ++j) {
        const Vec3 r = x - lv.center[j];
        const double w = lv.weight[j];
        if (self.present && j == self.pos) {
            terms[j] = self_scalar(self, kind, axis, -w * r.norm() * kInv8Pi);
            continue;
        }
        const double rn = r.norm();
        switch (kind) {
            case PotentialKind::Newtonian:
                terms[j] = -w * kInv4Pi / rn;
                break;
            case PotentialKind::Biharmonic:
                terms[j] = -w * kInv8Pi * rn;
                break;
            case PotentialKind::D2HAxis:
                terms[j] = -w * kInv8Pi * (1.0 - r[axis] * r[axis] / (rn * rn)) / rn;
                break;
            case PotentialKind::NtildeAxis:
                terms[j] = -w * kInv4Pi * r[axis] * r[axis] / (rn * rn * rn);
                break;
        }
    }
    return pairwise_sum(terms.data(), n);
}

double PotentialField::newtonian(const Vec3& x) const {
    return scalar_sum(fine_, PotentialKind::Newtonian, -1, x);
}

double PotentialField::biharmonic(const Vec3& x) const {
    return scalar_sum(fine_, PotentialKind::Biharmonic, -1, x);
}

double PotentialField::d2h_axis(int axis, const Vec3& x) const {
    require_axis(axis);
    return scalar_sum(fine_, PotentialKind::D2HAxis, axis, x);
}

double PotentialField::ntilde(int axis, const Vec3& x) const {
    require_axis(axis);
    return scalar_sum(fine_, PotentialKind::NtildeAxis, axis, x);
}

namespace {

// Occupied cells within a Chebyshev window of x's (clamped) cell, where the
// 1/|r|^2-type gradient kernels are integrated exactly instead of by
// midpoint.  Positions come out ascending, so the main loop can consume
// them with a single forward cursor.
struct NearCells {
    std::vector<std::size_t> pos;
    std::vector<Vec3> lo;  // cell bounds relative to x
    std::vector<Vec3> hi;
};

constexpr int kNearRadius = 2;

NearCells collect_near(const std::vector<std::size_t>& linear, const GridSpec& g,
                       const Vec3& x) {
    NearCells near;
    const Vec3 h = g.voxel_size();
    int base[3];
    for (int a = 0; a < 3; ++a) {
        const int i = static_cast<int>(std::floor((x[a] - g.origin[a]) / h[a]));
        base[a] = std::clamp(i, 0, g.n[a] - 1);
    }
    for (int iz = std::max(0, base[2] - kNearRadius);
         iz <= std::min(g.n[2] - 1, base[2] + kNearRadius); ++iz)
        for (int iy = std::max(0, base[1] - kNearRadius);
             iy <= std::min(g.n[1] - 1, base[1] + kNearRadius); ++iy)
            for (int ix = std::max(0, base[0] - kNearRadius);
                 ix <= std::min(g.n[0] - 1, base[0] + kNearRadius); ++ix) {
                const std::size_t lin = g.linear_index(ix, iy, iz);
                const auto it = std::lower_bound(linear.begin(), linear.end(), lin);
                if (it == linear.end() || *it != lin) continue;
                near.pos.push_back(static_cast<std::size_t>(it - linear.begin()));
                const Vec3 lo(g.origin[0] + ix * h[0], g.origin[1] + iy * h[1],
                              g.origin[2] + iz * h[2]);
                near.lo.push_back(lo - x);
                near.hi.push_back(lo + h - x);
            }
    // The window loop runs in ascending linear order except across z/y
    // strides; restore full ordering.
    std::vector<std::size_t> order(near.pos.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return near.pos[a] < near.pos[b]; });
    NearCells sorted;
    for (std::size_t i : order) {
        sorted.pos.push_back(near.pos[i]);
        sorted.lo.push_back(near.lo[i]);
        sorted.hi.push_back(near.hi[i]);
    }
    return sorted;
}

}  // namespace

Vec3 PotentialField::grad_n_sum(const Level& lv, const Vec3& x) const {
    const std::size_t n = lv.center.size();
    std::vector<double> tx(n), ty(n), tz(n);
    const NearCells near = collect_near(lv.linear, lv.mask.grid, x);
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (k < near.pos.size() && j == near.pos[k]) {
            // Int (x-y)_m/|x-y|^3 dy = -Int u_m/|u|^3 du over the cell.
            const double c = lv.frac[j] * kInv4Pi;
            tx[j] = -c * detail::box_moment(detail::MomentKernel::Uq_R3, 0, 0, near.lo[k],
                                            near.hi[k]);
            ty[j] = -c * detail::box_moment(detail::MomentKernel::Uq_R3, 1, 0, near.lo[k],
                                            near.hi[k]);
            tz[j] = -c * detail::box_moment(detail::MomentKernel::Uq_R3, 2, 0, near.lo[k],
                                            near.hi[k]);
            ++k;
            continue;
        }
        const Vec3 r = x - lv.center[j];
        const double r2 = r.squaredNorm();
        const double c = lv.weight[j] * kInv4Pi / (r2 * std::sqrt(r2));
        tx[j] = c * r[0];
        ty[j] = c * r[1];
        tz[j] = c * r[2];
    }
    return Vec3(pairwise_sum(tx.data(), n), pairwise_sum(ty.data(), n),
                pairwise_sum(tz.data(), n));
}

Vec3 PotentialField::grad_nt_sum(const Level& lv, int axis, const Vec3& x) const {
    const std::size_t n = lv.center.size();
    std::vector<double> tx(n), ty(n), tz(n);
    const NearCells near = collect_near(lv.linear, lv.mask.grid, x);
    std::size_t k = 0;
    const int q = axis;
    for (std::size_t j = 0; j < n; ++j) {
        if (k < near.pos.size() && j == near.pos[k]) {
            // With u = y - x: Int r_q/|r|^3 = -B(u_q/|u|^3) and
            // Int r_q^2 r_m/|r|^5 = -B(u_q^2 u_m/|u|^5), so the kernel
            // -(1/4pi)(2 d_qm r_q/|r|^3 - 3 r_q^2 r_m/|r|^5) integrates to
            // (1/4pi)(2 d_qm B_lin - 3 B_cub).
            const double c = lv.frac[j] * kInv4Pi;
            const double blin =
                detail::box_moment(detail::MomentKernel::Uq_R3, q, 0, near.lo[k], near.hi[k]);
            for (int m = 0; m < 3; ++m) {
                const double bcub =
                    m == q ? detail::box_moment(detail::MomentKernel::Uq3_R5, q, 0, near.lo[k],
                                                near.hi[k])
                           : detail::box_moment(detail::MomentKernel::Uq2Um_R5, q, m,
                                                near.lo[k], near.hi[k]);
                const double val = c * (2.0 * (m == q ? blin : 0.0) - 3.0 * bcub);
                (m == 0 ? tx : m == 1 ? ty : tz)[j] = val;
            }
            ++k;
            continue;
        }
        const Vec3 r = x - lv.center[j];
        const double r2 = r.squaredNorm();
        const double r3 = r2 * std::sqrt(r2);
        const double rq2 = r[q] * r[q];
        const double c = lv.weight[j] * kInv4Pi;
        for (int m = 0; m < 3; ++m) {
            const double kern = 2.0 * (m == q ? r[q] : 0.0) / r3 - 3.0 * rq2 * r[m] / (r3 * r2);
            (m == 0 ? tx : m == 1 ? ty : tz)[j] = -c * kern;
        }
    }
    return Vec3(pairwise_sum(tx.data(), n), pairwise_sum(ty.data(), n),
                pairwise_sum(tz.data(), n));
}

Vec3 PotentialField::grad_newtonian(const Vec3& x) const { return grad_n_sum(fine_, x); }

Vec3 PotentialField::grad_ntilde(int axis, const Vec3& x) const {
    require_axis(axis);
    return grad_nt_sum(fine_, axis, x);
}

Vec3 PotentialField::grad_newtonian_coarse(const Vec3& x) const { return grad_n_sum(coarse_, x); }

Vec3 PotentialField::grad_ntilde_coarse(int axis, const Vec3& x) const {
    require_axis(axis);
    return grad_nt_sum(coarse_, axis, x);
}

PotentialSample PotentialField::sample(PotentialKind kind, int axis, const Vec3& x) const {
    if (kind == PotentialKind::D2HAxis || kind == PotentialKind::NtildeAxis) require_axis(axis);
    PotentialSample s;
    s.x = x;
    s.kind = kind;
    s.axis = (kind == PotentialKind::D2HAxis || kind == PotentialKind::NtildeAxis) ? axis : -1;
    s.value = scalar_sum(fine_, kind, axis, x);
    s.est_error = std::abs(s.value - scalar_sum(coarse_, kind, axis, x));
    s.method = "quadrature";
    return s;
}

std::vector<PotentialSample> PotentialField::sample_batch(PotentialKind kind, int axis,
                                                          const std::vector<Vec3>& points) const {
    std::vector<PotentialSample> out(points.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(points.size()); ++i)
        out[i] = sample(kind, axis, points[i]);
    return out;
}

Mat3 PotentialField::hessian_newtonian(const Vec3& x, double step) const {
    const double h = step > 0.0 ? step : voxel_edge();
    Mat3 H;
    for (int l = 0; l < 3; ++l) {
        Vec3 e = Vec3::Zero();
        e[l] = h;
        H.col(l) = (grad_newtonian(x + e) - grad_newtonian(x - e)) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

Mat3 PotentialField::hessian_ntilde(int axis, const Vec3& x, double step) const {
    require_axis(axis);
    const double h = step > 0.0 ? step : voxel_edge();
    Mat3 H;
    for (int l = 0; l < 3; ++l) {
        Vec3 e = Vec3::Zero();
        e[l] = h;
        H.col(l) = (grad_ntilde(axis, x + e) - grad_ntilde(axis, x - e)) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

Mat3 PotentialField::hessian_d2h(int axis, const Vec3& x, double step) const {
    return 0.5 * (hessian_newtonian(x, step) - hessian_ntilde(axis, x, step));
}

QuadraticFitResult quadratic_fit(const std::vector<Vec3>& points,
                                 const std::vector<double>& values) {
    if (points.size() != values.size())
        throw std::invalid_argument("quadratic_fit: point/value count mismatch");
    const std::size_t n = points.size();
    if (n < 10) throw std::invalid_argument("quadratic_fit needs at least 10 samples");

    Vec3 mean = Vec3::Zero();
    for (const Vec3& p : points) mean += p;
    mean /= static_cast<double>(n);

    Eigen::MatrixXd design(n, 10);
    Eigen::VectorXd rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 u = points[i] - mean;
        design(i, 0) = 1.0;
        design(i, 1) = u[0];
        design(i, 2) = u[1];
        design(i, 3) = u[2];
        design(i, 4) = u[0] * u[0];
        design(i, 5) = u[1] * u[1];
        design(i, 6) = u[2] * u[2];
        design(i, 7) = u[0] * u[1];
        design(i, 8) = u[0] * u[2];
        design(i, 9) = u[1] * u[2];
        rhs(i) = values[i];
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd coeff = svd.solve(rhs);
    const auto& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 0.0))
        throw std::runtime_error("quadratic_fit: sample set does not span the quadratic basis");

    QuadraticFitResult res;
    res.cond = sv(0) / sv(sv.size() - 1);

    QuadraticForm centered;
    centered.c0 = coeff(0);
    centered.b = Vec3(coeff(1), coeff(2), coeff(3));
    centered.A << coeff(4), 0.5 * coeff(7), 0.5 * coeff(8),
                  0.5 * coeff(7), coeff(5), 0.5 * coeff(9),
                  0.5 * coeff(8), 0.5 * coeff(9), coeff(6);

    res.form.A = centered.A;
    res.form.b = centered.b - 2.0 * (centered.A * mean);
    res.form.c0 = centered.c0 - centered.b.dot(mean) + mean.dot(centered.A * mean);

    const Eigen::VectorXd residual = design * coeff - rhs;
    const double vmean = rhs.mean();
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (rhs(i) - vmean) * (rhs(i) - vmean);
    const double vstd = std::sqrt(var / static_cast<double>(n));
    const double denom = vstd > 0.0 ? vstd : 1.0;
    res.fit_rms = std::sqrt(residual.squaredNorm() / static_cast<double>(n)) / denom;
    res.fit_max = residual.cwiseAbs().maxCoeff() / denom;
    return res;
}

}  // namespace eshlab
