#include "eshlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <stdexcept>

namespace eshlab {

namespace {

double ellipsoid_gauge_sq(const Ellipsoid& e, const Vec3& x) {
    const Vec3 u = e.rotation.transpose() * (x - e.center);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double t = u[i] / e.semi_axes[i];
        s += t * t;
    }
    return s;
}

void require_axes(const Vec3& a, const char* what) {
    const double amax = a.maxCoeff();
    if (!(a.minCoeff() > 0.0))
        throw std::invalid_argument(std::string(what) + ": semi-axes must be positive");
    if (a.minCoeff() < 1e-9 * amax)
        throw std::invalid_argument(std::string(what) +
                                    ": degenerate semi-axis below 1e-9 of the largest");
}

Vec3 shape_anchor(const InclusionShape& s) {
    const Aabb bb = bounding_box(s);
    return 0.5 * (bb.lo + bb.hi);
}

}  // namespace

bool GridSpec::locate(const Vec3& x, std::array<int, 3>& idx) const {
    const Vec3 h = voxel_size();
    for (int q = 0; q < 3; ++q) {
        const double t = (x[q] - origin[q]) / h[q];
        if (t < 0.0 || t >= static_cast<double>(n[q])) return false;
        idx[q] = std::min(n[q] - 1, static_cast<int>(t));
    }
    return true;
}

std::vector<std::string> GridSpec::validate() const {
    for (int q = 0; q < 3; ++q) {
        if (n[q] < 2) throw std::invalid_argument("grid resolution must be >= 2 per axis");
        if (!(lengths[q] > 0.0)) throw std::invalid_argument("grid box must have positive extent");
    }
    if (padding_factor < 1.0)
        throw std::invalid_argument("padding_factor must be >= 1");
    std::vector<std::string> warnings;
    const Vec3 h = voxel_size();
    const double aspect = h.maxCoeff() / h.minCoeff();
    if (aspect > 2.0)
        warnings.push_back("voxel aspect ratio " + std::to_string(aspect) +
                           " outside [0.5, 2]");
    return warnings;
}

double VoxelMask::occupied_volume() const {
    const double v = grid.voxel_volume();
    double s = 0.0;
    for (float f : frac) s += f;
    return s * v;
}

InclusionShape::InclusionShape(Payload payload, bool convex)
    : payload_(std::move(payload)), convex_(convex) {}

const char* InclusionShape::kind_name() const {
    switch (payload_.index()) {
        case 0: return "ellipsoid";
        case 1: return "box";
        case 2: return "superellipsoid";
        case 3: return "voxelmask";
        default: return "difference";
    }
}

InclusionShape make_ellipsoid(const Vec3& center, const Vec3& semi_axes, const Mat3& rotation) {
    require_axes(semi_axes, "ellipsoid");
    if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        rotation.determinant() < 0.0)
        throw std::invalid_argument("ellipsoid rotation must be proper orthonormal");
    return InclusionShape(Ellipsoid{center, semi_axes, rotation}, true);
}

InclusionShape make_box(const Vec3& center, const Vec3& half_extents) {
    require_axes(half_extents, "box");
    return InclusionShape(AxisBox{center, half_extents}, true);
}

InclusionShape make_superellipsoid(const Vec3& center, const Vec3& semi_axes, double exponent) {
    require_axes(semi_axes, "superellipsoid");
    if (exponent < 2.0)
        throw std::invalid_argument("superellipsoid exponent must be >= 2");
    return InclusionShape(Superellipsoid{center, semi_axes, exponent}, true);
}

InclusionShape make_mask_shape(VoxelMask mask) {
    mask.grid.validate();
    if (mask.frac.size() != mask.grid.cell_count())
        throw std::invalid_argument("mask fraction array does not match grid");
    for (float f : mask.frac)
        if (f < 0.0f || f > 1.0f)
            throw std::invalid_argument("mask fractions must lie in [0, 1]");
    InclusionShape shape(std::move(mask), false);
    if (!mask_connected(*shape.get_if<VoxelMask>()))
        throw std::invalid_argument("mask must be a single connected component");
    return shape;
}

InclusionShape make_difference(InclusionShape outer, InclusionShape inner) {
    Difference d;
    d.outer = std::make_shared<InclusionShape>(std::move(outer));
    d.inner = std::make_shared<InclusionShape>(std::move(inner));
    if (!sample_contained(*d.inner, *d.outer, 2000))
        throw std::invalid_argument("difference requires inner inside outer (sample test)");
    return InclusionShape(std::move(d), false);
}

bool contains(const InclusionShape& shape, const Vec3& x) {
    if (const auto* e = shape.get_if<Ellipsoid>()) return ellipsoid_gauge_sq(*e, x) <= 1.0;
    if (const auto* b = shape.get_if<AxisBox>()) {
        const Vec3 d = (x - b->center).cwiseAbs();
        return d[0] <= b->half_extents[0] && d[1] <= b->half_extents[1] &&
               d[2] <= b->half_extents[2];
    }
    if (const auto* s = shape.get_if<Superellipsoid>()) {
        double acc = 0.0;
        for (int i = 0; i < 3; ++i)
            acc += std::pow(std::abs((x[i] - s->center[i]) / s->semi_axes[i]), s->exponent);
        return acc <= 1.0;
    }
    if (const auto* m = shape.get_if<VoxelMask>()) {
        std::array<int, 3> idx;
        if (!m->grid.locate(x, idx)) return false;
        return m->at(idx[0], idx[1], idx[2]) > 0.5f;
    }
    const auto& d = std::get<Difference>(shape.payload());
    return contains(*d.outer, x) && !contains(*d.inner, x);
}

Aabb bounding_box(const InclusionShape& shape) {
    Aabb bb;
    if (const auto* e = shape.get_if<Ellipsoid>()) {
        Vec3 half;
        for (int i = 0; i < 3; ++i) {
            double s = 0.0;
            for (int j = 0; j < 3; ++j) {
                const double t = e->rotation(i, j) * e->semi_axes[j];
                s += t * t;
            }
            half[i] = std::sqrt(s);
        }
        bb.lo = e->center - half;
        bb.hi = e->center + half;
    } else if (const auto* b = shape.get_if<AxisBox>()) {
        bb.lo = b->center - b->half_extents;
        bb.hi = b->center + b->half_extents;
    } else if (const auto* s = shape.get_if<Superellipsoid>()) {
        bb.lo = s->center - s->semi_axes;
        bb.hi = s->center + s->semi_axes;
    } else if (const auto* m = shape.get_if<VoxelMask>()) {
        const auto& g = m->grid;
        const Vec3 h = g.voxel_size();
        bool any = false;
        Vec3 lo = g.origin + g.lengths, hi = g.origin;
        for (int iz = 0; iz < g.n[2]; ++iz)
            for (int iy = 0; iy < g.n[1]; ++iy)
                for (int ix = 0; ix < g.n[0]; ++ix)
                    if (m->at(ix, iy, iz) > 0.0f) {
                        any = true;
                        const Vec3 c = g.voxel_center(ix, iy, iz);
                        lo = lo.cwiseMin(c - 0.5 * h);
                        hi = hi.cwiseMax(c + 0.5 * h);
                    }
        if (!any) throw std::invalid_argument("mask has no occupied voxels");
        bb.lo = lo;
        bb.hi = hi;
    } else {
        bb = bounding_box(*std::get<Difference>(shape.payload()).outer);
    }
    return bb;
}

GridSpec make_grid(const InclusionShape& shape, int resolution, double padding) {
    if (padding < 1.0) throw std::invalid_argument("padding_factor must be >= 1");
    const Aabb bb = bounding_box(shape);
    const Vec3 extent = bb.hi - bb.lo;
    const double edge = padding * extent.maxCoeff();
    const Vec3 center = 0.5 * (bb.lo + bb.hi);
    GridSpec g;
    g.n = {resolution, resolution, resolution};
    g.lengths = Vec3::Constant(edge);
    g.origin = center - 0.5 * g.lengths;
    g.padding_factor = padding;
    g.validate();
    return g;
}

VoxelMask voxelize(const InclusionShape& shape, const GridSpec& grid, int subsamples) {
    grid.validate();
    if (subsamples < 1) throw std::invalid_argument("subsamples must be >= 1");
    const Aabb bb = bounding_box(shape);
    for (int q = 0; q < 3; ++q)
        if (bb.lo[q] < grid.origin[q] - 1e-12 ||
            bb.hi[q] > grid.origin[q] + grid.lengths[q] + 1e-12)
            throw std::invalid_argument("grid box does not cover the shape bounding box");

    VoxelMask mask;
    mask.grid = grid;
    mask.frac.assign(grid.cell_count(), 0.0f);
    const Vec3 h = grid.voxel_size();
    const double inv = 1.0 / (subsamples * subsamples * subsamples);

#pragma omp parallel for collapse(2) schedule(static)
    for (int iz = 0; iz < grid.n[2]; ++iz)
        for (int iy = 0; iy < grid.n[1]; ++iy)
            for (int ix = 0; ix < grid.n[0]; ++ix) {
                const Vec3 c = grid.voxel_center(ix, iy, iz);
                const Vec3 lo = c - 0.5 * h, hi = c + 0.5 * h;
                bool overlap = true;
                for (int q = 0; q < 3; ++q)
                    overlap = overlap && hi[q] >= bb.lo[q] && lo[q] <= bb.hi[q];
                if (!overlap) continue;
                int cnt = 0;
                for (int sx = 0; sx < subsamples; ++sx)
                    for (int sy = 0; sy < subsamples; ++sy)
                        for (int sz = 0; sz < subsamples; ++sz) {
                            const Vec3 p(lo[0] + (sx + 0.5) * h[0] / subsamples,
                                         lo[1] + (sy + 0.5) * h[1] / subsamples,
                                         lo[2] + (sz + 0.5) * h[2] / subsamples);
                            if (contains(shape, p)) ++cnt;
                        }
                mask.frac[grid.linear_index(ix, iy, iz)] = static_cast<float>(cnt * inv);
            }
    return mask;
}

VolumeEstimate volume(const InclusionShape& shape, std::uint64_t seed, int mc_samples) {
    if (const auto* e = shape.get_if<Ellipsoid>())
        return {4.0 * kPi / 3.0 * e->semi_axes.prod(), 0.0};
    if (const auto* b = shape.get_if<AxisBox>())
        return {8.0 * b->half_extents.prod(), 0.0};
    if (const auto* m = shape.get_if<VoxelMask>())
        return {m->occupied_volume(), 0.0};
    if (const auto* d = std::get_if<Difference>(&shape.payload())) {
        const VolumeEstimate vo = volume(*d->outer, seed, mc_samples);
        const VolumeEstimate vi = volume(*d->inner, seed + 1, mc_samples);
        return {vo.value - vi.value, std::hypot(vo.std_error, vi.std_error)};
    }
    // Superellipsoid: Monte Carlo over the bounding box.
    const Aabb bb = bounding_box(shape);
    const Vec3 extent = bb.hi - bb.lo;
    const double box_vol = extent.prod();
    CounterRng rng(seed, /*stream=*/101);
    std::int64_t hits = 0;
    for (int i = 0; i < mc_samples; ++i) {
        const Vec3 p(bb.lo[0] + extent[0] * rng.next_double(),
                     bb.lo[1] + extent[1] * rng.next_double(),
                     bb.lo[2] + extent[2] * rng.next_double());
        if (contains(shape, p)) ++hits;
    }
    const double p_hat = static_cast<double>(hits) / mc_samples;
    return {box_vol * p_hat, box_vol * std::sqrt(p_hat * (1.0 - p_hat) / mc_samples)};
}

Ellipsoid scale_about_origin(const Ellipsoid& e, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("scale factor must be positive");
    if (e.center.norm() > 1e-12 * e.semi_axes.maxCoeff())
        throw std::invalid_argument("scale_about_origin requires an origin-centered ellipsoid");
    Ellipsoid out = e;
    out.semi_axes *= t;
    return out;
}

std::vector<Vec3> boundary_samples(const InclusionShape& shape, int n) {
    if (n < 1) throw std::invalid_argument("boundary sample count must be >= 1");
    std::vector<Vec3> pts;
    if (const auto* e = shape.get_if<Ellipsoid>()) {
        for (const Vec3& d : fibonacci_sphere(n))
            pts.push_back(e->center + e->rotation * d.cwiseProduct(e->semi_axes));
    } else if (const auto* b = shape.get_if<AxisBox>()) {
        const int m = std::max(1, static_cast<int>(std::ceil(std::sqrt(n / 6.0))));
        for (int axis = 0; axis < 3; ++axis)
            for (int sign = -1; sign <= 1; sign += 2)
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j) {
                        Vec3 u;
                        u[axis] = static_cast<double>(sign);
                        const int a = (axis + 1) % 3, c = (axis + 2) % 3;
                        u[a] = -1.0 + (2.0 * i + 1.0) / m;
                        u[c] = -1.0 + (2.0 * j + 1.0) / m;
                        pts.push_back(b->center + u.cwiseProduct(b->half_extents));
                    }
    } else if (const auto* s = shape.get_if<Superellipsoid>()) {
        for (const Vec3& d : fibonacci_sphere(n)) {
            double g = 0.0;
            for (int i = 0; i < 3; ++i)
                g += std::pow(std::abs(d[i] / s->semi_axes[i]), s->exponent);
            pts.push_back(s->center + d / std::pow(g, 1.0 / s->exponent));
        }
    } else if (const auto* m = shape.get_if<VoxelMask>()) {
        const auto& g = m->grid;
        std::vector<Vec3> surf;
        auto occ = [&](int ix, int iy, int iz) {
            if (ix < 0 || iy < 0 || iz < 0 || ix >= g.n[0] || iy >= g.n[1] || iz >= g.n[2])
                return false;
            return m->at(ix, iy, iz) > 0.5f;
        };
        for (int iz = 0; iz < g.n[2]; ++iz)
            for (int iy = 0; iy < g.n[1]; ++iy)
                for (int ix = 0; ix < g.n[0]; ++ix) {
                    if (!occ(ix, iy, iz)) continue;
                    if (!occ(ix - 1, iy, iz) || !occ(ix + 1, iy, iz) || !occ(ix, iy - 1, iz) ||
                        !occ(ix, iy + 1, iz) || !occ(ix, iy, iz - 1) || !occ(ix, iy, iz + 1))
                        surf.push_back(g.voxel_center(ix, iy, iz));
                }
        if (surf.empty()) throw std::invalid_argument("mask has no surface voxels");
        const std::size_t stride = std::max<std::size_t>(1, surf.size() / n);
        for (std::size_t i = 0; i < surf.size(); i += stride) pts.push_back(surf[i]);
    } else {
        const auto& d = std::get<Difference>(shape.payload());
        for (const Vec3& p : boundary_samples(*d.outer, n))
            if (!contains(*d.inner, p)) pts.push_back(p);
        for (const Vec3& p : boundary_samples(*d.inner, n))
            if (contains(*d.outer, p)) pts.push_back(p);
    }
    if (pts.empty()) throw std::invalid_argument("no boundary samples produced");
    return pts;
}

ContactReport contact_scale(const Ellipsoid& e, const InclusionShape& omega, int samples) {
    if (e.center.norm() > 1e-12 * e.semi_axes.maxCoeff())
        throw std::invalid_argument("contact_scale requires an origin-centered ellipsoid");
    const std::vector<Vec3> pts = boundary_samples(omega, samples);
    ContactReport rep;
    rep.t_star = -1.0;
    for (const Vec3& p : pts) {
        const double g = std::sqrt(ellipsoid_gauge_sq(e, p));
        if (g > rep.t_star) {
            rep.t_star = g;
            rep.point = p;
        }
    }
    if (rep.t_star <= 0.0)
        throw std::invalid_argument("contact scale degenerate: sampled gauge sup is zero");
    int at_max = 0;
    const double tie = 1e-9 * std::max(1.0, rep.t_star);
    for (const Vec3& p : pts)
        if (std::sqrt(ellipsoid_gauge_sq(e, p)) >= rep.t_star - tie) ++at_max;
    rep.unique = at_max == 1;
    // Outward normal of t*e at Q: gradient of the scaled quadratic gauge.
    Mat3 q = Mat3::Zero();
    for (int i = 0; i < 3; ++i) q(i, i) = 1.0 / (e.semi_axes[i] * e.semi_axes[i]);
    rep.normal = (e.rotation * q * e.rotation.transpose() * rep.point).normalized();
    return rep;
}

bool sample_contained(const InclusionShape& inner, const InclusionShape& outer, int samples,
                      double tol) {
    const Vec3 anchor = shape_anchor(inner);
    for (const Vec3& p : boundary_samples(inner, samples)) {
        // Nudge inward so exact-touch boundaries do not fail on roundoff.
        const Vec3 q = anchor + (p - anchor) * (1.0 - tol);
        if (!contains(outer, q)) return false;
    }
    return true;
}

std::vector<Vec3> interior_centers(const VoxelMask& mask, int chebyshev_radius) {
    const auto& g = mask.grid;
    const int r = chebyshev_radius;
    std::vector<Vec3> out;
    for (int iz = r; iz < g.n[2] - r; ++iz)
        for (int iy = r; iy < g.n[1] - r; ++iy)
            for (int ix = r; ix < g.n[0] - r; ++ix) {
                bool full = true;
                for (int dz = -r; dz <= r && full; ++dz)
                    for (int dy = -r; dy <= r && full; ++dy)
                        for (int dx = -r; dx <= r && full; ++dx)
                            full = mask.at(ix + dx, iy + dy, iz + dz) >= 0.999f;
                if (full) out.push_back(g.voxel_center(ix, iy, iz));
            }
    return out;
}

bool mask_connected(const VoxelMask& mask) {
    const auto& g = mask.grid;
    const std::size_t total = g.cell_count();
    std::vector<char> seen(total, 0);
    std::size_t first = total, occupied = 0;
    for (std::size_t i = 0; i < total; ++i)
        if (mask.frac[i] > 0.5f) {
            ++occupied;
            if (first == total) first = i;
        }
    if (occupied == 0) return false;

    std::deque<std::array<int, 3>> queue;
    const int nx = g.n[0], ny = g.n[1];
    queue.push_back({static_cast<int>(first % nx), static_cast<int>(first / nx % ny),
                     static_cast<int>(first / (static_cast<std::size_t>(nx) * ny))});
    seen[first] = 1;
    std::size_t reached = 0;
    while (!queue.empty()) {
        const auto [ix, iy, iz] = queue.front();
        queue.pop_front();
        ++reached;
        const int steps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& s : steps) {
            const int jx = ix + s[0], jy = iy + s[1], jz = iz + s[2];
            if (jx < 0 || jy < 0 || jz < 0 || jx >= g.n[0] || jy >= g.n[1] || jz >= g.n[2])
                continue;
            const std::size_t li = g.linear_index(jx, jy, jz);
            if (!seen[li] && mask.frac[li] > 0.5f) {
                seen[li] = 1;
                queue.push_back({jx, jy, jz});
            }
        }
    }
    return reached == occupied;
}

namespace {

constexpr char kMaskMagic[5] = {'E', 'S', 'H', 'V', '1'};

template <typename T>
void write_raw(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void write_mask(const std::string& path, const VoxelMask& mask) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open mask file for writing: " + path);
    f.write(kMaskMagic, sizeof(kMaskMagic));
    for (int q = 0; q < 3; ++q) write_raw(f, static_cast<std::uint32_t>(mask.grid.n[q]));
    for (int q = 0; q < 3; ++q) write_raw(f, mask.grid.origin[q]);
    for (int q = 0; q < 3; ++q) write_raw(f, mask.grid.lengths[q]);
    f.write(reinterpret_cast<const char*>(mask.frac.data()),
            static_cast<std::streamsize>(mask.frac.size() * sizeof(float)));
    if (!f) throw std::runtime_error("mask write failed: " + path);
}

VoxelMask read_mask(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open mask file: " + path);
    char magic[5];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMaskMagic, sizeof(magic)) != 0)
        throw std::runtime_error("bad mask magic in " + path);
    VoxelMask mask;
    for (int q = 0; q < 3; ++q) {
        std::uint32_t v = 0;
        read_raw(f, v);
        mask.grid.n[q] = static_cast<int>(v);
    }
    for (int q = 0; q < 3; ++q) read_raw(f, mask.grid.origin[q]);
    for (int q = 0; q < 3; ++q) read_raw(f, mask.grid.lengths[q]);
    mask.grid.validate();
    mask.frac.resize(mask.grid.cell_count());
    f.read(reinterpret_cast<char*>(mask.frac.data()),
           static_cast<std::streamsize>(mask.frac.size() * sizeof(float)));
    if (!f) throw std::runtime_error("mask data truncated in " + path);
    for (float v : mask.frac)
        if (v < 0.0f || v > 1.0f) throw std::runtime_error("mask fraction outside [0, 1]");
    return mask;
}

}  // namespace eshlab
