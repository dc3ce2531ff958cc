#include "eshlab/materials.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace eshlab {

namespace {

double kronecker(int i, int j) { return i == j ? 1.0 : 0.0; }

bool nearly_equal(double a, double b, double rel_tol) {
    return std::abs(a - b) <= rel_tol * std::max({1.0, std::abs(a), std::abs(b)});
}

bool ray_admissible(double ratio) { return 3.0 * ratio + 2.0 > 0.0; }

void require_distinct(double k1, double k3) {
    if (nearly_equal(k1, k3, 1e-12))
        throw std::invalid_argument("k1 == k3: two-equal reduction needs a distinct eigenvalue");
}

}  // namespace

bool is_admissible(const LameMaterial& m) {
    return m.mu > 0.0 && 3.0 * m.lambda + 2.0 * m.mu > 0.0;
}

void require_admissible(const LameMaterial& m) {
    if (m.mu <= 0.0)
        throw std::invalid_argument("material inadmissible: mu <= 0");
    if (3.0 * m.lambda + 2.0 * m.mu <= 0.0)
        throw std::invalid_argument("material inadmissible: 3*lambda + 2*mu <= 0");
}

Mat3 Stiffness4::contract(const Mat3& e) const {
    Mat3 s = Mat3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) acc += (*this)(i, j, k, l) * e(k, l);
            s(i, j) = acc;
        }
    return s;
}

Mat3 Stiffness4::acoustic_tensor(const Vec3& xi) const {
    Mat3 a = Mat3::Zero();
    for (int p = 0; p < 3; ++p)
        for (int m = 0; m < 3; ++m) {
            double acc = 0.0;
            for (int l = 0; l < 3; ++l)
                for (int n = 0; n < 3; ++n) acc += (*this)(p, l, m, n) * xi[l] * xi[n];
            a(p, m) = acc;
        }
    return a;
}

Stiffness4 Stiffness4::rotated(const Mat3& rot) const {
    // One index at a time keeps this O(3^5) per stage.
    std::array<double, 81> t0 = c_, t1{};
    for (int stage = 0; stage < 4; ++stage) {
        t1.fill(0.0);
        for (int a = 0; a < 3; ++a)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k)
                    for (int l = 0; l < 3; ++l) {
                        // Rotate the leading index, then cycle so each stage
                        // sees a fresh leading slot.
                        double acc = 0.0;
                        for (int b = 0; b < 3; ++b)
                            acc += rot(a, b) * t0[((b * 3 + j) * 3 + k) * 3 + l];
                        t1[((j * 3 + k) * 3 + l) * 3 + a] = acc;
                    }
        t0 = t1;
    }
    Stiffness4 out;
    out.c_ = t0;
    return out;
}

double Stiffness4::symmetry_defect() const {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    const double c = (*this)(i, j, k, l);
                    worst = std::max(worst, std::abs(c - (*this)(j, i, k, l)));
                    worst = std::max(worst, std::abs(c - (*this)(i, j, l, k)));
                    worst = std::max(worst, std::abs(c - (*this)(k, l, i, j)));
                }
    return worst;
}

Stiffness4 make_isotropic_stiffness(const LameMaterial& m) {
    require_admissible(m);
    Stiffness4 c;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    c(i, j, k, l) = m.lambda * kronecker(i, j) * kronecker(k, l) +
                                    m.mu * (kronecker(i, k) * kronecker(j, l) +
                                            kronecker(i, l) * kronecker(j, k));
    return c;
}

Mat3 stress_from_eigenstrain(const LameMaterial& m, const Mat3& eps) {
    require_admissible(m);
    return m.lambda * eps.trace() * Mat3::Identity() + 2.0 * m.mu * eps;
}

Mat3 eigenstrain_from_eigenstress(const LameMaterial& m, const Mat3& sigma) {
    require_admissible(m);
    const double bulk3 = 3.0 * m.lambda + 2.0 * m.mu;
    return (sigma - m.lambda / bulk3 * sigma.trace() * Mat3::Identity()) / (2.0 * m.mu);
}

Eigenstress classify_eigenstress(const Mat3& sigma, double rel_tol) {
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument("eigenstress tensor must be symmetric");
    if (rel_tol < 0.0)
        throw std::invalid_argument("classification tolerance must be >= 0");

    Eigen::SelfAdjointEigenSolver<Mat3> es(sigma);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition failed");

    Eigenstress out;
    out.tensor = sigma;
    // Solver returns ascending order; flip to descending.
    Vec3 vals;
    Mat3 vecs;
    for (int i = 0; i < 3; ++i) {
        vals[i] = es.eigenvalues()[2 - i];
        vecs.col(i) = es.eigenvectors().col(2 - i);
    }
    out.principal = vals;

    const bool eq01 = nearly_equal(vals[0], vals[1], rel_tol);
    const bool eq12 = nearly_equal(vals[1], vals[2], rel_tol);
    const bool eq02 = nearly_equal(vals[0], vals[2], rel_tol);

    if ((eq01 && eq12) || (eq01 && eq02) || (eq12 && eq02)) {
        out.spectral_class = SpectralClass::AllEqual;
        out.frame = Mat3::Identity();
        out.repeated = vals.mean();
        out.distinct = out.repeated;
        return out;
    }

    auto canonical_sign = [](Vec3 v) {
        int big = 0;
        for (int i = 1; i < 3; ++i)
            if (std::abs(v[i]) > std::abs(v[big])) big = i;
        return v[big] < 0.0 ? Vec3(-v) : v;
    };

    if (eq01 || eq12) {
        out.spectral_class = SpectralClass::TwoEqual;
        // Distinct axis goes on column 3; the degenerate pair spans a plane
        // whose in-plane basis is pinned by Gram-Schmidt against the first
        // reference axis not parallel to the distinct direction.
        Vec3 dvec;
        if (eq01) {
            out.repeated = 0.5 * (vals[0] + vals[1]);
            out.distinct = vals[2];
            dvec = canonical_sign(vecs.col(2));
        } else {
            out.repeated = 0.5 * (vals[1] + vals[2]);
            out.distinct = vals[0];
            dvec = canonical_sign(vecs.col(0));
        }
        Vec3 ref = Vec3::UnitX();
        if (std::abs(dvec.dot(ref)) > 0.9) ref = Vec3::UnitY();
        Vec3 u = (ref - dvec * dvec.dot(ref)).normalized();
        out.frame.col(0) = u;
        out.frame.col(1) = dvec.cross(u);
        out.frame.col(2) = dvec;
        return out;
    }

    out.spectral_class = SpectralClass::AllDistinct;
    for (int i = 0; i < 3; ++i) out.frame.col(i) = canonical_sign(vecs.col(i));
    if (out.frame.determinant() < 0.0) out.frame.col(1) = -out.frame.col(1);
    out.repeated = 0.0;
    out.distinct = 0.0;
    return out;
}

Mat3 acoustic_inverse(const LameMaterial& m, const Vec3& xi) {
    require_admissible(m);
    const double n2 = xi.squaredNorm();
    if (n2 <= 0.0)
        throw std::invalid_argument("acoustic inverse undefined at xi = 0");
    const double a = 1.0 / (m.mu * n2);
    const double b = (m.mu + m.lambda) / (m.mu * (2.0 * m.mu + m.lambda) * n2 * n2);
    return a * Mat3::Identity() - b * (xi * xi.transpose());
}

MaterialConstants material_constants(const LameMaterial& m, double k1, double k3) {
    require_admissible(m);
    require_distinct(k1, k3);
    const double lp = m.lambda + m.mu;
    if (lp == 0.0)
        throw std::invalid_argument("lambda + mu == 0: constants undefined");
    const double den = lp * (k1 - k3);
    MaterialConstants c;
    c.alpha = -m.mu * k1 / den;
    c.beta = -(k3 * (m.lambda + 2.0 * m.mu) - k1 * lp) / den;
    c.gamma = (k3 * lp - k1 * (m.lambda + 3.0 * m.mu)) / den;
    c.eta = (k3 * (m.lambda + 3.0 * m.mu) - k1 * lp) / den;
    return c;
}

MaterialConstants material_constants_via_alpha_beta(const LameMaterial& m, double k1,
                                                    double k3) {
    MaterialConstants c = material_constants(m, k1, k3);
    c.gamma = -(2.0 * c.alpha + 1.0);
    c.eta = -(2.0 * c.beta + 1.0);
    return c;
}

MaterialRay special_material_gamma0(double k1, double k3) {
    require_distinct(k1, k3);
    MaterialRay ray;
    ray.ratio = (k3 - 3.0 * k1) / (k1 - k3);
    ray.admissible = ray_admissible(ray.ratio);
    ray.same_sign = k1 * k3 > 0.0;
    return ray;
}

Eta2Report special_material_eta2(double k1, double k3) {
    require_distinct(k1, k3);
    Eta2Report rep;
    const bool same_sign = k1 * k3 > 0.0;

    if (nearly_equal(k1 + k3, 0.0, 1e-12))
        throw std::invalid_argument("k1 + k3 == 0: eta = 2 condition ray degenerate");
    rep.condition.ratio = (k3 - k1) / (k1 + k3);
    rep.condition.admissible = ray_admissible(rep.condition.ratio);
    rep.condition.same_sign = same_sign;

    rep.from_eta_formula.ratio = (3.0 * k1 - 5.0 * k3) / (3.0 * (k3 - k1));
    rep.from_eta_formula.admissible = ray_admissible(rep.from_eta_formula.ratio);
    rep.from_eta_formula.same_sign = same_sign;

    rep.agree = nearly_equal(rep.condition.ratio, rep.from_eta_formula.ratio, 1e-9);
    return rep;
}

JointSpecialMaterial special_material_joint(double k1, double k3) {
    require_distinct(k1, k3);
    JointSpecialMaterial joint;
    joint.determinant = 2.0 * (k3 * k3 - 2.0 * k1 * k3 - k1 * k1);
    const double scale = 2.0 * (k3 * k3 + 2.0 * std::abs(k1 * k3) + k1 * k1);
    joint.solvable = std::abs(joint.determinant) <= 1e-9 * std::max(1.0, scale);
    joint.same_sign = k1 * k3 > 0.0;
    if (joint.solvable) {
        // Null ray from the better-conditioned row of the system.
        const double r1 = std::hypot(k1 - k3, 3.0 * k1 - k3);
        const double r2 = std::hypot(k1 + k3, k1 - k3);
        joint.ratio = r1 >= r2 ? (k3 - 3.0 * k1) / (k1 - k3) : (k3 - k1) / (k1 + k3);
        joint.admissible = ray_admissible(joint.ratio);
    }
    return joint;
}

}  // namespace eshlab
