#pragma once

#include "eshlab/numerics.hpp"

#include <array>

namespace eshlab {

// Isotropic linear-elastic medium, Lame parameters.
struct LameMaterial {
    double lambda = 0.0;
    double mu = 0.0;
};

// Positive-definite isotropic stiffness: mu > 0 and 3*lambda + 2*mu > 0.
bool is_admissible(const LameMaterial& m);

// Throws std::invalid_argument naming the violated condition.
void require_admissible(const LameMaterial& m);

// Rank-4 stiffness tensor, full 81-component storage.
class Stiffness4 {
public:
    double& operator()(int i, int j, int k, int l) { return c_[idx(i, j, k, l)]; }
    double operator()(int i, int j, int k, int l) const { return c_[idx(i, j, k, l)]; }

    // Double contraction (C : e)_ij = C_ijkl e_kl.
    Mat3 contract(const Mat3& e) const;

    // Acoustic tensor A_pm = C_plmn xi_l xi_n.
    Mat3 acoustic_tensor(const Vec3& xi) const;

    // Component-wise rotation C'_ijkl = R_ia R_jb R_kc R_ld C_abcd.
    Stiffness4 rotated(const Mat3& rot) const;

    // Max abs deviation from the minor (ij, kl) and major (ijkl <-> klij)
    // symmetries.
    double symmetry_defect() const;

private:
    static int idx(int i, int j, int k, int l) { return ((i * 3 + j) * 3 + k) * 3 + l; }
    std::array<double, 81> c_{};
};

// C_ijkl = lambda d_ij d_kl + mu (d_ik d_jl + d_il d_jk).
Stiffness4 make_isotropic_stiffness(const LameMaterial& m);

// sigma = C : eps for the isotropic stiffness, without forming Stiffness4.
Mat3 stress_from_eigenstrain(const LameMaterial& m, const Mat3& eps);

// Inverse map: eps = (sigma - lambda*tr(sigma)/(3*lambda+2*mu) * I) / (2*mu).
Mat3 eigenstrain_from_eigenstress(const LameMaterial& m, const Mat3& sigma);

enum class SpectralClass { AllEqual, TwoEqual, AllDistinct };

// Uniform eigenstress: the raw symmetric tensor plus its spectral data.
// principal is sorted descending; frame columns are the matching principal
// axes with det +1.  For TwoEqual the distinct axis is placed on column 3
// and "repeated"/"distinct" carry the two values (the working convention
// throughout: the doubled eigenvalue acts on axes 1 and 2).
struct Eigenstress {
    Mat3 tensor = Mat3::Zero();
    Vec3 principal = Vec3::Zero();
    Mat3 frame = Mat3::Identity();
    SpectralClass spectral_class = SpectralClass::AllEqual;
    double repeated = 0.0;
    double distinct = 0.0;
};

// Spectral classification with near-tie tolerance: eigenvalues a, b count as
// equal when |a - b| <= rel_tol * max(1, |a|, |b|).  Near-ties that chain
// without closing (a~b, b~c, a!~c) are merged conservatively into AllEqual.
// Rejects non-symmetric input.
Eigenstress classify_eigenstress(const Mat3& sigma, double rel_tol = 1e-9);

// Exact inverse of the acoustic tensor:
//   L_pq = d_pq / (mu |xi|^2) - (mu+lambda) xi_p xi_q / (mu (2mu+lambda) |xi|^4).
// Rejects xi = 0 and inadmissible materials.
Mat3 acoustic_inverse(const LameMaterial& m, const Vec3& xi);

// Coefficients of the two-equal-eigenvalue reduction, k1 the repeated
// eigenvalue and k3 the distinct one (k1 != k3 required):
//   alpha = -mu k1 / ((lambda+mu)(k1-k3))
//   beta  = -(k3(lambda+2mu) - k1(lambda+mu)) / ((lambda+mu)(k1-k3))
//   gamma = (k3(lambda+mu) - k1(lambda+3mu)) / ((lambda+mu)(k1-k3))
//   eta   = (k3(lambda+3mu) - k1(lambda+mu)) / ((lambda+mu)(k1-k3))
struct MaterialConstants {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double eta = 0.0;
};

MaterialConstants material_constants(const LameMaterial& m, double k1, double k3);

// Alternative (gamma, eta) obtained from (alpha, beta) by eliminating the
// axial second derivative of the biharmonic potential through the kernel
// identity Ntilde_q = N - 2 d2H_q: gamma' = -(2 alpha + 1), eta' = -(2 beta + 1).
// This route does NOT reproduce material_constants' direct gamma/eta; both
// are surfaced so reports can show the discrepancy instead of hiding it.
MaterialConstants material_constants_via_alpha_beta(const LameMaterial& m, double k1,
                                                    double k3);

// A ray lambda/mu = ratio in material space (mu > 0 fixed by scaling).
struct MaterialRay {
    double ratio = 0.0;     // lambda / mu
    bool admissible = false;  // ray intersects the admissible cone (3*ratio + 2 > 0)
    bool same_sign = false;   // k1 * k3 > 0
};

// Materials with gamma = 0: k1 (lambda + 3mu) = k3 (lambda + mu), i.e.
// lambda/mu = (k3 - 3 k1) / (k1 - k3).
MaterialRay special_material_gamma0(double k1, double k3);

// Materials with eta = 2.  Two inequivalent characterizations of this
// family are in circulation and they generally disagree:
//   condition:        k1 (lambda + mu) = k3 (mu - lambda)
//                       -> lambda/mu = (k3 - k1) / (k1 + k3)
//   from_eta_formula: the literal root of eta(lambda, mu; k1, k3) = 2
//                       -> lambda/mu = (3 k1 - 5 k3) / (3 (k3 - k1))
// Both rays are reported; "agree" flags whether they coincide.
struct Eta2Report {
    MaterialRay condition;
    MaterialRay from_eta_formula;
    bool agree = false;
};

Eta2Report special_material_eta2(double k1, double k3);

// Joint gamma = 0 and eta = 2 as a homogeneous 2x2 system in (lambda, mu):
//   (k1 - k3)  lambda + (3 k1 - k3) mu = 0
//   (k1 + k3)  lambda + (k1 - k3)   mu = 0
// determinant = 2 (k3^2 - 2 k1 k3 - k1^2); a nontrivial ray exists only when
// it vanishes, i.e. k3/k1 = 1 +/- sqrt(2).  ratio is valid when solvable.
struct JointSpecialMaterial {
    double determinant = 0.0;
    bool solvable = false;
    double ratio = 0.0;
    bool admissible = false;
    bool same_sign = false;
};

JointSpecialMaterial special_material_joint(double k1, double k3);

}  // namespace eshlab
