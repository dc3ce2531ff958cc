#include "eshlab/materials.hpp"

#include "doctest.h"

#include <cmath>
#include <stdexcept>

using namespace eshlab;

namespace {

LameMaterial random_admissible(CounterRng& rng) {
    LameMaterial m;
    m.mu = rng.uniform(0.2, 5.0);
    m.lambda = m.mu * rng.uniform(-0.6, 5.0);  // keeps 3*lambda + 2*mu > 0
    return m;
}

}  // namespace

TEST_CASE("isotropic stiffness components") {
    const Stiffness4 c = make_isotropic_stiffness({1.0, 1.0});
    CHECK(c(0, 0, 0, 0) == doctest::Approx(3.0));  // lambda + 2 mu
    CHECK(c(0, 0, 1, 1) == doctest::Approx(1.0));  // lambda
    CHECK(c(0, 1, 0, 1) == doctest::Approx(1.0));  // mu
    CHECK(c(0, 1, 1, 0) == doctest::Approx(1.0));
    CHECK(c(0, 0, 0, 1) == doctest::Approx(0.0));
    CHECK(c.symmetry_defect() <= 1e-15);
}

TEST_CASE("stiffness rotation invariance") {
    CounterRng rng(7, 1);
    for (int trial = 0; trial < 50; ++trial) {
        const LameMaterial m = random_admissible(rng);
        const Stiffness4 c = make_isotropic_stiffness(m);
        const Mat3 rot = random_rotation(rng);
        const Stiffness4 cr = c.rotated(rot);
        double worst = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k)
                    for (int l = 0; l < 3; ++l)
                        worst = std::max(worst, std::abs(cr(i, j, k, l) - c(i, j, k, l)));
        CHECK(worst <= 1e-12 * std::max(1.0, std::abs(m.lambda) + 2.0 * m.mu));
    }
}

TEST_CASE("stiffness contraction matches direct Lame form") {
    CounterRng rng(8, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const LameMaterial m = random_admissible(rng);
        const Stiffness4 c = make_isotropic_stiffness(m);
        Mat3 e;
        e << rng.normal(), rng.normal(), rng.normal(), 0, rng.normal(), rng.normal(), 0, 0,
            rng.normal();
        e = ((e + e.transpose()) / 2.0).eval();
        const Mat3 via_tensor = c.contract(e);
        const Mat3 direct = stress_from_eigenstrain(m, e);
        CHECK((via_tensor - direct).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + direct.norm()));
    }
}

TEST_CASE("eigenstrain and eigenstress round trip") {
    CounterRng rng(9, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const LameMaterial m = random_admissible(rng);
        Mat3 s;
        s << rng.normal(), rng.normal(), rng.normal(), 0, rng.normal(), rng.normal(), 0, 0,
            rng.normal();
        s = ((s + s.transpose()) / 2.0).eval();
        const Mat3 back = stress_from_eigenstrain(m, eigenstrain_from_eigenstress(m, s));
        CHECK((back - s).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + s.norm()));
    }
}

TEST_CASE("admissibility boundary") {
    CHECK(is_admissible({1.0, 1.0}));
    CHECK(is_admissible({-0.5, 1.0}));  // 3*(-0.5) + 2 = 0.5 > 0
    CHECK_FALSE(is_admissible({1.0, 0.0}));
    CHECK_FALSE(is_admissible({1.0, -1.0}));
    CHECK_FALSE(is_admissible({-1.0, 1.0}));  // 3*(-1) + 2 = -1
    CHECK_THROWS_AS(make_isotropic_stiffness({-1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(make_isotropic_stiffness({1.0, -2.0}), std::invalid_argument);
}

TEST_CASE("acoustic inverse on axis frequencies") {
    const LameMaterial m{1.0, 1.0};
    const Mat3 l1 = acoustic_inverse(m, Vec3(1, 0, 0));
    CHECK(l1(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(l1(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l1(2, 2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(l1(0, 1)) <= 1e-15);

    // |xi| = 2 scales the two eigenvalues by 1/4.
    const Mat3 l2 = acoustic_inverse(m, Vec3(2, 0, 0));
    CHECK(l2(0, 0) == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
    CHECK(l2(1, 1) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(l2(2, 2) == doctest::Approx(0.25).epsilon(1e-12));

    CHECK_THROWS_AS(acoustic_inverse(m, Vec3(0, 0, 0)), std::invalid_argument);
}

TEST_CASE("acoustic inverse closes against the acoustic tensor") {
    CounterRng rng(10, 1);
    for (int trial = 0; trial < 1000; ++trial) {
        const LameMaterial m = random_admissible(rng);
        Vec3 xi(rng.normal(), rng.normal(), rng.normal());
        if (xi.norm() < 1e-3) xi = Vec3(1, 0, 0);
        xi *= rng.uniform(0.1, 10.0);
        const Stiffness4 c = make_isotropic_stiffness(m);
        const Mat3 prod = acoustic_inverse(m, xi) * c.acoustic_tensor(xi);
        CHECK((prod - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("eigenstress classification") {
    SUBCASE("hydrostatic") {
        const Eigenstress e = classify_eigenstress(Mat3::Identity());
        CHECK(e.spectral_class == SpectralClass::AllEqual);
        CHECK((e.frame - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(e.principal[0] == doctest::Approx(1.0));
    }
    SUBCASE("two equal, distinct axis mapped to column 3") {
        Mat3 s = Mat3::Zero();
        s.diagonal() << 1.0, 1.0, 2.0;
        const Eigenstress e = classify_eigenstress(s);
        CHECK(e.spectral_class == SpectralClass::TwoEqual);
        CHECK(e.repeated == doctest::Approx(1.0));
        CHECK(e.distinct == doctest::Approx(2.0));
        CHECK(e.principal[0] == doctest::Approx(2.0));
        CHECK(e.principal[2] == doctest::Approx(1.0));
        CHECK(std::abs(std::abs(e.frame.col(2).dot(Vec3::UnitZ())) - 1.0) <= 1e-12);
        CHECK(e.frame.determinant() == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("near tie within tolerance") {
        Mat3 s = Mat3::Zero();
        s.diagonal() << 1.0, 1.0 + 1e-12, 2.0;
        const Eigenstress e = classify_eigenstress(s, 1e-9);
        CHECK(e.spectral_class == SpectralClass::TwoEqual);
        CHECK(e.distinct == doctest::Approx(2.0));
    }
    SUBCASE("all distinct, descending") {
        Mat3 s = Mat3::Zero();
        s.diagonal() << 1.0, 2.0, 3.0;
        const Eigenstress e = classify_eigenstress(s);
        CHECK(e.spectral_class == SpectralClass::AllDistinct);
        CHECK(e.principal[0] == doctest::Approx(3.0));
        CHECK(e.principal[1] == doctest::Approx(2.0));
        CHECK(e.principal[2] == doctest::Approx(1.0));
        CHECK(e.frame.determinant() == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("chained near-ties merge to AllEqual") {
        Mat3 s = Mat3::Zero();
        s.diagonal() << 1.0, 1.0 + 0.9e-9, 1.0 + 1.8e-9;
        CHECK(classify_eigenstress(s, 1e-9).spectral_class == SpectralClass::AllEqual);
    }
    SUBCASE("non-symmetric rejected") {
        Mat3 s = Mat3::Zero();
        s(0, 1) = 1.0;
        CHECK_THROWS_AS(classify_eigenstress(s), std::invalid_argument);
    }
}

TEST_CASE("classification invariant under conjugation") {
    CounterRng rng(11, 1);
    for (int trial = 0; trial < 100; ++trial) {
        Vec3 d(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
        Mat3 s = Mat3::Zero();
        s.diagonal() = d;
        const Mat3 rot = random_rotation(rng);
        const Eigenstress a = classify_eigenstress(s);
        const Eigenstress b = classify_eigenstress(rot * s * rot.transpose());
        CHECK(a.spectral_class == b.spectral_class);
        CHECK((a.principal - b.principal).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("material constants worked value") {
    const MaterialConstants c = material_constants({1.0, 1.0}, 1.0, 2.0);
    CHECK(c.alpha == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c.beta == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(c.gamma == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c.eta == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK_THROWS_AS(material_constants({1.0, 1.0}, 2.0, 2.0), std::invalid_argument);
}

TEST_CASE("material constants identities") {
    CounterRng rng(12, 1);
    int checked = 0;
    while (checked < 1000) {
        const LameMaterial m = random_admissible(rng);
        const double k1 = rng.uniform(-4.0, 4.0);
        const double k3 = rng.uniform(-4.0, 4.0);
        if (std::abs(k1 - k3) < 1e-3) continue;
        ++checked;
        const MaterialConstants c = material_constants(m, k1, k3);
        const double lp = m.lambda + m.mu;
        CHECK(c.alpha - c.beta ==
              doctest::Approx(-(m.lambda + 2.0 * m.mu) / lp).epsilon(1e-12));
        CHECK(c.gamma - c.eta ==
              doctest::Approx(-2.0 * m.mu * (k1 + k3) / (lp * (k1 - k3))).epsilon(1e-12));
    }
}

TEST_CASE("alpha-beta route to gamma/eta disagrees with the direct formulas") {
    // Eliminating d2H via Ntilde = N - 2 d2H gives gamma' = -(2 alpha + 1),
    // eta' = -(2 beta + 1).  For generic inputs this is NOT the direct
    // gamma/eta; the library keeps both routes visible.
    const LameMaterial m{1.0, 1.0};
    const MaterialConstants direct = material_constants(m, 1.0, 2.0);
    const MaterialConstants alt = material_constants_via_alpha_beta(m, 1.0, 2.0);
    CHECK(alt.alpha == direct.alpha);
    CHECK(alt.beta == direct.beta);
    CHECK(alt.gamma == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(alt.eta == doctest::Approx(-5.0).epsilon(1e-12));
    CHECK(std::abs(alt.gamma - direct.gamma) > 0.5);
    CHECK(std::abs(alt.eta - direct.eta) > 0.5);
}

TEST_CASE("gamma = 0 ray") {
    SUBCASE("k = (1, 2): ratio 1, admissible") {
        const MaterialRay ray = special_material_gamma0(1.0, 2.0);
        CHECK(ray.ratio == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ray.admissible);
        CHECK(ray.same_sign);
        // gamma really vanishes on the ray.
        const MaterialConstants c = material_constants({ray.ratio, 1.0}, 1.0, 2.0);
        CHECK(std::abs(c.gamma) <= 1e-12);
    }
    SUBCASE("k = (1, 4): ratio -1/3, still admissible") {
        const MaterialRay ray = special_material_gamma0(1.0, 4.0);
        CHECK(ray.ratio == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
        CHECK(ray.admissible);
        const MaterialConstants c = material_constants({ray.ratio, 1.0}, 1.0, 4.0);
        CHECK(std::abs(c.gamma) <= 1e-12);
    }
    SUBCASE("opposite signs leave the admissible cone") {
        const MaterialRay ray = special_material_gamma0(1.0, -1.0);
        CHECK_FALSE(ray.same_sign);
        CHECK_FALSE(ray.admissible);
    }
}

TEST_CASE("eta = 2 rays") {
    const Eta2Report rep = special_material_eta2(1.0, 2.0);
    CHECK(rep.condition.ratio == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(rep.condition.admissible);
    CHECK(rep.from_eta_formula.ratio == doctest::Approx(-7.0 / 3.0).epsilon(1e-12));
    CHECK_FALSE(rep.from_eta_formula.admissible);
    CHECK_FALSE(rep.agree);

    // The literal root does satisfy eta = 2 by construction; it just sits
    // outside the admissible cone here.  Direct formula check against an
    // inadmissible-but-defined evaluation is skipped (constants require an
    // admissible material); check the algebra instead.
    const double r = rep.from_eta_formula.ratio;
    const double k1 = 1.0, k3 = 2.0;
    const double eta_num = k3 * (r + 3.0) - k1 * (r + 1.0);  // mu = 1
    const double eta_den = (r + 1.0) * (k1 - k3);
    CHECK(eta_num / eta_den == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS(special_material_eta2(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("joint special material") {
    SUBCASE("generic eigenvalues: no ray") {
        const JointSpecialMaterial j = special_material_joint(1.0, 2.0);
        CHECK(j.determinant == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK_FALSE(j.solvable);
    }
    SUBCASE("k3/k1 = 1 + sqrt(2): ray sqrt(2) - 1, admissible") {
        const double k3 = 1.0 + std::sqrt(2.0);
        const JointSpecialMaterial j = special_material_joint(1.0, k3);
        CHECK(j.solvable);
        CHECK(j.ratio == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
        CHECK(j.admissible);
        CHECK(j.same_sign);
        // Row one of the joint system is the literal gamma = 0, so gamma
        // vanishes on the ray.
        const MaterialConstants c = material_constants({j.ratio, 1.0}, 1.0, k3);
        CHECK(std::abs(c.gamma) <= 1e-12);
        // Row two is the quoted linear eta = 2 condition, which the ray
        // satisfies exactly ...
        CHECK(std::abs(1.0 * (j.ratio + 1.0) - k3 * (1.0 - j.ratio)) <= 1e-12);
        // ... while the eta formula itself evaluates to something else
        // entirely on the same ray.  Kept visible on purpose.
        CHECK(c.eta == doctest::Approx(-(2.0 + std::sqrt(2.0))).epsilon(1e-10));
    }
    SUBCASE("k3/k1 = 1 - sqrt(2): solvable but opposite signs, inadmissible") {
        const JointSpecialMaterial j = special_material_joint(1.0, 1.0 - std::sqrt(2.0));
        CHECK(j.solvable);
        CHECK_FALSE(j.same_sign);
        CHECK_FALSE(j.admissible);
    }
}

TEST_CASE("joint determinant roots by scan and bisection") {
    // determinant(k3) for fixed k1 = 1 changes sign exactly at 1 +/- sqrt(2).
    auto det = [](double k3) { return 2.0 * (k3 * k3 - 2.0 * k3 - 1.0); };
    auto bisect = [&](double lo, double hi) {
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if ((det(lo) < 0.0) == (det(mid) < 0.0))
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };
    double roots[2] = {0, 0};
    int found = 0;
    double prev = det(-4.0);
    for (double k3 = -4.0 + 0.01; k3 <= 4.0; k3 += 0.01) {
        const double cur = det(k3);
        if ((prev < 0.0) != (cur < 0.0)) roots[found++] = bisect(k3 - 0.01, k3);
        prev = cur;
        if (found == 2) break;
    }
    REQUIRE(found == 2);
    CHECK(roots[0] == doctest::Approx(1.0 - std::sqrt(2.0)).epsilon(1e-9));
    CHECK(roots[1] == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-9));
    CHECK(special_material_joint(1.0, roots[1]).solvable);
}
