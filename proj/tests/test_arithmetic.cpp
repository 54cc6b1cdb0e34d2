#include <algorithm>
#include <gtest/gtest.h>

#include <random>

#include "hypergl/arithmetic.hpp"

using namespace hypergl;

namespace {

ModularMatrix random_modular(std::mt19937_64& rng, int words = 8) {
    ModularMatrix g = kIdentity;
    std::uniform_int_distribution<int> pick(0, 2);
    for (int i = 0; i < words; ++i) {
        const int k = pick(rng);
        g = g * (k == 0 ? kT : (k == 1 ? kTinv : kS));
    }
    return g;
}

// Random element of Gamma(N): a conjugate-free product of generators of the kernel.
ModularMatrix random_gamma(std::mt19937_64& rng, std::int64_t N, int words = 4) {
    ModularMatrix g = kIdentity;
    std::uniform_int_distribution<int> pick(0, 3);
    for (int i = 0; i < words; ++i) {
        const ModularMatrix h = random_modular(rng, 3);
        const ModularMatrix t = (pick(rng) % 2) ? translation(N) : translation(-N);
        g = g * (h * t * h.inverse());
    }
    return g;
}

}  // namespace

TEST(Moebius, ApplyExamples) {
    EXPECT_EQ(mobius_apply(kIdentity, cplx(3, 4)), cplx(3, 4));
    EXPECT_NEAR(std::abs(mobius_apply(kS, cplx(0, 1)) - cplx(0, 1)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(mobius_apply(kS, cplx(0, 2)) - cplx(0, 0.5)), 0.0, 1e-15);
    EXPECT_THROW(mobius_apply(kS, cplx(1, 0)), std::invalid_argument);
    EXPECT_EQ(mobius_apply_infinity(ModularMatrix{2, 1, 3, 2}), ExtRational::make(2, 3));
    EXPECT_TRUE(mobius_apply_infinity(kT).is_infinity());
}

TEST(Moebius, ProjectiveEqualityAndGroupLaw) {
    EXPECT_TRUE(kS * kS == kIdentity);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-2, 2), V(0.1, 3);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto g1 = random_modular(rng), g2 = random_modular(rng);
        const cplx z(U(rng), V(rng));
        const cplx lhs = mobius_apply(g1 * g2, z);
        const cplx rhs = mobius_apply(g1, mobius_apply(g2, z));
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
        EXPECT_EQ((g1 * g2).det(), 1);
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(Membership, Examples) {
    EXPECT_TRUE(is_member(kIdentity, 5));
    EXPECT_TRUE(is_member(ModularMatrix{1, 2, 0, 1}, 2));
    EXPECT_FALSE(is_member(ModularMatrix{1, 1, 0, 1}, 2));
    EXPECT_TRUE(is_member(ModularMatrix{-1, 0, 0, -1}, 7));
    EXPECT_TRUE(is_member(ModularMatrix{-1, 6, 0, -1}, 3));
}

TEST(GroupData, CuspCountGenusArea) {
    EXPECT_EQ(cusp_count(2), 3);
    EXPECT_EQ(cusp_count(3), 4);
    EXPECT_EQ(cusp_count(6), 12);
    EXPECT_EQ(genus(2), 0);
    EXPECT_EQ(genus(6), 1);
    EXPECT_EQ(genus(7), 3);
    EXPECT_EQ(area_over_pi(2), (Rational{2, 1}));
    EXPECT_EQ(area_over_pi(6), (Rational{24, 1}));
    EXPECT_EQ(area_over_pi(3), (Rational{4, 1}));
    EXPECT_THROW(cusp_count(1), UsageError);
    for (std::int64_t N = 2; N <= 12; ++N) {
        // Gauss-Bonnet: |Sigma| = 2 pi (2g - 2 + m), compared as exact rationals
        EXPECT_EQ(area_over_pi(N), Rational::make(2 * (2 * genus(N) - 2 + cusp_count(N)), 1)) << N;
    }
}

TEST(Surface, CosetsAndCusps) {
    for (std::int64_t N = 2; N <= 12; ++N) {
        const auto s = make_surface(N);
        EXPECT_EQ(Rational::make(std::int64_t(s.index()), 3), s.area_over_pi) << N;
        EXPECT_EQ(std::int64_t(s.cusps.size()), s.m) << N;
        for (const auto& c : s.cusps) {
            EXPECT_EQ(mobius_apply_infinity(c.lift), c.value);
            EXPECT_TRUE(is_member(c.stabilizer, N));
            // normalized scaling matrix conjugates the stabilizer to the unit translation
            const RealMoebius conj = c.scaling * to_real(c.stabilizer) * c.scaling.inverse();
            const double sgn = conj.a > 0 ? 1.0 : -1.0;
            const auto& st = c.stabilizer;
            const double tol = 1e-13 * double(std::max({std::abs(st.a), std::abs(st.b), std::abs(st.c), std::abs(st.d)}));
            EXPECT_NEAR(sgn * conj.a, 1.0, tol);
            EXPECT_NEAR(sgn * conj.d, 1.0, tol);
            EXPECT_NEAR(conj.c, 0.0, tol);
            EXPECT_NEAR(sgn * conj.b, 1.0, tol);
            EXPECT_DOUBLE_EQ(c.width, double(N));
        }
        for (std::size_t i = 0; i < s.cusps.size(); ++i)
            for (std::size_t j = 0; j < i; ++j) EXPECT_FALSE(s.cusps[i].value == s.cusps[j].value);
    }
    const auto s2 = make_surface(2);
    ASSERT_EQ(s2.cusps.size(), 3u);
    EXPECT_TRUE(s2.cusps[0].value.is_infinity());
    EXPECT_EQ(s2.cusps[1].value, ExtRational::make(0, 1));
    EXPECT_EQ(s2.cusps[2].value, ExtRational::make(1, 1));
    EXPECT_THROW(make_surface(1), UsageError);
}

TEST(Surface, CuspScalingMatrices) {
    const auto I = cusp_scaling_matrix(ExtRational::make(1, 0));
    EXPECT_EQ(I.a, 1.0);
    EXPECT_EQ(I.b, 0.0);
    EXPECT_EQ(I.c, 0.0);
    EXPECT_EQ(I.d, 1.0);
    const auto S0 = cusp_scaling_matrix(ExtRational::make(0, 1));
    EXPECT_EQ(S0.a, 0.0);
    EXPECT_EQ(S0.b, -1.0);
    EXPECT_EQ(S0.c, 1.0);
    EXPECT_EQ(S0.d, 0.0);
}

TEST(Reduce, InteriorAndRoundTrip) {
    const auto s = make_surface(2);
    const auto r = reduce_point(cplx(0.1, 1.7), s);
    EXPECT_NEAR(std::abs(r.z0 - cplx(0.1, 1.7)), 0.0, 1e-14);
    EXPECT_TRUE(r.gamma == kIdentity);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> X(-0.45, 0.45), Yd(1.1, 2.5);
    std::uniform_int_distribution<int> cell(0, int(s.index()) - 1);
    for (int i = 0; i < 200; ++i) {
        const cplx w(X(rng), Yd(rng));
        const cplx w_in_domain = mobius_apply(s.cosets.rep(cell(rng)), w);
        const auto gamma = random_gamma(rng, 2);
        const cplx z = mobius_apply(gamma, w_in_domain);
        const auto red = reduce_point(z, s);
        EXPECT_TRUE(is_member(red.gamma, 2));
        EXPECT_NEAR(std::abs(red.z0 - w_in_domain), 0.0, 1e-8 * std::max(1.0, std::abs(w_in_domain)));
    }
}

TEST(Reduce, StandardCellMaximizesImaginaryPart) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> X(-3, 3), Yd(0.01, 2);
    for (int i = 0; i < 200; ++i) {
        const cplx z(X(rng), Yd(rng));
        const auto [w, h] = reduce_to_standard_cell(z);
        EXPECT_GE(w.imag(), z.imag() - 1e-12);
        EXPECT_LE(std::abs(w.real()), 0.5 + 1e-12);
        EXPECT_GE(std::abs(w), 1.0 - 1e-12);
        EXPECT_NEAR(std::abs(mobius_apply(h, z) - w), 0.0, 1e-9);
        // brute force over short words: no image has larger imaginary part
        for (std::int64_t c = -4; c <= 4; ++c)
            for (std::int64_t d = -4; d <= 4; ++d) {
                if (std::gcd(c, d) != 1) continue;
                EXPECT_LE(w.imag() / std::norm(double(c) * w + double(d)), w.imag() * (1 + 1e-12));
            }
    }
    EXPECT_THROW(reduce_to_standard_cell(cplx(0.2, -1)), std::invalid_argument);
}
