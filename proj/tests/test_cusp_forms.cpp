#include <gtest/gtest.h>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_hyperg.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "hypergl/bundle.hpp"
#include "hypergl/cusp_forms.hpp"
#include "hypergl/mesh.hpp"
#include "hypergl/spectra.hpp"

using namespace hypergl;

namespace {

// W_{beta,mu}(y) = e^{-y/2} y^{mu+1/2} U(mu - beta + 1/2, 1 + 2 mu, y)
double whittaker_oracle(double beta, double mu, double y) {
    return std::exp(-0.5 * y) * std::pow(y, mu + 0.5) * gsl_sf_hyperg_U(mu - beta + 0.5, 1.0 + 2.0 * mu, y);
}

}  // namespace

TEST(Dimension, PaperFormula) {
    EXPECT_EQ(dim_cusp_forms(6, 2), 1);
    EXPECT_EQ(dim_cusp_forms(2, 2), 0);
    EXPECT_EQ(dim_cusp_forms(2, 4), 3);
    for (std::int64_t N = 2; N <= 12; ++N) EXPECT_EQ(dim_cusp_forms(N, 2), genus(N)) << "N=" << N;
    EXPECT_THROW(dim_cusp_forms(6, 3), UsageError);
    EXPECT_THROW(dim_cusp_forms(6, 0), UsageError);
    EXPECT_THROW(dim_cusp_forms(6, -2), UsageError);
}

TEST(Dimension, ClassicalCountDiffersForHigherWeight) {
    EXPECT_EQ(dim_cusp_forms_classical(2, 4), 0);
    EXPECT_EQ(dim_cusp_forms_classical(3, 4), 1);
    EXPECT_EQ(dim_cusp_forms_classical(6, 2), 1);
    EXPECT_EQ(dim_cusp_forms(3, 4), 5);
}

TEST(Whittaker, ClosedForm) {
    EXPECT_NEAR(whittaker_w(1.0, 0.5, 2.0), 2.0 * std::exp(-1.0), 1e-14);
    EXPECT_NEAR(2.0 * std::exp(-1.0), 0.73576, 1e-5);
    EXPECT_NEAR(whittaker_w(3.0, 2.5, 7.0), std::pow(7.0, 3.0) * std::exp(-3.5), 1e-12);
}

TEST(Whittaker, MatchesHypergeometricOracle) {
    gsl_set_error_handler_off();
    struct Case {
        double beta, mu, y;
    };
    for (const Case c : {Case{1.0, 0.3, 1.0}, Case{2.0, 1.0, 0.5}, Case{-1.0, 1.5, 3.0}, Case{-2.0, 1.5, 8.0},
                         Case{0.5, 0.0, 2.0}, Case{1.5, 0.75, 12.0}, Case{-3.0, 2.5, 20.0}}) {
        const double ref = whittaker_oracle(c.beta, c.mu, c.y);
        EXPECT_NEAR(whittaker_w(c.beta, c.mu, c.y), ref, 1e-8 * std::abs(ref))
            << "beta=" << c.beta << " mu=" << c.mu << " y=" << c.y;
    }
}

TEST(Whittaker, DecaysLikeExpMinusHalfY) {
    for (double beta : {-1.0, 0.5, 2.0}) {
        const double r = whittaker_w(beta, 0.7, 41.0) / whittaker_w(beta, 0.7, 40.0);
        EXPECT_NEAR(r / std::exp(-0.5), std::pow(41.0 / 40.0, beta), 0.01);
    }
}

TEST(Whittaker, RangeErrors) {
    EXPECT_THROW(whittaker_w(1.0, 0.3, 1e-4), UsageError);
    EXPECT_THROW(whittaker_w(100.0, 0.3, 1.0), UsageError);
    EXPECT_THROW(whittaker_w(1.0, 100.0, 1.0), UsageError);
}

TEST(Poincare, CauchyDifferencesBelowTail) {
    const auto S = make_surface(2);
    const cplx z(0.3, 2.0);
    for (double b : {1.0, 2.0}) {
        const auto a = poincare_series(S, 0, z, b, 20.0);
        const auto c = poincare_series(S, 0, z, b, 40.0);
        EXPECT_LE(std::abs(c.value - a.value), a.tail) << "b=" << b;
        EXPECT_LT(c.tail, a.tail);
    }
}

TEST(Poincare, Equivariance) {
    const auto S = make_surface(3);
    const double b = 2.0;
    const cplx z(0.2, 0.9);
    const auto base = poincare_series(S, 1, z, b, 40.0);
    for (const ModularMatrix g : {ModularMatrix{1, 3, 0, 1}, ModularMatrix{4, 3, 9, 7}, ModularMatrix{-2, 3, 3, -5}}) {
        ASSERT_TRUE(is_member(g, 3));
        const auto moved = poincare_series(S, 1, mobius_apply(g, z), b, 40.0);
        const cplx expected = automorphy_factor(g, z, b) * base.value;
        EXPECT_LE(std::abs(moved.value - expected), 2.0 * (base.tail + moved.tail) + 1e-12);
    }
}

TEST(Poincare, ExponentialDecayInOwnCusp) {
    const auto S = make_surface(3);
    const double b = 2.0;
    // Partial sums carry an O(R^{2-2b}) remainder, so the heights stay where the signal dominates it.
    for (double y : {1.0, 1.5, 2.0}) {
        const double f0 = std::abs(poincare_in_cusp_chart(S, 2, 2, {0.1, y}, b, 100.0).value);
        const double f1 = std::abs(poincare_in_cusp_chart(S, 2, 2, {0.1, y + 0.5}, b, 100.0).value);
        EXPECT_NEAR(f1 / f0 / std::pow((y + 0.5) / y, b), std::exp(-kPi), 0.01 * std::exp(-kPi)) << "y=" << y;
    }
}

TEST(Poincare, RejectsNonConvergentRegime) {
    const auto S = make_surface(2);
    EXPECT_THROW(poincare_series(S, 0, {0.0, 1.0}, 0.0, 10.0), UsageError);
    EXPECT_THROW(poincare_series(S, 0, {0.0, 1.0}, 1.5, 10.0), UsageError);
    EXPECT_THROW(poincare_series(S, 0, {0.0, 1.0}, 1.0, 0.5), UsageError);
}

TEST(Fourier, SeedFunctionHasSingleMode) {
    const int n = 32;
    const double y = 1.3, b = 1.0;
    std::vector<cplx> samples;
    for (int j = 0; j < n; ++j) samples.push_back(exact_cylinder_eigenfunction({double(j) / n, y}, b));
    const auto c = fourier_coefficients(samples, y, b, -3, 3);
    for (const auto& f : c) {
        if (f.k == 1)
            EXPECT_NEAR(std::abs(f.value), std::pow(4 * kPi, -b), 1e-12);
        else
            EXPECT_LT(std::abs(f.raw), 1e-15);
    }
    for (const auto& f : fourier_coefficients(std::vector<cplx>(n, 0.0), y, b, -3, 3))
        EXPECT_EQ(std::abs(f.value), 0.0);
}

namespace {

std::vector<FourierCoefficient> gamma3_coefficients(int cusp, double y, int kmax) {
    static const auto S = make_surface(3);
    const int n = 64;
    std::vector<cplx> s;
    for (int j = 0; j < n; ++j) s.push_back(poincare_in_cusp_chart(S, cusp, cusp, {double(j) / n, y}, 2.0, 150.0).value);
    return fourier_coefficients(s, y, 2.0, 1, kmax);
}

}  // namespace

TEST(Fourier, CoefficientsIndependentOfHeight) {
    const auto a = gamma3_coefficients(0, 0.5, 1);
    const auto c = gamma3_coefficients(0, 0.75, 1);
    EXPECT_GT(std::abs(a[0].value), 1e-4);
    EXPECT_NEAR(std::abs(a[0].value - c[0].value), 0.0, 0.01 * std::abs(a[0].value));
}

// The weight-4 cusp forms of level 3 are spanned by eta(z)^8, whose expansion in the
// width-one chart is q (1 - 8 q^3 + ...), so every cusp sees c_2 = c_3 = 0 and c_4 = -8 c_1.
TEST(Fourier, Gamma3SeriesMatchesEtaPower) {
    for (int cusp = 0; cusp < 4; ++cusp) {
        const auto f = gamma3_coefficients(cusp, 0.3, 4);
        const cplx c1 = f[0].value;
        EXPECT_LT(std::abs(f[1].value), 1e-4 * std::abs(c1)) << "cusp " << cusp;
        EXPECT_LT(std::abs(f[2].value), 1e-4 * std::abs(c1)) << "cusp " << cusp;
        EXPECT_NEAR((f[3].value / c1).real() * 16.0, -8.0, 1e-3) << "cusp " << cusp;
    }
}

TEST(GroundSpace, Gamma6BasisNormalization) {
    const auto S = make_surface(6);
    const auto B = make_bundle(6, 12);
    const auto M = build_mesh(S, 10.0, 0.2);
    const auto op = assemble(M, B);
    EigenOptions eo;
    eo.shift = 0.5;
    const auto r = lowest_eigenpairs(op, 3, eo);
    const auto basis = ground_space_basis(r, M, B.b, 1);
    ASSERT_EQ(basis.size(), 1u);
    EXPECT_NEAR(basis[0].cwiseAbs2().dot(op.mass) / M.surface_area, 1.0, 1e-10);
    EXPECT_THROW(ground_space_basis(r, M, B.b, 2), DimensionMismatchError);
}

TEST(GroundSpace, PoincareSeriesLieInSpectralCluster) {
    const auto S = make_surface(3);
    const auto B = make_bundle(3, 4);
    const auto M = build_mesh(S, 10.0, 0.2);
    const auto op = assemble(M, B);
    EigenOptions eo;
    eo.shift = 0.5 * B.b;
    const auto r = lowest_eigenpairs(op, 3, eo);
    const MatC V = r.eigenvectors.leftCols(1);
    ASSERT_NEAR(r.eigenvalues[0], B.b, 0.1 * B.b);
    ASSERT_GT(r.eigenvalues[1], 1.1 * B.b);
    for (int i = 0; i < int(S.cusps.size()); ++i) {
        double tail = 0.0;
        const VecC u = sample_poincare(S, M, op, i, B.b, 30.0, &tail);
        EXPECT_GE(retained_fraction(V, op.mass, u), 0.95) << "cusp " << i;
        EXPECT_LT(tail, 1e-2);
    }
}

TEST(Export, CsvHeader) {
    std::ostringstream os;
    write_cusp_form_csv(os, {{0.0, 1.0}}, {SeriesValue{{1.0, 2.0}, 0.5, 3}});
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "x,y,re,im,tail_bound");
}
