#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "hypergl/bundle.hpp"
#include "hypergl/mesh.hpp"
#include "hypergl/spectra.hpp"

using namespace hypergl;

namespace {

VecC random_vector(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    VecC v(n);
    for (int i = 0; i < n; ++i) v[i] = cplx(g(rng), g(rng));
    return v;
}

struct Gamma6 {
    CongruenceSurface S = make_surface(6);
    BundleData B = make_bundle(6, 12);
    TruncatedMesh M = build_mesh(S, 10.0, 0.2);
    OperatorPair op = assemble(M, B);
};

const Gamma6& gamma6() {
    static const Gamma6 g;
    return g;
}

}  // namespace

TEST(Assemble, HermitianOnGamma2) {
    const auto S = make_surface(2);
    const auto M = build_mesh(S, 10.0, 0.2);
    const auto op = assemble(M, make_bundle(2, 2));
    EXPECT_LT(op.hermiticity_residual(), 1e-12);
    EXPECT_GT(op.mass.minCoeff(), 0.0);
}

TEST(Assemble, ZeroFieldHasUnitLinksAndConstantKernel) {
    const auto S = make_surface(3);
    const auto M = build_mesh(S, 6.0, 0.25);
    AssembleOptions neumann;
    neumann.dirichlet_caps = false;
    const auto op = assemble(M, 0.0, neumann);
    for (int k = 0; k < op.K.outerSize(); ++k)
        for (SparseC::InnerIterator it(op.K, k); it; ++it) EXPECT_EQ(it.value().imag(), 0.0);
    const VecC one = VecC::Ones(op.size());
    EXPECT_LT((op.K * one).norm(), 1e-10 * std::sqrt(double(op.size())));
    EXPECT_NEAR(op.rayleigh(one), 0.0, 1e-12);
}

TEST(Assemble, RejectsBundleOnAnotherSurface) {
    const auto M = build_mesh(make_surface(3), 6.0, 0.3);
    EXPECT_THROW(assemble(M, make_bundle(6, 12)), UsageError);
}

TEST(Assemble, RayleighQuotientBoundedBelowByB) {
    const auto& g = gamma6();
    for (std::uint64_t s = 1; s <= 5; ++s) EXPECT_GT(g.op.rayleigh(random_vector(g.op.size(), s)), 0.9 * g.B.b);
}

TEST(Assemble, GaugeCovariance) {
    const auto& g = gamma6();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    std::vector<double> chi(g.M.n_classes);
    for (auto& c : chi) c = u(rng);
    AssembleOptions opt;
    opt.edge_alpha.resize(g.M.edge_classes.size());
    for (std::size_t e = 0; e < g.M.edge_classes.size(); ++e)
        opt.edge_alpha[e] = chi[g.M.edge_classes[e][1]] - chi[g.M.edge_classes[e][0]];
    const auto op2 = assemble(g.M, g.B, opt);
    EigenOptions eo;
    eo.shift = 0.5;
    const auto a = lowest_eigenpairs(g.op, 3, eo);
    const auto b = lowest_eigenpairs(op2, 3, eo);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(a.eigenvalues[i], b.eigenvalues[i], 1e-10);
}

TEST(Eigen, Gamma6GroundStateAndGap) {
    const auto& g = gamma6();
    EigenOptions eo;
    eo.shift = 0.5;
    const auto r = lowest_eigenpairs(g.op, 8, eo);
    ASSERT_TRUE(r.converged);
    EXPECT_TRUE(std::is_sorted(r.eigenvalues.begin(), r.eigenvalues.end()));
    for (double res : r.residuals) EXPECT_LT(res, 1e-8);
    const auto s = summarize_spectrum(r.eigenvalues, 1.0);
    EXPECT_EQ(s.in_cluster, 1);
    EXPECT_EQ(s.in_gap, 0);
    EXPECT_NEAR(r.eigenvalues[0], 1.0, 0.05);
    EXPECT_GT(r.eigenvalues[1], 1.2);
    // mass-orthonormal eigenvectors
    const MatC G = r.eigenvectors.adjoint() * g.op.mass.cast<cplx>().asDiagonal() * r.eigenvectors;
    EXPECT_LT((G - MatC::Identity(8, 8)).norm(), 1e-10);
}

TEST(Eigen, DeterministicForFixedSeed) {
    const auto& g = gamma6();
    EigenOptions eo;
    eo.shift = 0.5;
    const auto a = lowest_eigenpairs(g.op, 2, eo);
    const auto b = lowest_eigenpairs(g.op, 2, eo);
    EXPECT_EQ(a.eigenvalues, b.eigenvalues);
    EXPECT_EQ(a.eigenvectors, b.eigenvectors);
}

TEST(Eigen, CountLimits) {
    const auto& g = gamma6();
    EXPECT_THROW(lowest_eigenpairs(g.op, 0), UsageError);
    EXPECT_THROW(lowest_eigenpairs(g.op, 21), UsageError);
}

TEST(Eigen, RaisingTheCutoffDoesNotRaiseTheGroundEigenvalue) {
    const auto S = make_surface(6);
    const auto B = make_bundle(6, 12);
    EigenOptions eo;
    eo.shift = 0.5;
    const double l10 = lowest_eigenpairs(assemble(build_mesh(S, 10.0, 0.25), B), 1, eo).eigenvalues[0];
    const double l20 = lowest_eigenpairs(assemble(build_mesh(S, 20.0, 0.25), B), 1, eo).eigenvalues[0];
    // the y-grid is regenerated for each cutoff, so allow noise at the discretization scale
    EXPECT_LE(l20, l10 + 0.1 * 0.25 * 0.25);
}

TEST(Cylinder, HardyBound) {
    const auto C = cylinder_operator(0, 1.0, 1.0, 40.0, 4000);
    EXPECT_GE(C.eigenvalues().front(), 1.25 - 1e-3);
}

TEST(Cylinder, NonzeroModesDominateZeroMode) {
    const auto e0 = cylinder_operator(0, 1.0, 1.0, 10.0, 400).eigenvalues();
    for (int k : {1, 2, -1}) {
        const auto ek = cylinder_operator(k, 1.0, 1.0, 10.0, 400).eigenvalues();
        for (std::size_t i = 0; i < 20; ++i) EXPECT_GE(ek[i], e0[i] - 1e-9);
    }
}

TEST(Cylinder, SeedResidualIsSecondOrder) {
    std::vector<double> res;
    for (int n : {200, 400, 800}) {
        const auto C = cylinder_operator(1, 1.0, 1.0, 12.0, n);
        std::vector<double> f(C.y.size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::abs(exact_cylinder_eigenfunction({0.0, C.y[i]}, 1.0));
        res.push_back(C.residual(f, 1.0));
    }
    EXPECT_NEAR(std::log2(res[0] / res[1]), 2.0, 0.2);
    EXPECT_NEAR(std::log2(res[1] / res[2]), 2.0, 0.2);
}

TEST(Cylinder, ExactEigenfunctionValue) {
    EXPECT_NEAR(std::abs(exact_cylinder_eigenfunction({0.0, 1.0}, 1.0)), std::exp(-2 * kPi), 1e-15);
    EXPECT_NEAR(std::exp(-2 * kPi), 1.8674e-3, 1e-7);
}

TEST(Symbolic, SeedIsExactEigenfunction) { EXPECT_TRUE(seed_symbolic_check()); }

TEST(Symbolic, GeneralizedModes) {
    EXPECT_DOUBLE_EQ(generalized_mode_check(0, 1), 1.25);
    EXPECT_DOUBLE_EQ(generalized_mode_check(1, 0), 1.25);
    EXPECT_DOUBLE_EQ(generalized_mode_check(0, 0), 0.25);
    EXPECT_THROW(generalized_mode_check(-1, 0), UsageError);
}

TEST(Weitzenbock, GroundStateIsNearlyHolomorphicAndResidualShrinks) {
    const auto S = make_surface(6);
    const auto B = make_bundle(6, 12);
    EigenOptions eo;
    eo.shift = 0.5;
    std::vector<double> wres;
    for (double h : {0.2, 0.1}) {
        const auto M = build_mesh(S, 10.0, h);
        const auto op = assemble(M, B);
        const auto r = lowest_eigenpairs(op, 1, eo);
        const VecC v = r.eigenvectors.col(0);
        EXPECT_LT(dbar_energy(M, op, v), 0.1);
        wres.push_back(weitzenbock_residual(M, op, {v}));
    }
    EXPECT_LT(wres[1], 0.4 * wres[0]);
}

TEST(Report, JsonFields) {
    const auto& g = gamma6();
    EigenOptions eo;
    eo.shift = 0.5;
    const auto r = lowest_eigenpairs(g.op, 2, eo);
    const auto j = spectral_report(g.M, g.B, r);
    EXPECT_EQ(j["N"], 6);
    EXPECT_EQ(j["degree"], 12);
    EXPECT_DOUBLE_EQ(j["ess_bottom_theory"].get<double>(), 1.25);
    EXPECT_EQ(j["eigenvalues"].size(), 2u);
    EXPECT_EQ(j["multiplicity_below_ess"], 1);
}
