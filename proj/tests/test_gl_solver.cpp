#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "hypergl/gl_solver.hpp"
#include "hypergl/pipeline.hpp"

using namespace hypergl;

namespace {

struct Setup {
    GroundSpace g;
    BranchContext bc;
    double lambda1{0.0};
};

const Setup& setup() {
    static const Setup s = [] {
        RunConfig c;
        c.Y = 10.0;
        c.h = 0.2;
        c.eigen_count = 3;
        Setup out{build_ground_space(c), {}, 0.0};
        out.bc = build_branch_context(out.g);
        out.lambda1 = out.g.spectrum.eigenvalues[0];
        return out;
    }();
    return s;
}

double directional(const GLGradient& g, const VecC& dp, const VecR& da) {
    double d = g.alpha.dot(da);
    for (Eigen::Index i = 0; i < dp.size(); ++i) d += (std::conj(g.psi[i]) * dp[i]).real();
    return d;
}

GLState branch_seed(const GLProblem& P, const Setup& s) {
    const auto s2 = s_squared(P.r(), P.kappa(), s.g.B.b, s.bc.abrikosov.beta);
    const auto seed = leading_order_state(std::sqrt(s2.s2), s.bc.xi, s.bc.eta.eta);
    return P.make_state(seed.psi, seed.alpha);
}

}  // namespace

TEST(Energy, NormalStateValues) {
    const auto& s = setup();
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, 1.0);
    EXPECT_NEAR(P.normal_energy_exact(), 18 * kPi, 1e-12);
    const auto e = P.energy(VecC::Zero(s.g.op.size()), VecR::Zero(s.bc.F.n_edges));
    EXPECT_EQ(e.delta(), 0.0);
    EXPECT_DOUBLE_EQ(e.total(), P.normal_energy_truncated());
    // the truncated mesh misses only the thin cusp tails
    EXPECT_NEAR(P.normal_energy_truncated() / P.normal_energy_exact(), 1.0, 0.05);
    EXPECT_LT(P.normal_energy_truncated(), P.normal_energy_exact());
}

TEST(Energy, RejectsBadParametersAndNaN) {
    const auto& s = setup();
    EXPECT_THROW(GLProblem(s.g.M, s.g.op, s.bc.F, 0.0, 1.0), UsageError);
    EXPECT_THROW(GLProblem(s.g.M, s.g.op, s.bc.F, 1.0, -1.0), UsageError);
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, 1.0);
    VecC psi = VecC::Zero(s.g.op.size());
    psi[3] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(P.energy(psi, VecR::Zero(s.bc.F.n_edges)), NumericalError);
}

TEST(Gradient, MatchesCentralDifferences) {
    const auto& s = setup();
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, 1.05);
    const auto x = random_perturbation(P, 0.3, 17);
    GLGradient g;
    P.energy(x.psi, x.alpha, &g);
    std::mt19937_64 rng(23);
    std::normal_distribution<double> gauss;
    const double eps = 1e-5;
    for (int t = 0; t < 20; ++t) {
        VecC dp(x.psi.size());
        for (auto& v : dp) v = cplx(gauss(rng), gauss(rng));
        VecR da(x.alpha.size());
        for (auto& v : da) v = gauss(rng);
        const double fd = (P.energy(x.psi + eps * dp, x.alpha + eps * da).delta() -
                           P.energy(x.psi - eps * dp, x.alpha - eps * da).delta()) /
                          (2 * eps);
        const double an = directional(g, dp, da);
        EXPECT_LT(std::abs(fd - an), 1e-6 * std::abs(an)) << "direction " << t;
    }
}

TEST(Gradient, VanishesAlongGaugeDirections) {
    const auto& s = setup();
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, 1.05);
    const auto x = random_perturbation(P, 0.3, 4);
    GLGradient g;
    P.energy(x.psi, x.alpha, &g);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> gauss;
    VecR chi(s.bc.F.n_gauge);
    for (auto& v : chi) v = gauss(rng);
    VecC dp(x.psi.size());
    for (int i = 0; i < s.g.op.size(); ++i) dp[i] = cplx(0.0, chi[s.bc.F.class_gauge[s.g.op.dof_class[i]]]) * x.psi[i];
    const VecR da = s.bc.F.D0 * chi;
    const double scale = std::sqrt(directional(g, g.psi, g.alpha)) * std::sqrt(dp.squaredNorm() + da.squaredNorm());
    EXPECT_LT(std::abs(directional(g, dp, da)), 1e-10 * scale);
}

TEST(Gauge, TransformPreservesInvariants) {
    const auto& s = setup();
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, 1.05);
    const auto x = random_perturbation(P, 0.3, 5);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    VecR chi(s.bc.F.n_gauge);
    for (auto& v : chi) v = u(rng);
    const auto y = P.gauge_transform(x, chi);
    EXPECT_NEAR(y.energy, x.energy, 1e-12 * std::abs(x.energy));
    EXPECT_LT((y.psi.cwiseAbs() - x.psi.cwiseAbs()).norm(), 1e-13);
    EXPECT_LT((s.bc.F.D * (y.alpha - x.alpha)).norm(), 1e-12);
    EXPECT_THROW(P.gauge_transform(x, VecR::Zero(3)), UsageError);
}

TEST(Minimize, CriticalSeedReturnsImmediately) {
    const auto& s = setup();
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, 1.05);
    const auto res = P.minimize(P.normal_state());
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.iterations, 0);
    EXPECT_EQ(res.state.energy, P.normal_energy_truncated());
}

TEST(Minimize, BranchBelowNormalEnergy) {
    const auto& s = setup();
    const double r = (s.g.B.b + 0.05);
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, r);
    const auto res = P.minimize(branch_seed(P, s));
    ASSERT_TRUE(res.converged);
    EXPECT_FALSE(res.line_search_failed);
    EXPECT_LT(res.state.energy, P.normal_energy_truncated());
    EXPECT_LT(res.state.res_psi, 1e-8);
    EXPECT_LT(res.state.res_alpha, 1e-8);
    EXPECT_LT(P.supercurrent_coclosed_residual(res.state), 1e-7);
    ASSERT_FALSE(res.trace.empty());
    for (std::size_t i = 1; i < res.trace.size(); ++i)
        EXPECT_LE(res.trace[i].energy, res.trace[i - 1].energy + 1e-12 * std::abs(res.trace[i - 1].energy)) << "iter " << i;
    // leading-order density, measured from the discrete onset lambda_1
    const double s2 = s_squared(r, 1.0, s.lambda1, s.bc.abrikosov.beta).s2;
    EXPECT_NEAR(P.density_mean(res.state.psi) / s2, 1.0, 0.1);
}

TEST(Minimize, GaugeTransformedSeedReachesSameEnergy) {
    const auto& s = setup();
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, s.g.B.b + 0.04);
    const auto seed = branch_seed(P, s);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VecR chi(s.bc.F.n_gauge);
    for (auto& v : chi) v = u(rng);
    const auto a = P.minimize(seed);
    const auto b = P.minimize(P.gauge_transform(seed, chi));
    ASSERT_TRUE(a.converged && b.converged);
    EXPECT_NEAR(a.state.energy, b.state.energy, 1e-10 * std::abs(a.state.energy));
    EXPECT_NEAR(P.density_mean(a.state.psi), P.density_mean(b.state.psi), 1e-6 * P.density_mean(a.state.psi));
}

TEST(Minimize, DistinctRandomSeedsAgreeOnGaugeInvariants) {
    const auto& s = setup();
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, s.g.B.b + 0.05);
    const auto a = P.minimize(random_perturbation(P, 0.05, 1));
    const auto b = P.minimize(random_perturbation(P, 0.05, 2));
    ASSERT_TRUE(a.converged && b.converged);
    EXPECT_LT(a.state.energy, P.normal_energy_truncated());
    EXPECT_NEAR(a.state.energy, b.state.energy, 1e-10 * std::abs(a.state.energy));
    EXPECT_NEAR(P.density_mean(a.state.psi), P.density_mean(b.state.psi), 1e-6 * P.density_mean(a.state.psi));
    const double c1 = s.bc.F.curl_energy(a.state.alpha), c2 = s.bc.F.curl_energy(b.state.alpha);
    EXPECT_NEAR(c1, c2, 1e-5 * c1);
}

TEST(Minimize, DeterministicForFixedSeed) {
    const auto& s = setup();
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 0.9, 1.0);
    MinimizeOptions mo;
    mo.max_iter = 40;
    const auto a = P.minimize(random_perturbation(P, 1e-2, 2), mo);
    const auto b = P.minimize(random_perturbation(P, 1e-2, 2), mo);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_EQ(a.state.psi, b.state.psi);
    EXPECT_EQ(a.state.alpha, b.state.alpha);
}

TEST(Minimize, StableNormalStateAttractsRandomPerturbation) {
    const auto& s = setup();
    // b_r = lambda_1 / r > kappa^2
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 0.9, 1.0);
    const auto seed = random_perturbation(P, 1e-2, 1);
    EXPECT_NEAR(P.density_mean(seed.psi), 1e-4, 1e-12);
    const auto res = P.minimize(seed);
    EXPECT_LT(P.density_mean(res.state.psi), 1e-6);
    EXPECT_NEAR(res.state.energy, P.normal_energy_truncated(), 1e-6);
}

TEST(Seed, SectionResidualIsThirdOrder) {
    const auto& s = setup();
    // put the seed exactly at the discrete onset so the linear part of the residual vanishes
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, s.lambda1);
    std::vector<double> res;
    for (double amp : {0.05, 0.1, 0.2}) {
        const auto seed = leading_order_state(amp, s.bc.xi, s.bc.eta.eta);
        res.push_back(P.make_state(seed.psi, seed.alpha).res_psi);
    }
    EXPECT_NEAR(std::log2(res[1] / res[0]), 3.0, 0.3);
    EXPECT_NEAR(std::log2(res[2] / res[1]), 3.0, 0.3);
}

TEST(Seed, SupercurrentNearlyCoclosed) {
    const auto& s = setup();
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, 1.0);
    const auto seed = leading_order_state(1.0, s.bc.xi, s.bc.eta.eta);
    const auto st = P.make_state(seed.psi, seed.alpha);
    const VecR J = supercurrent(s.g.M, s.g.op, st.psi, st.alpha);
    const double jn = std::sqrt(J.dot(s.bc.F.M1_lumped.cwiseInverse().cwiseProduct(J)) / s.g.M.surface_area);
    EXPECT_LT(P.supercurrent_coclosed_residual(st), 0.05 * jn);
}

TEST(Hessian, SignClassifiesStability) {
    const auto& s = setup();
    const double cx = coexact_bottom(s.bc.F, s.bc.harmonic);
    EXPECT_GT(cx, 0.0);
    const GLProblem stable(s.g.M, s.g.op, s.bc.F, 0.9, 1.0);
    const auto a = hessian_bottom(stable, s.lambda1, cx);
    EXPECT_NEAR(a.section_block, s.lambda1 - 0.81, 1e-12);
    EXPECT_NEAR(a.section_block, 1.0 - 0.81, 0.05);
    EXPECT_GT(a.bottom, 0.0);
    const GLProblem unstable(s.g.M, s.g.op, s.bc.F, 1.1, 1.0);
    EXPECT_LT(hessian_bottom(unstable, s.lambda1, cx).bottom, 0.0);
    const GLProblem onset(s.g.M, s.g.op, s.bc.F, 1.0, s.lambda1);
    EXPECT_NEAR(hessian_bottom(onset, s.lambda1, cx).section_block, 0.0, 1e-14);
    // the full evaluation agrees with the precomputed one
    EXPECT_NEAR(hessian_bottom(stable, s.bc.harmonic).bottom, a.bottom, 1e-8);
}

TEST(Unscale, EnergyRelation) {
    const auto& s = setup();
    for (double r : {0.8, 1.0, 1.3}) {
        const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, r);
        const auto x = random_perturbation(P, 0.4, 21);
        const auto f = unscale(P, x);
        EXPECT_NEAR(r * f.energy, x.energy, 1e-12 * std::abs(x.energy)) << "r=" << r;
        if (r == 1.0) {
            EXPECT_EQ(f.psi, x.psi);
            EXPECT_EQ(f.alpha, x.alpha);
        }
    }
    const GLProblem P(s.g.M, s.g.op, s.bc.F, 1.0, 1.0);
    auto bad = P.normal_state();
    bad.r = 0.0;
    EXPECT_THROW(unscale(P, bad), UsageError);
}

TEST(Export, TraceCsvHeader) {
    std::ostringstream os;
    write_trace_csv(os, {TracePoint{0, 1.0, 0.1, 0.2, 0.0}});
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "iter,energy,grad_norm_psi,grad_norm_alpha,step");
}
