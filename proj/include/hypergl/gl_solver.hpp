#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "errors.hpp"
#include "forms.hpp"
#include "mesh.hpp"
#include "spectra.hpp"

namespace hypergl {

// (psi, a) with a = a^b + alpha; psi on the section unknowns, alpha on the free edges.
struct GLState {
    VecC psi;
    VecR alpha;
    double kappa{1.0};
    double r{1.0};
    double energy{0.0};
    double res_psi{0.0};
    double res_alpha{0.0};
};

struct EnergyParts {
    double kinetic{0.0};     // (1/2) int |grad_a psi|^2
    double magnetic{0.0};    // (1/2) |d alpha|^2; the constant-curvature part is in `normal`
    double potential{0.0};   // (kappa^2/4) int (|psi|^4 - 2 r |psi|^2)
    double normal{0.0};      // (1/2) b^2 |Sigma_h| + (kappa^2 r^2 / 4) |Sigma_h|, lumped
    double delta() const { return kinetic + magnetic + potential; }
    double total() const { return delta() + normal; }
};

struct GLGradient {
    VecC psi;
    VecR alpha;
};

struct TracePoint {
    int iter{0};
    double energy{0.0};
    double grad_psi{0.0};
    double grad_alpha{0.0};
    double step{0.0};
};

struct MinimizeOptions {
    double tol{1e-8};
    int max_iter{5000};
    int restart{50};
    double alpha_shift{0.05};
};

struct MinimizeResult {
    GLState state;
    int iterations{0};
    bool converged{false};
    bool line_search_failed{false};
    std::vector<TracePoint> trace;
};

class GLProblem {
public:
    GLProblem(const TruncatedMesh& mesh, const OperatorPair& op, const OneFormSpace& forms, double kappa, double r)
        : M_(mesh), op_(op), F_(forms), kappa_(kappa), r_(r) {
        if (!(kappa > 0.0) || !(r > 0.0)) throw UsageError("GL problem: kappa and r must be positive");
        mesh_lumped_area_ = 0.0;
        for (double m : M_.class_mass) mesh_lumped_area_ += m;
        node_mass_ = VecR::Zero(F_.n_gauge);
        for (int k = 0; k < M_.n_classes; ++k) node_mass_[F_.class_gauge[k]] += M_.class_mass[k];
    }

    const TruncatedMesh& mesh() const { return M_; }
    const OperatorPair& op() const { return op_; }
    const OneFormSpace& forms() const { return F_; }
    double kappa() const { return kappa_; }
    double r() const { return r_; }
    double b() const { return op_.b; }

    double normal_energy_truncated() const {
        return 0.5 * op_.b * op_.b * M_.mesh_area() + kappa_ * kappa_ * r_ * r_ / 4.0 * mesh_lumped_area_;
    }
    double normal_energy_exact() const {
        return 0.5 * (kappa_ * kappa_ * r_ * r_ / 2.0 + op_.b * op_.b) * M_.surface_area;
    }

    EnergyParts energy(const VecC& psi, const VecR& alpha, GLGradient* grad = nullptr) const {
        EnergyParts e;
        const auto kin = kinetic(M_, op_, psi, alpha, grad != nullptr);
        e.kinetic = kin.energy;
        const VecR c = F_.D * alpha;
        e.magnetic = 0.5 * c.cwiseAbs2().dot(F_.W);
        const double k2 = kappa_ * kappa_;
        for (int i = 0; i < op_.size(); ++i) {
            const double a = std::norm(psi[i]);
            e.potential += k2 / 4.0 * op_.mass[i] * (a * a - 2.0 * r_ * a);
        }
        e.normal = normal_energy_truncated();
        if (!std::isfinite(e.delta()))
            throw NumericalError("GL energy is not finite (kinetic " + std::to_string(e.kinetic) + ", magnetic " +
                                 std::to_string(e.magnetic) + ", potential " + std::to_string(e.potential) + ")");
        if (grad) {
            grad->psi = kin.grad_psi;
            for (int i = 0; i < op_.size(); ++i)
                grad->psi[i] += k2 * op_.mass[i] * (std::norm(psi[i]) - r_) * psi[i];
            grad->alpha = kin.grad_alpha + F_.D.transpose() * F_.W.cwiseProduct(c);
        }
        return e;
    }

    // RMS residuals of the two Euler-Lagrange equations (dual norms over |Sigma|).
    std::pair<double, double> residual_norms(const GLGradient& g) const {
        double sp = 0.0, sa = 0.0;
        for (int i = 0; i < op_.size(); ++i) sp += std::norm(g.psi[i]) / op_.mass[i];
        for (int e = 0; e < F_.n_edges; ++e) sa += g.alpha[e] * g.alpha[e] / F_.M1_lumped[e];
        return {std::sqrt(sp / M_.surface_area), std::sqrt(sa / M_.surface_area)};
    }

    GLState make_state(VecC psi, VecR alpha) const {
        GLState s;
        s.psi = std::move(psi);
        s.alpha = std::move(alpha);
        s.kappa = kappa_;
        s.r = r_;
        GLGradient g;
        s.energy = energy(s.psi, s.alpha, &g).total();
        std::tie(s.res_psi, s.res_alpha) = residual_norms(g);
        return s;
    }

    // <|psi|^2> over the exact area
    double density_mean(const VecC& psi) const {
        double acc = 0.0;
        for (int i = 0; i < op_.size(); ++i) acc += op_.mass[i] * std::norm(psi[i]);
        return acc / M_.surface_area;
    }

    GLState normal_state() const { return make_state(VecC::Zero(op_.size()), VecR::Zero(F_.n_edges)); }

    // |d* J| for the supercurrent J = Im(conj(psi) grad_a psi), RMS over |Sigma|.
    double supercurrent_coclosed_residual(const GLState& s) const {
        const VecR J = supercurrent(M_, op_, s.psi, s.alpha);
        const VecR div = F_.D0.transpose() * J;
        double acc = 0.0;
        for (int i = 0; i < F_.n_gauge; ++i)
            if (node_mass_[i] > 0.0) acc += div[i] * div[i] / node_mass_[i];
        return std::sqrt(acc / M_.surface_area);
    }

    // psi -> e^{i chi} psi, alpha -> alpha + d chi; chi per gauge unknown (constant on each cap).
    GLState gauge_transform(const GLState& s, const VecR& chi) const {
        if (chi.size() != F_.n_gauge) throw UsageError("gauge_transform: gauge function has the wrong size");
        VecC psi = s.psi;
        for (int i = 0; i < op_.size(); ++i) psi[i] *= std::polar(1.0, chi[F_.class_gauge[op_.dof_class[i]]]);
        VecR alpha = s.alpha + F_.D0 * chi;
        GLState out = make_state(psi, alpha);
        return out;
    }

    MinimizeResult minimize(const GLState& seed, const MinimizeOptions& opt = {}) const;

private:
    const TruncatedMesh& M_;
    const OperatorPair& op_;
    const OneFormSpace& F_;
    double kappa_, r_;
    double mesh_lumped_area_{0.0};
    VecR node_mass_;
};

namespace detail {

inline double real_dot(const GLGradient& a, const GLGradient& b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.psi.size(); ++i) s += (std::conj(a.psi[i]) * b.psi[i]).real();
    return s + a.alpha.dot(b.alpha);
}

}  // namespace detail

// Preconditioned Polak-Ribiere (PR+) nonlinear conjugate gradients in Coulomb gauge. The seed
// is gauge transformed so that alpha is co-closed; the connection preconditioner
// P (D^T W D + tau M1)^-1 P^T, with P the M1-orthogonal projector onto co-closed forms, keeps
// every iterate in that slice.
inline MinimizeResult GLProblem::minimize(const GLState& seed, const MinimizeOptions& opt) const {
    MinimizeResult res;
    if (seed.psi.size() != op_.size() || seed.alpha.size() != F_.n_edges)
        throw UsageError("minimize: seed does not match mesh");
    VecC psi = seed.psi;
    VecR alpha = seed.alpha;
    {
        const VecR chi = -F_.solve_gauge(F_.D0.transpose() * (F_.M1 * alpha));
        for (int i = 0; i < op_.size(); ++i) psi[i] *= std::polar(1.0, chi[F_.class_gauge[op_.dof_class[i]]]);
        alpha += F_.D0 * chi;
    }

    Eigen::SimplicialLLT<SparseC> pk(op_.K);
    if (pk.info() != Eigen::Success) throw NumericalError("minimize: section preconditioner factorization failed");
    const double tau = opt.alpha_shift * F_.A.diagonal().mean() / F_.M1.diagonal().mean();
    Eigen::SimplicialLLT<SparseR> pa(SparseR(F_.A + tau * F_.M1));
    if (pa.info() != Eigen::Success) throw NumericalError("minimize: connection preconditioner factorization failed");
    auto precondition = [&](const GLGradient& g) {
        GLGradient z;
        z.psi = pk.solve(g.psi);
        z.alpha = F_.project_coclosed(pa.solve(F_.project_covector(g.alpha)));
        return z;
    };

    GLGradient g;
    EnergyParts E = energy(psi, alpha, &g);
    auto [rp, ra] = residual_norms(g);
    res.trace.push_back({0, E.total(), rp, ra, 0.0});
    auto finish = [&](bool conv) {
        res.converged = conv;
        res.state = make_state(psi, alpha);
        return res;
    };
    if (rp < opt.tol && ra < opt.tol) return finish(true);

    GLGradient z = precondition(g);
    GLGradient d{-z.psi, -z.alpha};
    double gz = detail::real_dot(g, z);
    double step = 1.0;
    int since_restart = 0;

    for (int it = 1; it <= opt.max_iter; ++it) {
        double slope0 = detail::real_dot(g, d);
        if (!(slope0 < 0.0)) {
            d = {-z.psi, -z.alpha};
            slope0 = -gz;
            since_restart = 0;
        }
        // line search on phi(t) = E(x + t d): secant iterations on phi', Armijo safeguard
        const double f0 = E.delta();
        double t_best = 0.0, f_best = f0;
        GLGradient g_best = g;
        EnergyParts E_best = E;
        double t_prev = 0.0, s_prev = slope0;
        double s_best = std::abs(slope0);
        double t = step;
        const double fscale = std::max(1.0, std::abs(f0));
        for (int ls = 0; ls < 40; ++ls) {
            GLGradient gt;
            const VecC pt = psi + t * d.psi;
            const VecR at = alpha + t * d.alpha;
            const EnergyParts Et = energy(pt, at, &gt);
            const double ft = Et.delta();
            const double st = detail::real_dot(gt, d);
            // below the noise floor of the energy sum only the slope is trusted
            const bool armijo = ft <= f0 + 1e-4 * t * slope0 || ft <= f0 + 1e-12 * fscale;
            const double noise = 1e-12 * fscale;
            if (armijo && (ft < f_best - noise || (ft <= f_best + noise && std::abs(st) < s_best))) {
                s_best = std::abs(st);
                t_best = t;
                f_best = ft;
                g_best = gt;
                E_best = Et;
            }
            if (armijo && std::abs(st) <= 0.1 * std::abs(slope0)) break;
            double tn;
            if (!armijo) {
                tn = 0.5 * t;
            } else if (st < 0.0) {
                // still descending: extrapolate by secant, at most quadrupling
                const double denom = st - s_prev;
                tn = denom > 0.0 ? t - st * (t - t_prev) / denom : 4.0 * t;
                tn = std::min(tn, 4.0 * t);
                tn = std::max(tn, 1.1 * t);
            } else {
                const double denom = st - s_prev;
                tn = denom > 0.0 ? t - st * (t - t_prev) / denom : 0.5 * (t + t_prev);
                const double lo = std::min(t, t_prev), hi = std::max(t, t_prev);
                if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
            }
            if (armijo || st < 0.0) {
                t_prev = t;
                s_prev = st;
            }
            t = tn;
            if (t < 1e-20) break;
        }
        if (t_best == 0.0) {
            if (since_restart > 0) {
                // retry along steepest preconditioned descent
                d = {-z.psi, -z.alpha};
                since_restart = 0;
                --it;
                step = 1.0;
                if (res.trace.size() > 1 && res.trace.back().step == 0.0) {
                    res.line_search_failed = true;
                    break;
                }
                res.trace.push_back({it, E.total(), rp, ra, 0.0});
                continue;
            }
            res.line_search_failed = true;
            break;
        }
        psi += t_best * d.psi;
        alpha += t_best * d.alpha;
        E = E_best;
        const GLGradient g_old = g, z_old = z;
        g = g_best;
        std::tie(rp, ra) = residual_norms(g);
        res.iterations = it;
        res.trace.push_back({it, E.total(), rp, ra, t_best});
        step = t_best;
        if (rp < opt.tol && ra < opt.tol) return finish(true);

        z = precondition(g);
        const double gz_new = detail::real_dot(g, z);
        GLGradient dz{z.psi - z_old.psi, z.alpha - z_old.alpha};
        double beta = std::max(0.0, detail::real_dot(g, dz) / gz);
        gz = gz_new;
        if (++since_restart >= opt.restart) {
            beta = 0.0;
            since_restart = 0;
        }
        d = {-z.psi + beta * d.psi, -z.alpha + beta * d.alpha};
    }
    return finish(false);
}

// ---------------------------------------------------------------- stability

struct HessianBottom {
    double bottom{0.0};        // min of the two blocks, rescaled by 1/r
    double section_block{0.0}; // (lambda_1 - kappa^2 r) / r
    double connection_block{0.0};
};

// Smallest positive eigenvalue of (D^T W D, M1) on co-exact forms, by inverse iteration.
inline double coexact_bottom(const OneFormSpace& F, const std::vector<VecR>& harmonic, std::uint64_t seed = 3,
                             int iters = 60) {
    const double tau = 1e-3 * F.A.diagonal().mean() / F.M1.diagonal().mean();
    Eigen::SimplicialLLT<SparseR> llt(SparseR(F.A + tau * F.M1));
    if (llt.info() != Eigen::Success) throw NumericalError("coexact_bottom: factorization failed");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    VecR v(F.n_edges);
    for (int i = 0; i < F.n_edges; ++i) v[i] = gauss(rng);
    auto clean = [&](VecR x) {
        x = F.project_coclosed(x);
        for (const auto& h : harmonic) x -= h.dot(F.M1 * x) * h;
        return VecR(x / std::sqrt(F.norm2(x)));
    };
    v = clean(v);
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
        v = clean(llt.solve(F.M1 * v));
        lam = v.dot(F.A * v);
    }
    return lam;
}

// Both blocks scale like 1/r in the rescaled problem; lambda1 and the co-exact bottom do not
// depend on kappa, so sweeps pass them in.
inline HessianBottom hessian_bottom(const GLProblem& P, double lambda1, double coexact) {
    HessianBottom h;
    h.section_block = (lambda1 - P.kappa() * P.kappa() * P.r()) / P.r();
    h.connection_block = coexact / P.r();
    h.bottom = std::min(h.section_block, h.connection_block);
    return h;
}

inline HessianBottom hessian_bottom(const GLProblem& P, const std::vector<VecR>& harmonic) {
    EigenOptions eo;
    eo.shift = 0.5 * P.b();
    const auto sr = lowest_eigenpairs(P.op(), 1, eo);
    return hessian_bottom(P, sr.eigenvalues.at(0), coexact_bottom(P.forms(), harmonic));
}

// ---------------------------------------------------------------- unscaling

struct PhysicalFields {
    VecC psi;      // r^-1/2 psi
    VecR alpha;    // connection deviation, same geometric 1-form in rescaled coordinates
    double r{1.0};
    double energy{0.0};  // E(psi~, a~, h_r)
};

// Energy of (psi~, a~) in the metric h_r = r h_1 with the unit-density potential.
inline double energy_in_metric(const GLProblem& P, const VecC& psi_t, const VecR& alpha, double r) {
    const auto& M = P.mesh();
    const auto& op = P.op();
    const auto& F = P.forms();
    // Dirichlet energy is conformally invariant
    const double kin = kinetic(M, op, psi_t, alpha, false).energy;
    // |d a|^2_{h_r} omega_r = r^-1 |d a|^2_{h_1} omega_1
    const VecR c = F.D * alpha;
    const double curv = (0.5 * c.cwiseAbs2().dot(F.W) + 0.5 * op.b * op.b * M.mesh_area()) / r;
    double pot = 0.0, area = 0.0;
    for (double m : M.class_mass) area += m;
    for (int i = 0; i < op.size(); ++i) {
        const double a = std::norm(psi_t[i]);
        pot += op.mass[i] * ((a - 1.0) * (a - 1.0) - 1.0);
    }
    pot = P.kappa() * P.kappa() / 4.0 * r * (pot + area);
    return kin + curv + pot;
}

inline PhysicalFields unscale(const GLProblem& P, const GLState& s) {
    if (!(s.r > 0.0)) throw UsageError("unscale: r must be positive");
    PhysicalFields f;
    f.r = s.r;
    f.psi = s.psi / std::sqrt(s.r);
    f.alpha = s.alpha;
    f.energy = energy_in_metric(P, f.psi, f.alpha, s.r);
    return f;
}

inline void write_trace_csv(std::ostream& os, const std::vector<TracePoint>& trace) {
    os.precision(17);
    os << "iter,energy,grad_norm_psi,grad_norm_alpha,step\n";
    for (const auto& t : trace)
        os << t.iter << ',' << t.energy << ',' << t.grad_psi << ',' << t.grad_alpha << ',' << t.step << '\n';
}

}  // namespace hypergl
