#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "errors.hpp"
#include "mesh.hpp"
#include "spectra.hpp"

namespace hypergl {

using SparseR = Eigen::SparseMatrix<double>;

// Discrete 1-forms on the free (non cap-ring) edges. Cochains:
//   gauge functions chi: one value per free class plus one constant per cap,
//   D0: chi -> edge differences, D: edge values -> triangle circulations.
// Metric data: W_T = int_T y^2 / A_T^2 (curvature weight, so |d alpha|^2 = sum W C^2)
// and the Whitney mass M1, which is the hyperbolic L^2 product of 1-forms by
// conformal invariance.
struct OneFormSpace {
    int n_edges{0}, n_tris{0}, n_gauge{0};
    std::vector<int> class_gauge;  // gauge unknown of each class
    SparseR D, D0, M1, A;           // A = D^T W D
    VecR W, M1_lumped;

    using Factor = Eigen::SimplicialLLT<SparseR>;
    std::shared_ptr<Factor> L0;     // D0^T M1 D0 with the first cap constant removed
    std::shared_ptr<Factor> Ldual;  // D M1_lumped^-1 D^T with one triangle removed
    int pinned_gauge{0};

    VecR curl(const VecR& alpha) const { return D * alpha; }
    double curl_energy(const VecR& alpha) const {
        const VecR c = D * alpha;
        return c.cwiseAbs2().dot(W);
    }
    double norm2(const VecR& v) const { return v.dot(M1 * v); }

    // Remove the M1-orthogonal projection onto exact forms.
    VecR project_coclosed(const VecR& v) const { return v - D0 * solve_gauge(D0.transpose() * (M1 * v)); }

    // Remove the oblique "M1 times exact" part of a covector so that D0^T J = 0.
    VecR project_covector(const VecR& J) const { return J - M1 * (D0 * solve_gauge(D0.transpose() * J)); }

    VecR solve_gauge(const VecR& rhs) const {
        VecR r(n_gauge - 1);
        for (int i = 0, j = 0; i < n_gauge; ++i)
            if (i != pinned_gauge) r[j++] = rhs[i];
        const VecR s = L0->solve(r);
        VecR out = VecR::Zero(n_gauge);
        for (int i = 0, j = 0; i < n_gauge; ++i)
            if (i != pinned_gauge) out[i] = s[j++];
        return out;
    }

    // Closed part of v: subtract M1_lumped^-1 D^T mu with D (v - ...) = 0.
    VecR closed_part(const VecR& v) const {
        const VecR rhs = D * v;
        VecR r = rhs.tail(n_tris - 1);
        const VecR mu_t = Ldual->solve(r);
        VecR mu = VecR::Zero(n_tris);
        mu.tail(n_tris - 1) = mu_t;
        return v - (D.transpose() * mu).cwiseQuotient(M1_lumped);
    }
};

namespace detail {

inline void whitney_triangle_mass(const TriangleGeometry& T, double out[3][3]) {
    std::array<std::array<double, 2>, 3> g{};
    for (int k = 0; k < 3; ++k) {
        const cplx a = T.p[(k + 1) % 3], c = T.p[(k + 2) % 3];
        g[k] = {(a.imag() - c.imag()) / (2.0 * T.area), (c.real() - a.real()) / (2.0 * T.area)};
    }
    auto G = [&](int a, int b) { return g[a][0] * g[b][0] + g[a][1] * g[b][1]; };
    auto L = [&](int a, int b) { return T.area * (a == b ? 2.0 : 1.0) / 12.0; };
    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
            const int p = (k + 1) % 3, q = (k + 2) % 3, r = (l + 1) % 3, s = (l + 2) % 3;
            out[k][l] = L(p, r) * G(q, s) - L(p, s) * G(q, r) - L(q, r) * G(p, s) + L(q, s) * G(p, r);
        }
}

}  // namespace detail

inline OneFormSpace make_one_form_space(const TruncatedMesh& M) {
    OneFormSpace F;
    F.n_edges = M.n_edge_dofs;
    F.n_tris = int(M.tris.size());
    // gauge unknowns: free classes first, then one per cap
    F.class_gauge.assign(M.n_classes, -1);
    int g = 0;
    for (int k = 0; k < M.n_classes; ++k)
        if (!M.class_dirichlet[k]) F.class_gauge[k] = g++;
    const int first_cap = g;
    const int per = M.nodes_per_cell();
    for (std::size_t c = 0; c < M.cells.size(); ++c)
        for (int i = 0; i <= M.nx; ++i) {
            const int cls = M.local_class[c * per + M.template_index(i, M.ny)];
            F.class_gauge[cls] = first_cap + M.cell_cusp[c];
        }
    F.n_gauge = first_cap + int(M.n_cusps);
    F.pinned_gauge = first_cap;

    std::vector<Eigen::Triplet<double>> td, tm, t0;
    F.W.resize(F.n_tris);
    for (int t = 0; t < F.n_tris; ++t) {
        const auto& T = M.tris[t];
        F.W[t] = T.curl_weight;
        double mt[3][3];
        detail::whitney_triangle_mass(T, mt);
        for (int k = 0; k < 3; ++k) {
            const int e = M.edge_dof[T.edge[k]];
            if (e < 0) continue;
            td.emplace_back(t, e, double(T.sign[k]));
            for (int l = 0; l < 3; ++l) {
                const int f = M.edge_dof[T.edge[l]];
                if (f >= 0) tm.emplace_back(e, f, T.sign[k] * T.sign[l] * mt[k][l]);
            }
        }
    }
    for (std::size_t e = 0; e < M.edge_classes.size(); ++e) {
        const int d = M.edge_dof[e];
        if (d < 0) continue;
        t0.emplace_back(d, F.class_gauge[M.edge_classes[e][1]], 1.0);
        t0.emplace_back(d, F.class_gauge[M.edge_classes[e][0]], -1.0);
    }
    F.D.resize(F.n_tris, F.n_edges);
    F.D.setFromTriplets(td.begin(), td.end());
    F.M1.resize(F.n_edges, F.n_edges);
    F.M1.setFromTriplets(tm.begin(), tm.end());
    F.D0.resize(F.n_edges, F.n_gauge);
    F.D0.setFromTriplets(t0.begin(), t0.end());
    F.A = SparseR(F.D.transpose() * F.W.asDiagonal() * F.D);
    F.M1_lumped = VecR::Zero(F.n_edges);
    for (int k = 0; k < F.M1.outerSize(); ++k)
        for (SparseR::InnerIterator it(F.M1, k); it; ++it) F.M1_lumped[it.row()] += std::abs(it.value());

    // gauge Laplacian without the pinned column
    {
        std::vector<int> keep;
        for (int i = 0; i < F.n_gauge; ++i)
            if (i != F.pinned_gauge) keep.push_back(i);
        std::vector<Eigen::Triplet<double>> ts;
        std::vector<int> col_of(F.n_gauge, -1);
        for (std::size_t j = 0; j < keep.size(); ++j) col_of[keep[j]] = int(j);
        for (int k = 0; k < F.D0.outerSize(); ++k)
            for (SparseR::InnerIterator it(F.D0, k); it; ++it)
                if (col_of[it.col()] >= 0) ts.emplace_back(it.row(), col_of[it.col()], it.value());
        SparseR D0r(F.n_edges, F.n_gauge - 1);
        D0r.setFromTriplets(ts.begin(), ts.end());
        const SparseR L = SparseR(D0r.transpose() * F.M1 * D0r);
        F.L0 = std::make_shared<OneFormSpace::Factor>(L);
        if (F.L0->info() != Eigen::Success) throw NumericalError("one-form space: gauge Laplacian factorization failed");
    }
    {
        const SparseR Dr = F.D.bottomRows(F.n_tris - 1);
        const SparseR L = SparseR(Dr * F.M1_lumped.cwiseInverse().asDiagonal() * Dr.transpose());
        F.Ldual = std::make_shared<OneFormSpace::Factor>(L);
        if (F.Ldual->info() != Eigen::Success) throw NumericalError("one-form space: dual Laplacian factorization failed");
    }
    return F;
}

// M1-orthonormal basis of discrete harmonic forms (closed and co-closed); dimension 2g.
inline std::vector<VecR> harmonic_forms(const OneFormSpace& F, int max_dim, std::uint64_t seed = 7,
                                        double rel_threshold = 1e-6) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<VecR> basis;
    const int trials = max_dim + 4;
    for (int t = 0; t < trials; ++t) {
        VecR v(F.n_edges);
        for (int i = 0; i < F.n_edges; ++i) v[i] = gauss(rng);
        const double n0 = std::sqrt(F.norm2(v));
        VecR h = F.project_coclosed(F.closed_part(v));
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) h -= q.dot(F.M1 * h) * q;
        const double n = std::sqrt(F.norm2(h));
        if (n > rel_threshold * n0) basis.push_back(h / n);
    }
    return basis;
}

// Kinetic term (1/2) sum_T sum_k (cot_k / 2) |e^{i phi} U_J - U_I|^2 with alpha added to the
// link phases, and its real gradients. Section values are indexed by the operator unknowns.
struct KineticEval {
    double energy{0.0};
    VecC grad_psi;   // dE/dRe + i dE/dIm
    VecR grad_alpha;
};

inline KineticEval kinetic(const TruncatedMesh& M, const OperatorPair& op, const VecC& psi, const VecR& alpha,
                           bool want_grad = true) {
    KineticEval out;
    if (want_grad) {
        out.grad_psi = VecC::Zero(op.size());
        out.grad_alpha = VecR::Zero(M.n_edge_dofs);
    }
    static const std::vector<double> none;
    for (const auto& T : M.tris) {
        for (int k = 0; k < 3; ++k) {
            const double w = 0.25 * T.cot[k];
            const int I = op.class_dof[T.cls[(k + 1) % 3]], J = op.class_dof[T.cls[(k + 2) % 3]];
            if (I < 0 && J < 0) continue;
            const int e = M.edge_dof[T.edge[k]];
            double phi = link_phase(M, T, k, op.b, none);
            if (e >= 0 && alpha.size() > 0) phi -= T.sign[k] * alpha[e];
            const cplx ep = std::polar(1.0, phi);
            const cplx UI = I >= 0 ? psi[I] : cplx(0.0), UJ = J >= 0 ? psi[J] : cplx(0.0);
            const cplx D = ep * UJ - UI;
            out.energy += w * std::norm(D);
            if (!want_grad) continue;
            if (I >= 0) out.grad_psi[I] += -2.0 * w * D;
            if (J >= 0) out.grad_psi[J] += 2.0 * w * std::conj(ep) * D;
            if (e >= 0) out.grad_alpha[e] += 2.0 * w * T.sign[k] * (std::conj(D) * ep * UJ).imag();
        }
    }
    return out;
}

// Discrete supercurrent J = -d(kinetic)/d(alpha) on the free edges.
inline VecR supercurrent(const TruncatedMesh& M, const OperatorPair& op, const VecC& psi, const VecR& alpha) {
    return -kinetic(M, op, psi, alpha).grad_alpha;
}

}  // namespace hypergl
