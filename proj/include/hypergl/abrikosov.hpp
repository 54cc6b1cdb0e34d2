#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "forms.hpp"
#include "mesh.hpp"
#include "spectra.hpp"

namespace hypergl {

struct Brackets {
    double m2{0.0};  // <|xi|^2>
    double m4{0.0};  // <|xi|^4>
};

inline Brackets brackets(const TruncatedMesh& M, const OperatorPair& op, const VecC& xi) {
    Brackets b;
    for (int i = 0; i < op.size(); ++i) {
        const double a = std::norm(xi[i]);
        b.m2 += op.mass[i] * a;
        b.m4 += op.mass[i] * a * a;
    }
    b.m2 /= M.surface_area;
    b.m4 /= M.surface_area;
    return b;
}

// ---------------------------------------------------------------- beta over K

struct AbrikosovReport {
    double beta{0.0};
    double beta_plus{0.0};
    double kappa_c{0.0};
    double kappa_c_plus{0.0};
    Eigen::VectorXcd argmin, argmax;  // coefficients in the basis
    std::vector<Brackets> per_basis;
};

inline double kappa_c(double beta) {
    if (!(beta > 1.0)) throw UsageError("kappa_c: requires beta > 1");
    return std::sqrt(0.5 * (1.0 - 1.0 / beta));
}

namespace detail {

// Quartic form <|sum c_i xi_i|^4> through the tensor T_ijkl = <conj(xi_i) xi_j conj(xi_k) xi_l>.
struct QuarticForm {
    int d{0};
    std::vector<cplx> T;
    cplx& at(int i, int j, int k, int l) { return T[((i * d + j) * d + k) * d + l]; }
    cplx at(int i, int j, int k, int l) const { return T[((i * d + j) * d + k) * d + l]; }

    double value(const Eigen::VectorXcd& c) const {
        cplx s = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    for (int l = 0; l < d; ++l) s += std::conj(c[i]) * c[j] * std::conj(c[k]) * c[l] * at(i, j, k, l);
        return s.real();
    }
    // Wirtinger gradient d/d conj(c), doubled so that it is the real gradient.
    Eigen::VectorXcd grad(const Eigen::VectorXcd& c) const {
        Eigen::VectorXcd g = Eigen::VectorXcd::Zero(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    for (int l = 0; l < d; ++l) g[i] += 4.0 * c[j] * std::conj(c[k]) * c[l] * at(i, j, k, l);
        return g;
    }
};

inline QuarticForm quartic_form(const TruncatedMesh& M, const OperatorPair& op, const std::vector<VecC>& basis) {
    QuarticForm q;
    q.d = int(basis.size());
    q.T.assign(std::size_t(q.d) * q.d * q.d * q.d, 0.0);
    for (int n = 0; n < op.size(); ++n) {
        const double w = op.mass[n] / M.surface_area;
        for (int i = 0; i < q.d; ++i)
            for (int j = 0; j < q.d; ++j) {
                const cplx a = std::conj(basis[i][n]) * basis[j][n] * w;
                for (int k = 0; k < q.d; ++k)
                    for (int l = 0; l < q.d; ++l) q.at(i, j, k, l) += a * std::conj(basis[k][n]) * basis[l][n];
            }
    }
    return q;
}

// Riemannian gradient flow on the unit sphere; sign = -1 minimizes, +1 maximizes.
inline Eigen::VectorXcd sphere_optimize(const QuarticForm& q, Eigen::VectorXcd c, double sign) {
    c.normalize();
    double f = q.value(c);
    double step = 0.1;
    for (int it = 0; it < 5000 && step > 1e-14; ++it) {
        Eigen::VectorXcd g = q.grad(c);
        g -= (c.dot(g)).real() * c;  // tangent part (real inner product)
        if (g.norm() < 1e-12) break;
        Eigen::VectorXcd trial = (c + sign * step * g).normalized();
        const double ft = q.value(trial);
        if (sign * (ft - f) > 0.0) {
            c = trial;
            f = ft;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    return c;
}

}  // namespace detail

// Optimization method for beta over the unit sphere of K.
enum class SphereMethod { ProjectedGradient, Sampling };

inline AbrikosovReport beta_min_max(const TruncatedMesh& M, const OperatorPair& op, const std::vector<VecC>& basis,
                                    SphereMethod method = SphereMethod::ProjectedGradient, std::uint64_t seed = 11,
                                    int samples = 20000) {
    if (basis.empty()) throw ModelGuardError("no bifurcation (K trivial)");
    AbrikosovReport rep;
    for (const auto& v : basis) rep.per_basis.push_back(brackets(M, op, v));
    const auto q = detail::quartic_form(M, op, basis);
    const int d = q.d;
    if (d == 1) {
        rep.argmin = rep.argmax = Eigen::VectorXcd::Ones(1);
        rep.beta = rep.beta_plus = q.value(rep.argmin);
    } else {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss;
        auto random_unit = [&]() {
            Eigen::VectorXcd c(d);
            for (int i = 0; i < d; ++i) c[i] = cplx(gauss(rng), gauss(rng));
            return Eigen::VectorXcd(c.normalized());
        };
        double best_min = std::numeric_limits<double>::infinity(), best_max = -best_min;
        const int n = method == SphereMethod::Sampling ? samples : 24;
        for (int s = 0; s < n; ++s) {
            Eigen::VectorXcd c0 = random_unit();
            Eigen::VectorXcd cmin = c0, cmax = c0;
            if (method == SphereMethod::ProjectedGradient) {
                cmin = detail::sphere_optimize(q, c0, -1.0);
                cmax = detail::sphere_optimize(q, c0, 1.0);
            }
            const double fmin = q.value(cmin), fmax = q.value(cmax);
            if (fmin < best_min) {
                best_min = fmin;
                rep.argmin = cmin;
            }
            if (fmax > best_max) {
                best_max = fmax;
                rep.argmax = cmax;
            }
        }
        if (method == SphereMethod::Sampling) {
            // polish the best samples locally
            rep.argmin = detail::sphere_optimize(q, rep.argmin, -1.0);
            rep.argmax = detail::sphere_optimize(q, rep.argmax, 1.0);
        }
        rep.beta = q.value(rep.argmin);
        rep.beta_plus = q.value(rep.argmax);
    }
    if (!(rep.beta > 1.0)) throw NumericalError("beta_min_max: computed beta <= 1 violates Hoelder's inequality");
    rep.kappa_c = kappa_c(rep.beta);
    rep.kappa_c_plus = kappa_c(rep.beta_plus);
    return rep;
}

inline VecC combine(const std::vector<VecC>& basis, const Eigen::VectorXcd& c) {
    VecC v = VecC::Zero(basis.front().size());
    for (std::size_t i = 0; i < basis.size(); ++i) v += c[Eigen::Index(i)] * basis[i];
    return v;
}

// ---------------------------------------------------------------- eta

struct EtaResult {
    VecR eta;                 // free-edge values
    double dEta2{0.0};        // |d eta|^2 over the mesh
    double dEta2_full{0.0};   // plus the cusp-tail contribution m/(4Y) |Sigma|/|Sigma_Y|
    double pairing{0.0};      // Re <xi, 2 i eta . grad xi> over the mesh
    double pairing_full{0.0};
    double lhs_identity{0.0};     // |d eta|^2_full / |Sigma|
    double rhs_identity{0.0};     // (<|xi|^4> - <|xi|^2>^2) / 4
    double lhs_pairing{0.0};      // pairing_full / |Sigma|
    double rhs_pairing{0.0};      // (<|xi|^2>^2 - <|xi|^4>) / 2
    double harmonic_leak{0.0};    // relative size of the removed harmonic part of the current
};

// Co-closed eta with D^T W D eta = J(xi) on the complement of the closed forms. The current
// is projected off the exact and harmonic forms, then (A + tau M1) eta = J is iterated to the
// M1-minimal solution.
inline EtaResult solve_eta(const TruncatedMesh& M, const OperatorPair& op, const OneFormSpace& F,
                           const std::vector<VecR>& harmonic, const VecC& xi) {
    const Brackets br = brackets(M, op, xi);
    if (std::abs(br.m2 - 1.0) > 1e-6) throw UsageError("solve_eta: requires <|xi|^2> = 1");
    EtaResult out;
    VecR J = supercurrent(M, op, xi, VecR::Zero(F.n_edges));
    J = F.project_covector(J);
    const double jn = std::sqrt(J.dot(F.M1_lumped.cwiseInverse().cwiseProduct(J)));
    double leak = 0.0;
    for (const auto& h : harmonic) {
        const double c = h.dot(J);
        leak += c * c;
        J -= c * (F.M1 * h);
    }
    out.harmonic_leak = jn > 0 ? std::sqrt(leak) / jn : 0.0;

    const double tau = 1e-3 * F.A.diagonal().mean() / F.M1.diagonal().mean();
    Eigen::SimplicialLLT<SparseR> llt(SparseR(F.A + tau * F.M1));
    if (llt.info() != Eigen::Success) throw NumericalError("solve_eta: factorization failed");
    VecR eta = VecR::Zero(F.n_edges);
    for (int it = 0; it < 30; ++it) {
        const VecR r = J - F.A * eta;
        eta += llt.solve(r);
        if (r.norm() <= 1e-13 * J.norm()) break;
    }
    out.eta = eta;
    out.dEta2 = F.curl_energy(eta);
    const double trunc = M.mesh_area();
    const double tail = double(M.n_cusps) / (4.0 * M.Y) * M.surface_area / trunc;
    out.dEta2_full = out.dEta2 + tail;
    out.pairing = -2.0 * supercurrent(M, op, xi, VecR::Zero(F.n_edges)).dot(eta);
    out.pairing_full = out.pairing - 2.0 * tail;
    out.lhs_identity = out.dEta2_full / M.surface_area;
    out.rhs_identity = 0.25 * (br.m4 - br.m2 * br.m2);
    out.lhs_pairing = out.pairing_full / M.surface_area;
    out.rhs_pairing = 0.5 * (br.m2 * br.m2 - br.m4);
    return out;
}

// ---------------------------------------------------------------- B matrix and t

// |xi|^2-weighted Whitney mass.
inline SparseR weighted_one_form_mass(const TruncatedMesh& M, const OperatorPair& op, const VecC& xi) {
    std::vector<Eigen::Triplet<double>> tm;
    for (const auto& T : M.tris) {
        double w = 0.0;
        for (int k = 0; k < 3; ++k) {
            const int d = op.class_dof[T.cls[k]];
            if (d >= 0) w += std::norm(xi[d]) / 3.0;
        }
        double mt[3][3];
        detail::whitney_triangle_mass(T, mt);
        for (int k = 0; k < 3; ++k) {
            const int e = M.edge_dof[T.edge[k]];
            if (e < 0) continue;
            for (int l = 0; l < 3; ++l) {
                const int f = M.edge_dof[T.edge[l]];
                if (f >= 0) tm.emplace_back(e, f, w * T.sign[k] * T.sign[l] * mt[k][l]);
            }
        }
    }
    SparseR Mw(M.n_edge_dofs, M.n_edge_dofs);
    Mw.setFromTriplets(tm.begin(), tm.end());
    return Mw;
}

// B_kl = int |xi|^2 eta_k . eta_l over a basis of harmonic forms.
inline Eigen::MatrixXd b_matrix(const SparseR& weighted_mass, const std::vector<VecR>& omega) {
    const int n = int(omega.size());
    Eigen::MatrixXd B(n, n);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) B(k, l) = omega[k].dot(weighted_mass * omega[l]);
    return B;
}

// Leading harmonic coefficients t = -s^2 B^-1 (int |xi|^2 h_k . eta).
inline Eigen::VectorXd harmonic_coefficients(const SparseR& weighted_mass, const std::vector<VecR>& omega,
                                             const VecR& eta, double s) {
    if (omega.empty()) return {};
    const Eigen::MatrixXd B = b_matrix(weighted_mass, omega);
    Eigen::VectorXd c(omega.size());
    for (std::size_t k = 0; k < omega.size(); ++k) c[Eigen::Index(k)] = omega[k].dot(weighted_mass * eta);
    return -s * s * B.ldlt().solve(c);
}

// ---------------------------------------------------------------- branch formulas

inline double coefficient_R(double beta, double kappa) {
    const double k2 = kappa * kappa;
    return 1.0 / (2.0 * k2) + (1.0 - 1.0 / (2.0 * k2)) * beta;
}

inline double branch_denominator(double kappa, double beta) { return (kappa * kappa - 0.5) * beta + 0.5; }

struct SSquared {
    double s2{0.0};
    bool valid{false};
};

inline SSquared s_squared(double r, double kappa, double b, double beta) {
    SSquared out;
    out.s2 = (kappa * kappa * r - b) / branch_denominator(kappa, beta);
    const double cond = (kappa - std::sqrt(b / r)) * (kappa - kappa_c(beta));
    out.valid = cond > 0.0 && out.s2 >= 0.0;
    return out;
}

struct EnergyExpansion {
    double E_normal{0.0};
    double dE{0.0};
    // Degenerate K: the same expression evaluated with beta_plus. For kappa^2 > 1/2 the
    // minimal energy lies at or below dE_plus and at or above dE; the order reverses for
    // kappa^2 < 1/2.
    double dE_plus{0.0};
};

inline EnergyExpansion energy_expansion(double r, double kappa, double b, double beta, double area,
                                        double beta_plus = -1.0) {
    EnergyExpansion e;
    const double k2 = kappa * kappa;
    e.E_normal = 0.5 * (k2 * r * r / 2.0 + b * b) * area;
    const double x = k2 * r - b;
    e.dE = -(area / 4.0) * x * x / branch_denominator(kappa, beta);
    const double bp = beta_plus > 0.0 ? beta_plus : beta;
    e.dE_plus = -(area / 4.0) * x * x / branch_denominator(kappa, bp);
    return e;
}

struct SeedState {
    VecC psi;
    VecR alpha;
};

inline SeedState leading_order_state(double s, const VecC& xi, const VecR& eta) { return {s * xi, s * s * eta}; }

struct BranchRow {
    double s{0.0}, r{0.0}, s2_predicted{0.0}, E_normal{0.0}, dE_predicted{0.0};
    double dE_measured{std::nan("")};
    double beta{0.0}, kappa_c{0.0};
    bool valid{false};
    double psi2_measured{std::nan("")};  // <|psi|^2> of the converged minimizer
};

inline void write_branch_csv(std::ostream& os, const std::vector<BranchRow>& rows) {
    os.precision(17);
    os << "s,r,s2_predicted,E_normal,dE_predicted,dE_measured,beta,kappa_c,valid_flag,psi2_measured\n";
    auto opt = [&](double v) {
        if (!std::isnan(v)) os << v;
    };
    for (const auto& w : rows) {
        os << w.s << ',' << w.r << ',' << w.s2_predicted << ',' << w.E_normal << ',' << w.dE_predicted << ',';
        opt(w.dE_measured);
        os << ',' << w.beta << ',' << w.kappa_c << ',' << (w.valid ? 1 : 0) << ',';
        opt(w.psi2_measured);
        os << '\n';
    }
}

}  // namespace hypergl
