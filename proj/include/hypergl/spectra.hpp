#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <nlohmann/json.hpp>

#include "bundle.hpp"
#include "errors.hpp"
#include "mesh.hpp"

namespace hypergl {

using SparseC = Eigen::SparseMatrix<cplx>;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;
using MatC = Eigen::MatrixXcd;

// Stiffness (covariant Dirichlet form with link phases) and lumped hyperbolic mass.
struct OperatorPair {
    SparseC K;
    VecR mass;
    double b{0.0};
    std::vector<int> dof_class;  // class of each unknown
    std::vector<int> class_dof;  // unknown of each class, -1 if eliminated

    int size() const { return int(mass.size()); }
    SparseC mass_matrix() const {
        SparseC D(size(), size());
        D.reserve(Eigen::VectorXi::Constant(size(), 1));
        for (int i = 0; i < size(); ++i) D.insert(i, i) = mass[i];
        return D;
    }
    double hermiticity_residual() const {
        const SparseC A = SparseC(K.adjoint()) - K;
        double m = 0.0;
        for (int k = 0; k < A.outerSize(); ++k)
            for (SparseC::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
        return m;
    }
    double rayleigh(const VecC& v) const {
        return (v.adjoint() * K * v)(0).real() / v.cwiseAbs2().dot(mass);
    }
};

struct AssembleOptions {
    bool dirichlet_caps{true};
    // Extra connection on global edges (oriented low class -> high class); empty means none.
    std::vector<double> edge_alpha;
};

// Phase e^{i phi} coupling the class values across local edge k of triangle T:
// e^{-i theta} u_j - u_i = e^{i b Theta_i} (e^{i phi} U_J - U_I).
inline double link_phase(const TruncatedMesh& M, const TriangleGeometry& T, int k, double b,
                         const std::vector<double>& edge_alpha) {
    const int i = (k + 1) % 3, j = (k + 2) % 3;
    double theta = b * T.dx_over_y[k];
    if (!edge_alpha.empty()) theta += T.sign[k] * edge_alpha[T.edge[k]];
    return b * M.local_angle[T.local[j]] - theta - b * M.local_angle[T.local[i]];
}

inline OperatorPair assemble(const TruncatedMesh& M, double b, const AssembleOptions& opt = {}) {
    M.require_consistent(b);
    if (!opt.edge_alpha.empty() && opt.edge_alpha.size() != M.edge_classes.size())
        throw UsageError("assemble: edge field size does not match the mesh");
    OperatorPair op;
    op.b = b;
    if (opt.dirichlet_caps) {
        op.dof_class = M.dof_class;
        op.class_dof = M.class_dof;
    } else {
        op.dof_class.resize(M.n_classes);
        std::iota(op.dof_class.begin(), op.dof_class.end(), 0);
        op.class_dof = op.dof_class;
    }
    const int n = int(op.dof_class.size());
    op.mass.resize(n);
    for (int i = 0; i < n; ++i) op.mass[i] = M.class_mass[op.dof_class[i]];

    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(M.tris.size() * 12);
    for (const auto& T : M.tris) {
        for (int k = 0; k < 3; ++k) {
            const double w = 0.5 * T.cot[k];
            const int I = op.class_dof[T.cls[(k + 1) % 3]], J = op.class_dof[T.cls[(k + 2) % 3]];
            const cplx e = std::polar(1.0, link_phase(M, T, k, b, opt.edge_alpha));
            if (I >= 0) trip.emplace_back(I, I, w);
            if (J >= 0) trip.emplace_back(J, J, w);
            if (I >= 0 && J >= 0) {
                trip.emplace_back(I, J, -w * e);
                trip.emplace_back(J, I, -w * std::conj(e));
            }
        }
    }
    op.K.resize(n, n);
    op.K.setFromTriplets(trip.begin(), trip.end());
    op.K.makeCompressed();
    return op;
}

inline OperatorPair assemble(const TruncatedMesh& M, const BundleData& B, const AssembleOptions& opt = {}) {
    if (B.N != M.N) throw UsageError("assemble: bundle and mesh live on different surfaces");
    return assemble(M, B.b, opt);
}

// Nodal values (per unknown) of a function given on H, converted to the template gauge of
// each class's root copy: U = rho_b(g, v)^-1 Psi(g v) e^{-i b angle}.
template <class F>
VecC sample_section(const TruncatedMesh& M, const OperatorPair& op, double b, const F& psi) {
    VecC u = VecC::Zero(op.size());
    std::vector<char> done(M.n_classes, 0);
    for (std::size_t l = 0; l < M.local_class.size(); ++l) {
        const int cls = M.local_class[l];
        const int d = op.class_dof[cls];
        if (d < 0 || done[cls]) continue;
        done[cls] = 1;
        const cplx v = M.template_position(int(l));
        const auto& g = M.cells[M.cell_of_local(int(l))];
        u[d] = psi(mobius_apply(g, v)) / automorphy_factor(g, v, b) * std::polar(1.0, -b * M.local_angle[l]);
    }
    return u;
}

// ---------------------------------------------------------------- eigensolver

struct EigenOptions {
    double shift{0.0};
    int block{0};  // 0 selects max(2 count + 8, count + 2)
    int max_iter{500};
    double tol{1e-8};
    std::uint64_t seed{1};
};

struct SpectralResult {
    std::vector<double> eigenvalues;
    MatC eigenvectors;  // mass-orthonormal columns
    std::vector<double> residuals;
    int iterations{0};
    bool converged{false};
};

namespace detail {

inline cplx mass_dot(const VecC& x, const VecC& y, const VecR& mass) {
    cplx s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i] * mass[i];
    return s;
}

// Modified Gram-Schmidt in the lumped mass inner product, applied twice.
inline int mass_orthonormalize(MatC& X, const VecR& mass) {
    int kept = 0;
    for (int j = 0; j < X.cols(); ++j) {
        VecC v = X.col(j);
        const double n0 = std::sqrt(v.cwiseAbs2().dot(mass));
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i < kept; ++i) v -= mass_dot(X.col(i), v, mass) * X.col(i);
        const double n = std::sqrt(v.cwiseAbs2().dot(mass));
        if (n <= 1e-13 * n0 || n == 0.0) continue;
        X.col(kept++) = v / n;
    }
    X.conservativeResize(Eigen::NoChange, kept);
    return kept;
}

// Fix the global phase: the entry of largest modulus becomes real positive.
inline void normalize_phase(Eigen::Ref<VecC> v) {
    Eigen::Index k = 0;
    v.cwiseAbs().maxCoeff(&k);
    if (std::abs(v[k]) > 0.0) v *= std::conj(v[k]) / std::abs(v[k]);
}

}  // namespace detail

inline double dual_residual(const OperatorPair& op, const VecC& x, double lambda) {
    const VecC r = op.K * x - lambda * op.mass.cast<cplx>().cwiseProduct(x);
    double s = 0.0;
    for (int i = 0; i < op.size(); ++i) s += std::norm(r[i]) / op.mass[i];
    return std::sqrt(s / x.cwiseAbs2().dot(op.mass));
}

// Lowest eigenpairs of K v = lambda M v by shift-invert subspace iteration with Rayleigh-Ritz.
inline SpectralResult lowest_eigenpairs(const OperatorPair& op, int count, const EigenOptions& opt = {}) {
    const int n = op.size();
    if (count < 1 || count > 20) throw UsageError("lowest_eigenpairs: count must lie in 1..20");
    if (count > n) throw UsageError("lowest_eigenpairs: more eigenpairs requested than unknowns");
    const int p = std::min(n, opt.block > 0 ? std::max(opt.block, count) : std::max(2 * count + 8, count + 2));

    const SparseC A = op.K - opt.shift * op.mass_matrix();
    Eigen::SimplicialLLT<SparseC> llt;
    Eigen::SimplicialLDLT<SparseC> ldlt;
    llt.compute(A);
    const bool use_llt = llt.info() == Eigen::Success;
    if (!use_llt) {
        ldlt.compute(A);
        if (ldlt.info() != Eigen::Success) throw NumericalError("lowest_eigenpairs: factorization of K - shift M failed");
    }
    auto solve = [&](const MatC& B) -> MatC { return use_llt ? MatC(llt.solve(B)) : MatC(ldlt.solve(B)); };

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss;
    MatC X(n, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) X(i, j) = cplx(gauss(rng), gauss(rng));
    detail::mass_orthonormalize(X, op.mass);

    SpectralResult res;
    Eigen::VectorXd theta;
    for (int it = 1; it <= opt.max_iter; ++it) {
        MatC Yb = solve(op.mass.cast<cplx>().asDiagonal() * X);
        detail::mass_orthonormalize(Yb, op.mass);
        const MatC KY = op.K * Yb;
        MatC H = Yb.adjoint() * KY;
        H = 0.5 * (H + H.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<MatC> es(H);
        theta = es.eigenvalues();
        X = Yb * es.eigenvectors();
        res.iterations = it;
        res.residuals.assign(count, 0.0);
        bool ok = X.cols() >= count;
        for (int j = 0; j < std::min<int>(count, int(X.cols())); ++j) {
            res.residuals[j] = dual_residual(op, X.col(j), theta[j]);
            if (res.residuals[j] > opt.tol * std::max(1.0, std::abs(theta[j]))) ok = false;
        }
        if (ok) {
            res.converged = true;
            break;
        }
    }
    const int got = std::min<int>(count, int(X.cols()));
    res.eigenvalues.assign(theta.data(), theta.data() + got);
    res.eigenvectors = X.leftCols(got);
    for (int j = 0; j < got; ++j) detail::normalize_phase(res.eigenvectors.col(j));
    return res;
}

// ---------------------------------------------------------------- cylinder model

// p_k^b = -y^2 d^2/dy^2 + (2 pi k)^2 y^2 - 2 b (2 pi k) y + b^2 on (s, Y) in L^2(dy/y^2),
// P1 elements on a geometric grid, lumped mass, Dirichlet at both ends.
struct CylinderOperator {
    int k{0};
    double b{0.0};
    std::vector<double> y;     // all nodes, endpoints included
    std::vector<double> diag;  // stiffness over all nodes
    std::vector<double> off;   // off[i] couples i and i+1
    std::vector<double> mass;

    int interior() const { return int(y.size()) - 2; }

    std::vector<double> apply(const std::vector<double>& f) const {
        std::vector<double> r(y.size(), 0.0);
        for (std::size_t i = 0; i < y.size(); ++i) {
            r[i] = diag[i] * f[i];
            if (i > 0) r[i] += off[i - 1] * f[i - 1];
            if (i + 1 < y.size()) r[i] += off[i] * f[i + 1];
        }
        return r;
    }

    // Ascending Dirichlet eigenvalues.
    std::vector<double> eigenvalues() const {
        const int n = interior();
        Eigen::VectorXd d(n), e(std::max(n - 1, 0));
        for (int i = 0; i < n; ++i) d[i] = diag[i + 1] / mass[i + 1];
        for (int i = 0; i + 1 < n; ++i) e[i] = off[i + 1] / std::sqrt(mass[i + 1] * mass[i + 2]);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
        return {es.eigenvalues().data(), es.eigenvalues().data() + n};
    }

    // (K f - lambda M f) on interior nodes, in the dual mass norm, relative to |f|_M.
    double residual(const std::vector<double>& f, double lambda) const {
        const auto Kf = apply(f);
        double r2 = 0.0, f2 = 0.0;
        for (int i = 1; i <= interior(); ++i) {
            const double ri = Kf[i] - lambda * mass[i] * f[i];
            r2 += ri * ri / mass[i];
            f2 += mass[i] * f[i] * f[i];
        }
        return std::sqrt(r2 / f2);
    }
};

inline CylinderOperator cylinder_operator(int k, double b, double s, double Y, int n_points) {
    if (!(s >= 1.0) || !(Y > s)) throw UsageError("cylinder_operator: need 1 <= s < Y");
    if (n_points < 3) throw UsageError("cylinder_operator: need at least 3 points");
    CylinderOperator C;
    C.k = k;
    C.b = b;
    const int n = n_points;
    C.y.resize(n + 1);
    for (int i = 0; i <= n; ++i) C.y[i] = s * std::pow(Y / s, double(i) / n);
    C.y.back() = Y;
    C.diag.assign(n + 1, 0.0);
    C.off.assign(n, 0.0);
    C.mass.assign(n + 1, 0.0);
    const double w = 2.0 * kPi * k;
    for (int i = 0; i < n; ++i) {
        const double hi = C.y[i + 1] - C.y[i];
        C.diag[i] += 1.0 / hi;
        C.diag[i + 1] += 1.0 / hi;
        C.off[i] = -1.0 / hi;
    }
    for (int i = 0; i <= n; ++i) {
        const double l = 0.5 * ((i > 0 ? C.y[i] - C.y[i - 1] : 0.0) + (i < n ? C.y[i + 1] - C.y[i] : 0.0));
        const double yi = C.y[i];
        C.mass[i] = l / (yi * yi);
        C.diag[i] += l * (w * w - 2.0 * b * w / yi + b * b / (yi * yi));
    }
    return C;
}

inline cplx exact_cylinder_eigenfunction(cplx z, double b) {
    if (!(z.imag() > 0.0)) throw std::invalid_argument("exact_cylinder_eigenfunction: Im z must be positive");
    const double y = z.imag();
    return std::pow(y, b) * std::polar(std::exp(-2.0 * kPi * y), 2.0 * kPi * z.real());
}

// ---------------------------------------------------------------- exact symbolic check

// Polynomials in (b, k, w) with Gaussian-rational coefficients, and expressions
// sum_n P_n y^n E with E = y^{c0} e^{i p x} e^{-q y}. Enough to apply the coordinate
// magnetic Laplacian -y^2((d_x - i b/y)^2 + d_y^2) to the model eigenfunctions exactly.
namespace symbolic {

struct GaussQ {
    Rational re{0, 1}, im{0, 1};
    bool is_zero() const { return re.is_zero() && im.is_zero(); }
    friend GaussQ operator+(const GaussQ& x, const GaussQ& y) { return {x.re + y.re, x.im + y.im}; }
    friend GaussQ operator*(const GaussQ& x, const GaussQ& y) {
        return {x.re * y.re - x.im * y.im, x.re * y.im + x.im * y.re};
    }
};

using Mono = std::array<int, 3>;  // powers of b, k, w

struct Poly {
    std::map<Mono, GaussQ> terms;

    static Poly constant(GaussQ c) {
        Poly p;
        if (!c.is_zero()) p.terms[{0, 0, 0}] = c;
        return p;
    }
    static Poly rational(std::int64_t n, std::int64_t d = 1) { return constant({Rational::make(n, d), {0, 1}}); }
    static Poly imaginary(std::int64_t n, std::int64_t d = 1) { return constant({{0, 1}, Rational::make(n, d)}); }
    static Poly var(int which) {
        Poly p;
        Mono m{0, 0, 0};
        m[which] = 1;
        p.terms[m] = {{1, 1}, {0, 1}};
        return p;
    }
    bool is_zero() const { return terms.empty(); }
    void clean() {
        for (auto it = terms.begin(); it != terms.end();) it = it->second.is_zero() ? terms.erase(it) : std::next(it);
    }
    friend Poly operator+(Poly x, const Poly& y) {
        for (const auto& [m, c] : y.terms) x.terms[m] = x.terms[m] + c;
        x.clean();
        return x;
    }
    friend Poly operator*(const Poly& x, const Poly& y) {
        Poly r;
        for (const auto& [m1, c1] : x.terms)
            for (const auto& [m2, c2] : y.terms) {
                const Mono m{m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2]};
                r.terms[m] = r.terms[m] + c1 * c2;
            }
        r.clean();
        return r;
    }
    friend Poly operator-(const Poly& x) { return Poly::rational(-1) * x; }
    friend Poly operator-(const Poly& x, const Poly& y) { return x + (-y); }

    cplx eval(double b, double k, double w) const {
        cplx s = 0.0;
        for (const auto& [m, c] : terms)
            s += cplx(c.re.value(), c.im.value()) * std::pow(b, m[0]) * std::pow(k, m[1]) * std::pow(w, m[2]);
        return s;
    }
};

struct Expr {
    Poly c0, p, q;               // exponent data of E
    std::map<int, Poly> coeff;   // y-power -> coefficient

    Expr like(std::map<int, Poly> c) const { return {c0, p, q, std::move(c)}; }
    bool is_zero() const {
        return std::all_of(coeff.begin(), coeff.end(), [](const auto& t) { return t.second.is_zero(); });
    }
    friend Expr operator+(const Expr& x, const Expr& y) {
        Expr r = x;
        for (const auto& [n, c] : y.coeff) r.coeff[n] = r.coeff[n] + c;
        return r;
    }
    friend Expr operator*(const Poly& a, const Expr& x) {
        Expr r = x;
        for (auto& [n, c] : r.coeff) c = a * c;
        return r;
    }
    Expr times_y(int m) const {
        std::map<int, Poly> c;
        for (const auto& [n, v] : coeff) c[n + m] = v;
        return like(c);
    }
    Expr dx() const { return Poly::imaginary(1) * p * *this; }
    Expr dy() const {
        std::map<int, Poly> c;
        for (const auto& [n, v] : coeff) {
            c[n - 1] = c[n - 1] + (Poly::rational(n) + c0) * v;
            c[n] = c[n] - q * v;
        }
        return like(c);
    }
};

// -y^2 ((d_x - i b / y)^2 + d_y^2) u - lambda u
inline Expr magnetic_residual(const Expr& u, const Poly& lambda) {
    const Poly b = Poly::var(0);
    const Expr uxx = u.dx().dx();
    const Expr cross = (Poly::imaginary(2) * b) * u.dx().times_y(1);
    const Expr uyy = u.dy().dy();
    return (Poly::rational(-1) * uxx.times_y(2)) + cross + ((b * b) * u) + (Poly::rational(-1) * uyy.times_y(2)) +
           (-lambda * u);
}

// y^b e^{i w x} e^{-w y}: residual against lambda = b, for symbolic b and wavenumber w.
inline Expr seed_residual() {
    Expr u{Poly::var(0), Poly::var(2), Poly::var(2), {{0, Poly::rational(1)}}};
    return magnetic_residual(u, Poly::var(0));
}

// y^{1/2 - i k}: residual against lambda = k^2 + 1/4 + b^2.
inline Expr generalized_mode_residual() {
    Expr u{Poly::rational(1, 2) - Poly::imaginary(1) * Poly::var(1), Poly{}, Poly{}, {{0, Poly::rational(1)}}};
    const Poly lam = Poly::var(1) * Poly::var(1) + Poly::rational(1, 4) + Poly::var(0) * Poly::var(0);
    return magnetic_residual(u, lam);
}

}  // namespace symbolic

// lambda_k = k^2 + 1/4 + b^2, returned after the exact symbolic check passes.
inline double generalized_mode_check(double k, double b) {
    if (k < 0.0) throw UsageError("generalized_mode_check: k must be >= 0");
    if (!symbolic::generalized_mode_residual().is_zero())
        throw NumericalError("generalized_mode_check: symbolic residual does not vanish");
    return k * k + 0.25 + b * b;
}

inline bool seed_symbolic_check() { return symbolic::seed_residual().is_zero(); }

// ---------------------------------------------------------------- holomorphicity

// 4 int |D_zbar u|^2 dxdy with D_zbar = (1/2)((d_x - i a_x) + i (d_y - i a_y)). Each triangle is
// gauge transported to its first vertex along the two incident links.
inline double dbar_energy(const TruncatedMesh& M, const OperatorPair& op, const VecC& u) {
    const double b = op.b;
    double total = 0.0;
    for (const auto& T : M.tris) {
        std::array<cplx, 3> U{};
        for (int k = 0; k < 3; ++k) {
            const int d = op.class_dof[T.cls[k]];
            U[k] = d >= 0 ? u[d] * std::polar(1.0, b * M.local_angle[T.local[k]]) : cplx(0.0);
        }
        const double th01 = b * T.dx_over_y[2], th02 = -b * T.dx_over_y[1];
        const std::array<cplx, 3> ut{U[0], U[1] * std::polar(1.0, -th01), U[2] * std::polar(1.0, -th02)};
        const std::array<double, 3> chi{0.0, th01, th02};
        // gradients of the P1 basis
        const auto& p = T.p;
        std::array<double, 3> gx{}, gy{};
        for (int k = 0; k < 3; ++k) {
            const cplx a = p[(k + 1) % 3], c = p[(k + 2) % 3];
            gx[k] = (a.imag() - c.imag()) / (2.0 * T.area);
            gy[k] = (c.real() - a.real()) / (2.0 * T.area);
        }
        cplx ux = 0.0, uy = 0.0;
        double cx = 0.0, cy = 0.0;
        for (int k = 0; k < 3; ++k) {
            ux += gx[k] * ut[k];
            uy += gy[k] * ut[k];
            cx += gx[k] * chi[k];
            cy += gy[k] * chi[k];
        }
        double acc = 0.0;
        for (int e = 0; e < 3; ++e) {
            const int i = (e + 1) % 3, j = (e + 2) % 3;
            const cplx uq = 0.5 * (ut[i] + ut[j]);
            const double yq = 0.5 * (p[i].imag() + p[j].imag());
            const double ax = b / yq - cx, ay = -cy;
            const cplx D = 0.5 * ((ux + cplx(0, 1) * uy) - cplx(0, 1) * cplx(ax, ay) * uq);
            acc += std::norm(D);
        }
        total += 4.0 * acc * T.area / 3.0;
    }
    return total;
}

// |Q(v) - b |v|^2 - 4 int |D_zbar v|^2| / |v|^2, maximized over the trial vectors.
inline double weitzenbock_residual(const TruncatedMesh& M, const OperatorPair& op, const std::vector<VecC>& trials) {
    double worst = 0.0;
    for (const auto& v : trials) {
        const double n2 = v.cwiseAbs2().dot(op.mass);
        const double q = (v.adjoint() * op.K * v)(0).real();
        worst = std::max(worst, std::abs(q - op.b * n2 - dbar_energy(M, op, v)) / n2);
    }
    return worst;
}

// ---------------------------------------------------------------- report

struct SpectrumSummary {
    int in_cluster{0};        // eigenvalues within 10% of b
    int below_essential{0};   // eigenvalues below 1/4 + b^2
    int in_gap{0};            // eigenvalues in (1.1 b, 1.2 b)
};

inline SpectrumSummary summarize_spectrum(const std::vector<double>& ev, double b) {
    SpectrumSummary s;
    for (double l : ev) {
        if (l >= 0.9 * b && l <= 1.1 * b) ++s.in_cluster;
        if (l < 0.25 + b * b) ++s.below_essential;
        if (l > 1.1 * b && l < 1.2 * b) ++s.in_gap;
    }
    return s;
}

inline nlohmann::json spectral_report(const TruncatedMesh& M, const BundleData& B, const SpectralResult& r) {
    const auto s = summarize_spectrum(r.eigenvalues, B.b);
    return {{"N", B.N},
            {"degree", B.degree},
            {"b", B.b},
            {"h", M.h},
            {"Y", M.Y},
            {"eigenvalues", r.eigenvalues},
            {"residuals", r.residuals},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"multiplicity_at_b", s.in_cluster},
            {"multiplicity_below_ess", s.below_essential},
            {"ess_bottom_theory", 0.25 + B.b * B.b}};
}

}  // namespace hypergl
