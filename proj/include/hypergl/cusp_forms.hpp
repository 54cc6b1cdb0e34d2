#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <ostream>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "arithmetic.hpp"
#include "bundle.hpp"
#include "errors.hpp"
#include "mesh.hpp"
#include "spectra.hpp"

namespace hypergl {

// ---------------------------------------------------------------- dimensions

inline void require_even_weight(std::int64_t k) {
    if (k <= 0 || k % 2 != 0) throw UsageError("weight must be an even positive integer, got " + std::to_string(k));
}

// Count used for the spectral cross-check: g at k = 2, (k-1)(g-1) + k m / 2 for k >= 4.
inline std::int64_t dim_cusp_forms(std::int64_t N, std::int64_t k) {
    require_even_weight(k);
    const std::int64_t g = genus(N), m = cusp_count(N);
    if (k == 2) return g;
    return (k - 1) * (g - 1) + k * m / 2;
}

// Riemann-Roch count of holomorphic cusp forms: g at k = 2, (k-1)(g-1) + (k/2 - 1) m for k >= 4.
inline std::int64_t dim_cusp_forms_classical(std::int64_t N, std::int64_t k) {
    require_even_weight(k);
    const std::int64_t g = genus(N), m = cusp_count(N);
    if (k == 2) return g;
    return (k - 1) * (g - 1) + (k / 2 - 1) * m;
}

// ---------------------------------------------------------------- Whittaker W

// Decaying solution of W'' + (-1/4 + beta/y + (1/4 - mu^2)/y^2) W = 0 normalized by
// W ~ y^beta e^{-y/2}. Written as W = y^beta e^{-y/2} V, V solves
//   V'' = (1 - 2 beta / y) V' - ((beta - 1/2)^2 - mu^2) V / y^2,
// integrated from large y downward, where the unwanted solution decays.
struct WhittakerValue {
    double value{0.0};
    double log_abs{0.0};  // log |W|, meaningful even when value underflows
};

inline WhittakerValue whittaker_w_full(double beta, double mu, double y) {
    if (!(y > 0.0)) throw UsageError("whittaker_w: range error, y must be positive");
    if (y < 1e-3 || std::abs(beta) > 60.0 || std::abs(mu) > 60.0)
        throw UsageError("whittaker_w: range error, no stable evaluation path for these parameters");
    const double c = (beta - 0.5) * (beta - 0.5) - mu * mu;
    const double log_pref = beta * std::log(y) - 0.5 * y;
    auto finish = [&](double V) {
        WhittakerValue w;
        w.log_abs = log_pref + std::log(std::abs(V));
        w.value = std::exp(log_pref) * V;
        return w;
    };
    if (std::abs(c) < 1e-15) return finish(1.0);  // mu = +-(beta - 1/2): closed form y^beta e^{-y/2}

    // asymptotic series V ~ sum a_n y^-n, a_n = -a_{n-1} (1/2 + mu - beta + n - 1)(1/2 - mu - beta + n - 1) / n
    auto series = [&](double x, double& V, double& dV) {
        double a = 1.0, prev = std::numeric_limits<double>::infinity();
        V = 1.0;
        dV = 0.0;
        for (int n = 1; n < 400; ++n) {
            a *= -(0.5 + mu - beta + n - 1) * (0.5 - mu - beta + n - 1) / double(n);
            const double term = a * std::pow(x, -n);
            if (std::abs(term) > std::abs(prev)) return false;
            V += term;
            dV += -n * term / x;
            if (std::abs(term) < 1e-17 * std::abs(V)) return true;
            prev = term;
        }
        return false;
    };
    double y0 = std::max(40.0 + 4.0 * (std::abs(beta) + mu * mu), y);
    double V0 = 0.0, dV0 = 0.0;
    while (!series(y0, V0, dV0)) {
        y0 *= 2.0;
        if (y0 > 1e5) throw UsageError("whittaker_w: range error, asymptotic start did not converge");
    }
    if (y0 == y) return finish(V0);

    using State = std::array<double, 2>;
    State s{V0, dV0};
    auto rhs = [&](const State& x, State& dx, double t) {
        dx[0] = x[1];
        dx[1] = (1.0 - 2.0 * beta / t) * x[1] - c * x[0] / (t * t);
    };
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(1e-14, 1e-13, ode::runge_kutta_dopri5<State>());
    ode::integrate_adaptive(stepper, rhs, s, y0, y, -1e-3);
    if (!std::isfinite(s[0])) throw NumericalError("whittaker_w: integration produced a non-finite value");
    return finish(s[0]);
}

inline double whittaker_w(double beta, double mu, double y) { return whittaker_w_full(beta, mu, y).value; }

// ---------------------------------------------------------------- Poincare series

struct SeriesValue {
    cplx value{0.0};
    double tail{0.0};
    long terms{0};
};

namespace detail {

inline std::array<std::int64_t, 3> ext_gcd(std::int64_t a, std::int64_t b) {
    std::int64_t x0 = 1, y0 = 0, x1 = 0, y1 = 1;
    while (b != 0) {
        const std::int64_t q = a / b;
        std::tie(a, b) = std::make_pair(b, a - q * b);
        std::tie(x0, x1) = std::make_pair(x1, x0 - q * x1);
        std::tie(y0, y1) = std::make_pair(y1, y0 - q * y1);
    }
    return {a, x0, y0};  // a = g = x0 a_in + y0 b_in
}

// Sum over delta in SL(2,Z), taken modulo +-1 and modulo left multiplication by T^N, with
// delta = +-G mod N and |c w + d| <= R, of Im(U delta w)^b e^{2 pi i U delta w} rho_b(delta, w)^-1.
// U is upper triangular and conjugates T^N to the unit translation.
inline SeriesValue poincare_partial(std::int64_t N, const RealMoebius& U, const ModularMatrix& G, cplx w, double b,
                                    double R) {
    SeriesValue out;
    const double x = w.real(), y = w.imag();
    const auto cmax = std::int64_t(std::floor(R / y));
    for (std::int64_t c = 0; c <= cmax; ++c) {
        const double half = std::sqrt(std::max(0.0, R * R - double(c) * double(c) * y * y));
        std::int64_t dlo = std::int64_t(std::ceil(-double(c) * x - half));
        std::int64_t dhi = std::int64_t(std::floor(-double(c) * x + half));
        if (c == 0) dlo = dhi = 1;  // the projective class of (0, +-1)
        for (std::int64_t d = dlo; d <= dhi; ++d) {
            for (int s : {1, -1}) {
                if (N == 2 && s == -1) break;
                if (mod_n(c - s * G.c, N) != 0 || mod_n(d - s * G.d, N) != 0) continue;
                const auto [g, xg, yg] = ext_gcd(d, c);
                if (g != 1 && g != -1) break;
                // a0 d - b0 c = 1
                std::int64_t a0 = xg * g, b0 = -yg * g;
                bool found = false;
                std::int64_t a = 0;
                for (std::int64_t t = 0; t < N; ++t) {
                    const std::int64_t at = a0 + t * c, bt = b0 + t * d;
                    if (mod_n(at - s * G.a, N) == 0 && mod_n(bt - s * G.b, N) == 0) {
                        a = at;
                        found = true;
                        break;
                    }
                }
                if (!found) throw NumericalError("poincare_series: no lift with the required residues");
                const cplx j = double(c) * w + double(d);
                cplx dw;
                if (c == 0) {
                    // delta = +-T^t, b entry only matters modulo N
                    const std::int64_t bt = mod_n(s * G.b, N);
                    dw = w + double(bt);
                } else {
                    const std::int64_t ar = mod_n(a, N * c);
                    dw = double(ar) / double(c) - 1.0 / (double(c) * j);
                }
                const cplx uw = (U.a * dw + U.b) / U.d;
                const double im = uw.imag();
                const cplx term = std::pow(im, b) * std::exp(cplx(0.0, 2.0 * kPi) * uw) *
                                  std::polar(1.0, -b * std::arg(j * j));
                out.value += term;
                ++out.terms;
                break;
            }
        }
    }
    return out;
}

inline RealMoebius cusp_upper(const Cusp& cusp) { return cusp.scaling * to_real(cusp.lift); }

inline void require_series_regime(double b) {
    if (!(b >= 1.0) || std::abs(b - std::round(b)) > 1e-12)
        throw UsageError("poincare_series: requires integer b >= 1 (convergence regime)");
}

inline SeriesValue poincare_with_tail(std::int64_t N, const RealMoebius& U, const ModularMatrix& G, cplx w, double b,
                                      double R) {
    SeriesValue v = poincare_partial(N, U, G, w, b, R);
    if (b >= 2.0) {
        const double y = w.imag();
        v.tail = 4.0 * kPi * std::pow(y, b - 1.0) * std::pow(R, 2.0 - 2.0 * b) /
                 (std::pow(double(N), b + 2.0) * (2.0 * b - 2.0));
    } else {
        // conditionally convergent: use the change from half the bound
        v.tail = std::abs(v.value - poincare_partial(N, U, G, w, b, 0.5 * R).value);
    }
    return v;
}

}  // namespace detail

// xi_i(z) = sum over Gamma_i \ Gamma(N) of Im(s_i g z)^b e^{2 pi i s_i g z} rho_b(s_i g, z)^-1,
// s_i the normalized scaling matrix. Cosets are ordered by |c z + d| <= bound.
inline SeriesValue poincare_series(const CongruenceSurface& S, int cusp, cplx z, double b, double bound) {
    detail::require_series_regime(b);
    if (!(z.imag() > 0.0)) throw std::invalid_argument("poincare_series: Im z must be positive");
    if (!(bound >= 1.0)) throw UsageError("poincare_series: bound must be >= 1");
    const Cusp& c = S.cusps.at(cusp);
    return detail::poincare_with_tail(S.N, detail::cusp_upper(c), c.lift.inverse(), z, b, bound);
}

// The same section in the template gauge of a cell: rho_b(g, v)^-1 xi_i(g v).
inline SeriesValue poincare_template(const CongruenceSurface& S, int cusp, const ModularMatrix& g, cplx v, double b,
                                     double bound) {
    detail::require_series_regime(b);
    const Cusp& c = S.cusps.at(cusp);
    return detail::poincare_with_tail(S.N, detail::cusp_upper(c), c.lift.inverse() * g, v, b, bound);
}

// Pullback to the width-one chart of cusp j: F(w) = rho_b(s_j^-1, w)^-1 xi_i(s_j^-1 w).
inline SeriesValue poincare_in_cusp_chart(const CongruenceSurface& S, int cusp_i, int cusp_j, cplx w, double b,
                                          double bound) {
    const RealMoebius sinv = S.cusps.at(cusp_j).scaling.inverse();
    SeriesValue v = poincare_series(S, cusp_i, mobius_apply(sinv, w), b, bound);
    const cplx f = automorphy_factor(sinv, w, b);
    v.value /= f;
    return v;
}

// Nodal samples on the mesh unknowns (template gauge of each class root).
inline VecC sample_poincare(const CongruenceSurface& S, const TruncatedMesh& M, const OperatorPair& op, int cusp,
                            double b, double bound, double* max_tail = nullptr) {
    VecC u = VecC::Zero(op.size());
    std::vector<char> done(M.n_classes, 0);
    double worst = 0.0;
    for (std::size_t l = 0; l < M.local_class.size(); ++l) {
        const int cls = M.local_class[l];
        const int d = op.class_dof[cls];
        if (d < 0 || done[cls]) continue;
        done[cls] = 1;
        const auto sv = poincare_template(S, cusp, M.cells[M.cell_of_local(int(l))], M.template_position(int(l)), b,
                                          bound);
        u[d] = sv.value * std::polar(1.0, -b * M.local_angle[l]);
        worst = std::max(worst, sv.tail);
    }
    if (max_tail) *max_tail = worst;
    return u;
}

// Fraction of the mass norm of u captured by the span of the mass-orthonormal columns of V.
inline double retained_fraction(const MatC& V, const VecR& mass, const VecC& u) {
    const VecC Mu = mass.cast<cplx>().cwiseProduct(u);
    const VecC c = V.adjoint() * Mu;
    return c.squaredNorm() / u.cwiseAbs2().dot(mass);
}

// ---------------------------------------------------------------- Fourier expansion

struct FourierCoefficient {
    int k{0};
    cplx raw{0.0};    // discrete Fourier coefficient of the samples
    cplx value{0.0};  // raw / W_{b sgn k, b - 1/2}(4 pi |k| y); equal to raw for k = 0
};

// Samples f(x_j + i y), x_j = j / n on a width-one cylinder.
inline std::vector<FourierCoefficient> fourier_coefficients(const std::vector<cplx>& samples, double y, double b,
                                                            int k_min, int k_max) {
    const int n = int(samples.size());
    if (n < 1) throw UsageError("fourier_coefficients: no samples");
    std::vector<FourierCoefficient> out;
    for (int k = k_min; k <= k_max; ++k) {
        FourierCoefficient f;
        f.k = k;
        for (int j = 0; j < n; ++j) f.raw += samples[j] * std::polar(1.0, -2.0 * kPi * k * double(j) / n);
        f.raw /= double(n);
        if (k == 0) {
            f.value = f.raw;
        } else {
            const auto W = whittaker_w_full(k > 0 ? b : -b, b - 0.5, 4.0 * kPi * std::abs(k) * y);
            if (W.log_abs < std::log(1e-300))
                throw UsageError("fourier_coefficients: Whittaker factor below 1e-300, use a lower height");
            f.value = f.raw / W.value;
        }
        out.push_back(f);
    }
    return out;
}

// ---------------------------------------------------------------- ground space

// Eigenvectors in the cluster within 10% of b, rescaled so that <|xi|^2> = 1 and
// <xi_i, xi_j> = delta_ij with respect to the bracket.
inline std::vector<VecC> ground_space_basis(const SpectralResult& r, const TruncatedMesh& M, double b,
                                            std::int64_t expected) {
    std::vector<VecC> basis;
    for (std::size_t j = 0; j < r.eigenvalues.size(); ++j)
        if (r.eigenvalues[j] >= 0.9 * b && r.eigenvalues[j] <= 1.1 * b)
            basis.push_back(r.eigenvectors.col(Eigen::Index(j)) * std::sqrt(M.surface_area));
    if (std::int64_t(basis.size()) != expected)
        throw DimensionMismatchError("ground space: found " + std::to_string(basis.size()) +
                                     " eigenvalues within 10% of b = " + std::to_string(b) + ", expected " +
                                     std::to_string(expected) + " (mesh too coarse or count formula disagrees)");
    return basis;
}

inline void write_cusp_form_csv(std::ostream& os, const std::vector<cplx>& points, const std::vector<SeriesValue>& v) {
    os.precision(17);
    os << "x,y,re,im,tail_bound\n";
    for (std::size_t i = 0; i < points.size(); ++i)
        os << points[i].real() << ',' << points[i].imag() << ',' << v[i].value.real() << ',' << v[i].value.imag()
           << ',' << v[i].tail << '\n';
}

}  // namespace hypergl
