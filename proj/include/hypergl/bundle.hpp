#pragma once

#include <array>
#include <cmath>
#include <complex>

#include "arithmetic.hpp"
#include "errors.hpp"

namespace hypergl {

// Line bundle of a given degree over H / Gamma(N) with the canonical automorphy factor.
struct BundleData {
    std::int64_t N{2};
    std::int64_t degree{1};
    double area{0.0};
    double b{0.0};  // 2 pi degree / area
    double k{0.0};  // weight 2b

    bool integer_b() const { return std::abs(b - std::round(b)) < 1e-12; }
};

inline constexpr const char* kEmbeddedEigenvalueMessage =
    "b = 1/2: the ground eigenvalue b is embedded at the bottom of the essential spectrum "
    "[1/4 + b^2, inf); this configuration is not supported";

inline BundleData make_bundle(std::int64_t N, std::int64_t degree) {
    require_level(N);
    if (degree < 1) throw UsageError("degree must be >= 1");
    const Rational ap = area_over_pi(N);
    BundleData B;
    B.N = N;
    B.degree = degree;
    B.area = ap.value() * kPi;
    // b = 2 pi deg / (pi ap) = 2 deg den / num, kept exact until the final division.
    const Rational br = Rational::make(2 * degree * ap.den, ap.num);
    B.b = br.value();
    B.k = 2.0 * B.b;
    if (br == Rational{1, 2}) throw ModelGuardError(kEmbeddedEigenvalueMessage);
    return B;
}

// Weight and degree conversions: b = 2 pi deg / |Sigma|, k = 2b.
inline std::pair<double, double> degree_to_weight(std::int64_t N, std::int64_t degree) {
    const double b = 2.0 * kPi * double(degree) / surface_area(N);
    return {b, 2.0 * b};
}

// deg = k |Sigma| / (4 pi) = k (2g - 2 + m) / 2; rejects non-integral results.
inline std::int64_t weight_to_degree(std::int64_t N, std::int64_t k) {
    const std::int64_t euler = 2 * genus(N) - 2 + cusp_count(N);
    if ((k * euler) % 2 != 0) throw UsageError("weight_to_degree: non-integral degree");
    return k * euler / 2;
}

// rho_b(g, z) = ((cz + d) / (c zbar + d))^b on the principal branch of the ratio.
template <class T>
cplx automorphy_factor(const Moebius<T>& g, cplx z, double b) {
    if (!(z.imag() > 0.0)) throw std::invalid_argument("automorphy_factor: Im z must be positive");
    const cplx j = double(g.c) * z + double(g.d);
    const double arg = std::arg(j * j / std::norm(j));
    return std::polar(1.0, b * arg);
}

template <class T>
double cocycle_residual(const Moebius<T>& g1, const Moebius<T>& g2, cplx z, double b) {
    const cplx lhs = automorphy_factor(g1 * g2, z, b);
    const cplx rhs = automorphy_factor(g1, mobius_apply(g2, z), b) * automorphy_factor(g2, z, b);
    return std::abs(lhs - rhs);
}

// a^b = b dx / y in Euclidean components.
inline std::array<double, 2> constant_connection(cplx z, double b) {
    if (!(z.imag() > 0.0)) throw std::invalid_argument("constant_connection: Im z must be positive");
    return {b / z.imag(), 0.0};
}

// Exact line integral of dx/y along the straight segment p -> q.
inline double segment_integral_dx_over_y(cplx p, cplx q) {
    const double dx = q.real() - p.real();
    const double y1 = p.imag(), y2 = q.imag();
    const double dy = y2 - y1;
    if (std::abs(dy) <= 1e-9 * std::max(y1, y2)) {
        // log-ratio series avoids cancellation for nearly horizontal edges
        const double t = dy / y1;
        return dx / y1 * (1.0 - t / 2.0 + t * t / 3.0);
    }
    return dx * std::log(y2 / y1) / dy;
}

// Pointwise gauge transform (psi, a) -> (e^{i chi} psi, a + d chi).
struct GaugePoint {
    cplx psi;
    std::array<double, 2> a;
};

inline GaugePoint gauge_transform(const GaugePoint& p, cplx g, std::array<double, 2> dchi) {
    if (std::abs(std::abs(g) - 1.0) > 1e-12) throw std::invalid_argument("gauge_transform: phase must be unimodular");
    return {g * p.psi, {p.a[0] + dchi[0], p.a[1] + dchi[1]}};
}

// Equivariance defect of a^b under g, measured in the hyperbolic norm at z:
// |g^* a - a - d sigma| with rho_b(g, z) = e^{i sigma}. This is the transformation law
// that keeps d - i a covariant for sections with Psi(g z) = rho_b(g, z) Psi(z).
template <class T>
double connection_equivariance_residual(const Moebius<T>& g, cplx z, double b) {
    const cplx j = double(g.c) * z + double(g.d);
    const cplx deriv = 1.0 / (j * j);
    const double im_gz = z.imag() / std::norm(j);
    const double pull_x = b * deriv.real() / im_gz;
    const double pull_y = -b * deriv.imag() / im_gz;
    const cplx q = double(g.c) / j;
    const double dsig_x = 2.0 * b * q.imag();
    const double dsig_y = 2.0 * b * q.real();
    const auto a = constant_connection(z, b);
    const double ex = pull_x - a[0] - dsig_x;
    const double ey = pull_y - a[1] - dsig_y;
    return z.imag() * std::hypot(ex, ey);
}

// |Psi(g z) - rho_b(g, z) Psi(z)| for a section given as a callable on H.
template <class T, class F>
double section_equivariance_residual(const F& psi, const Moebius<T>& g, cplx z, double b) {
    return std::abs(psi(mobius_apply(g, z)) - automorphy_factor(g, z, b) * psi(z));
}

}  // namespace hypergl
