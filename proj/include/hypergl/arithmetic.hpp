#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace hypergl {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

template <class T>
struct Moebius {
    T a{1}, b{0}, c{0}, d{1};

    constexpr T det() const { return a * d - b * c; }

    constexpr Moebius operator*(const Moebius& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }

    // Inverse of a determinant-one matrix.
    constexpr Moebius inverse() const { return {d, -b, -c, a}; }

    constexpr Moebius negated() const { return {-a, -b, -c, -d}; }

    // Projective equality: M and -M are the same transformation.
    friend constexpr bool operator==(const Moebius& x, const Moebius& y) {
        return (x.a == y.a && x.b == y.b && x.c == y.c && x.d == y.d) ||
               (x.a == -y.a && x.b == -y.b && x.c == -y.c && x.d == -y.d);
    }
};

using ModularMatrix = Moebius<std::int64_t>;
using RealMoebius = Moebius<double>;

template <class T>
RealMoebius to_real(const Moebius<T>& g) {
    return {double(g.a), double(g.b), double(g.c), double(g.d)};
}

inline constexpr ModularMatrix kIdentity{1, 0, 0, 1};
inline constexpr ModularMatrix kT{1, 1, 0, 1};
inline constexpr ModularMatrix kTinv{1, -1, 0, 1};
inline constexpr ModularMatrix kS{0, -1, 1, 0};

inline ModularMatrix translation(std::int64_t n) { return {1, n, 0, 1}; }

template <class T>
cplx mobius_apply(const Moebius<T>& g, cplx z) {
    if (!(z.imag() > 0.0) || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw std::invalid_argument("mobius_apply: point must lie in the upper half-plane");
    const cplx num = double(g.a) * z + double(g.b);
    const cplx den = double(g.c) * z + double(g.d);
    return num / den;
}

// Extended rational p/q in lowest terms with q >= 0; q == 0 encodes infinity.
struct ExtRational {
    std::int64_t p{1}, q{0};

    static ExtRational make(std::int64_t p, std::int64_t q) {
        if (p == 0 && q == 0) throw std::invalid_argument("ExtRational: 0/0");
        const std::int64_t g = std::gcd(p, q);
        p /= g;
        q /= g;
        if (q < 0 || (q == 0 && p < 0)) {
            p = -p;
            q = -q;
        }
        return {p, q};
    }
    bool is_infinity() const { return q == 0; }
    double value() const { return double(p) / double(q); }
    std::string str() const {
        if (q == 0) return "inf";
        if (q == 1) return std::to_string(p);
        return std::to_string(p) + "/" + std::to_string(q);
    }
    friend bool operator==(const ExtRational&, const ExtRational&) = default;
};

// Image of the point at infinity, g(inf) = a/c.
inline ExtRational mobius_apply_infinity(const ModularMatrix& g) { return ExtRational::make(g.a, g.c); }

inline std::int64_t mod_n(std::int64_t x, std::int64_t n) {
    const std::int64_t r = x % n;
    return r < 0 ? r + n : r;
}

inline bool is_member(const ModularMatrix& g, std::int64_t N) {
    if (N < 1) throw std::invalid_argument("is_member: N must be positive");
    auto congruent_to = [&](std::int64_t s) {
        return mod_n(g.a - s, N) == 0 && mod_n(g.d - s, N) == 0 && mod_n(g.b, N) == 0 && mod_n(g.c, N) == 0;
    };
    return congruent_to(1) || congruent_to(-1);
}

struct Rational {
    std::int64_t num{0}, den{1};
    static Rational make(std::int64_t n, std::int64_t d) {
        if (d == 0) throw std::invalid_argument("Rational: zero denominator");
        const std::int64_t g = std::gcd(n, d);
        Rational r{n / g, d / g};
        if (r.den < 0) {
            r.num = -r.num;
            r.den = -r.den;
        }
        return r;
    }
    double value() const { return double(num) / double(den); }
    bool is_zero() const { return num == 0; }
    friend bool operator==(const Rational&, const Rational&) = default;
    friend Rational operator+(const Rational& x, const Rational& y) {
        const std::int64_t l = std::lcm(x.den, y.den);
        return make(x.num * (l / x.den) + y.num * (l / y.den), l);
    }
    friend Rational operator-(const Rational& x) { return {-x.num, x.den}; }
    friend Rational operator-(const Rational& x, const Rational& y) { return x + (-y); }
    friend Rational operator*(const Rational& x, const Rational& y) {
        const std::int64_t g1 = std::gcd(x.num, y.den), g2 = std::gcd(y.num, x.den);
        const std::int64_t a = g1 ? g1 : 1, c = g2 ? g2 : 1;
        return make((x.num / a) * (y.num / c), (x.den / c) * (y.den / a));
    }
};

inline std::vector<std::int64_t> prime_divisors(std::int64_t n) {
    std::vector<std::int64_t> ps;
    for (std::int64_t p = 2; p * p <= n; ++p) {
        if (n % p == 0) {
            ps.push_back(p);
            while (n % p == 0) n /= p;
        }
    }
    if (n > 1) ps.push_back(n);
    return ps;
}

inline void require_level(std::int64_t N) {
    if (N < 2) throw UsageError("level N must be >= 2 (N = 1 has elliptic points)");
}

inline std::int64_t cusp_count(std::int64_t N) {
    require_level(N);
    if (N == 2) return 3;
    // N^2/2 * prod (1 - 1/p^2) evaluated in integers.
    std::int64_t num = N * N, den = 2;
    for (std::int64_t p : prime_divisors(N)) {
        num *= (p * p - 1);
        den *= p * p;
    }
    if (num % den != 0) throw NumericalError("cusp_count: non-integral cusp count");
    return num / den;
}

inline std::int64_t genus(std::int64_t N) {
    const std::int64_t m = cusp_count(N);
    const std::int64_t num = 12 + (N - 6) * m;
    if (num % 12 != 0) throw NumericalError("genus: non-integral genus");
    return num / 12;
}

// |Sigma| / pi = N m / 3.
inline Rational area_over_pi(std::int64_t N) { return Rational::make(N * cusp_count(N), 3); }

inline double surface_area(std::int64_t N) { return area_over_pi(N).value() * kPi; }

// Right cosets Gamma(N) g of SL(2,Z), identified projectively. Each is stored with an
// integer lift reached by a breadth-first walk over right multiplication by T, T^-1, S,
// so the translates g F of the standard cell form a connected fundamental domain.
class CosetTable {
public:
    explicit CosetTable(std::int64_t N) : N_(N) {
        require_level(N);
        reps_.push_back(kIdentity);
        index_.emplace(key(kIdentity), 0);
        const std::array<ModularMatrix, 3> gens{kT, kTinv, kS};
        std::deque<int> queue{0};
        while (!queue.empty()) {
            const int i = queue.front();
            queue.pop_front();
            for (const auto& s : gens) {
                const ModularMatrix h = reps_[i] * s;
                const auto k = key(h);
                if (!index_.count(k)) {
                    index_.emplace(k, int(reps_.size()));
                    reps_.push_back(h);
                    queue.push_back(int(reps_.size()) - 1);
                }
            }
        }
        right_.assign(reps_.size(), {});
        for (std::size_t i = 0; i < reps_.size(); ++i)
            for (int s = 0; s < 3; ++s) right_[i][s] = index_.at(key(reps_[i] * gens[s]));
    }

    std::int64_t level() const { return N_; }
    std::size_t size() const { return reps_.size(); }
    const ModularMatrix& rep(std::size_t i) const { return reps_[i]; }
    const std::vector<ModularMatrix>& reps() const { return reps_; }

    int index_of(const ModularMatrix& g) const { return index_.at(key(g)); }
    int right_T(int i) const { return right_[i][0]; }
    int right_Tinv(int i) const { return right_[i][1]; }
    int right_S(int i) const { return right_[i][2]; }

private:
    using Key = std::array<std::int64_t, 4>;
    Key key(const ModularMatrix& g) const {
        Key p{mod_n(g.a, N_), mod_n(g.b, N_), mod_n(g.c, N_), mod_n(g.d, N_)};
        Key m{mod_n(-g.a, N_), mod_n(-g.b, N_), mod_n(-g.c, N_), mod_n(-g.d, N_)};
        return std::min(p, m);
    }

    std::int64_t N_;
    std::vector<ModularMatrix> reps_;
    std::map<Key, int> index_;
    std::vector<std::array<int, 3>> right_;
};

// Unnormalized scaling matrix: identity at infinity, z -> -1/(z - c) for finite c.
inline RealMoebius cusp_scaling_matrix(const ExtRational& c) {
    if (c.is_infinity()) return {1.0, 0.0, 0.0, 1.0};
    return {0.0, -1.0, 1.0, -c.value()};
}

struct Cusp {
    ExtRational value;
    double width{0.0};
    int home_cell{0};           // coset whose lift g satisfies g(inf) = value
    ModularMatrix lift;         // that lift
    ModularMatrix stabilizer;   // g T^N g^-1, generator of the stabilizer in Gamma(N)
    RealMoebius unnormalized;   // cusp_scaling_matrix(value)
    RealMoebius scaling;        // maps value to inf and the stabilizer generator to z -> z + 1
};

struct CongruenceSurface {
    std::int64_t N{2};
    std::int64_t m{0};
    std::int64_t g{0};
    Rational area_over_pi;
    CosetTable cosets;
    std::vector<Cusp> cusps;
    std::vector<int> cell_cusp;  // cusp index of each cell's top

    double area() const { return area_over_pi.value() * kPi; }
    std::size_t index() const { return cosets.size(); }
};

inline CongruenceSurface make_surface(std::int64_t N) {
    require_level(N);
    CongruenceSurface s{N, cusp_count(N), genus(N), area_over_pi(N), CosetTable(N), {}, {}};
    const auto& table = s.cosets;
    const int n = int(table.size());
    if (Rational::make(n, 3) != s.area_over_pi)
        throw NumericalError("make_surface: coset count inconsistent with area");

    std::vector<int> orbit(n, -1);
    std::vector<std::vector<int>> orbits;
    for (int i = 0; i < n; ++i) {
        if (orbit[i] >= 0) continue;
        std::vector<int> members;
        for (int j = i; orbit[j] < 0; j = table.right_T(j)) {
            orbit[j] = int(orbits.size());
            members.push_back(j);
        }
        orbits.push_back(members);
    }
    if (std::int64_t(orbits.size()) != s.m) throw NumericalError("make_surface: cusp orbit count mismatch");

    auto rank = [](const ExtRational& v) {
        // Infinity first, then smaller denominators, smaller |p|, positive before negative.
        return std::make_tuple(v.q == 0 ? 0 : 1, v.q, v.p < 0 ? -v.p : v.p, v.p < 0 ? 1 : 0);
    };
    std::vector<Cusp> cusps;
    for (const auto& members : orbits) {
        int best = members.front();
        ExtRational bv = mobius_apply_infinity(table.rep(best));
        for (int j : members) {
            const ExtRational v = mobius_apply_infinity(table.rep(j));
            if (rank(v) < rank(bv)) {
                bv = v;
                best = j;
            }
        }
        Cusp c;
        c.value = bv;
        c.home_cell = best;
        c.lift = table.rep(best);
        c.stabilizer = c.lift * translation(N) * c.lift.inverse();
        c.unnormalized = cusp_scaling_matrix(bv);
        const RealMoebius pg = c.unnormalized * to_real(c.lift);
        c.width = double(N);
        // translation length of the stabilizer in the unnormalized chart
        const double sw = std::sqrt(pg.a * pg.a * double(N));
        c.scaling = RealMoebius{1.0 / sw, 0.0, 0.0, sw} * c.unnormalized;
        cusps.push_back(c);
    }
    std::vector<int> order(cusps.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) {
        const auto& u = cusps[x].value;
        const auto& v = cusps[y].value;
        if (u.is_infinity() != v.is_infinity()) return u.is_infinity();
        return u.p * v.q < v.p * u.q;
    });
    std::vector<int> new_index(cusps.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        s.cusps.push_back(cusps[order[k]]);
        new_index[order[k]] = int(k);
    }
    s.cell_cusp.resize(n);
    for (int i = 0; i < n; ++i) s.cell_cusp[i] = new_index[orbit[i]];
    return s;
}

struct ReducedPoint {
    cplx z0;               // gamma z, inside the coset-tiled fundamental domain
    ModularMatrix gamma;   // element of Gamma(N)
    int cell{0};           // z0 = rep(cell) w
    cplx w;                // position in the standard cell
    ModularMatrix to_cell; // h in SL(2,Z) with h z = w
};

// Standard reduction into F = {|Re w| <= 1/2, |w| >= 1}, ties broken toward smaller Re.
inline std::pair<cplx, ModularMatrix> reduce_to_standard_cell(cplx z, int max_steps = 10000) {
    if (!(z.imag() > 0.0) || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw std::invalid_argument("reduce_point: point must lie in the upper half-plane");
    constexpr double tol = 1e-13;
    ModularMatrix h = kIdentity;
    for (int step = 0;; ++step) {
        if (step >= max_steps) throw NumericalError("reduce_point: iteration cap reached");
        const double n = std::floor(z.real() + 0.5);
        if (n != 0.0) {
            z -= n;
            h = translation(-std::int64_t(n)) * h;
        }
        if (std::norm(z) < 1.0 - tol) {
            z = -1.0 / z;
            h = kS * h;
        } else {
            break;
        }
    }
    if (z.real() > 0.5 - tol) {
        z -= 1.0;
        h = kTinv * h;
    }
    if (std::abs(std::norm(z) - 1.0) <= tol && z.real() > tol) {
        z = -1.0 / z;
        h = kS * h;
    }
    return {z, h};
}

inline ReducedPoint reduce_point(cplx z, const CongruenceSurface& s) {
    auto [w, h] = reduce_to_standard_cell(z);
    const int cell = s.cosets.index_of(h.inverse());
    const ModularMatrix g = s.cosets.rep(cell);
    ReducedPoint r;
    r.cell = cell;
    r.w = w;
    r.to_cell = h;
    r.gamma = g * h;
    r.z0 = mobius_apply(g, w);
    return r;
}

inline double hyperbolic_distance(cplx z1, cplx z2) {
    const double num = std::norm(z1 - z2);
    return std::acosh(1.0 + num / (2.0 * z1.imag() * z2.imag()));
}

}  // namespace hypergl
