#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arithmetic.hpp"
#include "bundle.hpp"
#include "errors.hpp"

namespace hypergl {

// Geometry of the fundamental domain.
//
// The surface is tiled by the translates g F of the standard cell F = {|x| <= 1/2, |z| >= 1}
// over the coset representatives g. Every cell is meshed with the same template grid in
// the coordinates of F, truncated at template height N*Y (normalized cusp height Y). A
// section Psi is stored per cell in the template gauge u_g(v) = rho_b(g, v)^-1 Psi(g v), in
// which the connection is b dx/y in every cell. Cell sides are glued by
//   T: (g, 1/2 + iy) ~ (gT, -1/2 + iy) with u unchanged,
//   S: (g, v on the arc) ~ (gS, -1/v) with u_{gS}(-1/v) = rho_b(S, -1/v)^-1 u_g(v).
// Local node copies are merged into degrees of freedom by a union-find that carries the
// phase angle (per unit b) and the template transformation relating each copy to its root.

struct TriangleGeometry {
    std::array<int, 3> local{};    // local node ids
    std::array<int, 3> cls{};      // node classes
    std::array<cplx, 3> p{};       // template positions
    double area{0.0};              // Euclidean
    double hyp_area{0.0};          // exact hyperbolic area of the straight triangle
    double curl_weight{0.0};       // int_T y^2 dxdy / area^2
    std::array<double, 3> cot{};   // cotangent of the angle at vertex k
    std::array<double, 3> dx_over_y{};  // int of dx/y along edge k (vertex k+1 -> k+2)
    std::array<int, 3> edge{};     // global edge of local edge k
    std::array<int, 3> sign{};     // +1 when local edge k agrees with the global orientation
};

struct MeshPair {
    int i{0}, j{0};
    ModularMatrix gamma;  // gamma z_i = z_j, gamma in Gamma(N)
};

struct TruncatedMesh {
    std::int64_t N{2};
    double Y{20.0};
    double h{0.1};
    int nx{0}, ny{0};
    std::vector<ModularMatrix> cells;
    std::vector<int> cell_cusp;
    std::int64_t n_cusps{0};
    double surface_area{0.0};

    std::vector<cplx> tpos;  // template grid, index j*(nx+1)+i

    // local node = cell * tpos.size() + template index
    std::vector<int> local_class;
    std::vector<double> local_angle;  // u_local = exp(i b angle) U_class
    std::vector<int> local_hnode;

    int n_classes{0};
    std::vector<char> class_dirichlet;
    std::vector<int> class_dof;       // -1 on Dirichlet classes
    std::vector<int> dof_class;
    std::vector<double> class_mass;   // lumped hyperbolic mass
    std::vector<double> class_y;      // template height shared by all copies
    std::vector<double> cycle_defects;  // phase mismatches (per unit b) around gluing cycles

    std::vector<TriangleGeometry> tris;
    std::vector<int> tri_cell;

    std::vector<std::array<int, 2>> edge_classes;  // oriented low class -> high class
    std::vector<int> edge_dof;                     // -1 when pinned (cap ring)
    int n_edge_dofs{0};

    std::vector<cplx> hnodes;
    std::vector<MeshPair> pairs;
    std::vector<std::vector<int>> caps;

    int n_free() const { return int(dof_class.size()); }
    int nodes_per_cell() const { return int(tpos.size()); }
    int template_index(int i, int j) const { return j * (nx + 1) + i; }
    int cell_of_local(int l) const { return l / nodes_per_cell(); }
    cplx template_position(int l) const { return tpos[l % nodes_per_cell()]; }
    cplx h_position(int l) const { return mobius_apply(cells[cell_of_local(l)], template_position(l)); }

    double mesh_area() const {
        double s = 0.0;
        for (const auto& t : tris) s += t.hyp_area;
        return s;
    }
    double truncated_area_exact() const { return surface_area - double(n_cusps) / Y; }

    // Throws when the phase bookkeeping is inconsistent for this b (non-integral weight).
    void require_consistent(double b) const {
        for (double d : cycle_defects) {
            if (std::abs(std::polar(1.0, b * d) - 1.0) > 1e-9)
                throw ModelGuardError("bundle with b = " + std::to_string(b) +
                                      " is not well defined on the glued mesh (automorphy cocycle fails)");
        }
    }
};

namespace detail {

struct PhaseUnionFind {
    std::vector<int> parent;
    std::vector<double> angle;            // u_x = exp(i b angle_x) u_parent
    std::vector<ModularMatrix> matrix;    // v_x = matrix_x v_parent
    std::vector<double> defects;

    explicit PhaseUnionFind(int n) : parent(n), angle(n, 0.0), matrix(n, kIdentity) {
        std::iota(parent.begin(), parent.end(), 0);
    }

    int find(int x) {
        if (parent[x] == x) return x;
        const int p = parent[x];
        const int r = find(p);
        angle[x] += angle[p];
        matrix[x] = matrix[x] * matrix[p];
        parent[x] = r;
        return r;
    }

    // Records u_b = exp(i b theta) u_a and v_b = M v_a.
    void unite(int a, int b, double theta, const ModularMatrix& M) {
        const int ra = find(a), rb = find(b);
        if (ra == rb) {
            const double d = angle[b] - theta - angle[a];
            if (std::abs(d) > 1e-12) defects.push_back(d);
            if (!(matrix[b] == M * matrix[a])) throw NumericalError("build_mesh: non-manifold gluing (template maps disagree)");
            return;
        }
        parent[rb] = ra;
        angle[rb] = theta + angle[a] - angle[b];
        matrix[rb] = matrix[b].inverse() * M * matrix[a];
    }
};

inline std::array<std::int64_t, 4> projective_key(const ModularMatrix& g) {
    std::array<std::int64_t, 4> p{g.a, g.b, g.c, g.d}, m{-g.a, -g.b, -g.c, -g.d};
    return std::max(p, m);
}

inline void compute_triangle_geometry(TriangleGeometry& t) {
    const auto& p = t.p;
    const cplx e1 = p[1] - p[0], e2 = p[2] - p[0];
    const double cross = e1.real() * e2.imag() - e1.imag() * e2.real();
    if (!(cross > 0.0)) throw NumericalError("build_mesh: degenerate or inverted triangle");
    t.area = 0.5 * cross;
    for (int k = 0; k < 3; ++k) {
        const cplx u = p[(k + 1) % 3] - p[k], v = p[(k + 2) % 3] - p[k];
        t.cot[k] = (u.real() * v.real() + u.imag() * v.imag()) / cross;
        t.dx_over_y[k] = segment_integral_dx_over_y(p[(k + 1) % 3], p[(k + 2) % 3]);
    }
    t.hyp_area = t.dx_over_y[0] + t.dx_over_y[1] + t.dx_over_y[2];
    const double y0 = p[0].imag(), y1 = p[1].imag(), y2 = p[2].imag();
    const double y2int = t.area * (y0 * y0 + y1 * y1 + y2 * y2 + y0 * y1 + y1 * y2 + y0 * y2) / 6.0;
    t.curl_weight = y2int / (t.area * t.area);
}

}  // namespace detail

inline std::vector<cplx> template_grid(std::int64_t N, double Y, int nx, int ny) {
    std::vector<cplx> pos;
    pos.reserve(std::size_t(nx + 1) * (ny + 1));
    const double H = double(N) * Y;
    for (int j = 0; j <= ny; ++j) {
        const double t = double(j) / ny;
        for (int i = 0; i <= nx; ++i) {
            // symmetric abscissae so that x -> -x maps grid columns onto each other exactly
            const double x = (i <= nx / 2) ? -0.5 + double(i) / nx : 0.5 - double(nx - i) / nx;
            const double yb = std::sqrt(1.0 - x * x);
            const double y = (j == ny) ? H : (j == 0 ? yb : yb * std::exp(t * std::log(H / yb)));
            pos.emplace_back(x, y);
        }
    }
    return pos;
}

// Derived arrays (geometry, masses, edges) from the primary combinatorial data.
inline void finalize_mesh(TruncatedMesh& M) {
    const int per = M.nodes_per_cell();
    M.class_mass.assign(M.n_classes, 0.0);
    M.class_y.assign(M.n_classes, 0.0);
    for (std::size_t l = 0; l < M.local_class.size(); ++l) M.class_y[M.local_class[l]] = M.tpos[l % per].imag();

    std::map<std::pair<int, int>, int> edge_index;
    std::vector<int> edge_uses;
    std::vector<int> edge_orient_sum;
    M.edge_classes.clear();
    for (auto& t : M.tris) {
        for (int k = 0; k < 3; ++k) {
            t.cls[k] = M.local_class[t.local[k]];
            t.p[k] = M.tpos[t.local[k] % per];
        }
        detail::compute_triangle_geometry(t);
        for (int k = 0; k < 3; ++k) M.class_mass[t.cls[k]] += t.area / (3.0 * t.p[k].imag() * t.p[k].imag());
        for (int k = 0; k < 3; ++k) {
            const int a = t.cls[(k + 1) % 3], b = t.cls[(k + 2) % 3];
            if (a == b) throw NumericalError("build_mesh: edge collapses under gluing (mesh too coarse)");
            const auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = edge_index.find(key);
            if (it == edge_index.end()) {
                it = edge_index.emplace(key, int(M.edge_classes.size())).first;
                M.edge_classes.push_back({key.first, key.second});
                edge_uses.push_back(0);
                edge_orient_sum.push_back(0);
            }
            t.edge[k] = it->second;
            t.sign[k] = (a < b) ? 1 : -1;
            edge_uses[it->second] += 1;
            edge_orient_sum[it->second] += t.sign[k];
        }
    }
    M.edge_dof.assign(M.edge_classes.size(), -1);
    M.n_edge_dofs = 0;
    for (std::size_t e = 0; e < M.edge_classes.size(); ++e) {
        const bool ring = M.class_dirichlet[M.edge_classes[e][0]] && M.class_dirichlet[M.edge_classes[e][1]];
        if (ring) {
            if (edge_uses[e] != 1) throw NumericalError("build_mesh: cap edge shared by several triangles");
        } else {
            if (edge_uses[e] != 2 || edge_orient_sum[e] != 0)
                throw NumericalError("build_mesh: non-manifold gluing (edge used " + std::to_string(edge_uses[e]) +
                                     " times)");
            M.edge_dof[e] = M.n_edge_dofs++;
        }
    }
}

inline TruncatedMesh build_mesh(const CongruenceSurface& S, double Y, double h) {
    if (!(Y >= 5.0)) throw UsageError("build_mesh: Y must be >= 5");
    if (!(h > 0.0 && h <= 0.5)) throw UsageError("build_mesh: h must lie in (0, 0.5]");
    TruncatedMesh M;
    M.N = S.N;
    M.Y = Y;
    M.h = h;
    M.cells = S.cosets.reps();
    M.cell_cusp = S.cell_cusp;
    M.n_cusps = S.m;
    M.surface_area = S.area();
    const double yb_min = std::sqrt(3.0) / 2.0;
    M.nx = int(std::ceil(1.0 / (h * yb_min)));
    if (M.nx % 2) ++M.nx;
    M.nx = std::max(M.nx, 4);
    M.ny = std::max(4, int(std::ceil(std::log(double(S.N) * Y / yb_min) / h)));
    M.tpos = template_grid(S.N, Y, M.nx, M.ny);

    const int nc = int(M.cells.size());
    const int per = M.nodes_per_cell();
    const int nx = M.nx, ny = M.ny;
    detail::PhaseUnionFind uf(nc * per);
    for (int c = 0; c < nc; ++c) {
        const int cT = S.cosets.right_T(c);
        for (int j = 0; j <= ny; ++j)
            uf.unite(c * per + M.template_index(nx, j), cT * per + M.template_index(0, j), 0.0, kTinv);
        const int cS = S.cosets.right_S(c);
        for (int i = 0; i <= nx; ++i) {
            const int i2 = nx - i;
            const cplx vb = M.tpos[M.template_index(i2, 0)];
            uf.unite(c * per + M.template_index(i, 0), cS * per + M.template_index(i2, 0), -2.0 * std::arg(vb),
                     kS.inverse());
        }
    }

    std::vector<int> root_class(nc * per, -1);
    M.local_class.resize(nc * per);
    M.local_angle.resize(nc * per);
    std::vector<ModularMatrix> local_matrix(nc * per);
    for (int l = 0; l < nc * per; ++l) {
        const int r = uf.find(l);
        if (root_class[r] < 0) root_class[r] = M.n_classes++;
        M.local_class[l] = root_class[r];
        M.local_angle[l] = uf.angle[l];
        local_matrix[l] = uf.matrix[l];
    }
    M.cycle_defects = uf.defects;

    M.class_dirichlet.assign(M.n_classes, 0);
    for (int c = 0; c < nc; ++c)
        for (int i = 0; i <= nx; ++i) M.class_dirichlet[M.local_class[c * per + M.template_index(i, ny)]] = 1;
    M.class_dof.assign(M.n_classes, -1);
    for (int k = 0; k < M.n_classes; ++k) {
        if (!M.class_dirichlet[k]) {
            M.class_dof[k] = int(M.dof_class.size());
            M.dof_class.push_back(k);
        }
    }

    for (int c = 0; c < nc; ++c) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const int a = c * per + M.template_index(i, j), b = c * per + M.template_index(i + 1, j);
                const int cc = c * per + M.template_index(i + 1, j + 1), d = c * per + M.template_index(i, j + 1);
                const double d1 = std::abs(M.tpos[cc % per] - M.tpos[a % per]);
                const double d2 = std::abs(M.tpos[d % per] - M.tpos[b % per]);
                TriangleGeometry t1, t2;
                if (d1 <= d2) {
                    t1.local = {a, b, cc};
                    t2.local = {a, cc, d};
                } else {
                    t1.local = {a, b, d};
                    t2.local = {b, cc, d};
                }
                M.tris.push_back(t1);
                M.tri_cell.push_back(c);
                M.tris.push_back(t2);
                M.tri_cell.push_back(c);
            }
        }
    }

    // Points of H: copies related by +-identity coincide, others are paired by gamma in Gamma(N).
    M.local_hnode.assign(nc * per, -1);
    std::vector<std::vector<int>> members(M.n_classes);
    for (int l = 0; l < nc * per; ++l) members[M.local_class[l]].push_back(l);
    for (int k = 0; k < M.n_classes; ++k) {
        const int ref = members[k].front();
        const ModularMatrix gref = M.cells[ref / per] * local_matrix[ref];
        std::map<std::array<std::int64_t, 4>, std::pair<int, ModularMatrix>> by_gamma;
        std::vector<std::pair<int, ModularMatrix>> groups;
        for (int l : members[k]) {
            const ModularMatrix gamma = M.cells[l / per] * local_matrix[l] * gref.inverse();
            const auto key = detail::projective_key(gamma);
            auto it = by_gamma.find(key);
            if (it == by_gamma.end()) {
                if (!is_member(gamma, M.N)) throw NumericalError("build_mesh: pairing element outside Gamma(N)");
                const int hn = int(M.hnodes.size());
                M.hnodes.push_back(M.h_position(l));
                it = by_gamma.emplace(key, std::make_pair(hn, gamma)).first;
                groups.emplace_back(hn, gamma);
            }
            M.local_hnode[l] = it->second.first;
        }
        for (const auto& [hi, gi] : groups)
            for (const auto& [hj, gj] : groups)
                if (hi != hj) M.pairs.push_back({hi, hj, gj * gi.inverse()});
    }
    M.caps.assign(S.m, {});
    for (int c = 0; c < nc; ++c)
        for (int i = 0; i < nx; ++i) M.caps[M.cell_cusp[c]].push_back(M.local_hnode[c * per + M.template_index(i, ny)]);
    for (auto& cap : M.caps) {
        std::sort(cap.begin(), cap.end());
        cap.erase(std::unique(cap.begin(), cap.end()), cap.end());
    }

    finalize_mesh(M);
    return M;
}

// Quadrature of f dxdy/y^2 with a 7-point degree-5 rule in template coordinates. The
// per-triangle weights are rescaled so that f = 1 reproduces the exact hyperbolic area.
namespace detail {
inline constexpr std::array<std::array<double, 4>, 7> kDunavant5{{
    {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225},
    {0.059715871789770, 0.470142064105115, 0.470142064105115, 0.132394152788506},
    {0.470142064105115, 0.059715871789770, 0.470142064105115, 0.132394152788506},
    {0.470142064105115, 0.470142064105115, 0.059715871789770, 0.132394152788506},
    {0.797426985353087, 0.101286507323456, 0.101286507323456, 0.125939180544827},
    {0.101286507323456, 0.797426985353087, 0.101286507323456, 0.125939180544827},
    {0.101286507323456, 0.101286507323456, 0.797426985353087, 0.125939180544827},
}};
}  // namespace detail

// f(cell, template point) -> value
template <class F>
auto integrate_template(const TruncatedMesh& M, const F& f) {
    using R = decltype(f(0, cplx{}));
    R total{};
    for (std::size_t t = 0; t < M.tris.size(); ++t) {
        const auto& T = M.tris[t];
        std::array<cplx, 7> q;
        std::array<double, 7> w;
        double wsum = 0.0;
        for (int k = 0; k < 7; ++k) {
            const auto& r = detail::kDunavant5[k];
            q[k] = r[0] * T.p[0] + r[1] * T.p[1] + r[2] * T.p[2];
            w[k] = T.area * r[3] / (q[k].imag() * q[k].imag());
            wsum += w[k];
        }
        const double scale = T.hyp_area / wsum;
        R acc{};
        for (int k = 0; k < 7; ++k) acc += (w[k] * scale) * f(M.tri_cell[t], q[k]);
        total += acc;
    }
    return total;
}

// f(z) on H, integrated over the mesh against the hyperbolic area form.
template <class F>
auto integrate(const TruncatedMesh& M, const F& f) {
    return integrate_template(M, [&](int cell, cplx v) { return f(mobius_apply(M.cells[cell], v)); });
}

// Lumped integral of a nodal field given per degree of freedom (Dirichlet values are zero).
template <class Vec>
double integrate_dofs(const TruncatedMesh& M, const Vec& f) {
    double s = 0.0;
    for (int i = 0; i < M.n_free(); ++i) s += M.class_mass[M.dof_class[i]] * double(f[i]);
    return s;
}

// Average over the untruncated surface: (1/|Sigma|) int f.
template <class Vec>
double bracket(const TruncatedMesh& M, const Vec& f) {
    return integrate_dofs(M, f) / M.surface_area;
}

// Flux degree (1/2pi) int da for a = b dx/y + alpha (alpha indexed by edge dofs, may be empty).
template <class Vec>
double degree_from_flux(const TruncatedMesh& M, double b, const Vec& alpha) {
    double s = 0.0;
    for (const auto& t : M.tris) {
        s += b * t.hyp_area;
        if (alpha.size() > 0)
            for (int k = 0; k < 3; ++k)
                if (M.edge_dof[t.edge[k]] >= 0) s += t.sign[k] * alpha[M.edge_dof[t.edge[k]]];
    }
    return s / (2.0 * kPi);
}

inline double degree_from_flux(const TruncatedMesh& M, double b) { return degree_from_flux(M, b, std::vector<double>{}); }

// Cusp chart z -> gamma_i z (unnormalized; identity at infinity, -1/(z - c) otherwise).
// Points must lie in the horoball Im(g^-1 z) > 1 of the cusp, where g(inf) = c.
inline cplx cusp_coordinates(const Cusp& c, cplx z) {
    const cplx u = mobius_apply(c.lift.inverse(), z);
    if (!(u.imag() > 1.0)) throw std::invalid_argument("cusp_coordinates: point outside the cusp neighbourhood");
    return mobius_apply(c.unnormalized, z);
}

// Width-one chart: the stabilizer acts as z -> z + 1.
inline cplx normalized_cusp_coordinates(const Cusp& c, cplx z) {
    const cplx u = mobius_apply(c.lift.inverse(), z);
    if (!(u.imag() > 1.0)) throw std::invalid_argument("cusp_coordinates: point outside the cusp neighbourhood");
    return mobius_apply(c.scaling, z);
}

// ---- JSON ---------------------------------------------------------------------------

inline nlohmann::json matrix_json(const ModularMatrix& g) { return {g.a, g.b, g.c, g.d}; }
inline ModularMatrix matrix_from_json(const nlohmann::json& j) {
    return {j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>(), j.at(2).get<std::int64_t>(),
            j.at(3).get<std::int64_t>()};
}

inline nlohmann::json to_json(const TruncatedMesh& M) {
    using nlohmann::json;
    json j;
    j["N"] = M.N;
    j["Y"] = M.Y;
    j["h"] = M.h;
    j["nx"] = M.nx;
    j["ny"] = M.ny;
    j["n_cusps"] = M.n_cusps;
    j["surface_area"] = M.surface_area;
    json nodes = json::array();
    for (auto z : M.hnodes) nodes.push_back({z.real(), z.imag()});
    j["nodes"] = nodes;
    json tris = json::array();
    for (const auto& t : M.tris)
        tris.push_back({M.local_hnode[t.local[0]], M.local_hnode[t.local[1]], M.local_hnode[t.local[2]]});
    j["tris"] = tris;
    json pairs = json::array();
    for (const auto& p : M.pairs) pairs.push_back({p.i, p.j, matrix_json(p.gamma)});
    j["pairs"] = pairs;
    json caps = json::object();
    for (std::size_t c = 0; c < M.caps.size(); ++c) caps[std::to_string(c)] = M.caps[c];
    j["caps"] = caps;
    json cells = json::array();
    for (const auto& g : M.cells) cells.push_back(matrix_json(g));
    j["cells"] = cells;
    j["cell_cusp"] = M.cell_cusp;
    json tpos = json::array();
    for (auto z : M.tpos) tpos.push_back({z.real(), z.imag()});
    j["template_nodes"] = tpos;
    j["local_class"] = M.local_class;
    j["local_angle"] = M.local_angle;
    j["local_hnode"] = M.local_hnode;
    j["class_dirichlet"] = M.class_dirichlet;
    j["cycle_defects"] = M.cycle_defects;
    json tl = json::array();
    for (const auto& t : M.tris) tl.push_back({t.local[0], t.local[1], t.local[2]});
    j["tri_local"] = tl;
    j["tri_cell"] = M.tri_cell;
    return j;
}

inline TruncatedMesh mesh_from_json(const nlohmann::json& j) {
    TruncatedMesh M;
    M.N = j.at("N").get<std::int64_t>();
    M.Y = j.at("Y").get<double>();
    M.h = j.at("h").get<double>();
    M.nx = j.at("nx").get<int>();
    M.ny = j.at("ny").get<int>();
    M.n_cusps = j.at("n_cusps").get<std::int64_t>();
    M.surface_area = j.at("surface_area").get<double>();
    for (const auto& n : j.at("nodes")) M.hnodes.emplace_back(n.at(0).get<double>(), n.at(1).get<double>());
    for (const auto& p : j.at("pairs")) M.pairs.push_back({p.at(0).get<int>(), p.at(1).get<int>(), matrix_from_json(p.at(2))});
    M.caps.assign(std::size_t(M.n_cusps), {});
    for (const auto& [k, v] : j.at("caps").items()) M.caps.at(std::stoul(k)) = v.get<std::vector<int>>();
    for (const auto& g : j.at("cells")) M.cells.push_back(matrix_from_json(g));
    M.cell_cusp = j.at("cell_cusp").get<std::vector<int>>();
    for (const auto& n : j.at("template_nodes")) M.tpos.emplace_back(n.at(0).get<double>(), n.at(1).get<double>());
    M.local_class = j.at("local_class").get<std::vector<int>>();
    M.local_angle = j.at("local_angle").get<std::vector<double>>();
    M.local_hnode = j.at("local_hnode").get<std::vector<int>>();
    M.class_dirichlet = j.at("class_dirichlet").get<std::vector<char>>();
    M.cycle_defects = j.at("cycle_defects").get<std::vector<double>>();
    M.n_classes = int(M.class_dirichlet.size());
    M.class_dof.assign(M.n_classes, -1);
    for (int k = 0; k < M.n_classes; ++k) {
        if (!M.class_dirichlet[k]) {
            M.class_dof[k] = int(M.dof_class.size());
            M.dof_class.push_back(k);
        }
    }
    for (const auto& t : j.at("tri_local")) {
        TriangleGeometry g;
        g.local = {t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()};
        M.tris.push_back(g);
    }
    M.tri_cell = j.at("tri_cell").get<std::vector<int>>();
    finalize_mesh(M);
    return M;
}

inline void write_mesh(const TruncatedMesh& M, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write " + path);
    out << to_json(M).dump() << '\n';
}

inline TruncatedMesh read_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read " + path);
    return mesh_from_json(nlohmann::json::parse(in));
}

}  // namespace hypergl
