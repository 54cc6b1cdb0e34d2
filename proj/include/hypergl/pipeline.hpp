#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "abrikosov.hpp"
#include "arithmetic.hpp"
#include "bundle.hpp"
#include "cusp_forms.hpp"
#include "errors.hpp"
#include "forms.hpp"
#include "gl_solver.hpp"
#include "mesh.hpp"
#include "spectra.hpp"

namespace hypergl {

inline constexpr const char* kVersion = "0.1.0";

struct RunConfig {
    std::int64_t N{6};
    std::int64_t degree{12};
    double kappa{1.0};
    double r{1.0};
    std::vector<double> sweep;  // offsets kappa^2 r - b for bifurcate, kappa values for sweep
    double Y{20.0};
    double h{0.1};
    double tol{1e-8};
    int max_iter{5000};
    int eigen_count{8};
    std::string out{"."};
    std::uint64_t seed{1};
    double amplitude{1e-2};
    bool solve{false};
};

inline void validate(const RunConfig& c) {
    require_level(c.N);
    if (c.degree < 1) throw UsageError("degree must be >= 1");
    if (!(c.kappa > 0.0)) throw UsageError("kappa must be positive");
    if (!(c.r > 0.0)) throw UsageError("r must be positive");
    if (!(c.Y > 1.0)) throw UsageError("Y must exceed 1");
    if (!(c.h > 0.0 && c.h <= 0.5)) throw UsageError("h must lie in (0, 0.5]");
    if (!(c.tol > 0.0)) throw UsageError("tol must be positive");
    if (c.max_iter < 0) throw UsageError("max-iter must be >= 0");
    if (c.eigen_count < 1 || c.eigen_count > 20) throw UsageError("eigen-count must lie in [1, 20]");
    if (!(c.amplitude > 0.0)) throw UsageError("amplitude must be positive");
    const BundleData B = make_bundle(c.N, c.degree);  // refuses b = 1/2
    if (!B.integer_b())
        throw UsageError("meshed pipelines need an integer b = 2 pi deg / |Sigma|; got b = " + std::to_string(B.b));
}

inline nlohmann::json config_json(const RunConfig& c) {
    return {{"N", c.N},         {"degree", c.degree},       {"kappa", c.kappa},       {"r", c.r},
            {"sweep", c.sweep}, {"Y", c.Y},                 {"h", c.h},               {"tol", c.tol},
            {"max_iter", c.max_iter}, {"eigen_count", c.eigen_count}, {"seed", c.seed},
            {"amplitude", c.amplitude}, {"solve", c.solve}};
}

inline nlohmann::json surface_json(const CongruenceSurface& S) {
    nlohmann::json cusps = nlohmann::json::array();
    for (const auto& c : S.cusps) cusps.push_back({{"p", c.value.p}, {"q", c.value.q}});
    return {{"level", S.N},
            {"m", S.m},
            {"g", S.g},
            {"area_over_pi", S.area_over_pi.value()},
            {"area_over_pi_exact", std::to_string(S.area_over_pi.num) + "/" + std::to_string(S.area_over_pi.den)},
            {"cusps", cusps},
            {"coset_count", S.index()}};
}

// Formula-level values that a run can be checked against without any mesh.
inline nlohmann::json exact_values(const RunConfig& c) {
    const BundleData B = make_bundle(c.N, c.degree);
    nlohmann::json j = {{"m", cusp_count(c.N)},
                        {"g", genus(c.N)},
                        {"area", B.area},
                        {"b", B.b},
                        {"k", B.k},
                        {"ess_bottom", 0.25 + B.b * B.b},
                        {"E_normal", 0.5 * (c.kappa * c.kappa * c.r * c.r / 2.0 + B.b * B.b) * B.area}};
    const double k = std::round(B.k);
    if (std::abs(B.k - k) < 1e-12 && std::int64_t(k) % 2 == 0 && k >= 2) {
        j["dim_cusp_forms"] = dim_cusp_forms(c.N, std::int64_t(k));
        j["dim_cusp_forms_classical"] = dim_cusp_forms_classical(c.N, std::int64_t(k));
    }
    return j;
}

inline nlohmann::json versions_json() {
    return {{"hypergl", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& c,
                           const nlohmann::json& results = nlohmann::json::object()) {
    write_json(dir / "manifest.json", {{"command", command},
                                       {"config", config_json(c)},
                                       {"versions", versions_json()},
                                       {"exact", exact_values(c)},
                                       {"results", results}});
}

// ---------------------------------------------------------------- ground space

struct GroundSpace {
    CongruenceSurface S;
    BundleData B;
    TruncatedMesh M;
    OperatorPair op;
    SpectralResult spectrum;
};

inline GroundSpace build_ground_space(const RunConfig& c) {
    validate(c);
    GroundSpace g{make_surface(c.N), make_bundle(c.N, c.degree), {}, {}, {}};
    g.M = build_mesh(g.S, c.Y, c.h);
    g.op = assemble(g.M, g.B);
    EigenOptions eo;
    eo.shift = 0.5 * g.B.b;
    eo.seed = c.seed;
    g.spectrum = lowest_eigenpairs(g.op, c.eigen_count, eo);
    if (!g.spectrum.converged) throw NumericalError("eigensolver did not converge");
    return g;
}

inline std::int64_t expected_ground_dimension(const BundleData& B) {
    const auto k = std::int64_t(std::llround(B.k));
    return dim_cusp_forms(B.N, k);
}

// The bifurcation data: normalized minimizer xi of <|xi|^4> over K, eta(xi), harmonic forms.
struct BranchContext {
    std::vector<VecC> basis;
    AbrikosovReport abrikosov;
    VecC xi;
    OneFormSpace F;
    std::vector<VecR> harmonic;
    EtaResult eta;
};

inline BranchContext build_branch_context(const GroundSpace& g) {
    BranchContext b;
    b.basis = ground_space_basis(g.spectrum, g.M, g.B.b, expected_ground_dimension(g.B));
    b.abrikosov = beta_min_max(g.M, g.op, b.basis);
    b.xi = combine(b.basis, b.abrikosov.argmin);
    b.F = make_one_form_space(g.M);
    b.harmonic = harmonic_forms(b.F, int(2 * g.S.g));
    if (std::int64_t(b.harmonic.size()) != 2 * g.S.g)
        throw NumericalError("harmonic forms: found dimension " + std::to_string(b.harmonic.size()) + ", expected 2g = " +
                             std::to_string(2 * g.S.g));
    b.eta = solve_eta(g.M, g.op, b.F, b.harmonic, b.xi);
    return b;
}

// ---------------------------------------------------------------- seeds

inline GLState random_perturbation(const GLProblem& P, double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    VecC psi(P.op().size());
    for (Eigen::Index i = 0; i < psi.size(); ++i) psi[i] = cplx(gauss(rng), gauss(rng));
    psi *= amplitude / std::sqrt(P.density_mean(psi));
    VecR alpha(P.forms().n_edges);
    for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha[i] = gauss(rng);
    alpha = P.forms().project_coclosed(alpha);
    alpha *= amplitude * std::sqrt(P.mesh().surface_area / P.forms().norm2(alpha));
    return P.make_state(psi, alpha);
}

// ---------------------------------------------------------------- fits

struct PolyFit {
    Eigen::VectorXd coef;  // c0 + c1 x + c2 x^2 + ...
    double rms{0.0};
};

inline PolyFit poly_fit(const std::vector<double>& x, const std::vector<double>& y, int degree) {
    if (x.size() != y.size() || int(x.size()) <= degree) throw UsageError("poly_fit: not enough points");
    Eigen::MatrixXd V(x.size(), degree + 1);
    Eigen::VectorXd Y(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (int d = 0; d <= degree; ++d) V(Eigen::Index(i), d) = std::pow(x[i], d);
        Y[Eigen::Index(i)] = y[i];
    }
    PolyFit f;
    f.coef = V.colPivHouseholderQr().solve(Y);
    f.rms = std::sqrt((V * f.coef - Y).squaredNorm() / double(x.size()));
    return f;
}

// ---------------------------------------------------------------- branch sweep

struct BranchPoint {
    double offset{0.0};  // kappa^2 r - b
    BranchRow row;
    bool solved{false};
    bool converged{false};
    int iterations{0};
    double energy{0.0};
    double E_normal_mesh{0.0};
    double res_psi{0.0}, res_alpha{0.0};
    std::vector<TracePoint> trace;
};

struct BranchFits {
    int points{0};
    double slope_psi2{std::nan("")};
    double slope_psi2_predicted{0.0};
    double quad_dE{std::nan("")};
    double quad_dE_predicted{0.0};
    bool all_below_normal{true};
};

inline BranchPoint branch_point(const GroundSpace& g, const BranchContext& bc, double kappa, double offset, bool solve,
                                const MinimizeOptions& mo) {
    BranchPoint p;
    p.offset = offset;
    const double b = g.B.b, beta = bc.abrikosov.beta;
    const double r = (b + offset) / (kappa * kappa);
    if (!(r > 0.0)) throw UsageError("branch sweep: kappa^2 r - b offset gives r <= 0");
    const auto s2 = s_squared(r, kappa, b, beta);
    const auto ex = energy_expansion(r, kappa, b, beta, g.M.surface_area, bc.abrikosov.beta_plus);
    BranchRow& w = p.row;
    w.r = r;
    w.s2_predicted = s2.s2;
    w.s = std::sqrt(std::max(0.0, s2.s2));
    w.E_normal = ex.E_normal;
    w.dE_predicted = ex.dE;
    w.beta = beta;
    w.kappa_c = bc.abrikosov.kappa_c;
    w.valid = s2.valid;
    if (!solve) return p;
    GLProblem P(g.M, g.op, bc.F, kappa, r);
    const auto seed = leading_order_state(w.s, bc.xi, bc.eta.eta);
    const auto res = P.minimize(P.make_state(seed.psi, seed.alpha), mo);
    p.solved = true;
    p.converged = res.converged;
    p.iterations = res.iterations;
    p.energy = res.state.energy;
    p.E_normal_mesh = P.normal_energy_truncated();
    p.res_psi = res.state.res_psi;
    p.res_alpha = res.state.res_alpha;
    p.trace = res.trace;
    w.dE_measured = res.state.energy - p.E_normal_mesh;
    w.psi2_measured = P.density_mean(res.state.psi);
    return p;
}

inline BranchFits fit_branch(const std::vector<BranchPoint>& pts, double kappa, double beta, double area) {
    BranchFits f;
    std::vector<double> x, p2, de;
    for (const auto& p : pts) {
        if (!p.solved || !p.converged) continue;
        x.push_back(p.offset);
        p2.push_back(p.row.psi2_measured);
        de.push_back(p.row.dE_measured);
        if (!(p.row.dE_measured < 0.0)) f.all_below_normal = false;
    }
    f.points = int(x.size());
    const double D = branch_denominator(kappa, beta);
    f.slope_psi2_predicted = 1.0 / D;
    f.quad_dE_predicted = -area / (4.0 * D);
    if (f.points >= 3) {
        f.slope_psi2 = poly_fit(x, p2, 1).coef[1];
        f.quad_dE = poly_fit(x, de, 2).coef[2];
    }
    return f;
}

// ---------------------------------------------------------------- stability sweep

struct StabilityPoint {
    double kappa{0.0}, r{0.0};
    HessianBottom hb;
    bool solved{false};
    bool converged{false};
    double psi2_final{std::nan("")};
    double energy_final{std::nan("")};
    double E_normal_mesh{0.0};
    int iterations{0};
};

// kappa^2 where the section block changes sign, by linear interpolation; NaN when no change.
inline double stability_crossing(const std::vector<StabilityPoint>& pts) {
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double a = pts[i - 1].hb.bottom, c = pts[i].hb.bottom;
        if ((a > 0.0) != (c > 0.0)) {
            const double x0 = pts[i - 1].kappa * pts[i - 1].kappa, x1 = pts[i].kappa * pts[i].kappa;
            return x0 + (x1 - x0) * a / (a - c);
        }
    }
    return std::nan("");
}

}  // namespace hypergl
