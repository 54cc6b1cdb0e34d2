#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <hypergl/pipeline.hpp>

namespace fs = std::filesystem;
using namespace hypergl;
using nlohmann::json;

namespace {

struct Cli {
    RunConfig cfg;
    int threads{0};
    // cuspform
    int cusp{0};
    int chart{-1};
    double sample_y{1.5};
    int samples{32};
    double bound{30.0};
    bool validate{false};
    // solve
    bool random_seed{false};
};

fs::path prepare_out(const RunConfig& c) {
    fs::path p(c.out);
    fs::create_directories(p);
    return p;
}

std::string fmt17(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_surface(std::int64_t N, bool as_json) {
    const auto S = make_surface(N);
    if (as_json) {
        print_json(surface_json(S));
        return 0;
    }
    std::cout << "level        " << S.N << '\n'
              << "cusps m      " << S.m << '\n'
              << "genus g      " << S.g << '\n'
              << "area/pi      " << S.area_over_pi.num << (S.area_over_pi.den == 1 ? "" : "/" + std::to_string(S.area_over_pi.den))
              << '\n'
              << "area         " << fmt17(S.area()) << '\n'
              << "coset index  " << S.index() << '\n';
    return 0;
}

int cmd_mesh(const Cli& a) {
    const auto& c = a.cfg;
    validate(c);
    const auto S = make_surface(c.N);
    const auto M = build_mesh(S, c.Y, c.h);
    const auto out = prepare_out(c);
    write_mesh(M, (out / "mesh.json").string());
    const json res = {{"nodes", M.hnodes.size()},
                      {"triangles", M.tris.size()},
                      {"free_unknowns", M.n_free()},
                      {"mesh_area", M.mesh_area()},
                      {"truncated_area_exact", M.truncated_area_exact()},
                      {"surface_area", M.surface_area}};
    write_manifest(out, "mesh", c, res);
    print_json(res);
    return 0;
}

int cmd_spectrum(const Cli& a) {
    const auto& c = a.cfg;
    const auto g = build_ground_space(c);
    json rep = spectral_report(g.M, g.B, g.spectrum);
    const auto expected = expected_ground_dimension(g.B);
    rep["dim_cusp_forms"] = expected;
    rep["dim_cusp_forms_classical"] = dim_cusp_forms_classical(g.B.N, std::llround(g.B.k));
    const auto out = prepare_out(c);
    write_json(out / "spectrum.json", rep);
    write_manifest(out, "spectrum", c, rep);
    print_json(rep);
    if (rep["multiplicity_at_b"].get<std::int64_t>() != expected)
        throw DimensionMismatchError("spectrum: " + std::to_string(rep["multiplicity_at_b"].get<int>()) +
                                     " eigenvalues within 10% of b, the cusp-form count gives " +
                                     std::to_string(expected));
    return 0;
}

int cmd_cuspform(const Cli& a) {
    const auto& c = a.cfg;
    validate(c);
    const auto S = make_surface(c.N);
    const auto B = make_bundle(c.N, c.degree);
    if (a.cusp < 0 || a.cusp >= int(S.cusps.size())) throw UsageError("cusp index out of range");
    const int chart = a.chart < 0 ? a.cusp : a.chart;
    if (chart >= int(S.cusps.size())) throw UsageError("chart index out of range");
    if (a.samples < 1) throw UsageError("samples must be >= 1");
    std::vector<cplx> pts;
    std::vector<SeriesValue> vals;
    std::vector<cplx> raw;
    for (int j = 0; j < a.samples; ++j) {
        const cplx w(double(j) / a.samples, a.sample_y);
        pts.push_back(w);
        vals.push_back(poincare_in_cusp_chart(S, a.cusp, chart, w, B.b, a.bound));
        raw.push_back(vals.back().value);
    }
    const auto out = prepare_out(c);
    {
        std::ofstream f(out / "cuspform.csv");
        write_cusp_form_csv(f, pts, vals);
    }
    json res = {{"cusp", a.cusp}, {"chart", chart}, {"b", B.b}, {"y", a.sample_y}, {"bound", a.bound}};
    json coeffs = json::array();
    for (const auto& fc : fourier_coefficients(raw, a.sample_y, B.b, -2, 3))
        coeffs.push_back({{"k", fc.k},
                          {"re", fc.value.real()},
                          {"im", fc.value.imag()},
                          {"raw_re", fc.raw.real()},
                          {"raw_im", fc.raw.imag()}});
    res["fourier"] = coeffs;
    if (a.validate) {
        const auto g = build_ground_space(c);
        MatC V(g.op.size(), 0);
        for (std::size_t j = 0; j < g.spectrum.eigenvalues.size(); ++j) {
            const double l = g.spectrum.eigenvalues[j];
            if (l >= 0.9 * B.b && l <= 1.1 * B.b) {
                V.conservativeResize(Eigen::NoChange, V.cols() + 1);
                V.col(V.cols() - 1) = g.spectrum.eigenvectors.col(Eigen::Index(j));
            }
        }
        json fr = json::array();
        for (int i = 0; i < int(S.cusps.size()); ++i) {
            double tail = 0.0;
            const VecC u = sample_poincare(S, g.M, g.op, i, B.b, a.bound, &tail);
            fr.push_back({{"cusp", i}, {"retained_fraction", retained_fraction(V, g.op.mass, u)}, {"max_tail", tail}});
        }
        res["ground_space_dimension"] = V.cols();
        res["retained"] = fr;
    }
    write_manifest(out, "cuspform", c, res);
    print_json(res);
    return 0;
}

json brackets_json(const Brackets& b) { return {{"m2", b.m2}, {"m4", b.m4}}; }

int cmd_beta(const Cli& a) {
    const auto& c = a.cfg;
    const auto g = build_ground_space(c);
    const auto bc = build_branch_context(g);
    const auto Mw = weighted_one_form_mass(g.M, g.op, bc.xi);
    const Eigen::MatrixXd Bm = b_matrix(Mw, bc.harmonic);
    json bmat = json::array();
    for (Eigen::Index i = 0; i < Bm.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < Bm.cols(); ++j) row.push_back(Bm(i, j));
        bmat.push_back(row);
    }
    const json res = {{"lambda", g.spectrum.eigenvalues},
                      {"ground_dimension", bc.basis.size()},
                      {"beta", bc.abrikosov.beta},
                      {"beta_plus", bc.abrikosov.beta_plus},
                      {"kappa_c", bc.abrikosov.kappa_c},
                      {"kappa_c_plus", bc.abrikosov.kappa_c_plus},
                      {"xi", brackets_json(brackets(g.M, g.op, bc.xi))},
                      {"harmonic_dimension", bc.harmonic.size()},
                      {"eta",
                       {{"curl_norm2", bc.eta.dEta2_full},
                        {"identity_lhs", bc.eta.lhs_identity},
                        {"identity_rhs", bc.eta.rhs_identity},
                        {"pairing_lhs", bc.eta.lhs_pairing},
                        {"pairing_rhs", bc.eta.rhs_pairing},
                        {"harmonic_leak", bc.eta.harmonic_leak}}},
                      {"B_matrix", bmat}};
    const auto out = prepare_out(c);
    write_json(out / "beta.json", res);
    write_manifest(out, "beta", c, res);
    print_json(res);
    return 0;
}

int cmd_bifurcate(const Cli& a) {
    RunConfig c = a.cfg;
    if (c.sweep.empty())
        for (int i = 1; i <= 8; ++i) c.sweep.push_back(0.01 * i);
    const auto g = build_ground_space(c);
    const auto bc = build_branch_context(g);
    MinimizeOptions mo;
    mo.tol = c.tol;
    mo.max_iter = c.max_iter;
    std::vector<BranchPoint> pts;
    for (double off : c.sweep) pts.push_back(branch_point(g, bc, c.kappa, off, c.solve, mo));
    const auto out = prepare_out(c);
    std::vector<BranchRow> rows;
    for (const auto& p : pts) rows.push_back(p.row);
    {
        std::ofstream f(out / "branch.csv");
        write_branch_csv(f, rows);
    }
    json res = {{"beta", bc.abrikosov.beta}, {"kappa_c", bc.abrikosov.kappa_c}, {"lambda1", g.spectrum.eigenvalues[0]}};
    if (c.solve) {
        const auto f = fit_branch(pts, c.kappa, bc.abrikosov.beta, g.M.surface_area);
        json per = json::array();
        for (const auto& p : pts)
            per.push_back({{"offset", p.offset},
                           {"converged", p.converged},
                           {"iterations", p.iterations},
                           {"res_psi", p.res_psi},
                           {"res_alpha", p.res_alpha}});
        res["solves"] = per;
        res["fit"] = {{"points", f.points},
                      {"slope_psi2", f.slope_psi2},
                      {"slope_psi2_predicted", f.slope_psi2_predicted},
                      {"quad_dE", f.quad_dE},
                      {"quad_dE_predicted", f.quad_dE_predicted},
                      {"all_below_normal", f.all_below_normal}};
    }
    write_manifest(out, "bifurcate", c, res);
    write_branch_csv(std::cout, rows);
    std::cerr << res.dump(2) << '\n';
    return 0;
}

json state_json(const TruncatedMesh& M, const OperatorPair& op, const GLState& s) {
    json j = to_json(M);
    std::vector<double> re(s.psi.size()), im(s.psi.size()), al(s.alpha.data(), s.alpha.data() + s.alpha.size());
    for (Eigen::Index i = 0; i < s.psi.size(); ++i) {
        re[std::size_t(i)] = s.psi[i].real();
        im[std::size_t(i)] = s.psi[i].imag();
    }
    j["fields"] = {{"dof_class", op.dof_class}, {"psi_re", re}, {"psi_im", im}, {"alpha", al},
                   {"kappa", s.kappa},          {"r", s.r}};
    return j;
}

int cmd_solve(const Cli& a) {
    const auto& c = a.cfg;
    const auto g = build_ground_space(c);
    OneFormSpace F = make_one_form_space(g.M);
    const auto harmonic = harmonic_forms(F, int(2 * g.S.g));
    GLProblem P(g.M, g.op, F, c.kappa, c.r);

    GLState seed;
    std::string seed_kind = "random";
    const double offset = c.kappa * c.kappa * c.r - g.B.b;
    if (!a.random_seed && offset > 0.0) {
        const auto bc = build_branch_context(g);
        const auto s2 = s_squared(c.r, c.kappa, g.B.b, bc.abrikosov.beta);
        if (s2.s2 > 0.0) {
            const auto ls = leading_order_state(std::sqrt(s2.s2), bc.xi, bc.eta.eta);
            seed = P.make_state(ls.psi, ls.alpha);
            seed_kind = "leading_order";
        }
    }
    if (seed_kind == "random") seed = random_perturbation(P, c.amplitude, c.seed);

    MinimizeOptions mo;
    mo.tol = c.tol;
    mo.max_iter = c.max_iter;
    const auto res = P.minimize(seed, mo);
    const auto hb = hessian_bottom(P, g.spectrum.eigenvalues[0], coexact_bottom(F, harmonic));
    const auto phys = unscale(P, res.state);

    const auto out = prepare_out(c);
    {
        std::ofstream f(out / "trace.csv");
        write_trace_csv(f, res.trace);
    }
    write_json(out / "state.json", state_json(g.M, g.op, res.state));
    const json rep = {{"seed", seed_kind},
                      {"converged", res.converged},
                      {"line_search_failed", res.line_search_failed},
                      {"iterations", res.iterations},
                      {"energy", res.state.energy},
                      {"E_normal_mesh", P.normal_energy_truncated()},
                      {"E_normal_exact", P.normal_energy_exact()},
                      {"dE", res.state.energy - P.normal_energy_truncated()},
                      {"psi2_mean", P.density_mean(res.state.psi)},
                      {"res_psi", res.state.res_psi},
                      {"res_alpha", res.state.res_alpha},
                      {"supercurrent_coclosed_residual", P.supercurrent_coclosed_residual(res.state)},
                      {"hessian_bottom", {{"bottom", hb.bottom}, {"section", hb.section_block}, {"connection", hb.connection_block}}},
                      {"physical_energy", phys.energy},
                      {"lambda1", g.spectrum.eigenvalues[0]}};
    write_json(out / "solve.json", rep);
    write_manifest(out, "solve", c, rep);
    print_json(rep);
    return 0;
}

int cmd_sweep(const Cli& a) {
    RunConfig c = a.cfg;
    const auto g = build_ground_space(c);
    if (c.sweep.empty()) {
        const double k0 = std::sqrt(g.B.b / c.r);
        for (int i = -4; i <= 4; ++i) c.sweep.push_back(k0 * (1.0 + 0.025 * i));
    }
    OneFormSpace F = make_one_form_space(g.M);
    const auto harmonic = harmonic_forms(F, int(2 * g.S.g));
    const double coexact = coexact_bottom(F, harmonic);
    MinimizeOptions mo;
    mo.tol = c.tol;
    mo.max_iter = c.max_iter;
    std::vector<StabilityPoint> pts;
    for (double kappa : c.sweep) {
        if (!(kappa > 0.0)) throw UsageError("sweep: kappa values must be positive");
        GLProblem P(g.M, g.op, F, kappa, c.r);
        StabilityPoint p;
        p.kappa = kappa;
        p.r = c.r;
        p.hb = hessian_bottom(P, g.spectrum.eigenvalues[0], coexact);
        p.E_normal_mesh = P.normal_energy_truncated();
        if (c.solve) {
            const auto res = P.minimize(random_perturbation(P, c.amplitude, c.seed), mo);
            p.solved = true;
            p.converged = res.converged;
            p.iterations = res.iterations;
            p.psi2_final = P.density_mean(res.state.psi);
            p.energy_final = res.state.energy;
        }
        pts.push_back(p);
    }
    const auto out = prepare_out(c);
    auto write = [&](std::ostream& os) {
        os << std::setprecision(17);
        os << "kappa,r,b_r,kappa2_minus_br,section_block,connection_block,bottom,psi2_final,energy_final,E_normal,"
              "iterations,converged\n";
        for (const auto& p : pts) {
            const double br = g.B.b / p.r;
            os << p.kappa << ',' << p.r << ',' << br << ',' << p.kappa * p.kappa - br << ',' << p.hb.section_block << ','
               << p.hb.connection_block << ',' << p.hb.bottom << ',';
            if (p.solved) os << p.psi2_final;
            os << ',';
            if (p.solved) os << p.energy_final;
            os << ',' << p.E_normal_mesh << ',' << p.iterations << ',' << (p.converged ? 1 : 0) << '\n';
        }
    };
    {
        std::ofstream f(out / "stability.csv");
        write(f);
    }
    const double cross = stability_crossing(pts);
    const json res = {{"lambda1", g.spectrum.eigenvalues[0]},
                      {"coexact_bottom", coexact},
                      {"kappa2_crossing", cross},
                      {"b_r", g.B.b / c.r}};
    write_manifest(out, "sweep", c, res);
    write(std::cout);
    std::cerr << res.dump(2) << '\n';
    return 0;
}

void add_common(CLI::App& app, Cli& a) {
    auto& c = a.cfg;
    app.add_option("-N,--level", c.N, "congruence level N")->capture_default_str();
    app.add_option("--degree", c.degree, "bundle degree")->capture_default_str();
    app.add_option("--kappa", c.kappa, "Ginzburg-Landau parameter")->capture_default_str();
    app.add_option("--r", c.r, "rescaling parameter r")->capture_default_str();
    app.add_option("--sweep", c.sweep, "offsets kappa^2 r - b (bifurcate) or kappa values (sweep)");
    app.add_option("--Y", c.Y, "cusp truncation height")->capture_default_str();
    app.add_option("--h", c.h, "mesh spacing")->capture_default_str();
    app.add_option("--tol", c.tol, "solver tolerance")->capture_default_str();
    app.add_option("--max-iter", c.max_iter, "solver iteration limit")->capture_default_str();
    app.add_option("--eigen-count", c.eigen_count, "number of eigenpairs")->capture_default_str();
    app.add_option("-o,--out", c.out, "output directory")->capture_default_str();
    app.add_option("--seed", c.seed, "random seed")->capture_default_str();
    app.add_option("--amplitude", c.amplitude, "random perturbation amplitude")->capture_default_str();
    app.add_flag("--solve", c.solve, "run the nonlinear minimizer at every sweep point");
    app.add_option("--threads", a.threads, "worker threads (0: all cores)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vortex states of the Ginzburg-Landau equations on congruence surfaces"};
    app.set_help_flag("--help", "print help");
    app.set_config("--config", "", "TOML configuration file (command-line flags win)");
    app.require_subcommand(1);
    app.fallthrough();
    Cli a;
    add_common(app, a);

    std::int64_t surface_level = 0;
    bool surface_json_out = false;
    auto* surface = app.add_subcommand("surface", "group data of Gamma(N)");
    surface->add_option("level", surface_level, "level N")->required();
    surface->add_flag("--json", surface_json_out, "JSON output");
    auto* mesh = app.add_subcommand("mesh", "build and write the truncated mesh");
    auto* spectrum = app.add_subcommand("spectrum", "lowest magnetic Laplacian eigenvalues");
    auto* cusp = app.add_subcommand("cuspform", "Poincare series samples and ground-space cross-check");
    cusp->add_option("--cusp", a.cusp, "cusp index")->capture_default_str();
    cusp->add_option("--chart", a.chart, "cusp chart of the samples (default: same cusp)");
    cusp->add_option("--y", a.sample_y, "sample height in the chart")->capture_default_str();
    cusp->add_option("--samples", a.samples, "samples across the chart width")->capture_default_str();
    cusp->add_option("--bound", a.bound, "coset bound |cz+d| <= bound")->capture_default_str();
    cusp->add_flag("--validate", a.validate, "project onto the computed ground space");
    auto* beta = app.add_subcommand("beta", "Abrikosov constant, kappa_c and the eta identities");
    auto* bif = app.add_subcommand("bifurcate", "branch predictions over an r sweep");
    auto* solve = app.add_subcommand("solve", "minimize the GL energy at (kappa, r)");
    solve->add_flag("--random-seed", a.random_seed, "start from a random perturbation of the normal state");
    auto* sweep = app.add_subcommand("sweep", "stability of the normal state over kappa");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const int hw = int(std::max(1u, std::thread::hardware_concurrency()));
    Eigen::setNbThreads(a.threads > 0 ? a.threads : hw);

    try {
        if (*surface) return cmd_surface(surface_level, surface_json_out);
        if (*mesh) return cmd_mesh(a);
        if (*spectrum) return cmd_spectrum(a);
        if (*cusp) return cmd_cuspform(a);
        if (*beta) return cmd_beta(a);
        if (*bif) return cmd_bifurcate(a);
        if (*solve) return cmd_solve(a);
        if (*sweep) return cmd_sweep(a);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
