/**
 * @file driver.hpp
 * @brief Experiment driver: JSON run configuration, uniform convergence studies and the
 * adaptive solve-estimate-mark-refine loop, with CSV/data-file/VTK emission.
 */
#pragma once

#include "fosll/assembly.hpp"
#include "fosll/estimator.hpp"
#include "fosll/linalg.hpp"
#include "fosll/mesh.hpp"
#include "fosll/model.hpp"
#include "fosll/postprocess.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace fosll {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverFailure : std::runtime_error {
    SolverFailure(const std::string& what, SolveReport rep) : std::runtime_error(what), report(std::move(rep)) {}
    SolveReport report;
};

/// Constant-coefficient manufactured problem on the unit square with Dirichlet data.
struct ManufacturedConfig {
    std::string solution = "sine";  ///< zero | linear | quadratic | sine
    Mat2 diffusion = Mat2::identity();
    Vec2 convection{};
    double reaction = 0.0;
};

enum class RunMode { convergence, adaptive };

struct RunConfig {
    std::variant<std::string, ManufacturedConfig> problem = std::string("table61");
    RunMode mode = RunMode::convergence;
    std::vector<int> levels{8, 16, 32, 64};
    int initial_n = 2;  ///< starting lattice size for adaptive runs on the unit square
    double theta = 0.5;
    int max_dofs = 20000;
    int max_iterations = 100;
    SolveOptions solver{};
    std::string output_dir = "fosll_out";
    bool export_vtk = false;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_as(const nlohmann::json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    detail::reject_unknown_keys(j,
                                {"problem", "mode", "levels", "initial_n", "theta", "max_dofs", "max_iterations",
                                 "solver", "output_dir", "export_vtk"},
                                "config");
    RunConfig c;
    if (j.contains("problem")) {
        const auto& p = j["problem"];
        if (p.is_string()) {
            const auto name = p.get<std::string>();
            if (name != "table61" && name != "lshape") throw ConfigError("unknown problem '" + name + "'");
            c.problem = name;
        } else {
            detail::reject_unknown_keys(p, {"manufactured"}, "problem");
            const auto& m = p.at("manufactured");
            detail::reject_unknown_keys(m, {"solution", "diffusion", "convection", "reaction"}, "manufactured");
            ManufacturedConfig mc;
            if (m.contains("solution")) mc.solution = detail::get_as<std::string>(m, "solution");
            if (mc.solution != "zero" && mc.solution != "linear" && mc.solution != "quadratic" && mc.solution != "sine")
                throw ConfigError("manufactured: unknown solution '" + mc.solution + "'");
            if (m.contains("diffusion")) {
                const auto A = detail::get_as<std::vector<std::vector<double>>>(m, "diffusion");
                if (A.size() != 2 || A[0].size() != 2 || A[1].size() != 2)
                    throw ConfigError("manufactured: diffusion must be a 2x2 array");
                mc.diffusion = {A[0][0], A[0][1], A[1][0], A[1][1]};
            }
            if (m.contains("convection")) {
                const auto b = detail::get_as<std::vector<double>>(m, "convection");
                if (b.size() != 2) throw ConfigError("manufactured: convection must have 2 entries");
                mc.convection = {b[0], b[1]};
            }
            if (m.contains("reaction")) mc.reaction = detail::get_as<double>(m, "reaction");
            if (mc.reaction < 0.0) throw ConfigError("manufactured: reaction must be >= 0");
            c.problem = mc;
        }
    }
    if (j.contains("mode")) {
        const auto mode = detail::get_as<std::string>(j, "mode");
        if (mode == "convergence") {
            c.mode = RunMode::convergence;
        } else if (mode == "adaptive") {
            c.mode = RunMode::adaptive;
        } else {
            throw ConfigError("unknown mode '" + mode + "'");
        }
    }
    if (j.contains("levels")) c.levels = detail::get_as<std::vector<int>>(j, "levels");
    if (j.contains("initial_n")) c.initial_n = detail::get_as<int>(j, "initial_n");
    if (j.contains("theta")) c.theta = detail::get_as<double>(j, "theta");
    if (j.contains("max_dofs")) c.max_dofs = detail::get_as<int>(j, "max_dofs");
    if (j.contains("max_iterations")) c.max_iterations = detail::get_as<int>(j, "max_iterations");
    if (j.contains("solver")) {
        const auto& s = j["solver"];
        detail::reject_unknown_keys(s, {"rel_tol", "max_iter"}, "solver");
        if (s.contains("rel_tol")) c.solver.rel_tol = detail::get_as<double>(s, "rel_tol");
        if (s.contains("max_iter")) c.solver.max_iter = detail::get_as<int>(s, "max_iter");
    }
    if (j.contains("output_dir")) c.output_dir = detail::get_as<std::string>(j, "output_dir");
    if (j.contains("export_vtk")) c.export_vtk = detail::get_as<bool>(j, "export_vtk");

    if (!(c.theta > 0.0 && c.theta < 1.0)) throw ConfigError("theta must lie in (0,1)");
    if (!(c.solver.rel_tol > 0.0 && c.solver.rel_tol < 1.0)) throw ConfigError("solver.rel_tol must lie in (0,1)");
    if (c.levels.empty()) throw ConfigError("levels must not be empty");
    for (std::size_t i = 0; i < c.levels.size(); ++i) {
        if (c.levels[i] < 1) throw ConfigError("levels must be positive");
        if (i > 0 && c.levels[i] <= c.levels[i - 1]) throw ConfigError("levels must be strictly increasing");
    }
    if (c.initial_n < 1) throw ConfigError("initial_n must be positive");
    if (c.max_dofs < 1 || c.max_iterations < 1) throw ConfigError("max_dofs and max_iterations must be positive");
    return c;
}

inline RunConfig parse_run_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

inline std::pair<Problem, ExactSolution> make_problem(const ManufacturedConfig& mc) {
    ManufacturedSpec spec;
    spec.name = "manufactured-" + mc.solution;
    const double pi = M_PI;
    if (mc.solution == "zero") {
        spec.u = [](Vec2) { return 0.0; };
        spec.grad_u = [](Vec2) { return Vec2{}; };
    } else if (mc.solution == "linear") {
        spec.u = [](Vec2 x) { return x.x; };
        spec.grad_u = [](Vec2) { return Vec2{1.0, 0.0}; };
    } else if (mc.solution == "quadratic") {
        spec.u = [](Vec2 x) { return x.x * x.x + x.y * x.y; };
        spec.grad_u = [](Vec2 x) { return Vec2{2.0 * x.x, 2.0 * x.y}; };
    } else {
        spec.u = [pi](Vec2 x) { return std::sin(pi * x.x) * std::sin(pi * x.y); };
        spec.grad_u = [pi](Vec2 x) {
            return Vec2{pi * std::cos(pi * x.x) * std::sin(pi * x.y), pi * std::sin(pi * x.x) * std::cos(pi * x.y)};
        };
    }
    const Mat2 A = mc.diffusion;
    const auto ev = A.symmetric_eigenvalues();
    spec.diffusion = [A](Vec2) { return A; };
    spec.convection = [b = mc.convection](Vec2) { return b; };
    spec.reaction = [a = mc.reaction](Vec2) { return a; };
    spec.reaction_mode = mc.reaction > 0.0 ? ReactionMode::reactive : ReactionMode::reactionless;
    spec.reaction_min = mc.reaction;
    spec.lambda_min = ev[0];
    spec.lambda_max = ev[1];
    spec.outward_normal = unit_square_normal;
    return manufactured_problem(spec);
}

inline std::pair<Problem, ExactSolution> make_problem(const RunConfig& c) {
    try {
        if (const auto* name = std::get_if<std::string>(&c.problem))
            return *name == "lshape" ? make_lshape_problem() : make_table61_problem();
        return make_problem(std::get<ManufacturedConfig>(c.problem));
    } catch (const InvalidProblem& e) {
        throw ConfigError(e.what());
    }
}

inline Mesh initial_mesh(const RunConfig& c, const Problem& problem, int n) {
    const bool lshape = std::holds_alternative<std::string>(c.problem) && std::get<std::string>(c.problem) == "lshape";
    Mesh mesh = lshape ? build_l_shape_mesh() : build_unit_square_mesh(n);
    return apply_boundary_partition(std::move(mesh), problem.boundary_partition);
}

struct DiscreteSolve {
    DofMap dofs;
    std::vector<double> coeffs;  ///< full length; constrained entries are zero
    SolveReport report;
};

/// Assemble and solve; throws SolverFailure if CG does not reach the tolerance.
inline DiscreteSolve solve_discrete(const Mesh& mesh, const Problem& problem, const SolveOptions& opts = {}) {
    DiscreteSolve out;
    out.dofs = build_dof_map(mesh);
    const LinearSystem sys = assemble_system(mesh, out.dofs, problem);
    auto res = solve_spd(sys.matrix, sys.rhs, opts);
    out.report = res.report;
    if (!res.report.converged)
        throw SolverFailure("CG did not converge: " + std::to_string(res.report.iterations) +
                                " iterations, relative residual " + std::to_string(res.report.relative_residual),
                            res.report);
    out.coeffs = out.dofs.expand(res.x);
    return out;
}

struct ConvergenceRow {
    int n = 0;
    double h = 0.0;
    int dofs = 0;
    double err_sigma = 0.0, err_u = 0.0, err_combined = 0.0;
    std::optional<double> rate_sigma, rate_u, rate_combined;
    std::optional<double> factor_sigma, factor_u, factor_combined;
    double eta = 0.0, osc = 0.0;
    double effectivity = 0.0;  ///< eta / (||A^{-1/2}(sigma - sigma_h)|| + ||a^{1/2}(u - u_h)||)
    int solver_iterations = 0;
    double wall_seconds = 0.0;
};

struct AdaptiveRow {
    int iter = 0;
    int elements = 0;
    int dofs = 0;
    double eta = 0.0, osc = 0.0, err_combined = 0.0;
    std::optional<double> slope_running;
    double h_max = 0.0, h_min = 0.0;
    int solver_iterations = 0;
    double wall_seconds = 0.0;
};

struct RunReport {
    std::vector<ConvergenceRow> convergence;
    std::vector<AdaptiveRow> adaptive;
    std::optional<double> fitted_slope;  ///< adaptive: log(DOF)-log(error) slope over the last half
    bool min_element_touches_origin = false;
    std::optional<Mesh> final_mesh;
    std::string failure;  ///< nonempty if the run aborted
};

namespace detail {

inline std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10e", v);
    return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : std::string(); }

inline std::optional<double> tail_slope(const std::vector<AdaptiveRow>& rows) {
    if (rows.size() < 2) return std::nullopt;
    const std::size_t start = rows.size() / 2;
    const std::size_t first = rows.size() - start < 2 ? rows.size() - 2 : start;
    std::vector<double> xs, ys;
    for (std::size_t i = first; i < rows.size(); ++i) {
        if (!(rows[i].err_combined > 0.0)) return std::nullopt;
        xs.push_back(rows[i].dofs);
        ys.push_back(rows[i].err_combined);
    }
    return loglog_slope(xs, ys);
}

inline std::vector<double> cell_means_u(const Solution& sol) {
    std::vector<double> out;
    for (int t = 0; t < sol.mesh().num_triangles(); ++t) {
        const auto f = sol.element(t);
        out.push_back(f.u(f.context().geom.centroid()));
    }
    return out;
}

inline void export_vtk_file(const std::filesystem::path& path, const Solution& sol, const IndicatorField& ind) {
    std::ofstream os(path);
    write_vtk(os, sol.mesh(), {{"u_h", cell_means_u(sol)}, {"eta_K", ind.eta_K}});
}

}  // namespace detail

inline void write_convergence_csv(std::ostream& os, const RunReport& r) {
    os << "h,dofs,err_sigma,rate_sigma,err_u,rate_u,err_combined,rate_combined,eta,factor_sigma,factor_u,factor_combined\n";
    for (const auto& row : r.convergence) {
        using detail::fmt_num, detail::fmt_opt;
        os << fmt_num(row.h) << ',' << row.dofs << ',' << fmt_num(row.err_sigma) << ',' << fmt_opt(row.rate_sigma) << ','
           << fmt_num(row.err_u) << ',' << fmt_opt(row.rate_u) << ',' << fmt_num(row.err_combined) << ','
           << fmt_opt(row.rate_combined) << ',' << fmt_num(row.eta) << ',' << fmt_opt(row.factor_sigma) << ','
           << fmt_opt(row.factor_u) << ',' << fmt_opt(row.factor_combined) << '\n';
    }
    if (!r.failure.empty()) os << "# aborted: " << r.failure << '\n';
}

inline void write_adaptive_csv(std::ostream& os, const RunReport& r) {
    os << "iter,elements,dofs,eta,osc,err_combined,slope_running\n";
    for (const auto& row : r.adaptive) {
        using detail::fmt_num;
        os << row.iter << ',' << row.elements << ',' << row.dofs << ',' << fmt_num(row.eta) << ',' << fmt_num(row.osc)
           << ',' << fmt_num(row.err_combined) << ',' << detail::fmt_opt(row.slope_running) << '\n';
    }
    if (!r.failure.empty()) os << "# aborted: " << r.failure << '\n';
}

/// Uniform refinement study over the configured lattice sizes.
inline RunReport run_convergence(const RunConfig& c, std::ostream* log = nullptr) {
    const auto [problem, exact] = make_problem(c);
    RunReport report;
    const std::filesystem::path out(c.output_dir);
    for (int n : c.levels) {
        const auto t0 = std::chrono::steady_clock::now();
        const Mesh mesh = apply_boundary_partition(build_unit_square_mesh(n), problem.boundary_partition);
        DiscreteSolve ds;
        try {
            ds = solve_discrete(mesh, problem, c.solver);
        } catch (const SolverFailure& e) {
            report.failure = "n=" + std::to_string(n) + ": " + e.what();
            break;
        }
        const Solution sol(mesh, ds.dofs, problem, ds.coeffs);
        const ErrorReport err = l2_errors(sol, exact);
        const IndicatorField ind = indicators(sol);
        ConvergenceRow row;
        row.n = n;
        row.h = 1.0 / n;
        row.dofs = err.dofs;
        row.err_sigma = err.err_sigma;
        row.err_u = err.err_u;
        row.err_combined = err.combined();
        row.eta = ind.eta;
        row.osc = ind.osc;
        row.effectivity = err.energy_combined() > 0.0 ? ind.eta / err.energy_combined() : 0.0;
        row.solver_iterations = ds.report.iterations;
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!report.convergence.empty()) {
            const auto& prev = report.convergence.back();
            auto rate = [&](double e0, double e1) {
                return convergence_rates(std::vector{e0, e1}, std::vector{prev.h, row.h})[0];
            };
            auto factor = [](double e0, double e1) { return reduction_factors(std::vector{e0, e1})[0]; };
            row.rate_sigma = rate(prev.err_sigma, row.err_sigma);
            row.rate_u = rate(prev.err_u, row.err_u);
            row.rate_combined = rate(prev.err_combined, row.err_combined);
            row.factor_sigma = factor(prev.err_sigma, row.err_sigma);
            row.factor_u = factor(prev.err_u, row.err_u);
            row.factor_combined = factor(prev.err_combined, row.err_combined);
        }
        if (log)
            *log << "n=" << n << " dofs=" << row.dofs << " err_sigma=" << row.err_sigma << " err_u=" << row.err_u
                 << " eta=" << row.eta << " cg_iters=" << row.solver_iterations << '\n';
        if (c.export_vtk) {
            std::filesystem::create_directories(out);
            detail::export_vtk_file(out / ("uniform_n" + std::to_string(n) + ".vtk"), sol, ind);
        }
        report.convergence.push_back(row);
    }
    return report;
}

/// Solve -> estimate -> mark -> bisect until the DOF budget or the iteration cap is reached.
inline RunReport run_adaptive(const RunConfig& c, std::ostream* log = nullptr) {
    const auto [problem, exact] = make_problem(c);
    RunReport report;
    const std::filesystem::path out(c.output_dir);
    Mesh mesh = initial_mesh(c, problem, c.initial_n);
    if (build_dof_map(mesh).num_free() > c.max_dofs) throw ConfigError("max_dofs is smaller than the initial DOF count");

    for (int iter = 0; iter < c.max_iterations; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();
        DiscreteSolve ds;
        try {
            ds = solve_discrete(mesh, problem, c.solver);
        } catch (const SolverFailure& e) {
            report.failure = "iteration " + std::to_string(iter) + ": " + e.what();
            break;
        }
        const Solution sol(mesh, ds.dofs, problem, ds.coeffs);
        const IndicatorField ind = indicators(sol);
        const ErrorReport err = l2_errors(sol, exact);
        const GeometryCache geo = geometry(mesh);

        AdaptiveRow row;
        row.iter = iter;
        row.elements = mesh.num_triangles();
        row.dofs = err.dofs;
        row.eta = ind.eta;
        row.osc = ind.osc;
        row.err_combined = err.combined();
        row.h_max = *std::max_element(geo.diameter.begin(), geo.diameter.end());
        row.h_min = *std::min_element(geo.diameter.begin(), geo.diameter.end());
        row.solver_iterations = ds.report.iterations;
        report.adaptive.push_back(row);
        report.adaptive.back().slope_running = detail::tail_slope(report.adaptive);
        report.adaptive.back().wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (log)
            *log << "iter=" << iter << " elements=" << row.elements << " dofs=" << row.dofs << " eta=" << row.eta
                 << " err=" << row.err_combined << " cg_iters=" << row.solver_iterations << '\n';
        if (c.export_vtk) {
            std::filesystem::create_directories(out);
            char name[64];
            std::snprintf(name, sizeof name, "adaptive_%03d.vtk", iter);
            detail::export_vtk_file(out / name, sol, ind);
        }
        if (ind.eta == 0.0) break;
        const auto marked = dorfler_mark(ind.eta_K, c.theta);
        Mesh next = bisect_refine(mesh, marked);
        if (build_dof_map(next).num_free() > c.max_dofs) break;
        mesh = std::move(next);
    }

    report.fitted_slope = detail::tail_slope(report.adaptive);
    const GeometryCache geo = geometry(mesh);
    // Bisection produces many elements of equal diameter; any of the smallest may qualify.
    const double h_min = *std::min_element(geo.diameter.begin(), geo.diameter.end());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        if (geo.diameter[t] > h_min * (1.0 + 1e-12)) continue;
        for (int v : mesh.triangles[t])
            if (norm(mesh.vertices[v]) < 1e-14) report.min_element_touches_origin = true;
    }
    report.final_mesh = mesh;
    return report;
}

/// Runs the configured study and writes its CSV and data files into the output directory.
inline RunReport run_and_write(const RunConfig& c, std::ostream* log = nullptr) {
    const std::filesystem::path out(c.output_dir);
    std::filesystem::create_directories(out);
    if (c.mode == RunMode::convergence) {
        RunReport r = run_convergence(c, log);
        std::ofstream os(out / "convergence.csv");
        write_convergence_csv(os, r);
        return r;
    }
    RunReport r = run_adaptive(c, log);
    {
        std::ofstream os(out / "adaptive.csv");
        write_adaptive_csv(os, r);
    }
    std::ofstream err(out / "adaptive_error.dat"), eta(out / "adaptive_eta.dat");
    err << "# dofs err_combined\n";
    eta << "# dofs eta\n";
    for (const auto& row : r.adaptive) {
        err << row.dofs << ' ' << detail::fmt_num(row.err_combined) << '\n';
        eta << row.dofs << ' ' << detail::fmt_num(row.eta) << '\n';
    }
    return r;
}

}  // namespace fosll
