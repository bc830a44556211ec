// fosll: command-line driver for FOSLL* convergence and adaptive experiments.
//
//   fosll run <config.json> [--out DIR] [--export-vtk]
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure.

#include "fosll/driver.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int exit_config_error = 2;
constexpr int exit_solver_failure = 3;

void print_summary(const fosll::RunConfig& config, const fosll::RunReport& report, double seconds) {
    if (config.mode == fosll::RunMode::convergence) {
        std::cout << "levels: " << report.convergence.size() << '\n';
        if (!report.convergence.empty()) {
            const auto& last = report.convergence.back();
            std::cout << "finest h=" << last.h << " err_sigma=" << last.err_sigma << " err_u=" << last.err_u
                      << " combined=" << last.err_combined << '\n';
            if (last.rate_combined)
                std::cout << "final combined order " << *last.rate_combined << ", reduction factor "
                          << *last.factor_combined << '\n';
        }
    } else {
        std::cout << "iterations: " << report.adaptive.size() << '\n';
        if (!report.adaptive.empty()) {
            const auto& last = report.adaptive.back();
            std::cout << "final dofs=" << last.dofs << " eta=" << last.eta << " err=" << last.err_combined
                      << " hmax/hmin=" << last.h_max / last.h_min << '\n';
        }
        if (report.fitted_slope) std::cout << "fitted log(dof)-log(error) slope: " << *report.fitted_slope << '\n';
    }
    std::cout << "wall time: " << seconds << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FOSLL* finite element experiments (RT0 x P1)"};
    app.require_subcommand(1);
    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    std::string config_path;
    std::string out_dir;
    bool export_vtk = false;
    bool quiet = false;
    run->add_option("config", config_path, "Path to the JSON run configuration")->required();
    run->add_option("--out", out_dir, "Output directory (overrides output_dir in the config)");
    run->add_flag("--export-vtk", export_vtk, "Write legacy VTK files of meshes and u_h");
    run->add_flag("-q,--quiet", quiet, "Suppress per-level progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config_error;
    }

    fosll::RunConfig config;
    try {
        std::ifstream in(config_path);
        if (!in) throw fosll::ConfigError("cannot open config file '" + config_path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        config = fosll::parse_run_config(buf.str());
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (export_vtk) config.export_vtk = true;
    } catch (const fosll::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config_error;
    }

    try {
        const auto t0 = std::chrono::steady_clock::now();
        const auto report = fosll::run_and_write(config, quiet ? nullptr : &std::cerr);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        print_summary(config, report, seconds);
        if (!report.failure.empty()) {
            std::cerr << "solver failure: " << report.failure << '\n';
            return exit_solver_failure;
        }
    } catch (const fosll::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config_error;
    } catch (const fosll::SingularSystem& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return exit_solver_failure;
    }
    return 0;
}
