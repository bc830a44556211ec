#include "fosll/driver.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace fosll;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fosll_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FOSLL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

TEST(Config, Defaults) {
    const auto c = parse_run_config(std::string("{}"));
    EXPECT_EQ(std::get<std::string>(c.problem), "table61");
    EXPECT_EQ(c.mode, RunMode::convergence);
    EXPECT_EQ(c.levels, (std::vector<int>{8, 16, 32, 64}));
    EXPECT_DOUBLE_EQ(c.theta, 0.5);
    EXPECT_EQ(c.max_dofs, 20000);
}

TEST(Config, ManufacturedProblem) {
    const auto c = parse_run_config(std::string(R"({"problem": {"manufactured": {"solution": "quadratic",
        "diffusion": [[2, 0], [0, 1]], "convection": [1, 0], "reaction": 0.5}}, "levels": [2, 4]})"));
    const auto& m = std::get<ManufacturedConfig>(c.problem);
    EXPECT_EQ(m.solution, "quadratic");
    EXPECT_EQ(m.diffusion.a11, 2.0);
    EXPECT_EQ(m.convection.x, 1.0);
    EXPECT_EQ(m.reaction, 0.5);
    EXPECT_TRUE(make_problem(c).first.reactive());
}

TEST(Config, RejectsInvalidInput) {
    for (const char* bad : {
             R"({"thetta": 0.5})",
             R"({"solver": {"rel_tol": 1e-8, "precond": "ilu"}})",
             R"({"problem": {"manufactured": {"solution": "sine", "extra": 1}}})",
             R"({"problem": "unknown"})",
             R"({"mode": "random"})",
             R"({"theta": 1.0})",
             R"({"theta": "half"})",
             R"({"levels": [8, 8]})",
             R"({"levels": []})",
             R"({"problem": {"manufactured": {"reaction": -1}}})",
             R"({"problem": {"manufactured": {"diffusion": [[1, 0]]}}})",
             R"({"max_dofs": 0})",
             R"([1, 2])",
             R"({"theta": 0.5,)",
         })
        EXPECT_THROW(parse_run_config(std::string(bad)), ConfigError) << bad;
}

TEST(Config, IndefiniteDiffusionRejectedWhenBuildingProblem) {
    const auto c = parse_run_config(std::string(R"({"problem": {"manufactured": {"diffusion": [[1, 0], [0, -1]]}}})"));
    EXPECT_THROW(make_problem(c), ConfigError);
}

TEST(Convergence, CsvSchemaAndRowCount) {
    auto c = parse_run_config(std::string(R"({"levels": [2, 4, 8]})"));
    const auto r = run_convergence(c);
    ASSERT_EQ(r.convergence.size(), 3u);
    std::ostringstream os;
    write_convergence_csv(os, r);
    std::istringstream in(os.str());
    std::string header;
    std::getline(in, header);
    const auto cols = split(header);
    const std::vector<std::string> required{"h", "dofs", "err_sigma", "rate_sigma", "err_u",
                                            "rate_u", "err_combined", "rate_combined", "eta"};
    ASSERT_GE(cols.size(), required.size());
    for (std::size_t i = 0; i < required.size(); ++i) EXPECT_EQ(cols[i], required[i]);
    int rows = 0;
    for (std::string line; std::getline(in, line);) {
        EXPECT_EQ(split(line + ",").size(), cols.size()) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 3);
    EXPECT_FALSE(r.convergence[0].rate_sigma.has_value());
    EXPECT_TRUE(r.convergence[2].rate_sigma.has_value());
}

TEST(Convergence, Table61CoarseMagnitudes) {
    auto c = parse_run_config(std::string(R"({"levels": [8, 16]})"));
    const auto r = run_convergence(c);
    ASSERT_EQ(r.convergence.size(), 2u);
    const auto& a = r.convergence[0];
    EXPECT_GT(a.err_sigma, 5.859e-1 / 2);
    EXPECT_LT(a.err_sigma, 5.859e-1 * 2);
    EXPECT_GT(a.err_u, 4.351e-2 / 2);
    EXPECT_LT(a.err_u, 4.351e-2 * 2);
    EXPECT_GT(r.convergence[1].err_combined, 3.132e-1 / 2);
    EXPECT_LT(r.convergence[1].err_combined, 3.132e-1 * 2);
}

TEST(Convergence, ZeroManufacturedSolution) {
    auto c = parse_run_config(std::string(R"({"problem": {"manufactured": {"solution": "zero", "convection": [1, 2],
        "reaction": 1}}, "levels": [2, 4]})"));
    const auto r = run_convergence(c);
    for (const auto& row : r.convergence) {
        EXPECT_EQ(row.err_sigma, 0.0);
        EXPECT_EQ(row.err_u, 0.0);
        EXPECT_EQ(row.err_combined, 0.0);
        EXPECT_EQ(row.eta, 0.0);
        EXPECT_FALSE(row.rate_combined.has_value());
    }
}

TEST(Convergence, DeterministicCsv) {
    auto c = parse_run_config(std::string(R"({"levels": [2, 4, 8]})"));
    std::ostringstream a, b;
    write_convergence_csv(a, run_convergence(c));
    write_convergence_csv(b, run_convergence(c));
    EXPECT_EQ(a.str(), b.str());
}

TEST(Adaptive, SmallRunIsDeterministicAndConsistent) {
    auto c = parse_run_config(std::string(R"({"problem": "lshape", "mode": "adaptive", "max_dofs": 600})"));
    const auto r1 = run_adaptive(c);
    const auto r2 = run_adaptive(c);
    ASSERT_GE(r1.adaptive.size(), 3u);
    std::ostringstream a, b;
    write_adaptive_csv(a, r1);
    write_adaptive_csv(b, r2);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "iter,elements,dofs,eta,osc,err_combined,slope_running");
    for (std::size_t i = 0; i < r1.adaptive.size(); ++i) {
        EXPECT_EQ(r1.adaptive[i].iter, static_cast<int>(i));
        EXPECT_LE(r1.adaptive[i].dofs, 600);
        if (i > 0) {
            EXPECT_GT(r1.adaptive[i].elements, r1.adaptive[i - 1].elements);
        }
    }
    ASSERT_TRUE(r1.final_mesh.has_value());
    EXPECT_EQ(validate_mesh(*r1.final_mesh), "");
}

TEST(Adaptive, BudgetBelowInitialDofsRejected) {
    auto c = parse_run_config(std::string(R"({"problem": "lshape", "mode": "adaptive", "max_dofs": 10})"));
    EXPECT_THROW(run_adaptive(c), ConfigError);
}

TEST(Cli, ExitCodesAndOutputs) {
    const fs::path dir = scratch_dir("cli");
    const fs::path good = dir / "good.json", bad = dir / "bad.json", fail = dir / "fail.json";
    std::ofstream(good) << R"({"levels": [2, 4]})";
    std::ofstream(bad) << R"({"levels": [2, 4], "colour": "red"})";
    std::ofstream(fail) << R"({"levels": [4], "solver": {"max_iter": 1}})";

    EXPECT_EQ(run_cli("run " + good.string() + " --out " + (dir / "out").string() + " --export-vtk"), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "convergence.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "uniform_n4.vtk"));
    EXPECT_EQ(read_file(dir / "out" / "convergence.csv").substr(0, 2), "h,");

    EXPECT_EQ(run_cli("run " + bad.string() + " --out " + (dir / "bad").string()), 2);
    EXPECT_EQ(run_cli("run " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    EXPECT_EQ(run_cli("run " + fail.string() + " --out " + (dir / "fail").string()), 3);
}

TEST(Cli, ShippedConfigsParse) {
    for (const char* name : {"table61.json", "lshape.json"}) {
        const std::string text = read_file(fs::path(FOSLL_CONFIG_DIR) / name);
        EXPECT_NO_THROW(parse_run_config(text)) << name;
    }
}
