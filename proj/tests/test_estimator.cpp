#include "fosll/estimator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace fosll;

namespace {

Problem constant_load_problem(double f) {
    Problem p;
    p.name = "constant-load";
    p.diffusion = [](Vec2) { return Mat2::identity(); };
    p.convection = [](Vec2) { return Vec2{}; };
    p.reaction = [](Vec2) { return 1.0; };
    p.load = [f](Vec2) { return f; };
    p.dirichlet_data = [](Vec2) { return 0.0; };
    p.dirichlet_gradient = [](Vec2) { return Vec2{}; };
    p.neumann_data = [](Vec2) { return 0.0; };
    p.boundary_partition = [](Vec2) { return BoundaryTag::dirichlet; };
    p.reaction_mode = ReactionMode::reactive;
    p.reaction_min = 1.0;
    return p;
}

std::vector<double> pseudo_random(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = U(rng);
    return v;
}

}  // namespace

TEST(Estimator, ZeroSolutionZeroData) {
    const Problem p = constant_load_problem(0.0);
    const Mesh m = build_unit_square_mesh(3);
    const auto d = build_dof_map(m);
    const Solution sol(m, d, p, std::vector<double>(d.total(), 0.0));
    const auto ind = indicators(sol);
    EXPECT_EQ(ind.eta, 0.0);
    EXPECT_EQ(ind.osc, 0.0);
    for (const auto& r : ind.residuals) {
        EXPECT_EQ(r.mean.r1, 0.0);
        EXPECT_EQ(norm(r.mean.r2), 0.0);
        EXPECT_EQ(r.mean.r3, 0.0);
    }
}

TEST(Estimator, OnlyFirstResidualActive) {
    const Problem p = constant_load_problem(1.5);
    const Mesh m = build_unit_square_mesh(1);
    const auto d = build_dof_map(m);
    const Solution sol(m, d, p, std::vector<double>(d.total(), 0.0));
    const auto ind = indicators(sol);
    const auto g = geometry(m);
    for (int t = 0; t < m.num_triangles(); ++t) {
        EXPECT_NEAR(ind.residuals[t].mean.r1, 1.5, 1e-14);
        EXPECT_NEAR(ind.eta_K[t], g.diameter[t] * std::sqrt(g.area[t]) * 1.5, 1e-14);
    }
    EXPECT_NEAR(ind.osc, 0.0, 1e-12);
}

TEST(Estimator, CurlOfRT0FieldVanishes) {
    const auto [p, ex] = make_lshape_problem();
    const Mesh m = apply_boundary_partition(build_l_shape_mesh(), p.boundary_partition);
    const auto d = build_dof_map(m);
    auto c = pseudo_random(d.total(), 3);
    std::fill(c.begin() + d.num_flux, c.end(), 0.0);
    const Solution sol(m, d, p, c);
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto f = sol.element(t);
        for (const auto& bary : {std::array<double, 3>{0.2, 0.3, 0.5}, std::array<double, 3>{1.0, 0.0, 0.0}})
            EXPECT_NEAR(residuals_at(f, p, f.context().geom.map(bary)).r3, 0.0, 1e-9);
    }
}

TEST(Estimator, ConformingFluxHasNoNormalJump) {
    const auto [p, ex] = make_lshape_problem();
    const Mesh m = apply_boundary_partition(build_l_shape_mesh(), p.boundary_partition);
    const auto d = build_dof_map(m);
    auto c = pseudo_random(d.total(), 4);
    std::fill(c.begin() + d.num_flux, c.end(), 0.0);
    const Solution sol(m, d, p, c);
    for (int e = 0; e < m.num_edges(); ++e) {
        if (m.is_boundary_edge(e)) continue;
        EXPECT_NEAR(edge_jumps(sol, e).mean.J1, 0.0, 1e-12);
        EXPECT_NEAR(edge_jumps(sol, e).deviation_sq[0], 0.0, 1e-24);
    }
}

TEST(Estimator, DirichletTraceJumpVanishesForZeroData) {
    const auto [p, ex] = make_table61_problem();
    const Mesh m = build_unit_square_mesh(2);
    const auto d = build_dof_map(m);
    const Solution sol(m, d, p, std::vector<double>(d.total(), 0.0));
    for (int e = 0; e < m.num_edges(); ++e) {
        if (m.edge_tags[e] == BoundaryTag::dirichlet) {
            EXPECT_EQ(edge_jumps(sol, e).mean.J2, 0.0);
        }
    }
}

TEST(Estimator, EdgeSumIdentity) {
    const auto [p, ex] = make_table61_problem();
    const Mesh m = build_unit_square_mesh(4);
    const auto d = build_dof_map(m);
    const Solution sol(m, d, p, d.expand(pseudo_random(d.num_free(), 5)));
    const auto ind = indicators(sol);
    double sum = 0.0;
    for (double v : ind.eta_K) {
        EXPECT_GE(v, 0.0);
        sum += v * v;
    }
    EXPECT_NEAR(sum, ind.eta * ind.eta, 1e-12 * sum);
    const double edge_form = ind.eta_edge_form(m);
    EXPECT_NEAR(edge_form * edge_form, sum, 1e-12 * sum);
}

TEST(Estimator, MeanIsTheBestConstant) {
    const auto [p, ex] = make_table61_problem();
    const Mesh m = build_unit_square_mesh(2);
    const auto d = build_dof_map(m);
    const Solution sol(m, d, p, d.expand(pseudo_random(d.num_free(), 6)));
    const auto quad = triangle_quadrature(default_triangle_degree);
    const auto f = sol.element(3);
    const auto r = element_residuals(sol, 3);
    for (double shift : {-0.1, -1e-3, 1e-3, 0.1}) {
        double dist = 0.0;
        for (std::size_t q = 0; q < quad.size(); ++q) {
            const auto v = residuals_at(f, p, f.context().geom.map(quad.points[q]));
            dist += 2.0 * r.area * quad.weights[q] * std::pow(v.r1 - r.mean.r1 - shift, 2);
        }
        EXPECT_GT(dist, r.deviation_sq[0]);
    }
}

TEST(Dorfler, Examples) {
    EXPECT_EQ(dorfler_mark(std::vector<double>{2, 1, 1}, 0.5), (std::vector<int>{0}));
    EXPECT_EQ(dorfler_mark(std::vector<double>{1, 1, 1, 1}, 0.5), (std::vector<int>{0, 1}));
    EXPECT_EQ(dorfler_mark(std::vector<double>{0.3, 0.1, 0.7, 0.2}, 0.999999), (std::vector<int>{0, 1, 2, 3}));
    EXPECT_EQ(dorfler_mark(std::vector<double>{1, 1}, 0.99), (std::vector<int>{0, 1}));
    EXPECT_TRUE(dorfler_mark(std::vector<double>{0, 0, 0}, 0.5).empty());
}

TEST(Dorfler, InvalidInput) {
    const std::vector<double> eta{1.0, 2.0};
    EXPECT_THROW(dorfler_mark(eta, 0.0), std::invalid_argument);
    EXPECT_THROW(dorfler_mark(eta, 1.0), std::invalid_argument);
    EXPECT_THROW(dorfler_mark(std::vector<double>{}, 0.5), std::invalid_argument);
}

TEST(Dorfler, MinimalBulkSet) {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 5 + trial;
        std::vector<double> eta(n);
        for (double& v : eta) v = U(rng);
        const double theta = 0.1 + 0.8 * U(rng);
        const auto marked = dorfler_mark(eta, theta);
        ASSERT_TRUE(std::is_sorted(marked.begin(), marked.end()));
        double total = 0.0, got = 0.0;
        for (double v : eta) total += v * v;
        for (int k : marked) got += eta[k] * eta[k];
        EXPECT_GE(got, theta * total);
        // no smaller set reaches the bulk: the |M|-1 largest values fall short
        std::vector<double> sq(n);
        for (int i = 0; i < n; ++i) sq[i] = eta[i] * eta[i];
        std::sort(sq.rbegin(), sq.rend());
        double best = 0.0;
        for (std::size_t i = 0; i + 1 < marked.size(); ++i) best += sq[i];
        EXPECT_LT(best, theta * total);
    }
}

TEST(Dorfler, MarkAllRefinesUniformly) {
    const Mesh m = build_unit_square_mesh(1);
    const auto marked = dorfler_mark(std::vector<double>{1.0, 1.0}, 0.99);
    const Mesh r = bisect_refine(m, marked);
    EXPECT_EQ(r.num_triangles(), 4);
    for (int t = 0; t < 4; ++t) EXPECT_NEAR(r.signed_area(t), 0.25, 1e-15);
}
