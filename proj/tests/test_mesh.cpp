#include "fosll/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace fosll;

namespace {

double total_area(const Mesh& m) {
    double s = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) s += m.signed_area(t);
    return s;
}

int boundary_edges(const Mesh& m) {
    int c = 0;
    for (int e = 0; e < m.num_edges(); ++e) c += m.is_boundary_edge(e);
    return c;
}

}  // namespace

TEST(UnitSquareMesh, SingleCellCounts) {
    const Mesh m = build_unit_square_mesh(1);
    EXPECT_EQ(m.num_vertices(), 4);
    EXPECT_EQ(m.num_triangles(), 2);
    EXPECT_EQ(m.num_edges(), 5);
    EXPECT_EQ(validate_mesh(m), "");
}

TEST(UnitSquareMesh, CountsAndEuler) {
    for (int n : {2, 5, 8}) {
        const Mesh m = build_unit_square_mesh(n);
        EXPECT_EQ(m.num_triangles(), 2 * n * n);
        EXPECT_EQ(m.num_vertices(), (n + 1) * (n + 1));
        EXPECT_EQ(boundary_edges(m), 4 * n);
        EXPECT_EQ(m.num_vertices() - m.num_edges() + m.num_triangles() + 1, 2);
        EXPECT_NEAR(total_area(m), 1.0, 1e-14);
        EXPECT_EQ(validate_mesh(m), "");
    }
    const Mesh m8 = build_unit_square_mesh(8);
    EXPECT_EQ(m8.num_edges(), 208);
}

TEST(UnitSquareMesh, RejectsNonPositiveSize) {
    EXPECT_THROW(build_unit_square_mesh(0), std::invalid_argument);
    EXPECT_THROW(build_unit_square_mesh(-3), std::invalid_argument);
}

TEST(UnitSquareMesh, EdgeOrientationAndSigns) {
    const Mesh m = build_unit_square_mesh(3);
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto& tri = m.triangles[t];
        for (int i = 0; i < 3; ++i) {
            const int e = m.triangle_edges[t][i];
            const auto& ed = m.edges[e];
            // local edge i is opposite local vertex i
            EXPECT_NE(ed[0], tri[i]);
            EXPECT_NE(ed[1], tri[i]);
            const Vec2 a = m.vertices[ed[0]], b = m.vertices[ed[1]];
            const Vec2 tg = b - a;
            const Vec2 n{tg.y, -tg.x};
            const Vec2 out = m.edge_midpoint(e) - m.vertices[tri[i]];
            EXPECT_EQ(m.edge_signs[t][i], dot(n, out) > 0.0 ? 1 : -1);
            if (m.is_boundary_edge(e)) {
                EXPECT_EQ(m.edge_triangles[e][0], t);
            } else if (m.edge_signs[t][i] == 1) {
                EXPECT_EQ(m.edge_triangles[e][0], t);
            } else {
                EXPECT_EQ(m.edge_triangles[e][1], t);
            }
        }
    }
}

TEST(LShapeMesh, Construction) {
    const Mesh m = build_l_shape_mesh();
    EXPECT_EQ(m.num_triangles(), 24);
    for (int t = 0; t < m.num_triangles(); ++t) EXPECT_NEAR(m.signed_area(t), 0.125, 1e-15);
    for (const Vec2& v : m.vertices) EXPECT_FALSE(v.x > 0.0 && v.y < 0.0);
    EXPECT_NEAR(total_area(m), 3.0, 1e-14);
    EXPECT_EQ(validate_mesh(m), "");
    EXPECT_EQ(m.num_vertices() - m.num_edges() + m.num_triangles(), 1);
    EXPECT_EQ(boundary_edges(m), 16);
}

TEST(Geometry, ReferenceTriangleAndEdge) {
    Mesh m = build_unit_square_mesh(1);
    const auto g = geometry(m);
    for (int t = 0; t < 2; ++t) {
        EXPECT_NEAR(g.area[t], 0.5, 1e-15);
        EXPECT_NEAR(g.diameter[t], std::sqrt(2.0), 1e-15);
    }
    bool found = false;
    for (int e = 0; e < m.num_edges(); ++e) {
        const Vec2 a = m.vertices[m.edges[e][0]], b = m.vertices[m.edges[e][1]];
        if (norm(a - Vec2{0, 0}) < 1e-15 && norm(b - Vec2{1, 0}) < 1e-15) {
            found = true;
            EXPECT_NEAR(g.edge_normal[e].x, 0.0, 1e-15);
            EXPECT_NEAR(g.edge_normal[e].y, -1.0, 1e-15);
            EXPECT_NEAR(g.edge_tangent[e].x, 1.0, 1e-15);
            EXPECT_NEAR(g.edge_tangent[e].y, 0.0, 1e-15);
        }
    }
    EXPECT_TRUE(found);
}

TEST(Geometry, UnitNormalsAndUniformDiameters) {
    const Mesh m = build_unit_square_mesh(4);
    const auto g = geometry(m);
    for (double h : g.diameter) EXPECT_NEAR(h, std::sqrt(2.0) / 4.0, 1e-15);
    for (int e = 0; e < m.num_edges(); ++e) {
        EXPECT_NEAR(norm(g.edge_normal[e]), 1.0, 1e-14);
        EXPECT_NEAR(norm(g.edge_tangent[e]), 1.0, 1e-14);
        EXPECT_NEAR(dot(g.edge_normal[e], g.edge_tangent[e]), 0.0, 1e-14);
    }
}

TEST(Bisection, MarkBothTrianglesOfSquare) {
    const Mesh m = build_unit_square_mesh(1);
    const std::vector<int> marked{0, 1};
    const Mesh r = bisect_refine(m, marked);
    EXPECT_EQ(r.num_triangles(), 4);
    for (int t = 0; t < 4; ++t) EXPECT_NEAR(r.signed_area(t), 0.25, 1e-15);
    EXPECT_EQ(validate_mesh(r), "");
}

TEST(Bisection, EmptyMarkingIsNoOp) {
    const Mesh m = build_l_shape_mesh();
    const Mesh r = bisect_refine(m, std::vector<int>{});
    EXPECT_EQ(r.vertices.size(), m.vertices.size());
    EXPECT_EQ(r.triangles, m.triangles);
    EXPECT_EQ(r.edges, m.edges);
    EXPECT_EQ(r.edge_tags, m.edge_tags);
}

TEST(Bisection, ClosureKeepsConformity) {
    const Mesh m = build_unit_square_mesh(2);
    for (int t = 0; t < m.num_triangles(); ++t) {
        const Mesh r = bisect_refine(m, std::vector<int>{t});
        EXPECT_TRUE(find_hanging_nodes(r).empty());
        EXPECT_GT(r.num_triangles(), m.num_triangles() + 1);
        EXPECT_LE(r.num_triangles(), 2 * m.num_triangles());
        EXPECT_EQ(validate_mesh(r), "");
        EXPECT_NEAR(total_area(r), 1.0, 1e-14);
    }
}

TEST(Bisection, RandomMarkingSequencesStayConforming) {
    std::mt19937 rng(1234);
    for (int trial = 0; trial < 4; ++trial) {
        Mesh m = trial % 2 ? build_l_shape_mesh() : build_unit_square_mesh(2);
        const double area = total_area(m);
        const double angle0 = minimum_angle(m);
        for (int step = 0; step < 8; ++step) {
            std::bernoulli_distribution pick(0.2);
            std::vector<int> marked;
            for (int t = 0; t < m.num_triangles(); ++t)
                if (pick(rng)) marked.push_back(t);
            m = bisect_refine(m, marked);
            ASSERT_EQ(validate_mesh(m), "") << "trial " << trial << " step " << step;
            EXPECT_NEAR(total_area(m), area, 1e-12);
            // newest-vertex bisection creates at most 4 similarity classes: angles stay bounded
            EXPECT_GE(minimum_angle(m), 0.5 * angle0 - 1e-12);
        }
    }
}

TEST(Bisection, BoundaryTagsAreInherited) {
    Mesh m = apply_boundary_partition(build_unit_square_mesh(2), [](Vec2 x) {
        return x.x < 1e-12 ? BoundaryTag::neumann : BoundaryTag::dirichlet;
    });
    std::vector<int> all(m.num_triangles());
    std::iota(all.begin(), all.end(), 0);
    const Mesh r = bisect_refine(m, all);
    for (int e = 0; e < r.num_edges(); ++e) {
        if (!r.is_boundary_edge(e)) {
            EXPECT_EQ(r.edge_tags[e], BoundaryTag::interior);
            continue;
        }
        const Vec2 mid = r.edge_midpoint(e);
        EXPECT_EQ(r.edge_tags[e], mid.x < 1e-12 ? BoundaryTag::neumann : BoundaryTag::dirichlet);
    }
}

TEST(Bisection, UniformRefinementGenerations) {
    Mesh m = build_unit_square_mesh(1);
    for (int k = 0; k < 4; ++k) {
        std::vector<int> all(m.num_triangles());
        std::iota(all.begin(), all.end(), 0);
        m = bisect_refine(m, all);
    }
    EXPECT_EQ(m.num_triangles(), 32);
    for (int g : m.generation) EXPECT_EQ(g, 4);
    EXPECT_EQ(validate_mesh(m), "");
}

TEST(HangingNodes, DetectsArtificialHang) {
    Mesh m = build_unit_square_mesh(1);
    m.vertices.push_back({0.5, 0.0});
    const auto h = find_hanging_nodes(m);
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(h[0], 4);
}

TEST(Vtk, LegacyAsciiLayout) {
    const Mesh m = build_unit_square_mesh(1);
    std::ostringstream os;
    write_vtk(os, m, {{"eta_K", {0.5, 1.5}}});
    const std::string s = os.str();
    EXPECT_NE(s.find("# vtk DataFile Version 2.0"), std::string::npos);
    EXPECT_NE(s.find("POINTS 4 double"), std::string::npos);
    EXPECT_NE(s.find("CELLS 2 8"), std::string::npos);
    EXPECT_NE(s.find("CELL_DATA 2"), std::string::npos);
    EXPECT_NE(s.find("SCALARS eta_K double 1"), std::string::npos);
    std::ostringstream bad;
    EXPECT_THROW(write_vtk(bad, m, {{"x", {1.0}}}), DimensionMismatch);
}
