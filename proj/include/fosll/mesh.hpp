/**
 * @file mesh.hpp
 * @brief Conforming triangular meshes with edge connectivity, boundary tags and
 * newest-vertex bisection.
 *
 * Conventions:
 *  - triangles are counterclockwise; local edge i is opposite local vertex i;
 *  - a global edge is stored as (lo, hi) with lo < hi; its tangent points from lo to hi and
 *    its normal is the tangent rotated by -90 degrees;
 *  - edge_signs[t][i] is +1 when the global normal of local edge i points out of t;
 *  - edge_triangles[e] = {minus, plus}: `minus` is the side the global normal points out of.
 *    Boundary edges store their only triangle in slot 0 and -1 in slot 1.
 */
#pragma once

#include "fosll/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fosll {

enum class BoundaryTag : std::uint8_t { interior, dirichlet, neumann };

inline const char* to_string(BoundaryTag tag) {
    switch (tag) {
        case BoundaryTag::interior: return "interior";
        case BoundaryTag::dirichlet: return "dirichlet";
        case BoundaryTag::neumann: return "neumann";
    }
    return "?";
}

struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::array<int, 2>> edges;
    std::vector<std::array<int, 3>> triangle_edges;
    std::vector<std::array<int, 3>> edge_signs;
    std::vector<std::array<int, 2>> edge_triangles;
    std::vector<BoundaryTag> edge_tags;
    /// Local index of the newest vertex; the refinement edge is opposite it.
    std::vector<int> refinement_vertex;
    std::vector<int> generation;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }
    int num_edges() const { return static_cast<int>(edges.size()); }

    bool is_boundary_edge(int e) const { return edge_triangles[e][1] < 0; }

    std::array<Vec2, 3> triangle_vertices(int t) const {
        const auto& tri = triangles[t];
        return {vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]};
    }

    double signed_area(int t) const {
        const auto p = triangle_vertices(t);
        return 0.5 * cross(p[1] - p[0], p[2] - p[0]);
    }

    Vec2 edge_midpoint(int e) const { return 0.5 * (vertices[edges[e][0]] + vertices[edges[e][1]]); }
};

namespace detail {

inline std::pair<int, int> sorted_pair(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

using BoundaryTagMap = std::map<std::pair<int, int>, BoundaryTag>;

/// Builds edges and connectivity from vertices/triangles. Boundary edges take their tag from
/// `tags` (keyed by sorted vertex pair), falling back to `fallback`.
inline void finalize_topology(Mesh& mesh, const BoundaryTagMap& tags, BoundaryTag fallback) {
    struct HalfEdge {
        int lo, hi, tri, slot;
    };
    const int nt = mesh.num_triangles();
    std::vector<HalfEdge> half;
    half.reserve(3 * static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        if (!(mesh.signed_area(t) > 0.0))
            throw DegenerateElement("mesh: triangle " + std::to_string(t) + " is not counterclockwise/nondegenerate");
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i) {
            const auto [lo, hi] = sorted_pair(tri[(i + 1) % 3], tri[(i + 2) % 3]);
            half.push_back({lo, hi, t, i});
        }
    }
    std::sort(half.begin(), half.end(), [](const HalfEdge& a, const HalfEdge& b) {
        return std::tie(a.lo, a.hi, a.tri) < std::tie(b.lo, b.hi, b.tri);
    });

    mesh.edges.clear();
    mesh.edge_triangles.clear();
    mesh.edge_tags.clear();
    mesh.triangle_edges.assign(nt, {-1, -1, -1});
    mesh.edge_signs.assign(nt, {0, 0, 0});

    for (std::size_t k = 0; k < half.size();) {
        std::size_t j = k;
        while (j < half.size() && half[j].lo == half[k].lo && half[j].hi == half[k].hi) ++j;
        if (j - k > 2) throw std::invalid_argument("mesh: non-manifold edge shared by more than two triangles");
        const int e = mesh.num_edges();
        mesh.edges.push_back({half[k].lo, half[k].hi});
        std::array<int, 2> owners{-1, -1};
        for (std::size_t h = k; h < j; ++h) {
            const auto& he = half[h];
            const auto& tri = mesh.triangles[he.tri];
            // Local edge runs from tri[slot+1] to tri[slot+2] counterclockwise, so the outward
            // normal agrees with the global one exactly when that direction is lo -> hi.
            const int sign = tri[(he.slot + 1) % 3] == he.lo ? 1 : -1;
            mesh.triangle_edges[he.tri][he.slot] = e;
            mesh.edge_signs[he.tri][he.slot] = sign;
            if (j - k == 1) {
                owners[0] = he.tri;
            } else if (sign > 0) {
                owners[0] = he.tri;
            } else {
                owners[1] = he.tri;
            }
        }
        if (j - k == 2 && (owners[0] < 0 || owners[1] < 0))
            throw std::invalid_argument("mesh: inconsistent orientation across an interior edge");
        mesh.edge_triangles.push_back(owners);
        if (j - k == 1) {
            const auto it = tags.find({half[k].lo, half[k].hi});
            const BoundaryTag tag = it == tags.end() ? fallback : it->second;
            mesh.edge_tags.push_back(tag == BoundaryTag::interior ? fallback : tag);
        } else {
            mesh.edge_tags.push_back(BoundaryTag::interior);
        }
        k = j;
    }
}

inline int longest_edge_opposite(const std::array<Vec2, 3>& p) {
    int best = 0;
    double best_len = -1.0;
    for (int i = 0; i < 3; ++i) {
        const double len = norm(p[(i + 2) % 3] - p[(i + 1) % 3]);
        if (len > best_len * (1.0 + 1e-12)) {
            best_len = len;
            best = i;
        }
    }
    return best;
}

/// Unstructured mesh from a square lattice; every cell is split along its lower-left to
/// upper-right diagonal. `keep(i, j)` selects lattice cells.
template <typename CellFilter>
Mesh lattice_mesh(Vec2 origin, double spacing, int nx, int ny, CellFilter keep) {
    Mesh mesh;
    std::vector<int> id((nx + 1) * (ny + 1), -1);
    auto vertex = [&](int i, int j) {
        int& slot = id[j * (nx + 1) + i];
        if (slot < 0) {
            slot = mesh.num_vertices();
            mesh.vertices.push_back({origin.x + spacing * i, origin.y + spacing * j});
        }
        return slot;
    };
    // Vertices are numbered row by row so that the numbering is independent of the filter order.
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            const bool used = (i > 0 && j > 0 && keep(i - 1, j - 1)) || (i < nx && j > 0 && keep(i, j - 1)) ||
                              (i > 0 && j < ny && keep(i - 1, j)) || (i < nx && j < ny && keep(i, j));
            if (used) vertex(i, j);
        }
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            if (!keep(i, j)) continue;
            const int ll = vertex(i, j), lr = vertex(i + 1, j), ur = vertex(i + 1, j + 1), ul = vertex(i, j + 1);
            mesh.triangles.push_back({ll, lr, ur});
            mesh.triangles.push_back({ll, ur, ul});
        }
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        mesh.refinement_vertex.push_back(longest_edge_opposite(mesh.triangle_vertices(t)));
        mesh.generation.push_back(0);
    }
    finalize_topology(mesh, {}, BoundaryTag::dirichlet);
    return mesh;
}

}  // namespace detail

/// Uniform mesh of (0,1)^2 with 2 n^2 triangles; all boundary edges tagged dirichlet.
inline Mesh build_unit_square_mesh(int n) {
    if (n < 1) throw std::invalid_argument("build_unit_square_mesh: n must be >= 1");
    return detail::lattice_mesh({0.0, 0.0}, 1.0 / n, n, n, [](int, int) { return true; });
}

/// L-shaped domain (-1,1)^2 \ [0,1)x(-1,0] tiled by 12 squares of side 1/2, 24 triangles.
inline Mesh build_l_shape_mesh() {
    // Cells (i, j) with i >= 2 and j < 2 lie in the removed quadrant.
    return detail::lattice_mesh({-1.0, -1.0}, 0.5, 4, 4, [](int i, int j) { return !(i >= 2 && j < 2); });
}

/// Re-tags boundary edges by evaluating `rule` at each boundary edge midpoint.
inline Mesh apply_boundary_partition(Mesh mesh, const std::function<BoundaryTag(Vec2)>& rule) {
    for (int e = 0; e < mesh.num_edges(); ++e) {
        if (!mesh.is_boundary_edge(e)) continue;
        const BoundaryTag tag = rule(mesh.edge_midpoint(e));
        if (tag == BoundaryTag::interior)
            throw std::invalid_argument("apply_boundary_partition: boundary edge tagged interior");
        mesh.edge_tags[e] = tag;
    }
    return mesh;
}

/// Newest-vertex bisection of the marked triangles plus the closure needed for conformity.
inline Mesh bisect_refine(const Mesh& mesh, std::span<const int> marked) {
    const int nt = mesh.num_triangles();
    for (int t : marked)
        if (t < 0 || t >= nt)
            throw std::invalid_argument("bisect_refine: triangle index " + std::to_string(t) + " out of range");
    if (marked.empty()) return mesh;

    // Closure on edges: any triangle with a marked edge must also bisect its refinement edge.
    const int ne = mesh.num_edges();
    std::vector<char> edge_marked(ne, 0);
    std::vector<int> work;
    auto mark_edge = [&](int e) {
        if (edge_marked[e]) return;
        edge_marked[e] = 1;
        for (int t : mesh.edge_triangles[e])
            if (t >= 0) work.push_back(t);
    };
    for (int t : marked) mark_edge(mesh.triangle_edges[t][mesh.refinement_vertex[t]]);
    while (!work.empty()) {
        const int t = work.back();
        work.pop_back();
        mark_edge(mesh.triangle_edges[t][mesh.refinement_vertex[t]]);
    }

    Mesh out;
    out.vertices = mesh.vertices;
    std::vector<int> midpoint(ne, -1);
    detail::BoundaryTagMap tags;
    for (int e = 0; e < ne; ++e) {
        const auto [lo, hi] = std::pair{mesh.edges[e][0], mesh.edges[e][1]};
        if (edge_marked[e]) {
            midpoint[e] = static_cast<int>(out.vertices.size());
            out.vertices.push_back(mesh.edge_midpoint(e));
        }
        if (!mesh.is_boundary_edge(e)) continue;
        if (edge_marked[e]) {
            tags[detail::sorted_pair(lo, midpoint[e])] = mesh.edge_tags[e];
            tags[detail::sorted_pair(midpoint[e], hi)] = mesh.edge_tags[e];
        } else {
            tags[{lo, hi}] = mesh.edge_tags[e];
        }
    }

    // `old_edge[i]` is the parent-mesh edge opposite local vertex i, or -1 for a newly created edge.
    auto split = [&](auto&& self, std::array<int, 3> tri, int newest, std::array<int, 3> old_edge, int gen) -> void {
        const int e = old_edge[newest];
        if (e < 0 || !edge_marked[e]) {
            out.triangles.push_back(tri);
            out.refinement_vertex.push_back(newest);
            out.generation.push_back(gen);
            return;
        }
        const int ia = newest, ib = (newest + 1) % 3, ic = (newest + 2) % 3;
        const int a = tri[ia], b = tri[ib], c = tri[ic], m = midpoint[e];
        self(self, {a, b, m}, 2, {-1, -1, old_edge[ic]}, gen + 1);
        self(self, {a, m, c}, 1, {-1, old_edge[ib], -1}, gen + 1);
    };
    for (int t = 0; t < nt; ++t) split(split, mesh.triangles[t], mesh.refinement_vertex[t], mesh.triangle_edges[t], mesh.generation[t]);

    detail::finalize_topology(out, tags, BoundaryTag::dirichlet);
    return out;
}

/// Per-entity geometric quantities derived from a mesh.
struct GeometryCache {
    std::vector<double> area;
    std::vector<double> diameter;
    std::vector<double> edge_length;
    std::vector<Vec2> edge_normal;
    std::vector<Vec2> edge_tangent;
};

inline GeometryCache geometry(const Mesh& mesh) {
    GeometryCache g;
    g.area.reserve(mesh.num_triangles());
    g.diameter.reserve(mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto p = mesh.triangle_vertices(t);
        g.area.push_back(0.5 * cross(p[1] - p[0], p[2] - p[0]));
        g.diameter.push_back(std::max({norm(p[1] - p[0]), norm(p[2] - p[1]), norm(p[0] - p[2])}));
    }
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const Vec2 d = mesh.vertices[mesh.edges[e][1]] - mesh.vertices[mesh.edges[e][0]];
        const double len = norm(d);
        const Vec2 t = (1.0 / len) * d;
        g.edge_length.push_back(len);
        g.edge_tangent.push_back(t);
        g.edge_normal.push_back({t.y, -t.x});
    }
    return g;
}

/// Vertices lying strictly inside some edge (brute force, O(V E)).
inline std::vector<int> find_hanging_nodes(const Mesh& mesh, double tol = 1e-12) {
    std::vector<int> hanging;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        const Vec2 p = mesh.vertices[v];
        for (const auto& edge : mesh.edges) {
            if (edge[0] == v || edge[1] == v) continue;
            const Vec2 a = mesh.vertices[edge[0]], b = mesh.vertices[edge[1]];
            const Vec2 d = b - a;
            const double len2 = dot(d, d);
            const double s = dot(p - a, d) / len2;
            if (s <= tol || s >= 1.0 - tol) continue;
            if (std::abs(cross(d, p - a)) <= tol * len2) {
                hanging.push_back(v);
                break;
            }
        }
    }
    return hanging;
}

/// Smallest interior angle over all triangles, radians.
inline double minimum_angle(const Mesh& mesh) {
    double best = M_PI;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto p = mesh.triangle_vertices(t);
        for (int i = 0; i < 3; ++i) {
            const Vec2 u = p[(i + 1) % 3] - p[i], w = p[(i + 2) % 3] - p[i];
            best = std::min(best, std::atan2(std::abs(cross(u, w)), dot(u, w)));
        }
    }
    return best;
}

/// Checks the structural invariants; returns an empty string when the mesh is valid.
inline std::string validate_mesh(const Mesh& mesh) {
    const int nt = mesh.num_triangles();
    if (static_cast<int>(mesh.refinement_vertex.size()) != nt || static_cast<int>(mesh.generation.size()) != nt)
        return "metadata size mismatch";
    std::vector<int> count(mesh.num_edges(), 0);
    for (int t = 0; t < nt; ++t) {
        if (!(mesh.signed_area(t) > 0.0)) return "nonpositive area in triangle " + std::to_string(t);
        for (int i = 0; i < 3; ++i) ++count[mesh.triangle_edges[t][i]];
    }
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const bool boundary = mesh.is_boundary_edge(e);
        if (count[e] != (boundary ? 1 : 2)) return "edge " + std::to_string(e) + " has wrong incidence";
        if (boundary == (mesh.edge_tags[e] == BoundaryTag::interior)) return "edge " + std::to_string(e) + " mis-tagged";
        if (mesh.edges[e][0] >= mesh.edges[e][1]) return "edge " + std::to_string(e) + " not oriented lo->hi";
    }
    if (!find_hanging_nodes(mesh).empty()) return "hanging node present";
    return {};
}

/// Legacy ASCII VTK (version 2.0) unstructured grid with optional per-cell scalar fields.
inline void write_vtk(std::ostream& os, const Mesh& mesh,
                      const std::vector<std::pair<std::string, std::vector<double>>>& cell_fields = {},
                      const std::string& title = "fosll mesh") {
    const auto old_precision = os.precision(17);
    os << "# vtk DataFile Version 2.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << mesh.num_vertices() << " double\n";
    for (const auto& p : mesh.vertices) os << p.x << ' ' << p.y << " 0\n";
    os << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
    for (const auto& t : mesh.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    os << "CELL_TYPES " << mesh.num_triangles() << '\n';
    for (int t = 0; t < mesh.num_triangles(); ++t) os << "5\n";
    if (!cell_fields.empty()) {
        os << "CELL_DATA " << mesh.num_triangles() << '\n';
        for (const auto& [name, values] : cell_fields) {
            if (static_cast<int>(values.size()) != mesh.num_triangles())
                throw DimensionMismatch("write_vtk: field '" + name + "' has wrong length");
            os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : values) os << v << '\n';
        }
    }
    os.precision(old_precision);
}

}  // namespace fosll
