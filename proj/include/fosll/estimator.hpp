/**
 * @file estimator.hpp
 * @brief Explicit residual a posteriori error estimator and bulk (Doerfler) marking.
 *
 * Element residuals of the recovered fields:
 *     r1 = f - div sigma_h + b . A^{-1} sigma_h - a u_h
 *     r2 = A^{-1} sigma_h + grad u_h
 *     r3 = curl(A^{-1} sigma_h)
 * Edge jumps (K- is the side whose outward normal is n_e):
 *     interior:  J1 = [sigma_h . n],   J2 = [u_h],       J3 = [A^{-1} sigma_h . t]
 *     Dirichlet: J1 = 0,               J2 = u_h - g_D,   J3 = grad g_D . t + A^{-1} sigma_h . t
 *     Neumann:   J1 = sigma_h . n - g_N, J2 = 0,         J3 = 0
 * All projections are onto constants (entity means).
 */
#pragma once

#include "fosll/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace fosll {

struct EstimatorOptions {
    int triangle_degree = default_triangle_degree;
    int edge_degree = default_edge_degree;
};

struct ElementResidualValues {
    double r1 = 0.0;
    Vec2 r2{};
    double r3 = 0.0;
};

struct ElementResiduals {
    ElementResidualValues mean;
    /// ||r_i - mean(r_i)||_K^2
    std::array<double, 3> deviation_sq{};
    double area = 0.0;
    double diameter = 0.0;
};

struct EdgeJumpValues {
    double J1 = 0.0;
    double J2 = 0.0;
    double J3 = 0.0;
};

struct EdgeJumps {
    EdgeJumpValues mean;
    /// ||J_i - mean(J_i)||_e^2
    std::array<double, 3> deviation_sq{};
    double length = 0.0;
};

/// Pointwise residuals on element fields `f` at x.
inline ElementResidualValues residuals_at(const ElementFields& f, const Problem& pb, const Vec2& x) {
    ElementResidualValues r;
    const Vec2 sig = f.sigma(x);
    const Mat2 Ainv = pb.diffusion(x).inverse();
    const Vec2 scaled = Ainv * sig;
    const double a = pb.reactive() ? pb.reaction(x) : 0.0;
    r.r1 = pb.load(x) - f.div_sigma(x) + dot(pb.convection(x), scaled) - a * f.u(x);
    r.r2 = scaled + f.grad_u(x);
    r.r3 = f.curl_scaled_sigma(x);
    return r;
}

inline ElementResiduals element_residuals(const Solution& sol, int t, const QuadratureRule& quad) {
    const auto f = sol.element(t);
    const auto& geom = f.context().geom;
    ElementResiduals out;
    out.area = geom.area();
    out.diameter = f.diameter();
    std::vector<ElementResidualValues> vals;
    vals.reserve(quad.size());
    for (std::size_t q = 0; q < quad.size(); ++q) {
        vals.push_back(residuals_at(f, sol.problem(), geom.map(quad.points[q])));
        const double w = 2.0 * quad.weights[q];
        out.mean.r1 += w * vals.back().r1;
        out.mean.r2 += w * vals.back().r2;
        out.mean.r3 += w * vals.back().r3;
    }
    for (std::size_t q = 0; q < quad.size(); ++q) {
        const double w = 2.0 * quad.weights[q] * out.area;
        const double d1 = vals[q].r1 - out.mean.r1;
        const Vec2 d2 = vals[q].r2 - out.mean.r2;
        const double d3 = vals[q].r3 - out.mean.r3;
        out.deviation_sq[0] += w * d1 * d1;
        out.deviation_sq[1] += w * dot(d2, d2);
        out.deviation_sq[2] += w * d3 * d3;
    }
    return out;
}

inline ElementResiduals element_residuals(const Solution& sol, int t, const EstimatorOptions& opts = {}) {
    return element_residuals(sol, t, triangle_quadrature(opts.triangle_degree));
}

namespace detail {

struct EdgeFrame {
    Vec2 a, b;   ///< endpoints, lo -> hi
    Vec2 n, t;   ///< jump normal (global, or outward on the boundary) and tangent, t = rot90(n)
};

inline EdgeFrame edge_frame(const Mesh& mesh, int e) {
    EdgeFrame fr;
    fr.a = mesh.vertices[mesh.edges[e][0]];
    fr.b = mesh.vertices[mesh.edges[e][1]];
    const Vec2 tg = (1.0 / norm(fr.b - fr.a)) * (fr.b - fr.a);
    fr.n = {tg.y, -tg.x};
    if (mesh.is_boundary_edge(e)) {
        const int t = mesh.edge_triangles[e][0];
        int slot = 0;
        while (mesh.triangle_edges[t][slot] != e) ++slot;
        fr.n = mesh.edge_signs[t][slot] * fr.n;
    }
    fr.t = {-fr.n.y, fr.n.x};
    return fr;
}

}  // namespace detail

/// Pointwise jumps at x on edge e; `plus` is ignored for boundary edges.
inline EdgeJumpValues jumps_at(const Solution& sol, int e, const ElementFields& minus, const ElementFields* plus,
                               const Vec2& x) {
    const Mesh& mesh = sol.mesh();
    const Problem& pb = sol.problem();
    const auto fr = detail::edge_frame(mesh, e);
    EdgeJumpValues j;
    switch (mesh.edge_tags[e]) {
        case BoundaryTag::interior: {
            j.J1 = dot(minus.sigma(x) - plus->sigma(x), fr.n);
            j.J2 = minus.u(x) - plus->u(x);
            j.J3 = dot(minus.scaled_sigma(x) - plus->scaled_sigma(x), fr.t);
            break;
        }
        case BoundaryTag::dirichlet:
            j.J2 = minus.u(x) - pb.dirichlet_data(x);
            j.J3 = dot(pb.dirichlet_gradient(x), fr.t) + dot(minus.scaled_sigma(x), fr.t);
            break;
        case BoundaryTag::neumann:
            j.J1 = dot(minus.sigma(x), fr.n) - pb.neumann_data(x);
            break;
    }
    return j;
}

inline EdgeJumps edge_jumps(const Solution& sol, int e, const QuadratureRule& quad) {
    const Mesh& mesh = sol.mesh();
    const auto minus = sol.element(mesh.edge_triangles[e][0]);
    std::optional<ElementFields> plus;
    if (!mesh.is_boundary_edge(e)) plus.emplace(sol.element(mesh.edge_triangles[e][1]));
    const Vec2 a = mesh.vertices[mesh.edges[e][0]], b = mesh.vertices[mesh.edges[e][1]];
    EdgeJumps out;
    out.length = norm(b - a);
    std::vector<EdgeJumpValues> vals;
    for (std::size_t q = 0; q < quad.size(); ++q) {
        const double s = quad.points[q][1];
        vals.push_back(jumps_at(sol, e, minus, plus ? &*plus : nullptr, (1.0 - s) * a + s * b));
        out.mean.J1 += quad.weights[q] * vals.back().J1;
        out.mean.J2 += quad.weights[q] * vals.back().J2;
        out.mean.J3 += quad.weights[q] * vals.back().J3;
    }
    for (std::size_t q = 0; q < quad.size(); ++q) {
        const double w = quad.weights[q] * out.length;
        out.deviation_sq[0] += w * std::pow(vals[q].J1 - out.mean.J1, 2);
        out.deviation_sq[1] += w * std::pow(vals[q].J2 - out.mean.J2, 2);
        out.deviation_sq[2] += w * std::pow(vals[q].J3 - out.mean.J3, 2);
    }
    return out;
}

inline EdgeJumps edge_jumps(const Solution& sol, int e, const EstimatorOptions& opts = {}) {
    return edge_jumps(sol, e, edge_quadrature(opts.edge_degree));
}

struct IndicatorField {
    std::vector<double> eta_K;   ///< local indicators
    std::vector<double> osc_K;   ///< local oscillations
    double eta = 0.0;            ///< (sum eta_K^2)^{1/2}
    double osc = 0.0;            ///< (sum osc_K^2)^{1/2}
    std::vector<ElementResiduals> residuals;
    std::vector<EdgeJumps> jumps;

    /// Global estimator summed entity by entity: every edge counted once, unhalved.
    double eta_edge_form(const Mesh& mesh) const {
        double s = 0.0;
        for (const auto& r : residuals)
            s += r.diameter * r.diameter * r.area *
                 (r.mean.r1 * r.mean.r1 + dot(r.mean.r2, r.mean.r2) + r.mean.r3 * r.mean.r3);
        for (int e = 0; e < mesh.num_edges(); ++e) {
            const auto& j = jumps[e];
            s += j.length * j.length * (j.mean.J1 * j.mean.J1 + j.mean.J3 * j.mean.J3);
        }
        return std::sqrt(s);
    }
};

/// Squared indicator contribution of edge e to each adjacent element (before the 1/2 weight).
inline double edge_indicator_sq(const Mesh& mesh, int e, const EdgeJumps& j) {
    const double h2 = j.length * j.length;
    switch (mesh.edge_tags[e]) {
        case BoundaryTag::interior: return h2 * (j.mean.J1 * j.mean.J1 + j.mean.J3 * j.mean.J3);
        case BoundaryTag::dirichlet: return h2 * j.mean.J3 * j.mean.J3;
        case BoundaryTag::neumann: return h2 * j.mean.J1 * j.mean.J1;
    }
    return 0.0;
}

inline IndicatorField indicators(const Solution& sol, const EstimatorOptions& opts = {}) {
    const Mesh& mesh = sol.mesh();
    const auto tri_quad = triangle_quadrature(opts.triangle_degree);
    const auto edge_quad = edge_quadrature(opts.edge_degree);
    IndicatorField field;
    field.residuals.reserve(mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) field.residuals.push_back(element_residuals(sol, t, tri_quad));
    field.jumps.reserve(mesh.num_edges());
    for (int e = 0; e < mesh.num_edges(); ++e) field.jumps.push_back(edge_jumps(sol, e, edge_quad));

    field.eta_K.assign(mesh.num_triangles(), 0.0);
    field.osc_K.assign(mesh.num_triangles(), 0.0);
    double eta_sq = 0.0, osc_sq = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& r = field.residuals[t];
        const double h2 = r.diameter * r.diameter;
        double e2 = h2 * r.area * (r.mean.r1 * r.mean.r1 + dot(r.mean.r2, r.mean.r2) + r.mean.r3 * r.mean.r3);
        double o2 = h2 * (r.deviation_sq[0] + r.deviation_sq[1] + r.deviation_sq[2]);
        for (int i = 0; i < 3; ++i) {
            const int e = mesh.triangle_edges[t][i];
            const auto& j = field.jumps[e];
            const double weight = mesh.is_boundary_edge(e) ? 1.0 : 0.5;
            e2 += weight * edge_indicator_sq(mesh, e, j);
            o2 += j.length * (j.deviation_sq[0] + j.deviation_sq[1] + j.deviation_sq[2]);
        }
        field.eta_K[t] = std::sqrt(e2);
        field.osc_K[t] = std::sqrt(o2);
        eta_sq += e2;
        osc_sq += o2;
    }
    field.eta = std::sqrt(eta_sq);
    field.osc = std::sqrt(osc_sq);
    return field;
}

/**
 * Minimal greedy set M, taken in order of decreasing indicator (ties: lower index first), with
 * sum_{K in M} eta_K^2 >= theta * sum_K eta_K^2. Returned indices are sorted ascending.
 * All-zero indicators give an empty set.
 */
inline std::vector<int> dorfler_mark(std::span<const double> eta_K, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("dorfler_mark: theta must lie in (0,1)");
    if (eta_K.empty()) throw std::invalid_argument("dorfler_mark: empty indicator field");
    double total = 0.0;
    for (double v : eta_K) total += v * v;
    if (total == 0.0) return {};
    std::vector<int> order(eta_K.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return eta_K[a] > eta_K[b]; });
    std::vector<int> marked;
    double acc = 0.0;
    for (int k : order) {
        marked.push_back(k);
        acc += eta_K[k] * eta_K[k];
        if (acc >= theta * total) break;
    }
    std::sort(marked.begin(), marked.end());
    return marked;
}

}  // namespace fosll
