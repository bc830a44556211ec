/**
 * @file assembly.hpp
 * @brief Degree-of-freedom numbering and assembly of the FOSLL* system for RT0 x P1.
 *
 * Unknowns are W = (eta, w) with eta in the RT0 space (one normal-flux coefficient per edge)
 * and w in the continuous P1 space (one value per vertex). Global numbering puts all flux
 * DOFs first (by edge index) followed by all scalar DOFs (by vertex index). Flux DOFs on
 * Neumann edges and scalar DOFs on Dirichlet vertices are eliminated; boundary data enters
 * only through the load functional.
 *
 * With P(W) = eta - A grad w - b w and Q(W) = div eta - a w, the bilinear form is
 *     b(W; V) = (A^{-1} P(W), P(V)) + (a^{-1} Q(W), Q(V))          (reactive, a != 0)
 *     b(W; V) = (A^{-1} P(W), P(V)) + (div eta, div tau)           (reactionless, a == 0)
 * and the load is f(tau, v) = (f, v) - <g_N, v>_{Gamma_N} - <g_D, tau.n>_{Gamma_D}.
 */
#pragma once

#include "fosll/elements.hpp"
#include "fosll/linalg.hpp"
#include "fosll/mesh.hpp"
#include "fosll/model.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace fosll {

struct DofMap {
    int num_flux = 0;
    int num_scalar = 0;
    std::vector<char> flux_constrained;    ///< per edge: Neumann edge, tau.n = 0
    std::vector<char> scalar_constrained;  ///< per vertex: on the closure of Gamma_D
    std::vector<int> free_index;           ///< global DOF -> reduced index, -1 if constrained
    std::vector<int> free_dofs;            ///< reduced index -> global DOF
    int num_free_flux = 0;
    int num_free_scalar = 0;

    int total() const { return num_flux + num_scalar; }
    int num_free() const { return static_cast<int>(free_dofs.size()); }
    int flux_dof(int edge) const { return edge; }
    int scalar_dof(int vertex) const { return num_flux + vertex; }
    bool is_flux(int global) const { return global < num_flux; }

    /// Full-length coefficient vector from reduced values; constrained entries are zero.
    std::vector<double> expand(std::span<const double> reduced) const {
        if (static_cast<int>(reduced.size()) != num_free()) throw DimensionMismatch("DofMap::expand: size mismatch");
        std::vector<double> full(total(), 0.0);
        for (int k = 0; k < num_free(); ++k) full[free_dofs[k]] = reduced[k];
        return full;
    }

    std::vector<double> restrict_to_free(std::span<const double> full) const {
        if (static_cast<int>(full.size()) != total()) throw DimensionMismatch("DofMap::restrict_to_free: size mismatch");
        std::vector<double> reduced(num_free());
        for (int k = 0; k < num_free(); ++k) reduced[k] = full[free_dofs[k]];
        return reduced;
    }
};

inline DofMap build_dof_map(const Mesh& mesh) {
    DofMap d;
    d.num_flux = mesh.num_edges();
    d.num_scalar = mesh.num_vertices();
    d.flux_constrained.assign(d.num_flux, 0);
    d.scalar_constrained.assign(d.num_scalar, 0);
    for (int e = 0; e < mesh.num_edges(); ++e) {
        if (mesh.edge_tags[e] == BoundaryTag::neumann) d.flux_constrained[e] = 1;
        if (mesh.edge_tags[e] == BoundaryTag::dirichlet) {
            d.scalar_constrained[mesh.edges[e][0]] = 1;
            d.scalar_constrained[mesh.edges[e][1]] = 1;
        }
    }
    d.free_index.assign(d.total(), -1);
    for (int g = 0; g < d.total(); ++g) {
        const bool constrained = d.is_flux(g) ? d.flux_constrained[g] : d.scalar_constrained[g - d.num_flux];
        if (constrained) continue;
        d.free_index[g] = d.num_free();
        d.free_dofs.push_back(g);
        if (d.is_flux(g)) {
            ++d.num_free_flux;
        } else {
            ++d.num_free_scalar;
        }
    }
    return d;
}

/// Dense 6x6 element block; rows are test functions, columns trial functions. Local DOFs
/// 0..2 are the RT0 functions (edge opposite vertex i), 3..5 the P1 functions.
using LocalMatrix = std::array<std::array<double, 6>, 6>;

enum class FormVariant { expanded, factored };

struct ElementContext {
    TriangleGeometry geom;
    LocalBasisRT0 rt;
    LocalBasisP1 p1;
    std::array<int, 6> global;

    ElementContext(const Mesh& mesh, const DofMap& dofs, int t)
        : geom{mesh.triangle_vertices(t)},
          rt(geom, mesh.edge_signs[t]),
          p1(geom),
          global{dofs.flux_dof(mesh.triangle_edges[t][0]), dofs.flux_dof(mesh.triangle_edges[t][1]),
                 dofs.flux_dof(mesh.triangle_edges[t][2]), dofs.scalar_dof(mesh.triangles[t][0]),
                 dofs.scalar_dof(mesh.triangles[t][1]), dofs.scalar_dof(mesh.triangles[t][2])} {}
};

namespace detail {

/// Residual images P(phi_j) and Q(phi_j) of the six local basis functions at one point.
struct BasisImages {
    std::array<Vec2, 6> P;
    std::array<double, 6> Q;
};

inline BasisImages basis_images(const ElementContext& el, const Vec2& x, const Mat2& A, const Vec2& b, double a) {
    BasisImages im;
    for (int i = 0; i < 3; ++i) {
        im.P[i] = el.rt.value(i, x);
        im.Q[i] = el.rt.divergence(i);
        const double lam = el.p1.value(i, x);
        im.P[3 + i] = -(A * el.p1.gradient(i)) - lam * b;
        im.Q[3 + i] = -a * lam;
    }
    return im;
}

}  // namespace detail

/// b(., .) restricted to one element, assembled from the product form.
inline LocalMatrix local_matrix_factored(const ElementContext& el, const Problem& problem, const QuadratureRule& quad) {
    LocalMatrix M{};
    const double area = el.geom.area();
    for (std::size_t q = 0; q < quad.size(); ++q) {
        const Vec2 x = el.geom.map(quad.points[q]);
        const double wq = 2.0 * area * quad.weights[q];
        const Mat2 A = problem.diffusion(x);
        const Mat2 Ainv = A.inverse();
        const Vec2 b = problem.convection(x);
        const double a = problem.reaction(x);
        const double second_weight = problem.reactive() ? 1.0 / a : 1.0;
        const auto im = detail::basis_images(el, x, A, b, problem.reactive() ? a : 0.0);
        for (int i = 0; i < 6; ++i) {
            const Vec2 AinvPi = Ainv * im.P[i];
            for (int j = 0; j < 6; ++j) M[i][j] += wq * (dot(AinvPi, im.P[j]) + second_weight * im.Q[i] * im.Q[j]);
        }
    }
    return M;
}

/// b(., .) restricted to one element, assembled term by term from the integrated-by-parts form
/// (reactive mode). Reactionless problems have no separate expanded form and use the product form.
inline LocalMatrix local_matrix_expanded(const ElementContext& el, const Problem& problem, const QuadratureRule& quad) {
    if (!problem.reactive()) return local_matrix_factored(el, problem, quad);
    LocalMatrix M{};
    const double area = el.geom.area();
    for (std::size_t q = 0; q < quad.size(); ++q) {
        const Vec2 x = el.geom.map(quad.points[q]);
        const double wq = 2.0 * area * quad.weights[q];
        const Mat2 A = problem.diffusion(x);
        const Mat2 Ainv = A.inverse();
        const Vec2 b = problem.convection(x);
        const double a = problem.reaction(x);
        const Vec2 Ainv_b = Ainv * b;

        std::array<Vec2, 3> phi, Ainv_phi, grad;
        std::array<double, 3> div{}, lam{};
        for (int i = 0; i < 3; ++i) {
            phi[i] = el.rt.value(i, x);
            Ainv_phi[i] = Ainv * phi[i];
            div[i] = el.rt.divergence(i);
            lam[i] = el.p1.value(i, x);
            grad[i] = el.p1.gradient(i);
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                // (A^{-1} eta, tau) + (a^{-1} div eta, div tau)
                M[i][j] += wq * (dot(Ainv_phi[j], phi[i]) + div[j] * div[i] / a);
                // (A grad w, grad v) + (a w, v) + (b w, grad v) + (grad w, b v) + (A^{-1} b w, b v)
                M[3 + i][3 + j] += wq * (dot(A * grad[j], grad[i]) + a * lam[j] * lam[i] + lam[j] * dot(b, grad[i]) +
                                         lam[i] * dot(grad[j], b) + lam[j] * lam[i] * dot(Ainv_b, b));
                // -(b w, A^{-1} tau): test tau_i, trial w_j
                M[i][3 + j] -= wq * lam[j] * dot(b, Ainv_phi[i]);
                // -(A^{-1} eta, b v): test v_i, trial eta_j
                M[3 + i][j] -= wq * lam[i] * dot(Ainv_phi[j], b);
            }
    }
    return M;
}

/// Element contribution (f, v) to the scalar test functions.
inline std::array<double, 3> local_load(const ElementContext& el, const Problem& problem, const QuadratureRule& quad) {
    std::array<double, 3> F{};
    const double area = el.geom.area();
    for (std::size_t q = 0; q < quad.size(); ++q) {
        const Vec2 x = el.geom.map(quad.points[q]);
        const double fw = 2.0 * area * quad.weights[q] * problem.load(x);
        for (int i = 0; i < 3; ++i) F[i] += fw * el.p1.value(i, x);
    }
    return F;
}

struct LinearSystem {
    SparseMatrix matrix;
    std::vector<double> rhs;
};

struct AssemblyOptions {
    int triangle_degree = default_triangle_degree;
    int edge_degree = default_edge_degree;
};

namespace detail {

inline void check_solvable(const Mesh& mesh, const Problem& problem) {
    if (problem.reactive()) return;
    for (int e = 0; e < mesh.num_edges(); ++e)
        if (mesh.edge_tags[e] == BoundaryTag::dirichlet) return;
    throw SingularSystem(problem.name + ": reactionless problem needs a nonempty Dirichlet boundary");
}

inline std::vector<double> assemble_rhs(const Mesh& mesh, const DofMap& dofs, const Problem& problem,
                                        const QuadratureRule& tri_quad, const QuadratureRule& edge_quad) {
    std::vector<double> rhs(dofs.num_free(), 0.0);
    auto add = [&](int global, double v) {
        const int k = dofs.free_index[global];
        if (k >= 0) rhs[k] += v;
    };
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const ElementContext el(mesh, dofs, t);
        const auto F = local_load(el, problem, tri_quad);
        for (int i = 0; i < 3; ++i) add(el.global[3 + i], F[i]);
    }
    for (int e = 0; e < mesh.num_edges(); ++e) {
        if (!mesh.is_boundary_edge(e)) continue;
        const Vec2 a = mesh.vertices[mesh.edges[e][0]], b = mesh.vertices[mesh.edges[e][1]];
        const double len = norm(b - a);
        if (mesh.edge_tags[e] == BoundaryTag::neumann) {
            // -<g_N, v>: only the two endpoint hat functions are nonzero on the edge.
            double lo = 0.0, hi = 0.0;
            for (std::size_t q = 0; q < edge_quad.size(); ++q) {
                const double s = edge_quad.points[q][1];
                const double g = problem.neumann_data((1.0 - s) * a + s * b) * edge_quad.weights[q] * len;
                lo += (1.0 - s) * g;
                hi += s * g;
            }
            add(dofs.scalar_dof(mesh.edges[e][0]), -lo);
            add(dofs.scalar_dof(mesh.edges[e][1]), -hi);
        } else if (mesh.edge_tags[e] == BoundaryTag::dirichlet) {
            // -<g_D, tau.n>: the global basis function of e has unit flux along the global
            // normal, so tau.n_out is constant = sign / |e| on e; other RT0 functions vanish there.
            const int t = mesh.edge_triangles[e][0];
            int slot = 0;
            while (mesh.triangle_edges[t][slot] != e) ++slot;
            const int sign = mesh.edge_signs[t][slot];
            double integral = 0.0;
            for (std::size_t q = 0; q < edge_quad.size(); ++q) {
                const double s = edge_quad.points[q][1];
                integral += problem.dirichlet_data((1.0 - s) * a + s * b) * edge_quad.weights[q];
            }
            add(dofs.flux_dof(e), -sign * integral);
        }
    }
    return rhs;
}

}  // namespace detail

/// Assembles the reduced system for either form of the bilinear operator.
inline LinearSystem assemble(const Mesh& mesh, const DofMap& dofs, const Problem& problem, FormVariant variant,
                             const AssemblyOptions& opts = {}) {
    detail::check_solvable(mesh, problem);
    const auto tri_quad = triangle_quadrature(opts.triangle_degree);
    const auto edge_quad = edge_quadrature(opts.edge_degree);
    std::vector<Triplet> triplets;
    triplets.reserve(36 * static_cast<std::size_t>(mesh.num_triangles()));
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const ElementContext el(mesh, dofs, t);
        const LocalMatrix M = variant == FormVariant::expanded ? local_matrix_expanded(el, problem, tri_quad)
                                                               : local_matrix_factored(el, problem, tri_quad);
        for (int i = 0; i < 6; ++i) {
            const int r = dofs.free_index[el.global[i]];
            if (r < 0) continue;
            for (int j = 0; j < 6; ++j) {
                const int c = dofs.free_index[el.global[j]];
                if (c >= 0) triplets.push_back({r, c, M[i][j]});
            }
        }
    }
    LinearSystem sys;
    sys.matrix = SparseMatrix::from_triplets(dofs.num_free(), std::move(triplets));
    sys.rhs = detail::assemble_rhs(mesh, dofs, problem, tri_quad, edge_quad);
    return sys;
}

/// Expanded (term-by-term) form in reactive mode; the reactionless form otherwise.
inline LinearSystem assemble_system(const Mesh& mesh, const DofMap& dofs, const Problem& problem,
                                    const AssemblyOptions& opts = {}) {
    return assemble(mesh, dofs, problem, FormVariant::expanded, opts);
}

/// Product form built directly from the weighted first-order residuals.
inline LinearSystem assemble_factored(const Mesh& mesh, const DofMap& dofs, const Problem& problem,
                                      const AssemblyOptions& opts = {}) {
    return assemble(mesh, dofs, problem, FormVariant::factored, opts);
}

/**
 * Gram matrix of the weighted product norm on the free DOFs:
 *     |||(tau, v)|||^2 = ||a^{1/2} v||^2 + ||A^{1/2} grad v||^2 + ||A^{-1/2} tau||^2 + ||a^{-1/2} div tau||^2
 * (reactionless: the a-term is dropped and div tau is unweighted).
 */
inline SparseMatrix assemble_norm_gram(const Mesh& mesh, const DofMap& dofs, const Problem& problem,
                                       const AssemblyOptions& opts = {}) {
    const auto quad = triangle_quadrature(opts.triangle_degree);
    std::vector<Triplet> triplets;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const ElementContext el(mesh, dofs, t);
        LocalMatrix M{};
        const double area = el.geom.area();
        for (std::size_t q = 0; q < quad.size(); ++q) {
            const Vec2 x = el.geom.map(quad.points[q]);
            const double wq = 2.0 * area * quad.weights[q];
            const Mat2 A = problem.diffusion(x);
            const Mat2 Ainv = A.inverse();
            const double a = problem.reactive() ? problem.reaction(x) : 0.0;
            const double div_weight = problem.reactive() ? 1.0 / a : 1.0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    M[i][j] += wq * (dot(Ainv * el.rt.value(j, x), el.rt.value(i, x)) +
                                     div_weight * el.rt.divergence(i) * el.rt.divergence(j));
                    M[3 + i][3 + j] += wq * (dot(A * el.p1.gradient(j), el.p1.gradient(i)) +
                                             a * el.p1.value(i, x) * el.p1.value(j, x));
                }
        }
        for (int i = 0; i < 6; ++i) {
            const int r = dofs.free_index[el.global[i]];
            if (r < 0) continue;
            for (int j = 0; j < 6; ++j) {
                const int c = dofs.free_index[el.global[j]];
                if (c >= 0) triplets.push_back({r, c, M[i][j]});
            }
        }
    }
    return SparseMatrix::from_triplets(dofs.num_free(), std::move(triplets));
}

}  // namespace fosll
