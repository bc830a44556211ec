/**
 * @file model.hpp
 * @brief Boundary value problems -div(A grad u) + b.grad u + a u = f with mixed boundary data,
 * plus exact solutions for verification.
 */
#pragma once

#include "fosll/mesh.hpp"
#include "fosll/types.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fosll {

enum class ReactionMode { reactive, reactionless };

struct Problem {
    std::string name;
    std::function<Mat2(Vec2)> diffusion;    ///< A, symmetric positive definite
    std::function<Vec2(Vec2)> convection;   ///< b
    std::function<double(Vec2)> reaction;   ///< a
    std::function<double(Vec2)> load;       ///< f
    std::function<double(Vec2)> dirichlet_data;
    std::function<Vec2(Vec2)> dirichlet_gradient;  ///< grad g_D, only its tangential part is used
    std::function<double(Vec2)> neumann_data;      ///< g_N = sigma.n on Gamma_N
    std::function<BoundaryTag(Vec2)> boundary_partition;
    ReactionMode reaction_mode = ReactionMode::reactive;
    double lambda_min = 1.0;     ///< declared lower eigenvalue bound of A
    double lambda_max = 1.0;     ///< declared upper eigenvalue bound of A
    double reaction_min = 0.0;   ///< lower bound of a in reactive mode
    std::vector<Vec2> sample_points;  ///< points inside the domain used for spot checks

    bool reactive() const { return reaction_mode == ReactionMode::reactive; }
};

struct ExactSolution {
    std::function<double(Vec2)> u;
    std::function<Vec2(Vec2)> grad_u;
    std::function<Vec2(Vec2)> sigma;  ///< -A grad u
};

/// Spot-checks coefficient bounds and the reaction-mode flag; throws InvalidProblem.
inline void validate_problem(const Problem& p) {
    if (!(p.lambda_min > 0.0 && p.lambda_min <= p.lambda_max))
        throw InvalidProblem(p.name + ": eigenvalue bounds must satisfy 0 < lambda_min <= lambda_max");
    for (const Vec2& x : p.sample_points) {
        const Mat2 A = p.diffusion(x);
        if (std::abs(A.a12 - A.a21) > 1e-12 * (std::abs(A.a12) + std::abs(A.a21) + 1.0))
            throw InvalidProblem(p.name + ": diffusion tensor is not symmetric");
        const auto ev = A.symmetric_eigenvalues();
        const double slack = 1e-12 * p.lambda_max;
        if (ev[0] < p.lambda_min - slack || ev[1] > p.lambda_max + slack)
            throw InvalidProblem(p.name + ": diffusion eigenvalues outside declared bounds");
        const double a = p.reaction(x);
        if (p.reactive() && !(a >= p.reaction_min && p.reaction_min > 0.0))
            throw InvalidProblem(p.name + ": reactive mode requires a >= reaction_min > 0");
        if (!p.reactive() && a != 0.0) throw InvalidProblem(p.name + ": reactionless mode requires a == 0");
    }
}

/// Checks sigma = -A grad u at the problem's sample points; throws InconsistentExactSolution.
inline void check_exact_solution(const Problem& p, const ExactSolution& ex, double tol = 1e-10) {
    for (const Vec2& x : p.sample_points) {
        const Vec2 expected = -(p.diffusion(x) * ex.grad_u(x));
        const Vec2 got = ex.sigma(x);
        if (norm(got - expected) > tol * (1.0 + norm(expected)))
            throw InconsistentExactSolution(p.name + ": sigma != -A grad u");
    }
}

namespace detail {

inline std::vector<Vec2> grid_samples(Vec2 lo, Vec2 hi, int n, const std::function<bool(Vec2)>& inside) {
    std::vector<Vec2> pts;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 x{lo.x + (hi.x - lo.x) * (i + 0.5) / n, lo.y + (hi.y - lo.y) * (j + 0.5) / n};
            if (inside(x)) pts.push_back(x);
        }
    return pts;
}

inline std::function<BoundaryTag(Vec2)> all_dirichlet() {
    return [](Vec2) { return BoundaryTag::dirichlet; };
}

}  // namespace detail

/// (0,1)^2, A = I, b = (3,2), a = 2, u = sin(pi x) sin(pi y), homogeneous Dirichlet data.
inline std::pair<Problem, ExactSolution> make_table61_problem() {
    const double pi = M_PI;
    ExactSolution ex;
    ex.u = [pi](Vec2 x) { return std::sin(pi * x.x) * std::sin(pi * x.y); };
    ex.grad_u = [pi](Vec2 x) {
        return Vec2{pi * std::cos(pi * x.x) * std::sin(pi * x.y), pi * std::sin(pi * x.x) * std::cos(pi * x.y)};
    };
    ex.sigma = [g = ex.grad_u](Vec2 x) { return -g(x); };

    Problem p;
    p.name = "table61";
    p.diffusion = [](Vec2) { return Mat2::identity(); };
    p.convection = [](Vec2) { return Vec2{3.0, 2.0}; };
    p.reaction = [](Vec2) { return 2.0; };
    p.load = [pi, u = ex.u, g = ex.grad_u](Vec2 x) {
        const Vec2 du = g(x);
        return 2.0 * pi * pi * u(x) + 3.0 * du.x + 2.0 * du.y + 2.0 * u(x);
    };
    p.dirichlet_data = [](Vec2) { return 0.0; };
    p.dirichlet_gradient = [](Vec2) { return Vec2{}; };
    p.neumann_data = [](Vec2) { return 0.0; };
    p.boundary_partition = detail::all_dirichlet();
    p.reaction_mode = ReactionMode::reactive;
    p.reaction_min = 2.0;
    p.sample_points = detail::grid_samples({0, 0}, {1, 1}, 6, [](Vec2) { return true; });
    validate_problem(p);
    check_exact_solution(p, ex);
    return {p, ex};
}

/// Polar angle in [0, 2pi) measured counterclockwise from the positive x-axis.
inline double polar_angle(Vec2 x) {
    double theta = std::atan2(x.y, x.x);
    if (theta < 0.0) theta += 2.0 * M_PI;
    return theta;
}

/// Laplace problem on (-1,1)^2 \ [0,1)x(-1,0] with u = r^{2/3} sin(2 theta / 3).
inline std::pair<Problem, ExactSolution> make_lshape_problem() {
    ExactSolution ex;
    ex.u = [](Vec2 x) {
        const double r = norm(x);
        return r == 0.0 ? 0.0 : std::pow(r, 2.0 / 3.0) * std::sin(2.0 * polar_angle(x) / 3.0);
    };
    ex.grad_u = [](Vec2 x) {
        const double r = norm(x);
        if (r == 0.0) return Vec2{};
        const double theta = polar_angle(x);
        const double s = (2.0 / 3.0) * std::pow(r, -1.0 / 3.0);
        return Vec2{-s * std::sin(theta / 3.0), s * std::cos(theta / 3.0)};
    };
    ex.sigma = [g = ex.grad_u](Vec2 x) { return -g(x); };

    Problem p;
    p.name = "lshape";
    p.diffusion = [](Vec2) { return Mat2::identity(); };
    p.convection = [](Vec2) { return Vec2{}; };
    p.reaction = [](Vec2) { return 0.0; };
    p.load = [](Vec2) { return 0.0; };
    p.dirichlet_data = ex.u;
    p.dirichlet_gradient = ex.grad_u;
    p.neumann_data = [](Vec2) { return 0.0; };
    p.boundary_partition = detail::all_dirichlet();
    p.reaction_mode = ReactionMode::reactionless;
    p.sample_points = detail::grid_samples({-1, -1}, {1, 1}, 8, [](Vec2 x) { return !(x.x > 0.0 && x.y < 0.0); });
    validate_problem(p);
    check_exact_solution(p, ex);
    return {p, ex};
}

/// Closures describing a manufactured solution. Unset optional closures are derived:
/// sigma = -A grad u, and div(sigma) by fourth-order central differences of sigma.
struct ManufacturedSpec {
    std::string name = "manufactured";
    std::function<double(Vec2)> u;
    std::function<Vec2(Vec2)> grad_u;
    std::function<Vec2(Vec2)> sigma;           ///< optional; checked against -A grad u
    std::function<double(Vec2)> div_sigma;     ///< optional
    std::function<Mat2(Vec2)> diffusion = [](Vec2) { return Mat2::identity(); };
    std::function<Vec2(Vec2)> convection = [](Vec2) { return Vec2{}; };
    std::function<double(Vec2)> reaction = [](Vec2) { return 0.0; };
    std::function<BoundaryTag(Vec2)> boundary_partition = detail::all_dirichlet();
    ReactionMode reaction_mode = ReactionMode::reactionless;
    double lambda_min = 1.0, lambda_max = 1.0, reaction_min = 0.0;
    /// Outward unit normal of the domain boundary at a boundary point (needed for g_N).
    std::function<Vec2(Vec2)> outward_normal;
    Vec2 box_lo{0.0, 0.0}, box_hi{1.0, 1.0};
    std::function<bool(Vec2)> inside = [](Vec2) { return true; };
};

namespace detail {

inline double fd_divergence(const std::function<Vec2(Vec2)>& field, Vec2 x, double h = 1e-3) {
    auto d = [&](Vec2 dir, auto comp) {
        const double fp1 = comp(field(x + h * dir)), fm1 = comp(field(x - h * dir));
        const double fp2 = comp(field(x + 2.0 * h * dir)), fm2 = comp(field(x - 2.0 * h * dir));
        return (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
    };
    return d({1, 0}, [](Vec2 v) { return v.x; }) + d({0, 1}, [](Vec2 v) { return v.y; });
}

}  // namespace detail

/// Problem whose load and boundary data are generated from the exact-solution closures via
/// -div(A grad u) + b.grad u + a u = f.
inline std::pair<Problem, ExactSolution> manufactured_problem(const ManufacturedSpec& spec) {
    if (!spec.u || !spec.grad_u) throw std::invalid_argument("manufactured_problem: u and grad_u are required");
    ExactSolution ex;
    ex.u = spec.u;
    ex.grad_u = spec.grad_u;
    const auto derived_sigma = [A = spec.diffusion, g = spec.grad_u](Vec2 x) { return -(A(x) * g(x)); };
    ex.sigma = spec.sigma ? spec.sigma : std::function<Vec2(Vec2)>(derived_sigma);

    Problem p;
    p.name = spec.name;
    p.diffusion = spec.diffusion;
    p.convection = spec.convection;
    p.reaction = spec.reaction;
    std::function<double(Vec2)> div_sigma = spec.div_sigma;
    if (!div_sigma) div_sigma = [s = ex.sigma](Vec2 x) { return detail::fd_divergence(s, x); };
    p.load = [div_sigma, b = spec.convection, a = spec.reaction, u = spec.u, g = spec.grad_u](Vec2 x) {
        return div_sigma(x) + dot(b(x), g(x)) + a(x) * u(x);
    };
    p.dirichlet_data = spec.u;
    p.dirichlet_gradient = spec.grad_u;
    if (spec.outward_normal) {
        p.neumann_data = [s = ex.sigma, n = spec.outward_normal](Vec2 x) { return dot(s(x), n(x)); };
    } else {
        p.neumann_data = [](Vec2) { return 0.0; };
    }
    p.boundary_partition = spec.boundary_partition;
    p.reaction_mode = spec.reaction_mode;
    p.lambda_min = spec.lambda_min;
    p.lambda_max = spec.lambda_max;
    p.reaction_min = spec.reaction_min;
    p.sample_points = detail::grid_samples(spec.box_lo, spec.box_hi, 6, spec.inside);
    validate_problem(p);
    check_exact_solution(p, ex);
    return {p, ex};
}

/// Outward normal of the unit square at a boundary point.
inline Vec2 unit_square_normal(Vec2 x) {
    const double d[4] = {x.x, 1.0 - x.x, x.y, 1.0 - x.y};
    int k = 0;
    for (int i = 1; i < 4; ++i)
        if (d[i] < d[k]) k = i;
    constexpr Vec2 normals[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    return normals[k];
}

}  // namespace fosll
