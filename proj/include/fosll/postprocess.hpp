/**
 * @file postprocess.hpp
 * @brief Recovery of the physical fields (sigma_h, u_h) from the auxiliary solution
 * (eta_h, w_h), error norms and convergence-rate extraction.
 */
#pragma once

#include "fosll/assembly.hpp"
#include "fosll/elements.hpp"
#include "fosll/mesh.hpp"
#include "fosll/model.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace fosll {

/// Evaluators on one element. Points may lie on the element boundary; the polynomial fields
/// are extended from the element interior.
class ElementFields {
public:
    ElementFields(const Mesh& mesh, const DofMap& dofs, const Problem& problem, std::span<const double> coeffs, int t)
        : problem_(&problem), ctx_(mesh, dofs, t), h_(0.0) {
        for (int i = 0; i < 3; ++i) {
            eta_coeff_[i] = coeffs[ctx_.global[i]];
            w_coeff_[i] = coeffs[ctx_.global[3 + i]];
            div_eta_ += eta_coeff_[i] * ctx_.rt.divergence(i);
            grad_w_ += w_coeff_[i] * ctx_.p1.gradient(i);
        }
        const auto& p = ctx_.geom.p;
        h_ = std::max({norm(p[1] - p[0]), norm(p[2] - p[1]), norm(p[0] - p[2])});
    }

    Vec2 eta(const Vec2& x) const {
        Vec2 v;
        for (int i = 0; i < 3; ++i) v += eta_coeff_[i] * ctx_.rt.value(i, x);
        return v;
    }
    double div_eta() const { return div_eta_; }
    double w(const Vec2& x) const {
        double v = 0.0;
        for (int i = 0; i < 3; ++i) v += w_coeff_[i] * ctx_.p1.value(i, x);
        return v;
    }
    const Vec2& grad_w() const { return grad_w_; }

    /// sigma_h = eta_h - A grad w_h - b w_h
    Vec2 sigma(const Vec2& x) const {
        return eta(x) - problem_->diffusion(x) * grad_w_ - w(x) * problem_->convection(x);
    }

    /// u_h = -a^{-1} div eta_h + w_h (reactive), u_h = -div eta_h (reactionless)
    double u(const Vec2& x) const {
        if (problem_->reactive()) return -div_eta_ / problem_->reaction(x) + w(x);
        return -div_eta_;
    }

    Vec2 grad_u(const Vec2& x) const {
        if (!problem_->reactive()) return {};
        return central_gradient([this](const Vec2& y) { return u(y); }, x);
    }

    double div_sigma(const Vec2& x) const {
        return central_derivative([this](const Vec2& y) { return sigma(y).x; }, x, {1.0, 0.0}) +
               central_derivative([this](const Vec2& y) { return sigma(y).y; }, x, {0.0, 1.0});
    }

    /// A^{-1} sigma_h
    Vec2 scaled_sigma(const Vec2& x) const { return problem_->diffusion(x).inverse() * sigma(x); }

    /// curl(A^{-1} sigma_h) = d/dx (.)_2 - d/dy (.)_1
    double curl_scaled_sigma(const Vec2& x) const {
        const double dx = central_derivative([this](const Vec2& y) { return scaled_sigma(y).y; }, x, {1.0, 0.0});
        const double dy = central_derivative([this](const Vec2& y) { return scaled_sigma(y).x; }, x, {0.0, 1.0});
        return dx - dy;
    }

    const ElementContext& context() const { return ctx_; }
    double diameter() const { return h_; }

private:
    // Fourth-order central differences on the polynomial extension; exact (up to rounding)
    // whenever the coefficients are polynomials of degree <= 3.
    template <typename F>
    double central_derivative(F&& f, const Vec2& x, const Vec2& dir) const {
        const double s = 1e-2 * h_;
        return (8.0 * (f(x + s * dir) - f(x - s * dir)) - (f(x + 2.0 * s * dir) - f(x - 2.0 * s * dir))) / (12.0 * s);
    }
    template <typename F>
    Vec2 central_gradient(F&& f, const Vec2& x) const {
        return {central_derivative(f, x, {1.0, 0.0}), central_derivative(f, x, {0.0, 1.0})};
    }

    const Problem* problem_;
    ElementContext ctx_;
    std::array<double, 3> eta_coeff_{};
    std::array<double, 3> w_coeff_{};
    double div_eta_ = 0.0;
    Vec2 grad_w_{};
    double h_;
};

/// Discrete solution; non-owning view of the mesh and problem, which must outlive it.
class Solution {
public:
    Solution(const Mesh& mesh, DofMap dofs, const Problem& problem, std::vector<double> coeffs)
        : mesh_(&mesh), dofs_(std::move(dofs)), problem_(&problem), coeffs_(std::move(coeffs)) {
        if (static_cast<int>(coeffs_.size()) != dofs_.total())
            throw DimensionMismatch("Solution: coefficient vector has wrong length");
    }

    ElementFields element(int t) const { return ElementFields(*mesh_, dofs_, *problem_, coeffs_, t); }

    const Mesh& mesh() const { return *mesh_; }
    const DofMap& dofs() const { return dofs_; }
    const Problem& problem() const { return *problem_; }
    std::span<const double> coefficients() const { return coeffs_; }
    std::span<const double> eta_coefficients() const { return std::span(coeffs_).first(dofs_.num_flux); }
    std::span<const double> w_coefficients() const { return std::span(coeffs_).subspan(dofs_.num_flux); }

private:
    const Mesh* mesh_;
    DofMap dofs_;
    const Problem* problem_;
    std::vector<double> coeffs_;
};

/// Builds the recovered-field view from full-length coefficients (flux DOFs, then scalar DOFs).
inline Solution recover_fields(const Mesh& mesh, const DofMap& dofs, const Problem& problem, std::vector<double> coeffs) {
    return Solution(mesh, dofs, problem, std::move(coeffs));
}

struct ErrorReport {
    double err_sigma = 0.0;            ///< ||sigma - sigma_h||
    double err_u = 0.0;                ///< ||u - u_h||
    double err_sigma_A = 0.0;          ///< ||A^{1/2}(sigma - sigma_h)||
    double err_sigma_Ainv = 0.0;       ///< ||A^{-1/2}(sigma - sigma_h)||
    double err_u_a = 0.0;              ///< ||a^{1/2}(u - u_h)||, or ||u - u_h|| when a == 0
    double norm_w = 0.0;               ///< |||w_h|||_1
    double norm_eta = 0.0;             ///< |||eta_h|||_{H(div)}
    double norm_product = 0.0;         ///< |||(eta_h, w_h)|||
    double h = 0.0;                    ///< max element diameter
    int dofs = 0;                      ///< free DOFs
    int flux_dofs = 0;
    int scalar_dofs = 0;

    double combined() const { return err_sigma + err_u; }
    /// Error measure controlled by the estimator: ||A^{-1/2}(sigma - sigma_h)|| + ||a^{1/2}(u - u_h)||.
    double energy_combined() const { return err_sigma_Ainv + err_u_a; }
};

namespace detail {

/// Symmetric square root of an SPD 2x2 matrix.
inline Mat2 spd_sqrt(const Mat2& A) {
    const double s = std::sqrt(A.determinant());
    const double t = std::sqrt(A.a11 + A.a22 + 2.0 * s);
    return {(A.a11 + s) / t, A.a12 / t, A.a21 / t, (A.a22 + s) / t};
}

}  // namespace detail

inline constexpr int default_error_degree = 6;

/// L2-type errors by element-wise quadrature, plus weighted norms of the discrete solution.
inline ErrorReport l2_errors(const Solution& sol, const ExactSolution& exact, int degree = default_error_degree) {
    const auto quad = triangle_quadrature(degree);
    const Problem& pb = sol.problem();
    const Mesh& mesh = sol.mesh();
    double es = 0, eu = 0, esA = 0, esAi = 0, eua = 0, nw = 0, ne = 0;
    ErrorReport r;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto f = sol.element(t);
        const double area = f.context().geom.area();
        r.h = std::max(r.h, f.diameter());
        for (std::size_t q = 0; q < quad.size(); ++q) {
            const Vec2 x = f.context().geom.map(quad.points[q]);
            const double wq = 2.0 * area * quad.weights[q];
            const Mat2 A = pb.diffusion(x);
            const double a = pb.reactive() ? pb.reaction(x) : 0.0;
            const Vec2 ds = exact.sigma(x) - f.sigma(x);
            const double du = exact.u(x) - f.u(x);
            es += wq * dot(ds, ds);
            eu += wq * du * du;
            esA += wq * dot(A * ds, ds);
            esAi += wq * dot(A.inverse() * ds, ds);
            eua += wq * (pb.reactive() ? a : 1.0) * du * du;
            const double wh = f.w(x);
            nw += wq * (a * wh * wh + dot(A * f.grad_w(), f.grad_w()));
            const Vec2 eta = f.eta(x);
            ne += wq * (dot(A.inverse() * eta, eta) + (pb.reactive() ? 1.0 / a : 1.0) * f.div_eta() * f.div_eta());
        }
    }
    r.err_sigma = std::sqrt(es);
    r.err_u = std::sqrt(eu);
    r.err_sigma_A = std::sqrt(esA);
    r.err_sigma_Ainv = std::sqrt(esAi);
    r.err_u_a = std::sqrt(eua);
    r.norm_w = std::sqrt(nw);
    r.norm_eta = std::sqrt(ne);
    r.norm_product = std::sqrt(nw + ne);
    r.dofs = sol.dofs().num_free();
    r.flux_dofs = sol.dofs().num_free_flux;
    r.scalar_dofs = sol.dofs().num_free_scalar;
    return r;
}

/// Observed orders log(e_i / e_{i+1}) / log(h_i / h_{i+1}); nullopt where an error is not positive.
inline std::vector<std::optional<double>> convergence_rates(std::span<const double> errors, std::span<const double> hs) {
    if (errors.size() != hs.size() || errors.size() < 2)
        throw std::invalid_argument("convergence_rates: need two or more (error, h) pairs of equal length");
    for (std::size_t i = 0; i + 1 < hs.size(); ++i)
        if (!(hs[i + 1] < hs[i])) throw std::invalid_argument("convergence_rates: h must be strictly decreasing");
    std::vector<std::optional<double>> rates;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        if (!(errors[i] > 0.0 && errors[i + 1] > 0.0)) {
            rates.push_back(std::nullopt);
            continue;
        }
        rates.push_back(std::log(errors[i] / errors[i + 1]) / std::log(hs[i] / hs[i + 1]));
    }
    return rates;
}

/// Error reduction factors e_i / e_{i+1} between consecutive levels (the quantity tabulated as
/// "rate" in classical convergence tables with mesh halving).
inline std::vector<std::optional<double>> reduction_factors(std::span<const double> errors) {
    std::vector<std::optional<double>> out;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        if (!(errors[i] > 0.0 && errors[i + 1] > 0.0)) {
            out.push_back(std::nullopt);
        } else {
            out.push_back(errors[i] / errors[i + 1]);
        }
    }
    return out;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 points");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (n * sxy - sx * sy) / denom;
}

}  // namespace fosll
