/**
 * @file elements.hpp
 * @brief Quadrature rules and the local lowest-order Raviart-Thomas and linear Lagrange bases.
 */
#pragma once

#include "fosll/types.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace fosll {

/// Triangle rules store barycentric points and weights summing to 1/2 (reference area);
/// edge rules store points in [0,1] (first barycentric coordinate unused) with weights summing to 1.
struct QuadratureRule {
    int degree = 0;
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
};

namespace detail {

inline void add_orbit(QuadratureRule& q, double a, double b, double c, double w) {
    q.points.push_back({a, b, c});
    q.weights.push_back(0.5 * w);
}

inline void add_s3(QuadratureRule& q, double w) { add_orbit(q, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, w); }

inline void add_s21(QuadratureRule& q, double a, double w) {
    const double b = 1.0 - 2.0 * a;
    add_orbit(q, a, a, b, w);
    add_orbit(q, a, b, a, w);
    add_orbit(q, b, a, a, w);
}

inline void add_s111(QuadratureRule& q, double a, double b, double w) {
    const double c = 1.0 - a - b;
    add_orbit(q, a, b, c, w);
    add_orbit(q, a, c, b, w);
    add_orbit(q, b, a, c, w);
    add_orbit(q, b, c, a, w);
    add_orbit(q, c, a, b, w);
    add_orbit(q, c, b, a, w);
}

/// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
}

}  // namespace detail

/// Symmetric positive-weight rules exact up to `degree` in {1..6}.
inline QuadratureRule triangle_quadrature(int degree) {
    QuadratureRule q;
    q.degree = degree;
    switch (degree) {
        case 1:
            detail::add_s3(q, 1.0);
            break;
        case 2:
            detail::add_s21(q, 1.0 / 6.0, 1.0 / 3.0);
            break;
        case 3:  // the 4-point degree-3 rule has a negative weight; use the 6-point rule
        case 4:
            detail::add_s21(q, 0.445948490915965, 0.223381589678011);
            detail::add_s21(q, 0.091576213509771, 0.109951743655322);
            break;
        case 5: {
            const double r15 = std::sqrt(15.0);
            detail::add_s3(q, 9.0 / 40.0);
            detail::add_s21(q, (6.0 + r15) / 21.0, (155.0 + r15) / 1200.0);
            detail::add_s21(q, (6.0 - r15) / 21.0, (155.0 - r15) / 1200.0);
            break;
        }
        case 6:
            detail::add_s21(q, 0.249286745170910, 0.116786275726379);
            detail::add_s21(q, 0.063089014491502, 0.050844906370207);
            detail::add_s111(q, 0.053145049844817, 0.310352451033784, 0.082851075618374);
            break;
        default:
            throw UnsupportedDegree("triangle_quadrature: degree " + std::to_string(degree) + " not in 1..6");
    }
    return q;
}

/// Gauss-Legendre rule on [0,1] exact up to `degree` in {1..9}.
inline QuadratureRule edge_quadrature(int degree) {
    if (degree < 1 || degree > 9)
        throw UnsupportedDegree("edge_quadrature: degree " + std::to_string(degree) + " not in 1..9");
    const int n = (degree + 2) / 2;
    std::vector<double> x, w;
    detail::gauss_legendre(n, x, w);
    QuadratureRule q;
    q.degree = degree;
    for (int i = n - 1; i >= 0; --i) {
        const double s = 0.5 * (x[i] + 1.0);
        q.points.push_back({0.0, s, 0.0});
        q.weights.push_back(0.5 * w[i]);
    }
    return q;
}

inline constexpr int default_triangle_degree = 4;
inline constexpr int default_edge_degree = 3;

/// Affine triangle: vertices p0, p1, p2 (counterclockwise).
struct TriangleGeometry {
    std::array<Vec2, 3> p;

    double area() const { return 0.5 * cross(p[1] - p[0], p[2] - p[0]); }
    Vec2 map(const std::array<double, 3>& bary) const {
        return bary[0] * p[0] + bary[1] * p[1] + bary[2] * p[2];
    }
    Vec2 centroid() const { return (1.0 / 3.0) * (p[0] + p[1] + p[2]); }
};

/// Linear Lagrange basis; function i equals 1 at vertex i.
class LocalBasisP1 {
public:
    explicit LocalBasisP1(const TriangleGeometry& geom) : geom_(geom) {
        const double twice_area = 2.0 * geom.area();
        if (!(twice_area > 0.0) || !std::isfinite(twice_area))
            throw DegenerateElement("p1_local_basis: degenerate triangle");
        for (int i = 0; i < 3; ++i) {
            const Vec2 opp = geom.p[(i + 2) % 3] - geom.p[(i + 1) % 3];
            // Inward normal of the opposite edge scaled by 1/height.
            grad_[i] = (1.0 / twice_area) * Vec2{-opp.y, opp.x};
        }
    }

    double value(int i, const Vec2& x) const { return 1.0 / 3.0 + dot(grad_[i], x - geom_.centroid()); }
    const Vec2& gradient(int i) const { return grad_[i]; }
    const TriangleGeometry& geometry() const { return geom_; }

private:
    TriangleGeometry geom_;
    std::array<Vec2, 3> grad_{};
};

/**
 * Lowest-order Raviart-Thomas basis, phi_i(x) = s_i (x - p_i) / (2|K|), associated with the
 * edge opposite vertex i. The sign s_i ties the function to the global edge orientation so the
 * normal flux through edge j along its global normal is delta_ij.
 */
class LocalBasisRT0 {
public:
    LocalBasisRT0(const TriangleGeometry& geom, const std::array<int, 3>& signs) : geom_(geom), signs_(signs) {
        const double area = geom.area();
        if (!(area > 0.0) || !std::isfinite(area)) throw DegenerateElement("rt0_local_basis: degenerate triangle");
        for (int i = 0; i < 3; ++i) {
            scale_[i] = signs[i] / (2.0 * area);
            div_[i] = signs[i] / area;
        }
    }

    Vec2 value(int i, const Vec2& x) const { return scale_[i] * (x - geom_.p[i]); }
    double divergence(int i) const { return div_[i]; }
    int sign(int i) const { return signs_[i]; }
    const TriangleGeometry& geometry() const { return geom_; }

private:
    TriangleGeometry geom_;
    std::array<int, 3> signs_;
    std::array<double, 3> scale_{};
    std::array<double, 3> div_{};
};

inline LocalBasisRT0 rt0_local_basis(const TriangleGeometry& geom, const std::array<int, 3>& signs) {
    return LocalBasisRT0(geom, signs);
}

inline LocalBasisP1 p1_local_basis(const TriangleGeometry& geom) { return LocalBasisP1(geom); }

}  // namespace fosll
