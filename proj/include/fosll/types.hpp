/**
 * @file types.hpp
 * @brief Small fixed-size vector/matrix types and the library's exception hierarchy.
 */
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fosll {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
    friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
    friend constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
/// z-component of the 2D cross product.
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

/// Row-major 2x2 matrix.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 diagonal(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }

    constexpr double determinant() const { return a11 * a22 - a12 * a21; }
    constexpr Vec2 operator*(const Vec2& v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }
    constexpr Mat2 transpose() const { return {a11, a21, a12, a22}; }

    Mat2 inverse() const {
        const double det = determinant();
        if (det == 0.0) throw std::domain_error("Mat2::inverse: singular matrix");
        return {a22 / det, -a12 / det, -a21 / det, a11 / det};
    }

    /// Eigenvalues of the symmetric part, ascending.
    std::array<double, 2> symmetric_eigenvalues() const {
        const double off = 0.5 * (a12 + a21);
        const double mean = 0.5 * (a11 + a22);
        const double rad = std::hypot(0.5 * (a11 - a22), off);
        return {mean - rad, mean + rad};
    }

    friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

// Error kinds. Invalid arguments use std::invalid_argument directly.

struct DegenerateElement : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedDegree : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InconsistentExactSolution : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidProblem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularSystem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace fosll
