/**
 * @file linalg.hpp
 * @brief Compressed-row sparse matrices, Jacobi-preconditioned conjugate gradients, and small
 * dense helpers (Cholesky) used as oracles.
 */
#pragma once

#include "fosll/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace fosll {

struct Triplet {
    int row;
    int col;
    double value;
};

/// Square CSR matrix. Entries within a row are sorted by column and unique.
class SparseMatrix {
public:
    SparseMatrix() = default;

    /// Duplicate (row, col) entries are summed.
    static SparseMatrix from_triplets(int n, std::vector<Triplet> triplets) {
        std::sort(triplets.begin(), triplets.end(),
                  [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
        SparseMatrix m;
        m.n_ = n;
        m.row_ptr_.assign(n + 1, 0);
        for (std::size_t k = 0; k < triplets.size();) {
            const Triplet& t = triplets[k];
            if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
                throw DimensionMismatch("SparseMatrix::from_triplets: index out of range");
            double sum = 0.0;
            std::size_t j = k;
            for (; j < triplets.size() && triplets[j].row == t.row && triplets[j].col == t.col; ++j) sum += triplets[j].value;
            m.cols_.push_back(t.col);
            m.values_.push_back(sum);
            ++m.row_ptr_[t.row + 1];
            k = j;
        }
        std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
        return m;
    }

    int rows() const { return n_; }
    std::size_t nonzeros() const { return values_.size(); }

    void multiply(std::span<const double> x, std::span<double> y) const {
        for (int i = 0; i < n_; ++i) {
            double s = 0.0;
            for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[cols_[k]];
            y[i] = s;
        }
    }

    std::vector<double> operator*(std::span<const double> x) const {
        std::vector<double> y(n_);
        multiply(x, y);
        return y;
    }

    double at(int i, int j) const {
        const auto first = cols_.begin() + row_ptr_[i], last = cols_.begin() + row_ptr_[i + 1];
        const auto it = std::lower_bound(first, last, j);
        return (it != last && *it == j) ? values_[it - cols_.begin()] : 0.0;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(n_, 0.0);
        for (int i = 0; i < n_; ++i) d[i] = at(i, i);
        return d;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Largest |A_ij - A_ji| over stored entries.
    double asymmetry() const {
        double worst = 0.0;
        for (int i = 0; i < n_; ++i)
            for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                worst = std::max(worst, std::abs(values_[k] - at(cols_[k], i)));
        return worst;
    }

    template <typename F>
    void for_each(F&& f) const {
        for (int i = 0; i < n_; ++i)
            for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) f(i, cols_[k], values_[k]);
    }

    std::vector<double> to_dense() const {
        std::vector<double> d(static_cast<std::size_t>(n_) * n_, 0.0);
        for_each([&](int i, int j, double v) { d[static_cast<std::size_t>(i) * n_ + j] = v; });
        return d;
    }

    /// MatrixMarket coordinate format (general storage, 1-based indices).
    void write_matrix_market(std::ostream& os) const {
        const auto old_precision = os.precision(17);
        os << "%%MatrixMarket matrix coordinate real general\n";
        os << n_ << ' ' << n_ << ' ' << nonzeros() << '\n';
        for_each([&](int i, int j, double v) { os << i + 1 << ' ' << j + 1 << ' ' << v << '\n'; });
        os.precision(old_precision);
    }

private:
    int n_ = 0;
    std::vector<int> row_ptr_{0};
    std::vector<int> cols_;
    std::vector<double> values_;
};

struct SolveOptions {
    double rel_tol = 1e-10;
    /// Non-positive means 10 x dimension.
    int max_iter = 0;
    bool record_energy = false;
};

struct SolveReport {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
    /// Energy functional 0.5 x'Ax - b'x after each iteration (when requested); non-increasing
    /// for an SPD operator.
    std::vector<double> energy;
};

struct SolveResult {
    std::vector<double> x;
    SolveReport report;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/**
 * Conjugate gradients with diagonal (Jacobi) preconditioning. Stops once the true residual
 * satisfies ||b - A x|| <= rel_tol ||b||. A non-converged solve returns the last iterate with
 * `converged == false`.
 */
inline SolveResult solve_spd(const SparseMatrix& A, std::span<const double> rhs, const SolveOptions& opts = {},
                             std::span<const double> initial_guess = {}) {
    const int n = A.rows();
    if (static_cast<int>(rhs.size()) != n) throw DimensionMismatch("solve_spd: rhs size mismatch");
    if (!(opts.rel_tol > 0.0 && opts.rel_tol < 1.0)) throw std::invalid_argument("solve_spd: rel_tol must lie in (0,1)");
    const int max_iter = opts.max_iter > 0 ? opts.max_iter : std::max(10 * n, 10);

    SolveResult result;
    result.x.assign(n, 0.0);
    const double bnorm = norm2(rhs);
    if (bnorm == 0.0) {
        result.report.converged = true;
        return result;
    }
    if (!initial_guess.empty()) {
        if (static_cast<int>(initial_guess.size()) != n) throw DimensionMismatch("solve_spd: initial guess size mismatch");
        std::copy(initial_guess.begin(), initial_guess.end(), result.x.begin());
    }

    std::vector<double> inv_diag = A.diagonal();
    for (double& d : inv_diag) {
        if (!(d > 0.0)) throw SingularSystem("solve_spd: nonpositive diagonal entry");
        d = 1.0 / d;
    }

    auto& x = result.x;
    std::vector<double> r(n), z(n), p(n), q(n);
    A.multiply(x, q);
    for (int i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
    auto energy = [&] {
        // 0.5 x'Ax - b'x = -0.5 (x'r + x'b) with r = b - Ax.
        return -0.5 * (dot(x, r) + dot(x, rhs));
    };

    double rnorm = norm2(r);
    auto& rep = result.report;
    if (opts.record_energy) rep.energy.push_back(energy());
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    int it = 0;
    while (rnorm > opts.rel_tol * bnorm && it < max_iter) {
        A.multiply(p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) throw SingularSystem("solve_spd: operator is not positive definite");
        const double alpha = rz / pq;
        for (int i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        ++it;
        // Refresh the recurrence residual periodically to keep it close to b - Ax.
        if (it % 50 == 0) {
            A.multiply(x, q);
            for (int i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
        }
        rnorm = norm2(r);
        if (opts.record_energy) rep.energy.push_back(energy());
        for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        if (rnorm <= opts.rel_tol * bnorm) {
            // Confirm with the true residual before declaring convergence.
            A.multiply(x, q);
            for (int i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
            rnorm = norm2(r);
        }
    }
    rep.iterations = it;
    rep.relative_residual = rnorm / bnorm;
    rep.converged = rnorm <= opts.rel_tol * bnorm;
    return result;
}

/// Dense row-major Cholesky factor L (A = L L^T); nullopt if A is not numerically SPD.
inline std::optional<std::vector<double>> dense_cholesky(std::span<const double> a, int n) {
    std::vector<double> L(static_cast<std::size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j) {
        double d = a[static_cast<std::size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) d -= L[j * n + k] * L[j * n + k];
        if (!(d > 0.0)) return std::nullopt;
        const double ljj = std::sqrt(d);
        L[static_cast<std::size_t>(j) * n + j] = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k) s -= L[static_cast<std::size_t>(i) * n + k] * L[static_cast<std::size_t>(j) * n + k];
            L[static_cast<std::size_t>(i) * n + j] = s / ljj;
        }
    }
    return L;
}

/// Solves L L^T x = b given the factor from dense_cholesky.
inline std::vector<double> cholesky_solve(std::span<const double> L, int n, std::span<const double> b) {
    std::vector<double> y(b.begin(), b.end());
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < i; ++k) y[i] -= L[static_cast<std::size_t>(i) * n + k] * y[k];
        y[i] /= L[static_cast<std::size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        for (int k = i + 1; k < n; ++k) y[i] -= L[static_cast<std::size_t>(k) * n + i] * y[k];
        y[i] /= L[static_cast<std::size_t>(i) * n + i];
    }
    return y;
}

}  // namespace fosll
