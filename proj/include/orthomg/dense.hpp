#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "orthomg/errors.hpp"

namespace orthomg {

enum class Precision { float64, float32 };

/// Row-major dense matrix.
template <typename Real>
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<Real> values)
        : rows_(rows), cols_(cols), values_(std::move(values))
    {
        if (values_.size() != rows_ * cols_) {
            throw InvalidInput("DenseMatrix: expected " + std::to_string(rows_ * cols_) +
                               " values, got " + std::to_string(values_.size()));
        }
    }

    static DenseMatrix identity(std::size_t n)
    {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = Real(1);
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    Real& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
    Real operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
    const Real* row(std::size_t i) const { return values_.data() + i * cols_; }
    Real* row(std::size_t i) { return values_.data() + i * cols_; }
    std::span<const Real> values() const noexcept { return values_; }
    std::span<Real> values() noexcept { return values_; }

    /// y := M x, accumulated in double.
    void multiply_into(std::span<const double> x, std::span<double> y) const
    {
        for (std::size_t i = 0; i < rows_; ++i) {
            double sum = 0.0;
            const Real* row = values_.data() + i * cols_;
            for (std::size_t j = 0; j < cols_; ++j) {
                sum += static_cast<double>(row[j]) * x[j];
            }
            y[i] = sum;
        }
    }

    template <typename Other>
    DenseMatrix<Other> cast() const
    {
        std::vector<Other> v(values_.begin(), values_.end());
        return DenseMatrix<Other>(rows_, cols_, std::move(v));
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Real> values_;
};

/// Partial-pivoting LU factorization stored packed (unit-lower L below the
/// diagonal, U on and above it). Solves accept and return double vectors;
/// only the triangular sweeps run in `Real`.
template <typename Real>
class LuFactorization {
public:
    explicit LuFactorization(DenseMatrix<Real> m) : lu_(std::move(m))
    {
        const std::size_t n = lu_.rows();
        if (lu_.cols() != n) {
            throw InvalidInput("lu_factor: matrix is " + std::to_string(n) + "x" +
                               std::to_string(lu_.cols()) + ", not square");
        }
        pivots_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            Real best = std::abs(lu_(k, k));
            for (std::size_t i = k + 1; i < n; ++i) {
                if (std::abs(lu_(i, k)) > best) {
                    best = std::abs(lu_(i, k));
                    p = i;
                }
            }
            pivots_[k] = p;
            if (best == Real(0)) {
                throw SingularMatrix("lu_factor: zero pivot at index " + std::to_string(k), k);
            }
            if (p != k) {
                for (std::size_t j = 0; j < n; ++j) {
                    std::swap(lu_(k, j), lu_(p, j));
                }
            }
            const Real inv = Real(1) / lu_(k, k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const Real l = lu_(i, k) * inv;
                lu_(i, k) = l;
                if (l == Real(0)) {
                    continue;
                }
                Real* row_i = lu_.row(i);
                const Real* row_k = lu_.row(k);
                for (std::size_t j = k + 1; j < n; ++j) {
                    row_i[j] -= l * row_k[j];
                }
            }
        }
    }

    std::size_t size() const noexcept { return lu_.rows(); }
    const DenseMatrix<Real>& factors() const noexcept { return lu_; }
    const std::vector<std::size_t>& pivots() const noexcept { return pivots_; }

    /// In-place solve: b is overwritten by the solution.
    void solve_in_place(std::span<double> b) const
    {
        const std::size_t n = size();
        if (b.size() != n) {
            throw InvalidInput("lu solve: rhs has " + std::to_string(b.size()) +
                               " entries, expected " + std::to_string(n));
        }
        std::vector<Real> y(b.begin(), b.end());
        for (std::size_t k = 0; k < n; ++k) {
            if (pivots_[k] != k) {
                std::swap(y[k], y[pivots_[k]]);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const Real* row = lu_.row(i);
            Real sum = y[i];
            for (std::size_t j = 0; j < i; ++j) {
                sum -= row[j] * y[j];
            }
            y[i] = sum;
        }
        for (std::size_t i = n; i-- > 0;) {
            const Real* row = lu_.row(i);
            Real sum = y[i];
            for (std::size_t j = i + 1; j < n; ++j) {
                sum -= row[j] * y[j];
            }
            y[i] = sum / row[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            b[i] = static_cast<double>(y[i]);
        }
    }

    std::vector<double> solve(std::span<const double> b) const
    {
        std::vector<double> x(b.begin(), b.end());
        solve_in_place(x);
        return x;
    }

    /// Explicit inverse, column by column.
    DenseMatrix<double> inverse() const
    {
        const std::size_t n = size();
        DenseMatrix<double> inv(n, n);
        std::vector<double> col(n);
        for (std::size_t j = 0; j < n; ++j) {
            std::fill(col.begin(), col.end(), 0.0);
            col[j] = 1.0;
            solve_in_place(col);
            for (std::size_t i = 0; i < n; ++i) {
                inv(i, j) = col[i];
            }
        }
        return inv;
    }

private:
    DenseMatrix<Real> lu_;
    std::vector<std::size_t> pivots_;
};

template <typename Real>
LuFactorization<Real> lu_factor(DenseMatrix<Real> m)
{
    return LuFactorization<Real>(std::move(m));
}

}  // namespace orthomg
