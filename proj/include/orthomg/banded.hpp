#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "orthomg/errors.hpp"

namespace orthomg {

/// Square band matrix with `lower` sub- and `upper` super-diagonals, stored
/// row-wise with room for the fill-in partial pivoting produces
/// (`lower` extra super-diagonals).
template <typename Real>
class BandMatrix {
public:
    BandMatrix(std::size_t n, std::size_t lower, std::size_t upper)
        : n_(n), lower_(lower), upper_(upper), width_(2 * lower + upper + 1),
          values_(n * width_, Real(0))
    {
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t lower() const noexcept { return lower_; }
    std::size_t upper() const noexcept { return upper_; }
    /// Highest column offset addressable after fill-in.
    std::size_t reach() const noexcept { return lower_ + upper_; }

    // Valid for -lower <= j - i <= lower + upper.
    Real& operator()(std::size_t i, std::size_t j) { return values_[i * width_ + j + lower_ - i]; }
    Real operator()(std::size_t i, std::size_t j) const
    {
        return values_[i * width_ + j + lower_ - i];
    }

private:
    std::size_t n_, lower_, upper_, width_;
    std::vector<Real> values_;
};

/// Partial-pivoting LU of a band matrix (the gbtrf scheme): row
/// interchanges are applied on the fly, so solves interleave the pivots with
/// the forward elimination. Solves take and return double vectors.
template <typename Real>
class BandedLuFactorization {
public:
    explicit BandedLuFactorization(BandMatrix<Real> m) : lu_(std::move(m))
    {
        const std::size_t n = lu_.size();
        const std::size_t kl = lu_.lower();
        const std::size_t reach = lu_.reach();
        pivots_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t last_row = std::min(n - 1, k + kl);
            const std::size_t last_col = std::min(n - 1, k + reach);
            std::size_t p = k;
            Real best = std::abs(lu_(k, k));
            for (std::size_t i = k + 1; i <= last_row; ++i) {
                if (std::abs(lu_(i, k)) > best) {
                    best = std::abs(lu_(i, k));
                    p = i;
                }
            }
            pivots_[k] = p;
            if (best == Real(0)) {
                throw SingularMatrix("banded lu: zero pivot at index " + std::to_string(k), k);
            }
            if (p != k) {
                for (std::size_t j = k; j <= last_col; ++j) {
                    std::swap(lu_(k, j), lu_(p, j));
                }
            }
            const Real inv = Real(1) / lu_(k, k);
            for (std::size_t i = k + 1; i <= last_row; ++i) {
                const Real l = lu_(i, k) * inv;
                lu_(i, k) = l;
                if (l == Real(0)) {
                    continue;
                }
                for (std::size_t j = k + 1; j <= last_col; ++j) {
                    lu_(i, j) -= l * lu_(k, j);
                }
            }
        }
    }

    std::size_t size() const noexcept { return lu_.size(); }

    void solve_in_place(std::span<double> b) const
    {
        const std::size_t n = size();
        if (b.size() != n) {
            throw InvalidInput("banded lu solve: rhs has " + std::to_string(b.size()) +
                               " entries, expected " + std::to_string(n));
        }
        const std::size_t kl = lu_.lower();
        const std::size_t reach = lu_.reach();
        std::vector<Real> y(b.begin(), b.end());
        for (std::size_t k = 0; k < n; ++k) {
            if (pivots_[k] != k) {
                std::swap(y[k], y[pivots_[k]]);
            }
            const std::size_t last_row = std::min(n - 1, k + kl);
            for (std::size_t i = k + 1; i <= last_row; ++i) {
                y[i] -= lu_(i, k) * y[k];
            }
        }
        for (std::size_t i = n; i-- > 0;) {
            const std::size_t last_col = std::min(n - 1, i + reach);
            Real sum = y[i];
            for (std::size_t j = i + 1; j <= last_col; ++j) {
                sum -= lu_(i, j) * y[j];
            }
            y[i] = sum / lu_(i, i);
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

private:
    BandMatrix<Real> lu_;
    std::vector<std::size_t> pivots_;
};

}  // namespace orthomg
