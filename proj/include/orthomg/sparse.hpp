#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace orthomg {

using Vector = std::vector<double>;

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row; construct through from_triplets() unless the arrays are
/// already canonical.
struct CsrMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_offsets{0};
    std::vector<std::size_t> col_indices;
    std::vector<double> values;

    struct Triplet {
        std::size_t row;
        std::size_t col;
        double value;
    };

    /// Builds a canonical matrix; duplicate (row, col) entries are summed.
    static CsrMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                   std::vector<Triplet> triplets);
    static CsrMatrix identity(std::size_t n);

    std::size_t nnz() const noexcept { return values.size(); }

    /// Entry lookup by binary search; zero if not stored.
    double at(std::size_t row, std::size_t col) const;

    /// Throws InvalidInput if the CSR invariants do not hold.
    void validate() const;

    CsrMatrix transpose() const;
    CsrMatrix scaled(double factor) const;
    double max_abs() const;
    /// Max |A(i,j) - A(j,i)| over the union of both patterns.
    double max_asymmetry() const;
    /// Row-major dense copy, intended for oracles and small blocks.
    std::vector<double> to_dense() const;

    bool operator==(const CsrMatrix&) const = default;
};

Vector spmv(const CsrMatrix& a, std::span<const double> x);
/// y := A x without allocating; y must have n_rows entries.
void spmv_into(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
/// y := b - A x.
void residual_into(const CsrMatrix& a, std::span<const double> x,
                   std::span<const double> b, std::span<double> y);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
bool all_finite(std::span<const double> x);

/// Sparse product A·B. Entries whose magnitude falls below 1e-300 are dropped.
CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b);
/// R·A·P, used both for Galerkin coarse operators and subdomain matrices.
CsrMatrix triple_product(const CsrMatrix& r, const CsrMatrix& a, const CsrMatrix& p);

// MatrixMarket coordinate format, real general, 1-based indices.
void write_matrix_market(std::ostream& out, const CsrMatrix& a);
void write_matrix_market(const std::string& path, const CsrMatrix& a);
CsrMatrix read_matrix_market(std::istream& in);
CsrMatrix read_matrix_market(const std::string& path);

}  // namespace orthomg
