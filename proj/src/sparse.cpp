#include "orthomg/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "orthomg/errors.hpp"

namespace orthomg {

namespace {

constexpr double kDropTolerance = 1e-300;

void require_same_length(std::size_t a, std::size_t b, const char* what)
{
    if (a != b) {
        throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(a) +
                           " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

CsrMatrix CsrMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                   std::vector<Triplet> triplets)
{
    for (const auto& t : triplets) {
        if (t.row >= n_rows || t.col >= n_cols) {
            throw InvalidInput("triplet (" + std::to_string(t.row) + ", " +
                               std::to_string(t.col) + ") outside " +
                               std::to_string(n_rows) + "x" + std::to_string(n_cols));
        }
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    CsrMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_offsets.assign(n_rows + 1, 0);
    m.col_indices.reserve(triplets.size());
    m.values.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size();) {
        const auto row = triplets[k].row;
        const auto col = triplets[k].col;
        double sum = 0.0;
        for (; k < triplets.size() && triplets[k].row == row && triplets[k].col == col; ++k) {
            sum += triplets[k].value;
        }
        m.col_indices.push_back(col);
        m.values.push_back(sum);
        ++m.row_offsets[row + 1];
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
        m.row_offsets[i + 1] += m.row_offsets[i];
    }
    return m;
}

CsrMatrix CsrMatrix::identity(std::size_t n)
{
    CsrMatrix m;
    m.n_rows = m.n_cols = n;
    m.row_offsets.resize(n + 1);
    m.col_indices.resize(n);
    m.values.assign(n, 1.0);
    for (std::size_t i = 0; i <= n; ++i) {
        m.row_offsets[i] = i;
    }
    for (std::size_t i = 0; i < n; ++i) {
        m.col_indices[i] = i;
    }
    return m;
}

double CsrMatrix::at(std::size_t row, std::size_t col) const
{
    const auto first = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[row]);
    const auto last = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[row + 1]);
    const auto it = std::lower_bound(first, last, col);
    if (it == last || *it != col) {
        return 0.0;
    }
    return values[static_cast<std::size_t>(it - col_indices.begin())];
}

void CsrMatrix::validate() const
{
    if (row_offsets.size() != n_rows + 1 || row_offsets.front() != 0) {
        throw InvalidInput("CSR: row_offsets must have n_rows+1 entries starting at 0");
    }
    if (row_offsets.back() != values.size() || values.size() != col_indices.size()) {
        throw InvalidInput("CSR: row_offsets[n_rows] must equal nnz");
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
        if (row_offsets[i] > row_offsets[i + 1]) {
            throw InvalidInput("CSR: row_offsets decreasing at row " + std::to_string(i));
        }
        for (auto k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
            if (col_indices[k] >= n_cols) {
                throw InvalidInput("CSR: column index out of range in row " + std::to_string(i));
            }
            if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1]) {
                throw InvalidInput("CSR: columns not strictly increasing in row " +
                                   std::to_string(i));
            }
        }
    }
}

CsrMatrix CsrMatrix::transpose() const
{
    CsrMatrix t;
    t.n_rows = n_cols;
    t.n_cols = n_rows;
    t.row_offsets.assign(n_cols + 1, 0);
    t.col_indices.resize(nnz());
    t.values.resize(nnz());
    for (auto c : col_indices) {
        ++t.row_offsets[c + 1];
    }
    for (std::size_t i = 0; i < n_cols; ++i) {
        t.row_offsets[i + 1] += t.row_offsets[i];
    }
    std::vector<std::size_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
    // Rows are visited in order, so each transposed row receives increasing columns.
    for (std::size_t i = 0; i < n_rows; ++i) {
        for (auto k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
            const auto dst = cursor[col_indices[k]]++;
            t.col_indices[dst] = i;
            t.values[dst] = values[k];
        }
    }
    return t;
}

CsrMatrix CsrMatrix::scaled(double factor) const
{
    CsrMatrix s = *this;
    for (auto& v : s.values) {
        v *= factor;
    }
    return s;
}

double CsrMatrix::max_abs() const
{
    double m = 0.0;
    for (double v : values) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

double CsrMatrix::max_asymmetry() const
{
    if (n_rows != n_cols) {
        throw InvalidInput("max_asymmetry: matrix is not square");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < n_rows; ++i) {
        for (auto k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
            m = std::max(m, std::abs(values[k] - at(col_indices[k], i)));
        }
    }
    return m;
}

std::vector<double> CsrMatrix::to_dense() const
{
    std::vector<double> d(n_rows * n_cols, 0.0);
    for (std::size_t i = 0; i < n_rows; ++i) {
        for (auto k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
            d[i * n_cols + col_indices[k]] = values[k];
        }
    }
    return d;
}

void spmv_into(const CsrMatrix& a, std::span<const double> x, std::span<double> y)
{
    require_same_length(x.size(), a.n_cols, "spmv");
    require_same_length(y.size(), a.n_rows, "spmv output");
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        double sum = 0.0;
        for (auto k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            sum += a.values[k] * x[a.col_indices[k]];
        }
        y[i] = sum;
    }
}

Vector spmv(const CsrMatrix& a, std::span<const double> x)
{
    Vector y(a.n_rows);
    spmv_into(a, x, y);
    return y;
}

void residual_into(const CsrMatrix& a, std::span<const double> x,
                   std::span<const double> b, std::span<double> y)
{
    require_same_length(b.size(), a.n_rows, "residual");
    spmv_into(a, x, y);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = b[i] - y[i];
    }
}

double dot(std::span<const double> x, std::span<const double> y)
{
    require_same_length(x.size(), y.size(), "dot");
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum += x[i] * y[i];
    }
    return sum;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
    require_same_length(x.size(), y.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

bool all_finite(std::span<const double> x)
{
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b)
{
    if (a.n_cols != b.n_rows) {
        throw InvalidInput("multiply: inner dimensions differ (" + std::to_string(a.n_cols) +
                           " vs " + std::to_string(b.n_rows) + ")");
    }
    CsrMatrix c;
    c.n_rows = a.n_rows;
    c.n_cols = b.n_cols;
    c.row_offsets.assign(a.n_rows + 1, 0);

    // Gustavson row-by-row accumulation with a dense marker array.
    constexpr auto kUnset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> marker(b.n_cols, kUnset);
    std::vector<double> accum(b.n_cols, 0.0);
    std::vector<std::size_t> row_cols;
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        row_cols.clear();
        for (auto ka = a.row_offsets[i]; ka < a.row_offsets[i + 1]; ++ka) {
            const auto j = a.col_indices[ka];
            const double av = a.values[ka];
            for (auto kb = b.row_offsets[j]; kb < b.row_offsets[j + 1]; ++kb) {
                const auto col = b.col_indices[kb];
                if (marker[col] != i) {
                    marker[col] = i;
                    accum[col] = 0.0;
                    row_cols.push_back(col);
                }
                accum[col] += av * b.values[kb];
            }
        }
        std::sort(row_cols.begin(), row_cols.end());
        for (auto col : row_cols) {
            if (std::abs(accum[col]) >= kDropTolerance) {
                c.col_indices.push_back(col);
                c.values.push_back(accum[col]);
            }
        }
        c.row_offsets[i + 1] = c.values.size();
    }
    return c;
}

CsrMatrix triple_product(const CsrMatrix& r, const CsrMatrix& a, const CsrMatrix& p)
{
    if (r.n_cols != a.n_rows || a.n_cols != p.n_rows) {
        throw InvalidInput("triple_product: dimension mismatch (R " + std::to_string(r.n_rows) +
                           "x" + std::to_string(r.n_cols) + ", A " + std::to_string(a.n_rows) +
                           "x" + std::to_string(a.n_cols) + ", P " + std::to_string(p.n_rows) +
                           "x" + std::to_string(p.n_cols) + ")");
    }
    return multiply(multiply(r, a), p);
}

void write_matrix_market(std::ostream& out, const CsrMatrix& a)
{
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.n_rows << ' ' << a.n_cols << ' ' << a.nnz() << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        for (auto k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            out << i + 1 << ' ' << a.col_indices[k] + 1 << ' ' << a.values[k] << '\n';
        }
    }
}

void write_matrix_market(const std::string& path, const CsrMatrix& a)
{
    std::ofstream out(path);
    if (!out) {
        throw InvalidInput("cannot open " + path + " for writing");
    }
    write_matrix_market(out, a);
}

CsrMatrix read_matrix_market(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
        throw InvalidInput("MatrixMarket: missing banner");
    }
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "coordinate" || field != "real") {
        throw InvalidInput("MatrixMarket: only 'matrix coordinate real' is supported");
    }
    const bool symmetric = symmetry == "symmetric";
    if (!symmetric && symmetry != "general") {
        throw InvalidInput("MatrixMarket: unsupported symmetry '" + symmetry + "'");
    }
    while (std::getline(in, line) && (line.empty() || line[0] == '%')) {
    }
    std::istringstream sizes(line);
    std::size_t rows = 0, cols = 0, entries = 0;
    if (!(sizes >> rows >> cols >> entries)) {
        throw InvalidInput("MatrixMarket: malformed size line");
    }
    std::vector<CsrMatrix::Triplet> triplets;
    triplets.reserve(symmetric ? 2 * entries : entries);
    for (std::size_t k = 0; k < entries; ++k) {
        std::size_t i = 0, j = 0;
        double v = 0.0;
        if (!(in >> i >> j >> v) || i == 0 || j == 0) {
            throw InvalidInput("MatrixMarket: malformed entry " + std::to_string(k + 1));
        }
        triplets.push_back({i - 1, j - 1, v});
        if (symmetric && i != j) {
            triplets.push_back({j - 1, i - 1, v});
        }
    }
    return CsrMatrix::from_triplets(rows, cols, std::move(triplets));
}

CsrMatrix read_matrix_market(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open " + path);
    }
    return read_matrix_market(in);
}

}  // namespace orthomg
