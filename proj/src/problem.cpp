#include "orthomg/problem.hpp"

#include <array>
#include <cmath>
#include <string>

#include "orthomg/errors.hpp"

namespace orthomg {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t int_pow(std::size_t base, int exp)
{
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) {
        r *= base;
    }
    return r;
}

void require_dimension(int d, const char* where)
{
    if (d < 1 || d > 3) {
        throw InvalidInput(std::string(where) + ": dimension must be 1, 2 or 3, got " +
                           std::to_string(d));
    }
}

// Per-axis coordinates of a lexicographic cell index.
std::array<std::size_t, 3> unravel(std::size_t cell, std::size_t n, int d)
{
    std::array<std::size_t, 3> c{0, 0, 0};
    for (int a = 0; a < d; ++a) {
        c[a] = cell % n;
        cell /= n;
    }
    return c;
}

std::size_t ravel(const std::array<std::size_t, 3>& c, std::size_t n, int d)
{
    std::size_t cell = 0;
    for (int a = d - 1; a >= 0; --a) {
        cell = cell * n + c[a];
    }
    return cell;
}

}  // namespace

void ProblemSpec::validate() const
{
    if (dimension != 2 && dimension != 3) {
        throw InvalidInput("problem.dimension must be 2 or 3, got " + std::to_string(dimension));
    }
    if (!(half_width > 0.0) || !std::isfinite(half_width)) {
        throw InvalidInput("problem.half_width must be positive");
    }
    if (cells_per_axis < 4 || !is_power_of_two(cells_per_axis)) {
        throw InvalidInput("problem.cells_per_axis must be a power of two >= 4, got " +
                           std::to_string(cells_per_axis));
    }
    if (!(radius_factor > 0.0 && radius_factor < 1.0)) {
        throw InvalidInput("problem.radius_factor must lie in (0, 1)");
    }
    if (!(k_inner > 0.0) || !std::isfinite(k_inner)) {
        throw InvalidInput("problem.k_inner must be positive");
    }
    if (!(k_outer > 0.0) || !std::isfinite(k_outer)) {
        throw InvalidInput("problem.k_outer must be positive");
    }
    if (!std::isfinite(rhs_constant)) {
        throw InvalidInput("problem.rhs_constant must be finite");
    }
}

std::size_t ProblemSpec::n_cells() const { return int_pow(cells_per_axis, dimension); }

std::size_t GridShape::n_cells() const { return int_pow(cells_per_axis, dimension); }

double coefficient_at(const ProblemSpec& spec, std::span<const double> x)
{
    double r2 = 0.0;
    for (double xi : x) {
        r2 += xi * xi;
    }
    const double radius = spec.radius_factor * spec.half_width;
    return std::sqrt(r2) < radius ? spec.k_inner : spec.k_outer;
}

LinearSystem assemble_poisson(const ProblemSpec& spec)
{
    spec.validate();
    const int d = spec.dimension;
    const std::size_t n = spec.cells_per_axis;
    const std::size_t cells = spec.n_cells();
    const double h = spec.spacing();
    const double inv_h2 = 1.0 / (h * h);

    std::vector<double> k(cells);
    std::array<double, 3> centre{};
    for (std::size_t c = 0; c < cells; ++c) {
        const auto ijk = unravel(c, n, d);
        for (int a = 0; a < d; ++a) {
            centre[a] = -spec.half_width + (static_cast<double>(ijk[a]) + 0.5) * h;
        }
        k[c] = coefficient_at(spec, std::span<const double>(centre.data(), d));
    }

    std::vector<CsrMatrix::Triplet> triplets;
    triplets.reserve(cells * (2 * d + 1));
    for (std::size_t c = 0; c < cells; ++c) {
        const auto ijk = unravel(c, n, d);
        double diag = 0.0;
        for (int a = 0; a < d; ++a) {
            for (int side : {-1, 1}) {
                const bool boundary = (side < 0 && ijk[a] == 0) || (side > 0 && ijk[a] + 1 == n);
                if (boundary) {
                    // Ghost value -u_c places the zero at the face: flux k (u_c - 0) / (h/2).
                    diag += 2.0 * k[c] * inv_h2;
                    continue;
                }
                auto nb = ijk;
                nb[a] = side < 0 ? nb[a] - 1 : nb[a] + 1;
                const std::size_t other = ravel(nb, n, d);
                const double face = 2.0 * k[c] * k[other] / (k[c] + k[other]);
                diag += face * inv_h2;
                triplets.push_back({c, other, -face * inv_h2});
            }
        }
        triplets.push_back({c, c, diag});
    }

    LinearSystem sys;
    sys.matrix = CsrMatrix::from_triplets(cells, cells, std::move(triplets));
    sys.rhs.assign(cells, spec.rhs_constant);
    return sys;
}

CsrMatrix build_prolongation(std::size_t fine_cells_per_axis, int dimension)
{
    require_dimension(dimension, "build_prolongation");
    if (fine_cells_per_axis < 2 || fine_cells_per_axis % 2 != 0) {
        throw InvalidInput("build_prolongation: fine cell count per axis must be even, got " +
                           std::to_string(fine_cells_per_axis));
    }
    const std::size_t nf = fine_cells_per_axis;
    const std::size_t nc = nf / 2;
    const std::size_t fine = int_pow(nf, dimension);
    const std::size_t coarse = int_pow(nc, dimension);

    CsrMatrix p;
    p.n_rows = fine;
    p.n_cols = coarse;
    p.row_offsets.resize(fine + 1);
    p.col_indices.resize(fine);
    p.values.assign(fine, 1.0);
    for (std::size_t f = 0; f < fine; ++f) {
        auto ijk = unravel(f, nf, dimension);
        for (int a = 0; a < dimension; ++a) {
            ijk[a] /= 2;
        }
        p.row_offsets[f] = f;
        p.col_indices[f] = ravel(ijk, nc, dimension);
    }
    p.row_offsets[fine] = fine;
    return p;
}

CsrMatrix build_restriction(const CsrMatrix& prolongation, int dimension)
{
    require_dimension(dimension, "build_restriction");
    return prolongation.transpose().scaled(1.0 / static_cast<double>(int_pow(2, dimension)));
}

GridHierarchy build_hierarchy(CsrMatrix fine_matrix, GridShape shape, double fine_spacing,
                              std::size_t min_coarse_dofs)
{
    require_dimension(shape.dimension, "build_hierarchy");
    if (min_coarse_dofs < 4) {
        throw InvalidInput("build_hierarchy: min_coarse_dofs must be >= 4");
    }
    if (fine_matrix.n_rows != shape.n_cells() || fine_matrix.n_cols != shape.n_cells()) {
        throw InvalidInput("build_hierarchy: matrix size does not match grid shape");
    }

    GridHierarchy h;
    h.min_coarse_dofs = min_coarse_dofs;
    GridLevel level;
    level.index = 0;
    level.matrix = std::move(fine_matrix);
    level.shape = shape;
    level.spacing = fine_spacing;
    h.levels.push_back(std::move(level));

    for (;;) {
        GridLevel& cur = h.levels.back();
        const std::size_t n = cur.shape.cells_per_axis;
        if (cur.n_dofs() <= min_coarse_dofs || n < 4 || n % 2 != 0) {
            break;
        }
        CsrMatrix p = build_prolongation(n, cur.shape.dimension);
        CsrMatrix r = build_restriction(p, cur.shape.dimension);

        GridLevel next;
        next.index = cur.index + 1;
        next.matrix = triple_product(r, cur.matrix, p);
        next.shape = {cur.shape.dimension, n / 2};
        next.spacing = 2.0 * cur.spacing;
        cur.restriction = std::move(r);
        cur.prolongation = std::move(p);
        h.levels.push_back(std::move(next));
    }
    return h;
}

GridHierarchy build_hierarchy(const ProblemSpec& spec, std::size_t min_coarse_dofs)
{
    LinearSystem sys = assemble_poisson(spec);
    return build_hierarchy(std::move(sys.matrix), {spec.dimension, spec.cells_per_axis},
                           spec.spacing(), min_coarse_dofs);
}

}  // namespace orthomg
