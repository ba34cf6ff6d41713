#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "orthomg/sparse.hpp"

namespace orthomg {

/// Piecewise-coefficient Poisson benchmark on [-L, L]^d with a spherical
/// inclusion of radius radius_factor * L centred at the origin.
struct ProblemSpec {
    int dimension = 2;
    double half_width = 1.0;
    std::size_t cells_per_axis = 64;
    double radius_factor = 0.7;
    double k_inner = 1.0;
    double k_outer = 1000.0;
    double rhs_constant = 1.0;

    void validate() const;
    std::size_t n_cells() const;
    double spacing() const { return 2.0 * half_width / static_cast<double>(cells_per_axis); }
};

/// Structured grid geometry: `dimension` axes with `cells_per_axis` cells
/// each, lexicographic ordering with the first axis fastest.
struct GridShape {
    int dimension = 2;
    std::size_t cells_per_axis = 0;

    std::size_t n_cells() const;
};

/// Diffusion coefficient at x. Points with |x| == r belong to the outer phase.
double coefficient_at(const ProblemSpec& spec, std::span<const double> x);

struct LinearSystem {
    CsrMatrix matrix;
    Vector rhs;
};

/// Cell-centred finite volumes with harmonic face coefficients and Dirichlet
/// ghost elimination. The result is symmetric positive definite.
LinearSystem assemble_poisson(const ProblemSpec& spec);

/// Piecewise-constant injection from a grid with fine_cells_per_axis / 2
/// cells per axis onto its 2:1 refinement.
CsrMatrix build_prolongation(std::size_t fine_cells_per_axis, int dimension);
/// (1 / 2^d) P^T: averages the 2^d children of each coarse cell.
CsrMatrix build_restriction(const CsrMatrix& prolongation, int dimension);

struct GridLevel {
    std::size_t index = 0;
    CsrMatrix matrix;
    std::optional<CsrMatrix> restriction;   // this level -> next coarser
    std::optional<CsrMatrix> prolongation;  // next coarser -> this level
    GridShape shape;
    double spacing = 0.0;

    std::size_t n_dofs() const { return matrix.n_rows; }
};

struct GridHierarchy {
    std::vector<GridLevel> levels;
    std::size_t min_coarse_dofs = 0;

    std::size_t size() const { return levels.size(); }
    std::size_t coarsest_index() const { return levels.size() - 1; }
    bool is_coarsest(std::size_t level) const { return level + 1 == levels.size(); }
    const GridLevel& operator[](std::size_t level) const { return levels[level]; }
};

inline constexpr std::size_t kDefaultMinCoarseDofs = 1024;

/// Galerkin hierarchy over an already assembled fine operator. Coarsening
/// continues while the current level has more than min_coarse_dofs unknowns
/// and can still be halved.
GridHierarchy build_hierarchy(CsrMatrix fine_matrix, GridShape shape, double fine_spacing,
                              std::size_t min_coarse_dofs);
GridHierarchy build_hierarchy(const ProblemSpec& spec, std::size_t min_coarse_dofs);

}  // namespace orthomg
