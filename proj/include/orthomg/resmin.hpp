#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "orthomg/sparse.hpp"

namespace orthomg {

/// Orthonormal residual basis W with its search directions Z (W = A Z) and
/// the projections alpha of the anchor residual onto W. Every accepted
/// direction yields the iterate x0 + Z alpha that minimizes the residual over
/// span(Z); the residual norm therefore never grows.
class SearchSpace {
public:
    static constexpr std::size_t kDefaultMaxColumns = 200;
    static constexpr double kBreakdownTolerance = 1e-13;
    /// Second Gram-Schmidt pass when orthogonalization removed more than 90%.
    static constexpr double kReorthogonalizeRatio = 0.1;

    SearchSpace(Vector x0, Vector r0, std::size_t max_columns = kDefaultMaxColumns);

    /// Adds direction z. Returns false on breakdown (z numerically inside
    /// span(Z), or the recomputed residual would grow); x and r are then left
    /// untouched. When the basis is full, the space first restarts anchored at
    /// the current iterate.
    bool update(const CsrMatrix& a, std::span<const double> z);

    /// Clears W, Z and alpha and re-anchors at (x, r).
    void reset(Vector x, Vector r);

    std::size_t size() const noexcept { return basis_.size(); }
    std::size_t dimension() const noexcept { return x0_.size(); }
    std::size_t breakdown_count() const noexcept { return breakdowns_; }
    std::size_t restart_count() const noexcept { return restarts_; }

    const Vector& solution() const noexcept { return x_; }
    const Vector& residual() const noexcept { return r_; }
    double residual_norm() const noexcept { return r_norm_; }
    const Vector& anchor_solution() const noexcept { return x0_; }
    const Vector& anchor_residual() const noexcept { return r0_; }
    const std::vector<Vector>& basis() const noexcept { return basis_; }
    const std::vector<Vector>& directions() const noexcept { return directions_; }
    const Vector& coefficients() const noexcept { return alpha_; }

private:
    void orthogonalize(Vector& w, Vector& z) const;

    Vector x0_, r0_;
    Vector x_, r_;
    double r_norm_ = 0.0;
    std::vector<Vector> basis_;
    std::vector<Vector> directions_;
    Vector alpha_;
    std::size_t max_columns_;
    std::size_t breakdowns_ = 0;
    std::size_t restarts_ = 0;
};

}  // namespace orthomg
