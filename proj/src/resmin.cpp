#include "orthomg/resmin.hpp"

#include <string>

#include "orthomg/errors.hpp"

namespace orthomg {

SearchSpace::SearchSpace(Vector x0, Vector r0, std::size_t max_columns)
    : max_columns_(max_columns)
{
    if (max_columns_ == 0) {
        throw InvalidInput("SearchSpace: max_columns must be positive");
    }
    reset(std::move(x0), std::move(r0));
}

void SearchSpace::reset(Vector x, Vector r)
{
    if (x.size() != r.size()) {
        throw InvalidInput("SearchSpace: solution has " + std::to_string(x.size()) +
                           " entries but residual has " + std::to_string(r.size()));
    }
    x0_ = std::move(x);
    r0_ = std::move(r);
    x_ = x0_;
    r_ = r0_;
    r_norm_ = norm2(r_);
    basis_.clear();
    directions_.clear();
    alpha_.clear();
}

void SearchSpace::orthogonalize(Vector& w, Vector& z) const
{
    // Modified Gram-Schmidt; z receives the same combination so that A z = w.
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        const double beta = dot(basis_[i], w);
        axpy(-beta, basis_[i], w);
        axpy(-beta, directions_[i], z);
    }
}

bool SearchSpace::update(const CsrMatrix& a, std::span<const double> z_in)
{
    if (z_in.size() != dimension()) {
        throw InvalidInput("SearchSpace::update: direction has " + std::to_string(z_in.size()) +
                           " entries, expected " + std::to_string(dimension()));
    }
    if (!all_finite(z_in)) {
        throw InvalidInput("SearchSpace::update: direction contains NaN or Inf");
    }
    if (r_norm_ == 0.0) {
        // Nothing left to minimize.
        ++breakdowns_;
        return false;
    }
    if (basis_.size() == max_columns_) {
        ++restarts_;
        reset(x_, r_);
    }

    Vector z(z_in.begin(), z_in.end());
    Vector w = spmv(a, z);
    const double initial = norm2(w);
    orthogonalize(w, z);
    double remaining = norm2(w);
    if (remaining < kReorthogonalizeRatio * initial) {
        orthogonalize(w, z);
        remaining = norm2(w);
    }
    if (initial == 0.0 || remaining <= kBreakdownTolerance * initial) {
        ++breakdowns_;
        return false;
    }

    const double gamma = 1.0 / remaining;
    for (auto& v : w) {
        v *= gamma;
    }
    for (auto& v : z) {
        v *= gamma;
    }
    alpha_.push_back(dot(w, r0_));
    basis_.push_back(std::move(w));
    directions_.push_back(std::move(z));

    // Recompute from the anchor: x = x0 + Z alpha, r = r0 - W alpha.
    Vector x = x0_;
    Vector r = r0_;
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
        axpy(alpha_[i], directions_[i], x);
        axpy(-alpha_[i], basis_[i], r);
    }
    const double r_norm = norm2(r);
    if (r_norm > r_norm_) {
        // Exact arithmetic cannot get here; near convergence rounding in the
        // recomputed residual can. Treat the direction as stagnated.
        alpha_.pop_back();
        basis_.pop_back();
        directions_.pop_back();
        ++breakdowns_;
        return false;
    }
    x_ = std::move(x);
    r_ = std::move(r);
    r_norm_ = r_norm;
    return true;
}

}  // namespace orthomg
