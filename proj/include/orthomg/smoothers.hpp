#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "orthomg/banded.hpp"
#include "orthomg/dense.hpp"
#include "orthomg/problem.hpp"
#include "orthomg/sparse.hpp"
#include "orthomg/worker_pool.hpp"

namespace orthomg {

/// Approximate solver for A z = r started from z = 0. Implementations are
/// immutable after setup and may be shared between threads; `pool` (if
/// given) parallelizes the independent local solves without changing the
/// result bitwise.
class Smoother {
public:
    virtual ~Smoother() = default;
    virtual Vector apply(const CsrMatrix& a, std::span<const double> r,
                         WorkerPool* pool = nullptr) const = 0;
    virtual std::string name() const = 0;
};

/// Overlapping decomposition of a structured grid. Index lists are sorted.
struct Partition {
    std::size_t n_subdomains = 0;
    std::size_t overlap = 0;
    std::vector<std::vector<std::size_t>> core;
    std::vector<std::vector<std::size_t>> extended;
};

/// Recursive coordinate bisection along the longest axis, then `overlap`
/// layers of face neighbours around each core.
Partition partition_cells(GridShape shape, std::size_t n_subdomains, std::size_t overlap);

/// Additive Schwarz with cached LU factors of the extended subdomain blocks.
/// Local systems are factored in band form; in the local (sorted global)
/// ordering the bandwidth of a grid subdomain is one cell row or plane.
class SchwarzSmoother final : public Smoother {
public:
    static SchwarzSmoother setup(const CsrMatrix& a, Partition partition,
                                 Precision precision = Precision::float64,
                                 std::size_t iterations = 1);

    Vector apply(const CsrMatrix& a, std::span<const double> r,
                 WorkerPool* pool = nullptr) const override;
    Vector apply(const CsrMatrix& a, std::span<const double> r, std::size_t n_iterations,
                 WorkerPool* pool = nullptr) const;
    std::string name() const override { return "schwarz"; }

    /// Solves the cached local system of one subdomain.
    Vector solve_local(std::size_t subdomain, std::span<const double> rhs) const;

    const Partition& partition() const noexcept { return partition_; }
    Precision precision() const noexcept { return precision_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    SchwarzSmoother() = default;

    Partition partition_;
    Precision precision_ = Precision::float64;
    std::size_t iterations_ = 1;
    std::vector<BandedLuFactorization<double>> factors64_;
    std::vector<BandedLuFactorization<float>> factors32_;
};

/// Block-Jacobi over geometric tiles with precomputed block inverses.
class BlockJacobiSmoother final : public Smoother {
public:
    static constexpr double kDefaultOmega = 1.0;
    static constexpr std::size_t kDefaultSweeps = 5;

    static BlockJacobiSmoother setup(const CsrMatrix& a, GridShape shape,
                                     std::size_t tile_cells_per_axis,
                                     double omega = kDefaultOmega,
                                     std::size_t sweeps = kDefaultSweeps);

    Vector apply(const CsrMatrix& a, std::span<const double> r,
                 WorkerPool* pool = nullptr) const override;
    std::string name() const override { return "block_jacobi"; }

    const std::vector<std::vector<std::size_t>>& blocks() const noexcept { return blocks_; }
    const std::vector<DenseMatrix<double>>& inverses() const noexcept { return inverses_; }
    double omega() const noexcept { return omega_; }
    std::size_t sweeps() const noexcept { return sweeps_; }

private:
    BlockJacobiSmoother() = default;

    std::vector<std::vector<std::size_t>> blocks_;
    std::vector<DenseMatrix<double>> inverses_;
    double omega_ = kDefaultOmega;
    std::size_t sweeps_ = kDefaultSweeps;
};

/// Principal submatrix A[idx, idx] as a dense block; idx must be sorted.
DenseMatrix<double> principal_submatrix(const CsrMatrix& a, std::span<const std::size_t> idx);
/// Same submatrix in band storage, bandwidths taken from its pattern.
template <typename Real>
BandMatrix<Real> principal_band(const CsrMatrix& a, std::span<const std::size_t> idx);

}  // namespace orthomg
