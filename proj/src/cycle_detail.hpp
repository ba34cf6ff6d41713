#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "orthomg/multigrid.hpp"
#include "orthomg/resmin.hpp"

namespace orthomg::detail {

/// Produces the prolongated coarse correction for the residual of `level`.
using CoarseCorrection = std::function<Vector(std::size_t level, std::span<const double> r)>;

enum class ResidualOrder { multiplicative, additive };

/// Synchronous cycle on one level. `coarse` is consulted for the coarse-grid
/// correction; history is recorded only if `history` is non-null.
SolveResult run_sync_level(const MultigridContext& ctx, std::size_t level,
                           std::span<const double> b, std::span<const double> x0,
                           const CycleConfig& cfg, ResidualOrder order, WorkerPool* pool,
                           const CoarseCorrection& coarse, ConvergenceHistory* history);

/// Default recursive coarse correction: restrict, recurse (or solve
/// directly on the coarsest level), prolongate.
Vector sync_coarse_correction(const MultigridContext& ctx, std::size_t level,
                              std::span<const double> r, const CycleConfig& cfg,
                              ResidualOrder order, WorkerPool* pool);

/// Smoother output checked for finiteness before it enters minimization.
Vector smooth(const MultigridContext& ctx, std::size_t level, std::span<const double> r,
              WorkerPool* pool);

/// Minimizes over z and records the new residual norm.
void minimize(SearchSpace& space, const CsrMatrix& a, std::span<const double> z,
              RecordKind kind, ConvergenceHistory* history);

/// Loop bound for a level: the outer cap on the finest level, otherwise the
/// same cap as a guard (level criteria normally stop earlier).
std::size_t iteration_cap(std::size_t level, const CycleConfig& cfg);

/// Coarsest-level (or single-level) solve: one direct correction.
SolveResult direct_level(const MultigridContext& ctx, std::size_t level,
                         std::span<const double> b, std::span<const double> x0,
                         const CycleConfig& cfg, ConvergenceHistory* history);

SolveResult finish(SearchSpace& space, std::size_t iterations, bool converged,
                   double initial_residual, ConvergenceHistory* history);

}  // namespace orthomg::detail
