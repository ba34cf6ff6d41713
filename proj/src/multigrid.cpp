#include "orthomg/multigrid.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "cycle_detail.hpp"
#include "orthomg/errors.hpp"

namespace orthomg {

void ConvergenceCriteria::validate() const
{
    if (!(rel_tol >= 0.0) || !(abs_tol >= 0.0)) {
        throw InvalidInput("criteria: tolerances must be non-negative");
    }
    if (!(level1_factor > 0.0 && level1_factor <= 1.0) ||
        !(level2_factor > 0.0 && level2_factor <= 1.0)) {
        throw InvalidInput("criteria: reduction factors must lie in (0, 1]");
    }
    if (level1_max_iterations == 0 || level2_max_iterations == 0 || deeper_iterations == 0) {
        throw InvalidInput("criteria: iteration caps must be >= 1");
    }
}

bool level_converged(std::size_t level, double r_norm, double r0_norm, std::size_t iters_done,
                     const ConvergenceCriteria& c)
{
    if (r_norm == 0.0) {
        return true;
    }
    switch (level) {
    case 0:
        return r_norm <= c.rel_tol * r0_norm || r_norm <= c.abs_tol;
    case 1:
        return r_norm <= c.level1_factor * r0_norm || iters_done >= c.level1_max_iterations;
    case 2:
        return r_norm <= c.level2_factor * r0_norm || iters_done >= c.level2_max_iterations;
    default:
        return iters_done >= c.deeper_iterations;
    }
}

std::string_view to_string(Variant v)
{
    switch (v) {
    case Variant::additive_sync: return "additive_sync";
    case Variant::multiplicative_sync: return "multiplicative_sync";
    case Variant::additive_task_parallel: return "additive_task_parallel";
    case Variant::hybrid: return "hybrid";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name)
{
    for (auto v : {Variant::additive_sync, Variant::multiplicative_sync,
                   Variant::additive_task_parallel, Variant::hybrid}) {
        if (to_string(v) == name) {
            return v;
        }
    }
    throw InvalidInput("unknown solver variant '" + std::string(name) + "'");
}

void CycleConfig::validate() const
{
    criteria.validate();
    if (max_outer_iterations == 0) {
        throw InvalidInput("solver.max_outer_iterations must be >= 1");
    }
}

std::string_view to_string(RecordKind k)
{
    switch (k) {
    case RecordKind::initial: return "initial";
    case RecordKind::smoother: return "smoother";
    case RecordKind::coarse: return "coarse";
    case RecordKind::final: return "final";
    }
    return "unknown";
}

void ConvergenceHistory::add(RecordKind kind, double residual)
{
    records.push_back({records.size(), residual, kind});
}

void ConvergenceHistory::write_csv(std::ostream& out) const
{
    const auto old = out.precision(17);
    out << "step,residual,type\n";
    for (const auto& rec : records) {
        out << rec.step << ',' << rec.residual << ',' << to_string(rec.kind) << '\n';
    }
    out.precision(old);
}

CoarseSolver::CoarseSolver(const CsrMatrix& a)
    : lu_([&] {
          if (a.n_rows != a.n_cols) {
              throw InvalidInput("coarse solver: matrix is not square");
          }
          std::vector<std::size_t> all(a.n_rows);
          std::iota(all.begin(), all.end(), std::size_t{0});
          return principal_band<double>(a, all);
      }())
{
}

Vector CoarseSolver::solve(std::span<const double> r) const { return lu_.solve(r); }

Vector coarsest_solve(const CsrMatrix& a, std::span<const double> r)
{
    return CoarseSolver(a).solve(r);
}

void SmootherConfig::validate() const
{
    if (kind == Kind::schwarz) {
        if (iterations == 0) {
            throw InvalidInput("smoother.iterations must be >= 1");
        }
        if (subdomains == 0) {
            throw InvalidInput("smoother.subdomains must be >= 1");
        }
        if (min_subdomain_cells == 0) {
            throw InvalidInput("smoother.min_subdomain_cells must be >= 1");
        }
    } else {
        if (tile == 0) {
            throw InvalidInput("smoother.tile must be >= 1");
        }
        if (sweeps == 0) {
            throw InvalidInput("smoother.sweeps must be >= 1");
        }
        if (!(omega > 0.0)) {
            throw InvalidInput("smoother.omega must be positive");
        }
    }
}

MultigridContext::MultigridContext(std::shared_ptr<const GridHierarchy> hierarchy,
                                   const SmootherConfig& config)
    : hierarchy_(std::move(hierarchy)), config_(config)
{
    if (!hierarchy_ || hierarchy_->levels.empty()) {
        throw InvalidInput("MultigridContext: empty hierarchy");
    }
    config_.validate();
    for (std::size_t l = 0; l + 1 < hierarchy_->size(); ++l) {
        const GridLevel& lvl = hierarchy_->levels[l];
        if (config_.kind == SmootherConfig::Kind::schwarz) {
            const std::size_t parts = std::clamp<std::size_t>(
                lvl.n_dofs() / config_.min_subdomain_cells, 1, config_.subdomains);
            smoothers_.push_back(std::make_unique<SchwarzSmoother>(SchwarzSmoother::setup(
                lvl.matrix, partition_cells(lvl.shape, parts, config_.overlap),
                config_.precision, config_.iterations)));
        } else {
            const std::size_t tile = std::gcd(config_.tile, lvl.shape.cells_per_axis);
            smoothers_.push_back(std::make_unique<BlockJacobiSmoother>(BlockJacobiSmoother::setup(
                lvl.matrix, lvl.shape, tile, config_.omega, config_.sweeps)));
        }
    }
    coarse_ = std::make_unique<CoarseSolver>(hierarchy_->levels.back().matrix);
}

const Smoother& MultigridContext::smoother(std::size_t level) const
{
    if (level >= smoothers_.size()) {
        throw InvalidInput("no smoother on level " + std::to_string(level) +
                           " (coarsest level is solved directly)");
    }
    return *smoothers_[level];
}

namespace detail {

Vector smooth(const MultigridContext& ctx, std::size_t level, std::span<const double> r,
              WorkerPool* pool)
{
    Vector z = ctx.smoother(level).apply(ctx.matrix(level), r, pool);
    if (!all_finite(z)) {
        throw NumericalFailure("smoother on level " + std::to_string(level) +
                               " produced non-finite values");
    }
    return z;
}

void minimize(SearchSpace& space, const CsrMatrix& a, std::span<const double> z,
              RecordKind kind, ConvergenceHistory* history)
{
    if (!all_finite(z)) {
        throw NumericalFailure("non-finite correction entering residual minimization");
    }
    space.update(a, z);
    if (history != nullptr) {
        history->add(kind, space.residual_norm());
    }
}

std::size_t iteration_cap(std::size_t /*level*/, const CycleConfig& cfg)
{
    return cfg.max_outer_iterations;
}

SolveResult finish(SearchSpace& space, std::size_t iterations, bool converged,
                   double initial_residual, ConvergenceHistory* history)
{
    if (history != nullptr) {
        history->add(RecordKind::final, space.residual_norm());
    }
    SolveResult res;
    res.x = space.solution();
    res.r = space.residual();
    res.iterations = iterations;
    res.status = converged ? SolveStatus::converged : SolveStatus::max_iterations;
    res.initial_residual = initial_residual;
    res.final_residual = space.residual_norm();
    res.breakdowns = space.breakdown_count();
    return res;
}

SolveResult direct_level(const MultigridContext& ctx, std::size_t level,
                         std::span<const double> b, std::span<const double> x0,
                         const CycleConfig& cfg, ConvergenceHistory* history)
{
    const CsrMatrix& a = ctx.matrix(level);
    Vector r0(a.n_rows);
    residual_into(a, x0, b, r0);
    SearchSpace space(Vector(x0.begin(), x0.end()), std::move(r0));
    const double initial = space.residual_norm();
    if (history != nullptr) {
        history->add(RecordKind::initial, initial);
    }
    std::size_t iters = 0;
    if (!level_converged(level, initial, initial, 0, cfg.criteria)) {
        minimize(space, a, ctx.coarse_solver().solve(space.residual()), RecordKind::coarse,
                 history);
        iters = 1;
    }
    const bool ok = level_converged(level, space.residual_norm(), initial, iters, cfg.criteria);
    return finish(space, iters, ok, initial, history);
}

Vector sync_coarse_correction(const MultigridContext& ctx, std::size_t level,
                              std::span<const double> r, const CycleConfig& cfg,
                              ResidualOrder order, WorkerPool* pool)
{
    const GridLevel& lvl = ctx.hierarchy()[level];
    const Vector rc = spmv(*lvl.restriction, r);
    Vector zc;
    if (ctx.hierarchy().is_coarsest(level + 1)) {
        zc = ctx.coarse_solver().solve(rc);
    } else {
        const Vector zero(rc.size(), 0.0);
        zc = run_sync_level(
                 ctx, level + 1, rc, zero, cfg, order, pool,
                 [&](std::size_t l, std::span<const double> rr) {
                     return sync_coarse_correction(ctx, l, rr, cfg, order, pool);
                 },
                 nullptr)
                 .x;
    }
    return spmv(*lvl.prolongation, zc);
}

SolveResult run_sync_level(const MultigridContext& ctx, std::size_t level,
                           std::span<const double> b, std::span<const double> x0,
                           const CycleConfig& cfg, ResidualOrder order, WorkerPool* pool,
                           const CoarseCorrection& coarse, ConvergenceHistory* history)
{
    const CsrMatrix& a = ctx.matrix(level);
    if (b.size() != a.n_rows || x0.size() != a.n_rows) {
        throw InvalidInput("orthomg: rhs/initial guess size does not match level " +
                           std::to_string(level) + " (" + std::to_string(a.n_rows) + " dofs)");
    }
    if (ctx.hierarchy().is_coarsest(level)) {
        return direct_level(ctx, level, b, x0, cfg, history);
    }

    Vector r0(a.n_rows);
    residual_into(a, x0, b, r0);
    if (!all_finite(r0)) {
        throw NumericalFailure("non-finite initial residual on level " + std::to_string(level));
    }
    SearchSpace space(Vector(x0.begin(), x0.end()), std::move(r0));
    const double initial = space.residual_norm();
    if (history != nullptr) {
        history->add(RecordKind::initial, initial);
    }

    const std::size_t cap = iteration_cap(level, cfg);
    std::size_t iters = 0;
    bool done = level_converged(level, initial, initial, 0, cfg.criteria);
    while (!done && iters < cap) {
        if (order == ResidualOrder::multiplicative) {
            minimize(space, a, smooth(ctx, level, space.residual(), pool), RecordKind::smoother,
                     history);
            minimize(space, a, coarse(level, space.residual()), RecordKind::coarse, history);
            minimize(space, a, smooth(ctx, level, space.residual(), pool), RecordKind::smoother,
                     history);
        } else {
            // Both corrections see the cycle-start residual. The smoother
            // correction is minimized first, the order the task-parallel
            // exchange produces.
            const Vector start = space.residual();
            const Vector z_coarse = coarse(level, start);
            const Vector z_smooth = smooth(ctx, level, start, pool);
            minimize(space, a, z_smooth, RecordKind::smoother, history);
            minimize(space, a, z_coarse, RecordKind::coarse, history);
        }
        ++iters;
        done = level_converged(level, space.residual_norm(), initial, iters, cfg.criteria);
    }
    return finish(space, iters, done, initial, history);
}

}  // namespace detail

namespace {

SolveResult solve_sync(const MultigridContext& ctx, std::span<const double> b,
                       std::span<const double> x0, const CycleConfig& cfg, WorkerPool* pool,
                       detail::ResidualOrder order)
{
    cfg.validate();
    SolveResult res;
    ConvergenceHistory history;
    res = detail::run_sync_level(
        ctx, 0, b, x0, cfg, order, pool,
        [&](std::size_t l, std::span<const double> r) {
            return detail::sync_coarse_correction(ctx, l, r, cfg, order, pool);
        },
        cfg.history_enabled ? &history : nullptr);
    res.history = std::move(history);
    return res;
}

}  // namespace

SolveResult orthomg_solve_multiplicative(const MultigridContext& ctx, std::span<const double> b,
                                         std::span<const double> x0, const CycleConfig& cfg,
                                         WorkerPool* pool)
{
    return solve_sync(ctx, b, x0, cfg, pool, detail::ResidualOrder::multiplicative);
}

SolveResult orthomg_solve_additive(const MultigridContext& ctx, std::span<const double> b,
                                   std::span<const double> x0, const CycleConfig& cfg,
                                   WorkerPool* pool)
{
    return solve_sync(ctx, b, x0, cfg, pool, detail::ResidualOrder::additive);
}

}  // namespace orthomg
