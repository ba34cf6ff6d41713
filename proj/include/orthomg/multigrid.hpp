#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orthomg/dense.hpp"
#include "orthomg/problem.hpp"
#include "orthomg/smoothers.hpp"
#include "orthomg/sparse.hpp"
#include "orthomg/worker_pool.hpp"

namespace orthomg {

/// Level-local stopping rules. The finest level stops on a relative or an
/// absolute residual tolerance, the first two coarse levels on a reduction
/// factor or an iteration cap, deeper levels after a fixed number of
/// iterations. The coarsest level is solved directly and never consults them.
struct ConvergenceCriteria {
    double rel_tol = 1e-8;
    double abs_tol = 1e-8;
    double level1_factor = 0.1;
    std::size_t level1_max_iterations = 20;
    double level2_factor = 0.5;
    std::size_t level2_max_iterations = 2;
    std::size_t deeper_iterations = 1;

    void validate() const;
};

bool level_converged(std::size_t level, double r_norm, double r0_norm, std::size_t iters_done,
                     const ConvergenceCriteria& criteria);

enum class Variant { additive_sync, multiplicative_sync, additive_task_parallel, hybrid };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct CycleConfig {
    Variant variant = Variant::multiplicative_sync;
    ConvergenceCriteria criteria;
    std::size_t max_outer_iterations = 100;
    bool history_enabled = true;

    void validate() const;
};

enum class RecordKind { initial, smoother, coarse, final };

std::string_view to_string(RecordKind k);

struct HistoryRecord {
    std::size_t step = 0;
    double residual = 0.0;
    RecordKind kind = RecordKind::initial;
};

/// Finest-level residual after every minimization step, bracketed by an
/// initial and a final record.
struct ConvergenceHistory {
    std::vector<HistoryRecord> records;

    void add(RecordKind kind, double residual);
    bool empty() const noexcept { return records.empty(); }
    std::size_t size() const noexcept { return records.size(); }
    /// CSV with header `step,residual,type`.
    void write_csv(std::ostream& out) const;
};

enum class SolveStatus { converged, max_iterations };

struct SolveResult {
    Vector x;
    Vector r;
    ConvergenceHistory history;
    std::size_t iterations = 0;
    SolveStatus status = SolveStatus::converged;
    double initial_residual = 0.0;
    double final_residual = 0.0;
    std::size_t breakdowns = 0;
    /// Task-parallel variants only: finest-level smoother sweeps per cycle.
    std::vector<std::size_t> sweeps_per_cycle;

    bool converged() const noexcept { return status == SolveStatus::converged; }
};

/// Cached band LU of the coarsest operator.
class CoarseSolver {
public:
    explicit CoarseSolver(const CsrMatrix& a);
    Vector solve(std::span<const double> r) const;
    std::size_t size() const noexcept { return lu_.size(); }

private:
    BandedLuFactorization<double> lu_;
};

/// One-shot direct solve; factorizes on every call.
Vector coarsest_solve(const CsrMatrix& a, std::span<const double> r);

struct SmootherConfig {
    enum class Kind { schwarz, block_jacobi };

    Kind kind = Kind::schwarz;
    // Schwarz
    std::size_t overlap = 1;
    Precision precision = Precision::float64;
    std::size_t iterations = 1;
    /// Subdomains per level; coarse levels use fewer so that every
    /// subdomain keeps at least min_subdomain_cells cells.
    std::size_t subdomains = 4;
    std::size_t min_subdomain_cells = 16;
    // Block-Jacobi
    std::size_t tile = 4;
    double omega = BlockJacobiSmoother::kDefaultOmega;
    std::size_t sweeps = BlockJacobiSmoother::kDefaultSweeps;

    void validate() const;
};

/// Hierarchy plus everything set up once per solve configuration: one
/// smoother per non-coarsest level and the coarsest factorization.
class MultigridContext {
public:
    MultigridContext(std::shared_ptr<const GridHierarchy> hierarchy, const SmootherConfig& config);

    const GridHierarchy& hierarchy() const noexcept { return *hierarchy_; }
    std::size_t levels() const noexcept { return hierarchy_->size(); }
    const CsrMatrix& matrix(std::size_t level) const { return hierarchy_->levels[level].matrix; }
    const Smoother& smoother(std::size_t level) const;
    const CoarseSolver& coarse_solver() const noexcept { return *coarse_; }
    const SmootherConfig& smoother_config() const noexcept { return config_; }

private:
    std::shared_ptr<const GridHierarchy> hierarchy_;
    SmootherConfig config_;
    std::vector<std::unique_ptr<Smoother>> smoothers_;
    std::unique_ptr<CoarseSolver> coarse_;
};

/// Pre-smooth, coarse correction, post-smooth; every correction is passed
/// through residual minimization before the next one is computed.
SolveResult orthomg_solve_multiplicative(const MultigridContext& ctx, std::span<const double> b,
                                         std::span<const double> x0, const CycleConfig& cfg,
                                         WorkerPool* pool = nullptr);

/// Smoother and coarse corrections both computed from the cycle-start
/// residual, then minimized one after the other.
SolveResult orthomg_solve_additive(const MultigridContext& ctx, std::span<const double> b,
                                   std::span<const double> x0, const CycleConfig& cfg,
                                   WorkerPool* pool = nullptr);

}  // namespace orthomg
