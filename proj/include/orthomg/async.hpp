#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "orthomg/errors.hpp"
#include "orthomg/multigrid.hpp"

namespace orthomg {

/// Worker counts per level. Level l's smoother group owns
/// smoother_workers[l] workers; its coarse group owns every worker of the
/// levels below it, including the coarsest ones.
struct GroupAssignment {
    std::vector<std::size_t> smoother_workers;
    std::size_t coarsest_workers = 1;

    std::size_t total() const;
    std::size_t coarse_workers(std::size_t level) const;
    /// Id of the first worker owned by level's smoother group (or by the
    /// coarsest level when level == smoother_workers.size()).
    std::size_t first_worker_id(std::size_t level) const;
};

/// Splits total_workers over the levels of h. The coarsest level gets
/// coarsest_workers; the rest are apportioned to the other levels by DOF
/// count (largest remainder, ties to finer levels, at least one each).
GroupAssignment assign_groups(const GridHierarchy& h, std::size_t total_workers,
                              std::size_t coarsest_workers = 1);

enum class MessageKind { coarse_done, smoother_done, coarse_correction, updated_residual, terminate };

std::string_view to_string(MessageKind k);

struct ExchangeMessage {
    MessageKind kind = MessageKind::terminate;
    std::size_t cycle_index = 0;
    Vector payload;
};

/// Unbounded FIFO between two threads. A failed channel rethrows the stored
/// exception to every receiver.
template <typename T>
class Channel {
public:
    void send(T value)
    {
        {
            std::lock_guard lock(mutex_);
            queue_.push_back(std::move(value));
        }
        ready_.notify_all();
    }

    void fail(std::exception_ptr error)
    {
        {
            std::lock_guard lock(mutex_);
            if (!error_) {
                error_ = error;
            }
        }
        ready_.notify_all();
    }

    std::optional<T> try_receive()
    {
        std::lock_guard lock(mutex_);
        return pop_locked();
    }

    /// Blocks until a value arrives; throws Timeout after `timeout`.
    T receive(std::chrono::milliseconds timeout, const std::string& what)
    {
        std::unique_lock lock(mutex_);
        if (!ready_.wait_for(lock, timeout, [&] { return !queue_.empty() || error_; })) {
            throw Timeout("watchdog: no exchange within " + std::to_string(timeout.count()) +
                          " ms while waiting for " + what);
        }
        return *pop_locked();
    }

private:
    std::optional<T> pop_locked()
    {
        if (!queue_.empty()) {
            T v = std::move(queue_.front());
            queue_.pop_front();
            return v;
        }
        if (error_) {
            std::rethrow_exception(error_);
        }
        return std::nullopt;
    }

    std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<T> queue_;
    std::exception_ptr error_;
};

enum class Role { smoother, coarse };

std::string_view to_string(Role r);

struct TraceRecord {
    double wall_time = 0.0;
    std::size_t level = 0;
    Role role = Role::smoother;
    /// A message kind, or "restrict" / "prolong" for transfer operators.
    std::string kind;
    std::size_t cycle_index = 0;
    /// Counts visits of a level; cycle indices restart with every visit.
    std::size_t session = 0;
    std::size_t worker = 0;
};

/// Thread-safe event log of one solve.
class MessageTrace {
public:
    MessageTrace();

    void record(std::size_t level, Role role, std::string_view kind, std::size_t cycle,
                std::size_t session, std::size_t worker);
    std::vector<TraceRecord> records() const;
    void clear();
    /// CSV with header `wall_time,level,role,kind,cycle_index,session,worker`.
    void write_csv(std::ostream& out) const;

private:
    mutable std::mutex mutex_;
    std::chrono::steady_clock::time_point start_;
    std::vector<TraceRecord> records_;
};

struct SchedulerMode {
    enum class Kind { realtime, deterministic };

    Kind kind = Kind::realtime;
    /// Smoother sweeps per cycle in deterministic mode.
    std::size_t sweeps_per_cycle = 1;

    static SchedulerMode realtime() { return {Kind::realtime, 1}; }
    static SchedulerMode deterministic(std::size_t sweeps) { return {Kind::deterministic, sweeps}; }
    void validate() const;
};

/// Where R and P of a level boundary are applied. coarse_group: both on the
/// coarse side (the fine residual and the prolongated correction travel).
/// both_groups: restriction on the smoother side, prolongation on the coarse
/// side (the restricted residual travels).
enum class TransferPlacement { coarse_group, both_groups };

std::string_view to_string(TransferPlacement p);
TransferPlacement parse_placement(std::string_view name);

struct TransferRoles {
    std::optional<Role> restriction;
    std::optional<Role> prolongation;
};

/// Roles applying R and P between `level` and level + 1; empty on the
/// coarsest level, which has no transfer operators.
TransferRoles intergrid_placement(const GridHierarchy& h, std::size_t level,
                                  TransferPlacement placement = TransferPlacement::coarse_group);

struct AsyncOptions {
    SchedulerMode scheduler;
    TransferPlacement placement = TransferPlacement::coarse_group;
    std::chrono::milliseconds watchdog{60000};
    MessageTrace* trace = nullptr;
    /// Test hooks, called on the coarse side before each coarse solve and on
    /// the smoother side after each sweep.
    std::function<void(std::size_t level, std::size_t cycle)> before_coarse_solve;
    std::function<void(std::size_t level, std::size_t cycle)> after_smoother_sweep;
};

/// Semi-asynchronous cycle: on every level the smoother group keeps
/// smoothing while its coarse group computes one coarse correction from the
/// cycle-start residual; they exchange once per cycle.
SolveResult async_solve(const MultigridContext& ctx, std::span<const double> b,
                        std::span<const double> x0, const CycleConfig& cfg,
                        const GroupAssignment& groups, const AsyncOptions& options = {});

/// Multiplicative synchronous cycle on the finest level whose coarse
/// correction is solved semi-asynchronously on the coarser levels.
SolveResult hybrid_solve(const MultigridContext& ctx, std::span<const double> b,
                         std::span<const double> x0, const CycleConfig& cfg,
                         const GroupAssignment& groups, const AsyncOptions& options = {});

/// Dispatches on cfg.variant. Synchronous variants use a pool of
/// groups.total() workers.
SolveResult solve(const MultigridContext& ctx, std::span<const double> b,
                  std::span<const double> x0, const CycleConfig& cfg,
                  const GroupAssignment& groups, const AsyncOptions& options = {});

}  // namespace orthomg
