#include "orthomg/async.hpp"

#include <atomic>
#include <memory>
#include <thread>

#include "cycle_detail.hpp"

namespace orthomg {

std::size_t GroupAssignment::total() const
{
    std::size_t t = coarsest_workers;
    for (auto w : smoother_workers) {
        t += w;
    }
    return t;
}

std::size_t GroupAssignment::coarse_workers(std::size_t level) const
{
    std::size_t t = coarsest_workers;
    for (std::size_t l = level + 1; l < smoother_workers.size(); ++l) {
        t += smoother_workers[l];
    }
    return t;
}

std::size_t GroupAssignment::first_worker_id(std::size_t level) const
{
    std::size_t id = 0;
    for (std::size_t l = 0; l < level && l < smoother_workers.size(); ++l) {
        id += smoother_workers[l];
    }
    return id;
}

GroupAssignment assign_groups(const GridHierarchy& h, std::size_t total_workers,
                              std::size_t coarsest_workers)
{
    if (coarsest_workers == 0) {
        throw InvalidInput("assign_groups: coarsest_workers must be >= 1");
    }
    const std::size_t levels = h.size() == 0 ? 0 : h.size() - 1;
    const std::size_t minimum = levels + coarsest_workers;
    if (total_workers < minimum) {
        throw InvalidInput("assign_groups: " + std::to_string(total_workers) +
                           " workers for a " + std::to_string(h.size()) +
                           "-level hierarchy; at least " + std::to_string(minimum) +
                           " are required");
    }
    GroupAssignment ga;
    ga.coarsest_workers = coarsest_workers;
    ga.smoother_workers.assign(levels, 0);
    if (levels == 0) {
        ga.coarsest_workers = total_workers;
        return ga;
    }

    const std::size_t pool = total_workers - coarsest_workers;
    std::size_t dofs_total = 0;
    for (std::size_t l = 0; l < levels; ++l) {
        dofs_total += h[l].n_dofs();
    }
    // Largest remainder in exact integer arithmetic.
    std::vector<std::size_t> remainder(levels);
    std::size_t assigned = 0;
    for (std::size_t l = 0; l < levels; ++l) {
        const std::size_t share = pool * h[l].n_dofs();
        ga.smoother_workers[l] = share / dofs_total;
        remainder[l] = share % dofs_total;
        assigned += ga.smoother_workers[l];
    }
    for (; assigned < pool; ++assigned) {
        std::size_t best = 0;
        for (std::size_t l = 1; l < levels; ++l) {
            if (remainder[l] > remainder[best]) {
                best = l;
            }
        }
        ++ga.smoother_workers[best];
        remainder[best] = 0;
    }
    // Every level needs a worker; take it from the largest group.
    for (std::size_t l = 0; l < levels; ++l) {
        if (ga.smoother_workers[l] != 0) {
            continue;
        }
        std::size_t donor = 0;
        for (std::size_t k = 1; k < levels; ++k) {
            if (ga.smoother_workers[k] >= ga.smoother_workers[donor]) {
                donor = k;
            }
        }
        --ga.smoother_workers[donor];
        ga.smoother_workers[l] = 1;
    }
    return ga;
}

std::string_view to_string(MessageKind k)
{
    switch (k) {
    case MessageKind::coarse_done: return "coarse_done";
    case MessageKind::smoother_done: return "smoother_done";
    case MessageKind::coarse_correction: return "coarse_correction";
    case MessageKind::updated_residual: return "updated_residual";
    case MessageKind::terminate: return "terminate";
    }
    return "unknown";
}

std::string_view to_string(Role r) { return r == Role::smoother ? "smoother" : "coarse"; }

MessageTrace::MessageTrace() : start_(std::chrono::steady_clock::now()) {}

void MessageTrace::record(std::size_t level, Role role, std::string_view kind, std::size_t cycle,
                          std::size_t session, std::size_t worker)
{
    const double t =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::lock_guard lock(mutex_);
    records_.push_back({t, level, role, std::string(kind), cycle, session, worker});
}

std::vector<TraceRecord> MessageTrace::records() const
{
    std::lock_guard lock(mutex_);
    return records_;
}

void MessageTrace::clear()
{
    std::lock_guard lock(mutex_);
    records_.clear();
    start_ = std::chrono::steady_clock::now();
}

void MessageTrace::write_csv(std::ostream& out) const
{
    std::lock_guard lock(mutex_);
    const auto old = out.precision(9);
    out << "wall_time,level,role,kind,cycle_index,session,worker\n";
    for (const auto& r : records_) {
        out << r.wall_time << ',' << r.level << ',' << to_string(r.role) << ',' << r.kind << ','
            << r.cycle_index << ',' << r.session << ',' << r.worker << '\n';
    }
    out.precision(old);
}

void SchedulerMode::validate() const
{
    if (kind == Kind::deterministic && sweeps_per_cycle == 0) {
        throw InvalidInput("scheduler: deterministic sweeps per cycle must be >= 1");
    }
}

std::string_view to_string(TransferPlacement p)
{
    return p == TransferPlacement::coarse_group ? "coarse_group" : "both_groups";
}

TransferPlacement parse_placement(std::string_view name)
{
    if (name == "coarse_group" || name == "B") {
        return TransferPlacement::coarse_group;
    }
    if (name == "both_groups" || name == "A") {
        return TransferPlacement::both_groups;
    }
    throw InvalidInput("unknown transfer placement '" + std::string(name) + "'");
}

TransferRoles intergrid_placement(const GridHierarchy& h, std::size_t level,
                                  TransferPlacement placement)
{
    if (level >= h.size()) {
        throw InvalidInput("intergrid_placement: no level " + std::to_string(level));
    }
    if (h.is_coarsest(level)) {
        return {};
    }
    if (placement == TransferPlacement::coarse_group) {
        return {Role::coarse, Role::coarse};
    }
    return {Role::smoother, Role::coarse};
}

namespace {

using Mailbox = Channel<ExchangeMessage>;

class Engine {
public:
    Engine(const MultigridContext& ctx, const CycleConfig& cfg, const GroupAssignment& groups,
           const AsyncOptions& options)
        : ctx_(ctx), cfg_(cfg), groups_(groups), opt_(options), sessions_(ctx.levels())
    {
        cfg_.validate();
        opt_.scheduler.validate();
        if (groups_.smoother_workers.size() + 1 != ctx_.levels()) {
            throw InvalidInput("group assignment has " +
                               std::to_string(groups_.smoother_workers.size()) +
                               " smoother groups, hierarchy needs " +
                               std::to_string(ctx_.levels() - 1));
        }
        for (std::size_t l = 0; l + 1 < ctx_.levels(); ++l) {
            if (groups_.smoother_workers[l] == 0) {
                throw InvalidInput("group assignment: level " + std::to_string(l) +
                                   " has no smoother workers");
            }
            pools_.push_back(std::make_unique<WorkerPool>(groups_.smoother_workers[l]));
        }
        if (opt_.watchdog.count() <= 0) {
            throw InvalidInput("watchdog must be positive");
        }
    }

    WorkerPool* pool(std::size_t level) const
    {
        return level < pools_.size() ? pools_[level].get() : nullptr;
    }

    SolveResult async_level(std::size_t level, std::span<const double> b,
                            std::span<const double> x0, ConvergenceHistory* history);

    /// Coarse correction of `level` computed synchronously in the caller,
    /// with the coarser levels handled asynchronously.
    Vector nested_correction(std::size_t level, std::span<const double> r)
    {
        const GridLevel& lvl = ctx_.hierarchy()[level];
        const Vector rc = spmv(*lvl.restriction, r);
        return spmv(*lvl.prolongation, solve_below(level, rc));
    }

private:
    struct Session;

    Vector solve_below(std::size_t level, std::span<const double> rc)
    {
        const std::size_t next = level + 1;
        if (ctx_.hierarchy().is_coarsest(next)) {
            return ctx_.coarse_solver().solve(rc);
        }
        const Vector zero(rc.size(), 0.0);
        if (groups_.coarse_workers(level) >= 2) {
            return async_level(next, rc, zero, nullptr).x;
        }
        return detail::run_sync_level(
                   ctx_, next, rc, zero, cfg_, detail::ResidualOrder::multiplicative, pool(next),
                   [&](std::size_t l, std::span<const double> rr) {
                       return detail::sync_coarse_correction(
                           ctx_, l, rr, cfg_, detail::ResidualOrder::multiplicative, pool(l));
                   },
                   nullptr)
            .x;
    }

    void coarse_loop(Session& s);

    void trace(std::size_t level, Role role, std::string_view kind, std::size_t cycle,
               std::size_t session) const
    {
        if (opt_.trace != nullptr) {
            const std::size_t worker = role == Role::smoother ? groups_.first_worker_id(level)
                                                              : groups_.first_worker_id(level + 1);
            opt_.trace->record(level, role, kind, cycle, session, worker);
        }
    }

    const MultigridContext& ctx_;
    CycleConfig cfg_;
    GroupAssignment groups_;
    AsyncOptions opt_;
    std::vector<std::unique_ptr<WorkerPool>> pools_;
    std::vector<std::atomic<std::size_t>> sessions_;
};

// One visit of a level: the smoother side runs in the calling thread, the
// coarse side in its own thread.
struct Engine::Session {
    std::size_t level = 0;
    std::size_t id = 0;
    Mailbox down;  // smoother -> coarse
    Mailbox up;    // coarse -> smoother
    std::thread coarse;
    bool terminated = false;

    void send_down(Engine& e, MessageKind kind, std::size_t cycle, Vector payload = {})
    {
        e.trace(level, Role::smoother, to_string(kind), cycle, id);
        down.send({kind, cycle, std::move(payload)});
    }

    void terminate(Engine& e, std::size_t cycle)
    {
        if (!terminated) {
            terminated = true;
            send_down(e, MessageKind::terminate, cycle);
        }
    }
};

void Engine::coarse_loop(Session& s)
{
    const std::size_t level = s.level;
    const GridLevel& lvl = ctx_.hierarchy()[level];
    const bool restrict_here = opt_.placement == TransferPlacement::coarse_group;
    try {
        std::size_t expected = 0;
        for (;;) {
            ExchangeMessage msg = s.down.receive(
                opt_.watchdog, "the level " + std::to_string(level) + " smoother group");
            if (msg.kind == MessageKind::terminate) {
                return;
            }
            if (msg.kind == MessageKind::smoother_done) {
                continue;
            }
            if (msg.kind != MessageKind::updated_residual || msg.cycle_index != expected) {
                throw WorkerFailure("protocol violation: got " + std::string(to_string(msg.kind)) +
                                    " for cycle " + std::to_string(msg.cycle_index) +
                                    ", expected updated_residual for cycle " +
                                    std::to_string(expected));
            }
            const std::size_t c = msg.cycle_index;
            Vector rc;
            if (restrict_here) {
                trace(level, Role::coarse, "restrict", c, s.id);
                rc = spmv(*lvl.restriction, msg.payload);
            } else {
                rc = std::move(msg.payload);
            }
            if (opt_.before_coarse_solve) {
                opt_.before_coarse_solve(level, c);
            }
            const Vector zc = solve_below(level, rc);
            trace(level, Role::coarse, "prolong", c, s.id);
            Vector z = spmv(*lvl.prolongation, zc);
            trace(level, Role::coarse, to_string(MessageKind::coarse_done), c, s.id);
            s.up.send({MessageKind::coarse_done, c, {}});
            trace(level, Role::coarse, to_string(MessageKind::coarse_correction), c, s.id);
            s.up.send({MessageKind::coarse_correction, c, std::move(z)});
            ++expected;
        }
    } catch (const Timeout&) {
        s.up.fail(std::current_exception());
    } catch (const WorkerFailure&) {
        s.up.fail(std::current_exception());
    } catch (const std::exception& e) {
        s.up.fail(std::make_exception_ptr(WorkerFailure(
            "level " + std::to_string(level) + " coarse group failed: " + e.what())));
    } catch (...) {
        s.up.fail(std::make_exception_ptr(
            WorkerFailure("level " + std::to_string(level) + " coarse group failed")));
    }
}

SolveResult Engine::async_level(std::size_t level, std::span<const double> b,
                                std::span<const double> x0, ConvergenceHistory* history)
{
    const CsrMatrix& a = ctx_.matrix(level);
    if (b.size() != a.n_rows || x0.size() != a.n_rows) {
        throw InvalidInput("async: rhs/initial guess size does not match level " +
                           std::to_string(level) + " (" + std::to_string(a.n_rows) + " dofs)");
    }
    const GridLevel& lvl = ctx_.hierarchy()[level];
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

    Session s;
    s.level = level;
    s.id = sessions_[level]++;
    s.coarse = std::thread([this, &s] { coarse_loop(s); });
    struct Join {
        Engine& e;
        Session& s;
        std::size_t& last;
        ~Join()
        {
            s.terminate(e, last);
            s.coarse.join();
        }
    };
    std::size_t last_cycle = 0;
    Join join{*this, s, last_cycle};

    const std::string partner = "the level " + std::to_string(level) + " coarse group";
    auto expect = [&](const ExchangeMessage& m, MessageKind kind, std::size_t c) {
        if (m.kind != kind || m.cycle_index != c) {
            throw WorkerFailure("protocol violation on level " + std::to_string(level) + ": got " +
                                std::string(to_string(m.kind)) + " for cycle " +
                                std::to_string(m.cycle_index) + ", expected " +
                                std::string(to_string(kind)) + " for cycle " + std::to_string(c));
        }
    };

    const bool deterministic = opt_.scheduler.kind == SchedulerMode::Kind::deterministic;
    const std::size_t cap = detail::iteration_cap(level, cfg_);
    std::vector<std::size_t> sweeps_per_cycle;
    std::size_t cycles = 0;
    bool done = level_converged(level, initial, initial, 0, cfg_.criteria);
    try {
        while (!done && cycles < cap) {
            const std::size_t c = cycles;
            last_cycle = c;
            if (opt_.placement == TransferPlacement::coarse_group) {
                s.send_down(*this, MessageKind::updated_residual, c, space.residual());
            } else {
                trace(level, Role::smoother, "restrict", c, s.id);
                s.send_down(*this, MessageKind::updated_residual, c,
                            spmv(*lvl.restriction, space.residual()));
            }

            std::size_t sweeps = 0;
            bool coarse_seen = false;
            for (;;) {
                detail::minimize(space, a,
                                 detail::smooth(ctx_, level, space.residual(), pool(level)),
                                 RecordKind::smoother, history);
                ++sweeps;
                if (opt_.after_smoother_sweep) {
                    opt_.after_smoother_sweep(level, c);
                }
                if (sweeps == 1) {
                    s.send_down(*this, MessageKind::smoother_done, c);
                }
                if (deterministic) {
                    if (sweeps >= opt_.scheduler.sweeps_per_cycle) {
                        break;
                    }
                    continue;
                }
                if (auto m = s.up.try_receive()) {
                    expect(*m, MessageKind::coarse_done, c);
                    coarse_seen = true;
                    break;
                }
            }
            if (!coarse_seen) {
                expect(s.up.receive(opt_.watchdog, partner), MessageKind::coarse_done, c);
            }
            ExchangeMessage corr = s.up.receive(opt_.watchdog, partner);
            expect(corr, MessageKind::coarse_correction, c);
            detail::minimize(space, a, corr.payload, RecordKind::coarse, history);

            sweeps_per_cycle.push_back(sweeps);
            ++cycles;
            done = level_converged(level, space.residual_norm(), initial, cycles, cfg_.criteria);
        }
    } catch (const Timeout&) {
        throw;
    } catch (const WorkerFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw WorkerFailure("level " + std::to_string(level) + " smoother group failed: " +
                            e.what());
    }
    s.terminate(*this, last_cycle);

    SolveResult res = detail::finish(space, cycles, done, initial, history);
    res.sweeps_per_cycle = std::move(sweeps_per_cycle);
    return res;
}

void check_assignment(const MultigridContext& ctx, const GroupAssignment& groups)
{
    if (groups.smoother_workers.size() + 1 != ctx.levels()) {
        throw InvalidInput("group assignment does not match a " + std::to_string(ctx.levels()) +
                           "-level hierarchy");
    }
}

}  // namespace

SolveResult async_solve(const MultigridContext& ctx, std::span<const double> b,
                        std::span<const double> x0, const CycleConfig& cfg,
                        const GroupAssignment& groups, const AsyncOptions& options)
{
    check_assignment(ctx, groups);
    ConvergenceHistory history;
    ConvergenceHistory* hist = cfg.history_enabled ? &history : nullptr;
    SolveResult res;
    if (ctx.levels() == 1) {
        cfg.validate();
        res = detail::direct_level(ctx, 0, b, x0, cfg, hist);
    } else {
        Engine engine(ctx, cfg, groups, options);
        res = engine.async_level(0, b, x0, hist);
    }
    res.history = std::move(history);
    return res;
}

SolveResult hybrid_solve(const MultigridContext& ctx, std::span<const double> b,
                         std::span<const double> x0, const CycleConfig& cfg,
                         const GroupAssignment& groups, const AsyncOptions& options)
{
    check_assignment(ctx, groups);
    if (ctx.levels() < 2) {
        throw InvalidInput("hybrid solver needs a hierarchy with at least 2 levels");
    }
    Engine engine(ctx, cfg, groups, options);
    ConvergenceHistory history;
    SolveResult res = detail::run_sync_level(
        ctx, 0, b, x0, cfg, detail::ResidualOrder::multiplicative, engine.pool(0),
        [&](std::size_t l, std::span<const double> r) { return engine.nested_correction(l, r); },
        cfg.history_enabled ? &history : nullptr);
    res.history = std::move(history);
    return res;
}

SolveResult solve(const MultigridContext& ctx, std::span<const double> b,
                  std::span<const double> x0, const CycleConfig& cfg,
                  const GroupAssignment& groups, const AsyncOptions& options)
{
    switch (cfg.variant) {
    case Variant::multiplicative_sync: {
        WorkerPool pool(groups.total());
        return orthomg_solve_multiplicative(ctx, b, x0, cfg, &pool);
    }
    case Variant::additive_sync: {
        WorkerPool pool(groups.total());
        return orthomg_solve_additive(ctx, b, x0, cfg, &pool);
    }
    case Variant::additive_task_parallel:
        return async_solve(ctx, b, x0, cfg, groups, options);
    case Variant::hybrid:
        return hybrid_solve(ctx, b, x0, cfg, groups, options);
    }
    throw InvalidInput("unknown solver variant");
}

}  // namespace orthomg
