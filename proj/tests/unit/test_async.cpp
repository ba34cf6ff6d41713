#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "orthomg/async.hpp"
#include "trace_check.hpp"

using namespace orthomg;
using namespace std::chrono_literals;

namespace {

struct Setup {
    std::shared_ptr<const GridHierarchy> hierarchy;
    MultigridContext ctx;
    Vector b;
};

Setup make(std::size_t n, std::size_t min_coarse, SmootherConfig sc = {})
{
    ProblemSpec spec;
    spec.cells_per_axis = n;
    auto h = std::make_shared<const GridHierarchy>(build_hierarchy(spec, min_coarse));
    MultigridContext ctx(h, sc);
    return {h, std::move(ctx), assemble_poisson(spec).rhs};
}

CycleConfig cycle(Variant v)
{
    CycleConfig c;
    c.variant = v;
    return c;
}

AsyncOptions deterministic(std::size_t k, MessageTrace* trace = nullptr)
{
    AsyncOptions o;
    o.scheduler = SchedulerMode::deterministic(k);
    o.trace = trace;
    return o;
}

bool same_history(const ConvergenceHistory& a, const ConvergenceHistory& b, double tol)
{
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a.records[i];
        const auto& y = b.records[i];
        if (x.kind != y.kind || x.step != y.step ||
            std::abs(x.residual - y.residual) > tol * std::max(std::abs(y.residual), 1e-300)) {
            return false;
        }
    }
    return true;
}

bool monotone(const ConvergenceHistory& h)
{
    for (std::size_t i = 1; i < h.records.size(); ++i) {
        if (h.records[i].residual > h.records[i - 1].residual) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("group assignment")
{
    const auto s = make(64, 64);
    const auto ga = assign_groups(s.ctx.hierarchy(), 8, 1);
    CHECK(ga.smoother_workers == std::vector<std::size_t>{5, 1, 1});
    CHECK(ga.coarsest_workers == 1);
    CHECK(ga.total() == 8);
    CHECK(ga.coarse_workers(0) == 3);
    CHECK(ga.coarse_workers(2) == 1);
    CHECK(ga.first_worker_id(0) == 0);
    CHECK(ga.first_worker_id(1) == 5);
    CHECK(ga.first_worker_id(3) == 7);

    const auto ones = assign_groups(s.ctx.hierarchy(), 4, 1);
    CHECK(ones.smoother_workers == std::vector<std::size_t>{1, 1, 1});

    const auto two = make(16, 64);
    REQUIRE(two.ctx.levels() == 2);
    const auto minimal = assign_groups(two.ctx.hierarchy(), 2, 1);
    CHECK(minimal.smoother_workers == std::vector<std::size_t>{1});
    CHECK(minimal.coarsest_workers == 1);

    CHECK_THROWS_WITH_AS(assign_groups(s.ctx.hierarchy(), 3, 1), doctest::Contains("at least 4"),
                         InvalidInput);
    CHECK_THROWS_AS(assign_groups(s.ctx.hierarchy(), 8, 0), InvalidInput);
}

TEST_CASE("group assignment matches the apportionment oracle")
{
    for (std::size_t n : {32u, 64u, 128u}) {
        for (std::size_t lmin : {16u, 64u, 256u}) {
            ProblemSpec spec;
            spec.cells_per_axis = n;
            const auto h = build_hierarchy(spec, lmin);
            if (h.size() < 2) {
                continue;
            }
            std::vector<std::size_t> weights;
            for (std::size_t l = 0; l + 1 < h.size(); ++l) {
                weights.push_back(h[l].n_dofs());
            }
            for (std::size_t coarsest : {1u, 2u}) {
                for (std::size_t total = weights.size() + coarsest; total <= 40; ++total) {
                    const auto ga = assign_groups(h, total, coarsest);
                    CHECK(ga.smoother_workers == oracle::apportion(total - coarsest, weights));
                    CHECK(ga.total() == total);
                }
            }
        }
    }
}

TEST_CASE("placement roles")
{
    const auto s = make(16, 64);
    const auto& h = s.ctx.hierarchy();
    auto b = intergrid_placement(h, 0);
    CHECK(b.restriction == Role::coarse);
    CHECK(b.prolongation == Role::coarse);
    auto a = intergrid_placement(h, 0, TransferPlacement::both_groups);
    CHECK(a.restriction == Role::smoother);
    CHECK(a.prolongation == Role::coarse);
    auto c = intergrid_placement(h, 1);
    CHECK_FALSE(c.restriction.has_value());
    CHECK_FALSE(c.prolongation.has_value());
    CHECK(parse_placement("B") == TransferPlacement::coarse_group);
    CHECK(parse_placement("both_groups") == TransferPlacement::both_groups);
    CHECK_THROWS_AS(parse_placement("C"), InvalidInput);
}

TEST_CASE("channel")
{
    Channel<int> ch;
    CHECK_FALSE(ch.try_receive().has_value());
    ch.send(1);
    ch.send(2);
    CHECK(ch.try_receive() == 1);
    CHECK(ch.receive(10ms, "x") == 2);
    CHECK_THROWS_AS(ch.receive(10ms, "nothing"), Timeout);
    std::thread t([&] {
        std::this_thread::sleep_for(5ms);
        ch.send(7);
    });
    CHECK(ch.receive(5s, "sender") == 7);
    t.join();
    ch.fail(std::make_exception_ptr(WorkerFailure("gone")));
    CHECK_THROWS_AS(ch.receive(10ms, "x"), WorkerFailure);
}

TEST_CASE("deterministic k=1 on two levels equals the synchronous additive cycle")
{
    for (std::size_t n : {16u, 32u}) {
        const auto s = make(n, n * n / 4);
        REQUIRE(s.ctx.levels() == 2);
        const Vector x0(s.b.size(), 0.0);
        const auto sync = orthomg_solve_additive(s.ctx, s.b, x0, cycle(Variant::additive_sync));
        const auto ga = assign_groups(s.ctx.hierarchy(), 2);
        const auto async = async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga,
                                       deterministic(1));
        CHECK(async.converged());
        CHECK(async.iterations == sync.iterations);
        CHECK(same_history(async.history, sync.history, 1e-12));
    }
}

TEST_CASE("zero right-hand side terminates cleanly")
{
    const auto s = make(32, 64);
    const auto ga = assign_groups(s.ctx.hierarchy(), 4);
    MessageTrace trace;
    AsyncOptions opt;
    opt.trace = &trace;
    const Vector zero(s.b.size(), 0.0);
    const auto r = async_solve(s.ctx, zero, zero, cycle(Variant::additive_task_parallel), ga, opt);
    CHECK(r.converged());
    CHECK(r.iterations == 0);
    CHECK(r.history.size() == 2);
    const auto recs = trace.records();
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].kind == "terminate");
    const auto h = hybrid_solve(s.ctx, zero, zero, cycle(Variant::hybrid), ga, opt);
    CHECK(h.iterations == 0);
    CHECK(h.history.size() == 2);
}

TEST_CASE("realtime run on the benchmark")
{
    const auto s = make(64, 64);
    const Vector x0(s.b.size(), 0.0);
    const auto mult =
        orthomg_solve_multiplicative(s.ctx, s.b, x0, cycle(Variant::multiplicative_sync));
    const auto ga = assign_groups(s.ctx.hierarchy(), 4);
    MessageTrace trace;
    AsyncOptions opt;
    opt.trace = &trace;
    const auto r = async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga, opt);
    CHECK(r.converged());
    CHECK(r.final_residual <= 1e-8 * r.initial_residual);
    CHECK(r.iterations <= 2 * mult.iterations);
    CHECK(monotone(r.history));
    REQUIRE(r.sweeps_per_cycle.size() == r.iterations);
    for (auto k : r.sweeps_per_cycle) {
        CHECK(k >= 1);
    }
    const auto rep = trace_check::check(trace.records());
    CHECK_MESSAGE(rep.ok(), rep.summary());
}

TEST_CASE("hybrid on two levels equals the multiplicative cycle")
{
    const auto s = make(32, 256);
    REQUIRE(s.ctx.levels() == 2);
    const Vector x0(s.b.size(), 0.0);
    const auto mult =
        orthomg_solve_multiplicative(s.ctx, s.b, x0, cycle(Variant::multiplicative_sync));
    const auto h = hybrid_solve(s.ctx, s.b, x0, cycle(Variant::hybrid),
                                assign_groups(s.ctx.hierarchy(), 2));
    CHECK(h.converged());
    CHECK(same_history(h.history, mult.history, 1e-12));
}

TEST_CASE("hybrid converges on deeper hierarchies")
{
    const auto s = make(64, 64);
    const Vector x0(s.b.size(), 0.0);
    for (std::size_t workers : {4u, 8u}) {
        const auto ga = assign_groups(s.ctx.hierarchy(), workers);
        for (const auto& opt : {AsyncOptions{}, deterministic(2)}) {
            const auto h = hybrid_solve(s.ctx, s.b, x0, cycle(Variant::hybrid), ga, opt);
            CHECK(h.converged());
            CHECK(monotone(h.history));
        }
    }
    CHECK_THROWS_AS(hybrid_solve(make(8, 1024).ctx, Vector(64, 1.0), Vector(64, 0.0),
                                 cycle(Variant::hybrid), GroupAssignment{{}, 1}),
                    InvalidInput);
}

TEST_CASE("transfer placement changes attribution, not numerics")
{
    const auto s = make(32, 256);
    const Vector x0(s.b.size(), 0.0);
    const auto ga = assign_groups(s.ctx.hierarchy(), 2);
    MessageTrace tb, ta;
    auto ob = deterministic(2, &tb);
    auto oa = deterministic(2, &ta);
    oa.placement = TransferPlacement::both_groups;
    const auto rb = async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga, ob);
    const auto ra = async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga, oa);
    CHECK(same_history(ra.history, rb.history, 0.0));
    CHECK(ra.x == rb.x);

    std::size_t checked = 0;
    for (const auto& r : tb.records()) {
        if (r.kind == "restrict" || r.kind == "prolong") {
            CHECK(r.role == Role::coarse);
            CHECK(r.worker == ga.first_worker_id(1));
            CHECK(r.level == 0);
            ++checked;
        }
    }
    CHECK(checked == 2 * rb.iterations);
    for (const auto& r : ta.records()) {
        if (r.kind == "restrict") {
            CHECK(r.role == Role::smoother);
            CHECK(r.worker == ga.first_worker_id(0));
        }
        if (r.kind == "prolong") {
            CHECK(r.role == Role::coarse);
        }
    }
    // the coarsest level has no transfer operators
    for (const auto& r : tb.records()) {
        CHECK(r.level < s.ctx.levels() - 1);
    }
}

TEST_CASE("nested sessions obey the protocol")
{
    const auto s = make(64, 64);
    const Vector x0(s.b.size(), 0.0);
    const auto ga = assign_groups(s.ctx.hierarchy(), 8);
    MessageTrace trace;
    for (const auto& base : {AsyncOptions{}, deterministic(3)}) {
        trace.clear();
        AsyncOptions opt = base;
        opt.trace = &trace;
        const auto r = async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga, opt);
        CHECK(r.converged());
        const auto recs = trace.records();
        const auto rep = trace_check::check(recs);
        CHECK_MESSAGE(rep.ok(), rep.summary());
        std::set<std::size_t> levels;
        for (const auto& rec : recs) {
            levels.insert(rec.level);
        }
        // levels 0..2 exchange; level 3 is the direct solve
        CHECK(levels == std::set<std::size_t>{0, 1, 2});
    }
}

TEST_CASE("deterministic mode is reproducible")
{
    const auto s = make(64, 64);
    const Vector x0(s.b.size(), 0.0);
    const auto ga = assign_groups(s.ctx.hierarchy(), 8);
    for (std::size_t k : {1u, 3u}) {
        const auto a = async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga,
                                   deterministic(k));
        const auto b = async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga,
                                   deterministic(k));
        CHECK(a.converged());
        CHECK(same_history(a.history, b.history, 0.0));
        CHECK(a.x == b.x);
        CHECK(a.sweeps_per_cycle == std::vector<std::size_t>(a.iterations, k));
    }
}

TEST_CASE("delayed coarse solves still converge")
{
    const auto s = make(64, 64);
    const Vector x0(s.b.size(), 0.0);
    const auto ga = assign_groups(s.ctx.hierarchy(), 4);
    AsyncOptions opt;
    opt.before_coarse_solve = [](std::size_t level, std::size_t) {
        if (level == 0) {
            std::this_thread::sleep_for(20ms);
        }
    };
    const auto r = async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga, opt);
    CHECK(r.converged());
    CHECK(monotone(r.history));
    CHECK(r.sweeps_per_cycle.front() >= 1);
}

TEST_CASE("watchdog raises a timeout")
{
    const auto s = make(32, 64);
    const Vector x0(s.b.size(), 0.0);
    const auto ga = assign_groups(s.ctx.hierarchy(), 4);
    AsyncOptions opt = deterministic(1);
    opt.watchdog = 50ms;
    opt.before_coarse_solve = [](std::size_t, std::size_t) { std::this_thread::sleep_for(300ms); };
    CHECK_THROWS_WITH_AS(
        async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga, opt),
        doctest::Contains("watchdog"), Timeout);
}

TEST_CASE("worker failures name level and role")
{
    const auto s = make(64, 64);
    const Vector x0(s.b.size(), 0.0);
    const auto ga = assign_groups(s.ctx.hierarchy(), 8);
    const auto run = [&](const AsyncOptions& opt) {
        return async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga, opt);
    };

    AsyncOptions coarse;
    coarse.before_coarse_solve = [](std::size_t level, std::size_t) {
        if (level == 0) {
            throw std::runtime_error("injected");
        }
    };
    CHECK_THROWS_WITH_AS(run(coarse), "level 0 coarse group failed: injected", WorkerFailure);

    AsyncOptions smoother;
    smoother.after_smoother_sweep = [](std::size_t level, std::size_t cycle) {
        if (level == 1 && cycle == 0) {
            throw std::runtime_error("injected");
        }
    };
    CHECK_THROWS_WITH_AS(run(smoother), "level 1 smoother group failed: injected", WorkerFailure);

    AsyncOptions nested;
    nested.before_coarse_solve = [](std::size_t level, std::size_t) {
        if (level == 2) {
            throw std::runtime_error("deep");
        }
    };
    CHECK_THROWS_WITH_AS(run(nested), "level 2 coarse group failed: deep", WorkerFailure);
    CHECK_THROWS_AS(hybrid_solve(s.ctx, s.b, x0, cycle(Variant::hybrid), ga, nested),
                    WorkerFailure);
}

TEST_CASE("invalid async arguments")
{
    const auto s = make(32, 64);
    const Vector x0(s.b.size(), 0.0);
    const auto ga = assign_groups(s.ctx.hierarchy(), 3);
    CHECK_THROWS_AS(async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel),
                                GroupAssignment{{1}, 1}),
                    InvalidInput);
    CHECK_THROWS_AS(async_solve(s.ctx, s.b, x0, cycle(Variant::additive_task_parallel), ga,
                                deterministic(0)),
                    InvalidInput);
    CHECK_THROWS_AS(async_solve(s.ctx, Vector(3, 0.0), Vector(3, 0.0),
                                cycle(Variant::additive_task_parallel), ga),
                    InvalidInput);
}

TEST_CASE("single level falls back to a direct solve")
{
    const auto s = make(16, 1024);
    REQUIRE(s.ctx.levels() == 1);
    const auto r = async_solve(s.ctx, s.b, Vector(s.b.size(), 0.0),
                               cycle(Variant::additive_task_parallel), GroupAssignment{{}, 1});
    CHECK(r.converged());
    CHECK(r.iterations == 1);
}

TEST_CASE("dispatch covers every variant")
{
    const auto s = make(32, 64);
    const Vector x0(s.b.size(), 0.0);
    const auto ga = assign_groups(s.ctx.hierarchy(), 4);
    for (Variant v : {Variant::additive_sync, Variant::multiplicative_sync,
                      Variant::additive_task_parallel, Variant::hybrid}) {
        const auto r = solve(s.ctx, s.b, x0, cycle(v), ga);
        CHECK(r.converged());
        CHECK(monotone(r.history));
    }
}

TEST_CASE("trace csv")
{
    MessageTrace t;
    t.record(0, Role::coarse, "prolong", 3, 1, 5);
    std::ostringstream out;
    t.write_csv(out);
    const std::string s = out.str();
    CHECK(s.rfind("wall_time,level,role,kind,cycle_index,session,worker\n", 0) == 0);
    CHECK(s.find(",0,coarse,prolong,3,1,5\n") != std::string::npos);
}
