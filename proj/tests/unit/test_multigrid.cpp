#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "orthomg/errors.hpp"
#include "orthomg/multigrid.hpp"

using namespace orthomg;

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

SolveResult run(const Setup& s, Variant v, const Vector& b)
{
    const Vector x0(b.size(), 0.0);
    return v == Variant::multiplicative_sync
               ? orthomg_solve_multiplicative(s.ctx, b, x0, cycle(v))
               : orthomg_solve_additive(s.ctx, b, x0, cycle(v));
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

double true_residual(const CsrMatrix& a, const Vector& x, const Vector& b)
{
    Vector r(b.size());
    residual_into(a, x, b, r);
    return norm2(r);
}

const Variant kSync[] = {Variant::multiplicative_sync, Variant::additive_sync};

}  // namespace

TEST_CASE("level-local criteria")
{
    const ConvergenceCriteria c;
    CHECK(level_converged(1, 0.09, 1.0, 3, c));
    CHECK_FALSE(level_converged(1, 0.2, 1.0, 3, c));
    CHECK(level_converged(1, 0.9, 1.0, 20, c));
    CHECK(level_converged(2, 0.9, 1.0, 2, c));
    CHECK(level_converged(2, 0.4, 1.0, 1, c));
    CHECK_FALSE(level_converged(2, 0.9, 1.0, 1, c));
    CHECK(level_converged(3, 5.0, 1.0, 1, c));
    CHECK(level_converged(7, 5.0, 1.0, 1, c));
    CHECK_FALSE(level_converged(3, 5.0, 1.0, 0, c));
    CHECK(level_converged(0, 0.9e-8, 1.0, 1, c));
    CHECK(level_converged(0, 0.9e-8, 1e6, 1, c));
    CHECK_FALSE(level_converged(0, 1e-4, 1.0, 50, c));
}

TEST_CASE("criteria and cycle validation")
{
    ConvergenceCriteria c;
    c.level1_factor = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = {};
    c.level2_factor = 1.5;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = {};
    c.level1_max_iterations = 0;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    CycleConfig cfg;
    cfg.max_outer_iterations = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    CHECK(parse_variant("hybrid") == Variant::hybrid);
    CHECK(to_string(Variant::additive_task_parallel) == "additive_task_parallel");
    CHECK_THROWS_AS(parse_variant("v_cycle"), InvalidInput);
}

TEST_CASE("coarsest solve")
{
    CHECK(coarsest_solve(CsrMatrix::identity(5), Vector{1, 2, 3, 4, 5}) == Vector{1, 2, 3, 4, 5});
    const auto s = make(64, 64);
    const auto& a = s.ctx.matrix(s.ctx.levels() - 1);
    CHECK(s.ctx.coarse_solver().solve(Vector(a.n_rows, 0.0)) == Vector(a.n_rows, 0.0));
    std::mt19937_64 rng(4);
    for (std::size_t l = 0; l < s.ctx.levels(); ++l) {
        const auto& al = s.ctx.matrix(l);
        const auto r = oracle::random_vector(al.n_rows, rng);
        const auto z = l + 1 == s.ctx.levels() ? s.ctx.coarse_solver().solve(r) : coarsest_solve(al, r);
        CHECK(true_residual(al, z, r) <= 1e-11 * norm2(r));
    }
    const auto singular = CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}});
    CHECK_THROWS_AS(CoarseSolver{singular}, SingularMatrix);
}

TEST_CASE("zero right-hand side returns at once")
{
    const auto s = make(16, 16);
    for (Variant v : kSync) {
        const auto r = run(s, v, Vector(s.b.size(), 0.0));
        CHECK(r.converged());
        CHECK(r.iterations == 0);
        REQUIRE(r.history.size() == 2);
        CHECK(r.history.records.front().kind == RecordKind::initial);
        CHECK(r.history.records.back().kind == RecordKind::final);
        CHECK(r.x == Vector(s.b.size(), 0.0));
    }
}

TEST_CASE("single level converges in one iteration")
{
    const auto s = make(16, 1024);
    REQUIRE(s.ctx.levels() == 1);
    for (Variant v : kSync) {
        const auto r = run(s, v, s.b);
        CHECK(r.converged());
        CHECK(r.iterations == 1);
        CHECK(r.final_residual <= 1e-8 * r.initial_residual);
    }
}

TEST_CASE("identity system is solved by one combined correction")
{
    auto h = std::make_shared<const GridHierarchy>(
        build_hierarchy(CsrMatrix::identity(16), {2, 4}, 0.5, 4));
    REQUIRE(h->size() == 2);
    MultigridContext ctx(h, {});
    const Vector b{1, 2, 3, 4, 5, 6, 7, 8, 8, 7, 6, 5, 4, 3, 2, 1};
    const auto r = orthomg_solve_additive(ctx, b, Vector(16, 0.0), cycle(Variant::additive_sync));
    CHECK(r.converged());
    CHECK(r.iterations == 1);
    CHECK(true_residual(CsrMatrix::identity(16), r.x, b) <= 1e-12);
}

TEST_CASE("benchmark n=64: both orderings converge, multiplicative first")
{
    const auto s = make(64, 64);
    CHECK(s.ctx.levels() == 4);
    const auto mult = run(s, Variant::multiplicative_sync, s.b);
    const auto add = run(s, Variant::additive_sync, s.b);
    for (const auto* r : {&mult, &add}) {
        CHECK(r->converged());
        CHECK(r->final_residual <= 1e-8 * r->initial_residual);
        CHECK(true_residual(s.ctx.matrix(0), r->x, s.b) <= 1.0001e-8 * r->initial_residual);
        CHECK(monotone(r->history));
        CHECK(r->history.records.front().kind == RecordKind::initial);
        CHECK(r->history.records.back().kind == RecordKind::final);
    }
    MESSAGE("multiplicative " << mult.iterations << ", additive " << add.iterations);
    CHECK(mult.iterations <= add.iterations);
}

TEST_CASE("history records one entry per minimization")
{
    const auto s = make(32, 64);
    const auto r = run(s, Variant::multiplicative_sync, s.b);
    // pre, coarse and post per outer iteration on the finest level
    CHECK(r.history.size() == 2 + 3 * r.iterations);
    std::size_t coarse = 0;
    for (const auto& rec : r.history.records) {
        coarse += rec.kind == RecordKind::coarse;
    }
    CHECK(coarse == r.iterations);
}

TEST_CASE("block jacobi converges too")
{
    SmootherConfig sc;
    sc.kind = SmootherConfig::Kind::block_jacobi;
    const auto s = make(32, 64, sc);
    for (Variant v : kSync) {
        const auto r = run(s, v, s.b);
        CHECK(r.converged());
        CHECK(monotone(r.history));
    }
}

TEST_CASE("runs are deterministic")
{
    const auto s = make(32, 64);
    for (Variant v : kSync) {
        const auto a = run(s, v, s.b);
        const auto b = run(s, v, s.b);
        REQUIRE(a.history.size() == b.history.size());
        for (std::size_t i = 0; i < a.history.size(); ++i) {
            CHECK(a.history.records[i].residual == b.history.records[i].residual);
        }
        CHECK(a.x == b.x);
    }
}

TEST_CASE("pool does not change the numerics")
{
    const auto s = make(32, 64);
    WorkerPool pool(3);
    const Vector x0(s.b.size(), 0.0);
    const auto cfg = cycle(Variant::multiplicative_sync);
    CHECK(orthomg_solve_multiplicative(s.ctx, s.b, x0, cfg, &pool).x ==
          orthomg_solve_multiplicative(s.ctx, s.b, x0, cfg).x);
}

TEST_CASE("iteration cap is reported distinctly")
{
    const auto s = make(32, 64);
    auto cfg = cycle(Variant::multiplicative_sync);
    cfg.max_outer_iterations = 1;
    const auto r = orthomg_solve_multiplicative(s.ctx, s.b, Vector(s.b.size(), 0.0), cfg);
    CHECK_FALSE(r.converged());
    CHECK(r.status == SolveStatus::max_iterations);
    CHECK(r.iterations == 1);
    CHECK(r.final_residual < r.initial_residual);
}

TEST_CASE("non-zero initial guess and bad input")
{
    const auto s = make(32, 64);
    std::mt19937_64 rng(2);
    const auto x0 = oracle::random_vector(s.b.size(), rng);
    const auto r = orthomg_solve_multiplicative(s.ctx, s.b, x0, cycle(Variant::multiplicative_sync));
    CHECK(r.converged());
    CHECK(true_residual(s.ctx.matrix(0), r.x, s.b) <= 1.0001e-8 * r.initial_residual + 1e-8);

    CHECK_THROWS_AS(orthomg_solve_additive(s.ctx, Vector(3, 1.0), Vector(3, 0.0),
                                           cycle(Variant::additive_sync)),
                    InvalidInput);
    Vector bad = s.b;
    bad[5] = std::nan("");
    CHECK_THROWS_AS(run(s, Variant::multiplicative_sync, bad), NumericalFailure);
}

TEST_CASE("history csv")
{
    ConvergenceHistory h;
    h.add(RecordKind::initial, 1.0);
    h.add(RecordKind::smoother, 0.5);
    h.add(RecordKind::coarse, 0.25);
    h.add(RecordKind::final, 0.25);
    std::ostringstream out;
    h.write_csv(out);
    const std::string text = out.str();
    CHECK(text.rfind("step,residual,type\n", 0) == 0);
    CHECK(text.find(",initial\n") != std::string::npos);
    CHECK(text.find(",smoother\n") != std::string::npos);
    CHECK(text.find(",coarse\n") != std::string::npos);
    CHECK(text.find(",final\n") != std::string::npos);
    std::istringstream lines(text);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
    }
    CHECK(rows == 5);
}

TEST_CASE("smoother config validation")
{
    SmootherConfig sc;
    sc.iterations = 0;
    CHECK_THROWS_AS(sc.validate(), InvalidInput);
    sc = {};
    sc.kind = SmootherConfig::Kind::block_jacobi;
    sc.omega = 0.0;
    CHECK_THROWS_AS(sc.validate(), InvalidInput);
}
