#include "orthomg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <thread>

#include "json.hpp"

namespace orthomg {

namespace fs = std::filesystem;

namespace {

bool is_async(Variant v)
{
    return v == Variant::additive_task_parallel || v == Variant::hybrid;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

std::ofstream open_output(const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw InvalidInput("cannot write '" + path.string() + "'");
    }
    out.precision(17);
    return out;
}

struct Stats {
    double mean = 0.0, min = 0.0, max = 0.0;
    std::size_t iterations = 0;
    double final_residual = 0.0;
    bool converged = true;
    bool failed = false;
    std::string error;
};

Stats summarize(const std::vector<RunRecord>& runs)
{
    Stats s;
    std::size_t ok = 0;
    for (const auto& r : runs) {
        if (r.failed) {
            s.failed = true;
            s.converged = false;
            s.error = r.error;
            continue;
        }
        s.converged = s.converged && r.converged;
        s.min = ok == 0 ? r.seconds : std::min(s.min, r.seconds);
        s.max = ok == 0 ? r.seconds : std::max(s.max, r.seconds);
        s.mean += r.seconds;
        s.iterations = std::max(s.iterations, r.iterations);
        s.final_residual = r.final_residual;
        ++ok;
    }
    if (ok > 0) {
        s.mean /= static_cast<double>(ok);
    }
    return s;
}

void write_runs_header(std::ostream& out)
{
    out << "digest,variant,repetition,workers,n,dofs,seconds,iterations,final_residual,"
           "converged,failed,error\n";
}

void write_run(std::ostream& out, const RunRecord& r)
{
    out << r.digest << ',' << to_string(r.variant) << ',' << r.repetition << ',' << r.workers
        << ',' << r.cells_per_axis << ',' << r.dofs << ',' << r.seconds << ',' << r.iterations
        << ',' << r.final_residual << ',' << int(r.converged) << ',' << int(r.failed) << ','
        << csv_field(r.error) << '\n';
}

nlohmann::json summary_json(const RunConfig& config, const RunRecord& r)
{
    nlohmann::json j;
    j["variant"] = to_string(r.variant);
    j["digest"] = r.digest;
    j["cells_per_axis"] = r.cells_per_axis;
    j["dimension"] = config.problem.dimension;
    j["dofs"] = r.dofs;
    j["levels"] = r.levels;
    j["workers"] = r.workers;
    j["smoother"] = config.smoother.kind == SmootherConfig::Kind::schwarz ? "schwarz"
                                                                         : "block_jacobi";
    j["iterations"] = r.iterations;
    j["wall_seconds"] = r.seconds;
    j["initial_residual"] = r.initial_residual;
    j["final_residual"] = r.final_residual;
    j["relative_residual"] =
        r.initial_residual > 0.0 ? r.final_residual / r.initial_residual : 0.0;
    j["converged"] = r.converged;
    j["breakdowns"] = r.result.breakdowns;
    if (!r.result.sweeps_per_cycle.empty()) {
        j["sweeps_per_cycle"] = r.result.sweeps_per_cycle;
    }
    if (r.failed) {
        j["error"] = r.error;
        j["error_kind"] = r.error_kind;
    }
    return j;
}

}  // namespace

Vector make_rhs(const RunConfig& config, const LinearSystem& system)
{
    switch (config.rhs_mode) {
    case RhsMode::constant: return system.rhs;
    case RhsMode::zero: return Vector(system.rhs.size(), 0.0);
    case RhsMode::random: {
        std::mt19937_64 rng(config.seed);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        Vector b(system.rhs.size());
        for (auto& v : b) {
            v = dist(rng);
        }
        return b;
    }
    }
    return system.rhs;
}

PreparedProblem prepare_problem(const RunConfig& config, std::size_t cells_per_axis)
{
    PreparedProblem p;
    p.spec = config.problem;
    p.spec.cells_per_axis = cells_per_axis;
    const LinearSystem system = assemble_poisson(p.spec);
    p.rhs = make_rhs(config, system);
    p.hierarchy = std::make_shared<const GridHierarchy>(build_hierarchy(p.spec, config.min_coarse_dofs));
    return p;
}

RunRecord run_once(const RunConfig& config, const PreparedProblem& problem,
                   const MultigridContext& ctx, Variant variant, std::size_t workers,
                   MessageTrace* trace)
{
    RunRecord rec;
    rec.variant = variant;
    rec.workers = workers;
    rec.cells_per_axis = problem.spec.cells_per_axis;
    rec.dofs = problem.rhs.size();
    rec.levels = ctx.levels();
    RunConfig effective = config;
    effective.variant = variant;
    effective.workers = workers;
    effective.problem.cells_per_axis = problem.spec.cells_per_axis;
    rec.digest = digest_hex(effective);

    using Clock = std::chrono::steady_clock;
    try {
        const CycleConfig cycle = config.cycle_config(variant);
        const Vector x0(problem.rhs.size(), 0.0);
        Clock::time_point start;
        if (is_async(variant)) {
            const GroupAssignment groups =
                assign_groups(*problem.hierarchy, workers, config.coarsest_workers);
            AsyncOptions options = config.async_options();
            options.trace = trace;
            start = Clock::now();
            rec.result = variant == Variant::hybrid
                             ? hybrid_solve(ctx, problem.rhs, x0, cycle, groups, options)
                             : async_solve(ctx, problem.rhs, x0, cycle, groups, options);
        } else {
            WorkerPool pool(workers);
            start = Clock::now();
            rec.result = variant == Variant::multiplicative_sync
                             ? orthomg_solve_multiplicative(ctx, problem.rhs, x0, cycle, &pool)
                             : orthomg_solve_additive(ctx, problem.rhs, x0, cycle, &pool);
        }
        rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        rec.iterations = rec.result.iterations;
        rec.initial_residual = rec.result.initial_residual;
        rec.final_residual = rec.result.final_residual;
        rec.converged = rec.result.converged();
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
        if (dynamic_cast<const SingularMatrix*>(&e)) {
            rec.error_kind = "singular_matrix";
        } else if (dynamic_cast<const InvalidInput*>(&e)) {
            rec.error_kind = "invalid_input";
        } else if (dynamic_cast<const NumericalFailure*>(&e)) {
            rec.error_kind = "numerical_failure";
        } else if (dynamic_cast<const Timeout*>(&e)) {
            rec.error_kind = "timeout";
        } else if (dynamic_cast<const WorkerFailure*>(&e)) {
            rec.error_kind = "worker_failure";
        } else {
            rec.error_kind = "error";
        }
    }
    return rec;
}

int cmd_solve(const RunConfig& config, const fs::path& output, std::ostream& log)
{
    fs::create_directories(output);
    const PreparedProblem problem = prepare_problem(config, config.problem.cells_per_axis);
    const MultigridContext ctx(problem.hierarchy, config.smoother);

    MessageTrace trace;
    const bool tracing = config.write_trace && is_async(config.variant);
    RunRecord rec =
        run_once(config, problem, ctx, config.variant, config.workers, tracing ? &trace : nullptr);

    {
        auto out = open_output(output / "history.csv");
        rec.result.history.write_csv(out);
    }
    {
        auto out = open_output(output / "summary.json");
        out << summary_json(config, rec).dump(2) << '\n';
    }
    if (tracing) {
        auto out = open_output(output / "trace.csv");
        trace.write_csv(out);
    }

    if (rec.failed) {
        log << "solve failed: " << rec.error << '\n';
        return rec.error_kind == "invalid_input" ? kExitInvalid : kExitSolverError;
    }
    log << to_string(rec.variant) << ": n=" << rec.cells_per_axis << " dofs=" << rec.dofs
        << " levels=" << rec.levels << " iterations=" << rec.iterations
        << " residual=" << rec.final_residual << " seconds=" << rec.seconds
        << (rec.converged ? " converged" : " NOT converged") << '\n';
    return rec.converged ? kExitConverged : kExitNotConverged;
}

int cmd_compare(const RunConfig& config, const fs::path& output, std::ostream& log)
{
    fs::create_directories(output);
    const PreparedProblem problem = prepare_problem(config, config.problem.cells_per_axis);
    const MultigridContext ctx(problem.hierarchy, config.smoother);

    auto runs_out = open_output(output / "runs.csv");
    write_runs_header(runs_out);
    auto cmp = open_output(output / "compare.csv");
    cmp << "variant,repetitions,mean_seconds,min_seconds,max_seconds,iterations,"
           "final_residual,converged,failed,error\n";

    bool all_ok = true;
    for (Variant v : config.variants) {
        std::vector<RunRecord> runs;
        for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
            RunRecord r = run_once(config, problem, ctx, v, config.workers);
            r.repetition = rep;
            write_run(runs_out, r);
            runs.push_back(std::move(r));
            if (runs.back().failed) {
                break;
            }
        }
        const Stats s = summarize(runs);
        all_ok = all_ok && s.converged && !s.failed;
        cmp << to_string(v) << ',' << runs.size() << ',' << s.mean << ',' << s.min << ','
            << s.max << ',' << s.iterations << ',' << s.final_residual << ',' << int(s.converged)
            << ',' << int(s.failed) << ',' << csv_field(s.error) << '\n';
        log << to_string(v) << ": ";
        if (s.failed) {
            log << "FAILED (" << s.error << ")\n";
        } else {
            log << "iterations=" << s.iterations << " mean=" << s.mean << "s"
                << (s.converged ? "" : " NOT converged") << '\n';
        }
    }
    return all_ok ? kExitConverged : kExitNotConverged;
}

int cmd_scaling(const RunConfig& config, const fs::path& output, std::ostream& log)
{
    fs::create_directories(output);
    const std::vector<std::size_t> sizes =
        config.bench_sizes.empty() ? std::vector<std::size_t>{config.problem.cells_per_axis}
                                   : config.bench_sizes;
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());

    auto runs_out = open_output(output / "runs.csv");
    write_runs_header(runs_out);
    auto sc = open_output(output / "scaling.csv");
    sc << "workers,n,variant,mean_seconds,min_seconds,max_seconds,iterations,converged,"
          "ideal_seconds,oversubscribed,error\n";
    std::vector<std::string> warnings;

    bool all_ok = true;
    for (std::size_t n : sizes) {
        const PreparedProblem problem = prepare_problem(config, n);
        const MultigridContext ctx(problem.hierarchy, config.smoother);
        for (Variant v : config.variants) {
            std::optional<std::pair<std::size_t, double>> reference;
            for (std::size_t w : config.bench_workers) {
                const bool over = w > hw;
                if (over) {
                    warnings.push_back(std::to_string(w) + " workers exceed the " +
                                       std::to_string(hw) + " hardware threads (n=" +
                                       std::to_string(n) + ", " + std::string(to_string(v)) + ")");
                    log << "warning: " << warnings.back() << '\n';
                }
                const std::size_t minimum = problem.hierarchy->size() - 1 + config.coarsest_workers;
                if (is_async(v) && problem.hierarchy->size() > 1 && w < minimum) {
                    // The exchange protocol needs a worker per group.
                    sc << w << ',' << n << ',' << to_string(v) << ",,,,,0,," << int(over)
                       << ",skipped: needs at least " << minimum << " workers\n";
                    log << "n=" << n << ' ' << to_string(v) << " workers=" << w
                        << ": skipped (needs at least " << minimum << " workers)\n";
                    continue;
                }
                std::vector<RunRecord> runs;
                for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
                    RunRecord r = run_once(config, problem, ctx, v, w);
                    r.repetition = rep;
                    write_run(runs_out, r);
                    runs.push_back(std::move(r));
                    if (runs.back().failed) {
                        break;
                    }
                }
                const Stats s = summarize(runs);
                all_ok = all_ok && s.converged && !s.failed;
                if (!reference && !s.failed) {
                    reference = {w, s.mean};
                }
                sc << w << ',' << n << ',' << to_string(v) << ',';
                if (s.failed) {
                    sc << ",,,,0,,";
                } else {
                    const double ideal = reference->second * static_cast<double>(reference->first) /
                                         static_cast<double>(w);
                    sc << s.mean << ',' << s.min << ',' << s.max << ',' << s.iterations << ','
                       << int(s.converged) << ',' << ideal << ',';
                }
                sc << int(over) << ',' << csv_field(s.error) << '\n';
                log << "n=" << n << ' ' << to_string(v) << " workers=" << w << ": ";
                if (s.failed) {
                    log << "FAILED (" << s.error << ")\n";
                } else {
                    log << "mean=" << s.mean << "s iterations=" << s.iterations << '\n';
                }
            }
        }
    }
    if (!warnings.empty()) {
        auto out = open_output(output / "warnings.txt");
        for (const auto& w : warnings) {
            out << w << '\n';
        }
    }
    return all_ok ? kExitConverged : kExitNotConverged;
}

}  // namespace orthomg
