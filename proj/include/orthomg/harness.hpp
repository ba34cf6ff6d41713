#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "orthomg/config.hpp"

namespace orthomg {

/// Exit codes of the command-line entry points.
enum ExitCode : int {
    kExitConverged = 0,
    kExitInvalid = 1,
    kExitNotConverged = 2,
    kExitSolverError = 3,
};

/// Assembled system and hierarchy for one problem size, shared by every run
/// on that size.
struct PreparedProblem {
    ProblemSpec spec;
    std::shared_ptr<const GridHierarchy> hierarchy;
    Vector rhs;
};

PreparedProblem prepare_problem(const RunConfig& config, std::size_t cells_per_axis);

/// Right-hand side selected by config.rhs_mode (random entries come from
/// config.seed).
Vector make_rhs(const RunConfig& config, const LinearSystem& system);

struct RunRecord {
    Variant variant = Variant::multiplicative_sync;
    std::size_t repetition = 0;
    std::size_t workers = 1;
    std::size_t cells_per_axis = 0;
    std::size_t dofs = 0;
    std::size_t levels = 0;
    double seconds = 0.0;
    std::size_t iterations = 0;
    double initial_residual = 0.0;
    double final_residual = 0.0;
    bool converged = false;
    /// Set when the run threw; the message is kept in `error`.
    bool failed = false;
    std::string error;
    /// invalid_input, singular_matrix, numerical_failure, timeout,
    /// worker_failure or error; empty unless failed.
    std::string error_kind;
    std::string digest;
    SolveResult result;
};

/// One timed solve (the clock covers the solver call only). Solver errors
/// are captured in the record instead of propagating.
RunRecord run_once(const RunConfig& config, const PreparedProblem& problem,
                   const MultigridContext& ctx, Variant variant, std::size_t workers,
                   MessageTrace* trace = nullptr);

int cmd_solve(const RunConfig& config, const std::filesystem::path& output, std::ostream& log);
int cmd_compare(const RunConfig& config, const std::filesystem::path& output, std::ostream& log);
int cmd_scaling(const RunConfig& config, const std::filesystem::path& output, std::ostream& log);

}  // namespace orthomg
