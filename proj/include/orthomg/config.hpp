#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "orthomg/async.hpp"
#include "orthomg/multigrid.hpp"
#include "orthomg/problem.hpp"

namespace orthomg {

enum class RhsMode { constant, zero, random };

/// Everything a run needs. Text form: one `section.key = value` per line,
/// `#` starts a comment, lists are comma separated. See README for the keys.
struct RunConfig {
    ProblemSpec problem;
    RhsMode rhs_mode = RhsMode::constant;
    std::size_t min_coarse_dofs = kDefaultMinCoarseDofs;

    Variant variant = Variant::multiplicative_sync;
    std::vector<Variant> variants{Variant::additive_sync, Variant::multiplicative_sync,
                                  Variant::additive_task_parallel, Variant::hybrid};
    std::size_t max_outer_iterations = 100;
    ConvergenceCriteria criteria;
    SmootherConfig smoother;

    std::size_t workers = 1;
    std::size_t coarsest_workers = 1;
    SchedulerMode scheduler;
    TransferPlacement placement = TransferPlacement::coarse_group;
    double watchdog_seconds = 60.0;

    std::uint64_t seed = 0;
    std::string output_directory = "orthomg_out";
    bool write_trace = false;

    std::size_t repetitions = 3;
    std::vector<std::size_t> bench_workers{1, 2, 4, 8};
    /// Empty: only problem.cells_per_axis.
    std::vector<std::size_t> bench_sizes;

    void validate() const;
    CycleConfig cycle_config(Variant v) const;
    AsyncOptions async_options() const;
};

/// Thrown for unparsable or invalid configuration text; the message names
/// the line and key.
class ConfigError : public InvalidInput {
public:
    ConfigError(std::size_t line, const std::string& key, const std::string& what);

    std::size_t line() const noexcept { return line_; }
    const std::string& key() const noexcept { return key_; }

private:
    std::size_t line_;
    std::string key_;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(serialize(c)) reproduces c exactly.
std::string serialize(const RunConfig& config);
/// FNV-1a of the canonical text.
std::uint64_t digest(const RunConfig& config);
std::string digest_hex(const RunConfig& config);

/// Environment variable overriding `workers`.
inline constexpr const char* kWorkersEnv = "ORTHOMG_WORKERS";
/// Applies the environment overrides; returns true if anything changed.
bool apply_environment(RunConfig& config);

std::string_view to_string(RhsMode m);

}  // namespace orthomg
