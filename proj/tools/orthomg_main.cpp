#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "orthomg/harness.hpp"

namespace {

struct Command {
    std::string config;
    std::string output;
};

int run(const Command& cmd, int (*body)(const orthomg::RunConfig&, const std::filesystem::path&,
                                        std::ostream&))
{
    try {
        orthomg::RunConfig cfg = orthomg::load_config(cmd.config);
        if (orthomg::apply_environment(cfg)) {
            cfg.validate();
            std::cerr << "workers overridden by " << orthomg::kWorkersEnv << ": " << cfg.workers
                      << '\n';
        }
        const std::filesystem::path out = cmd.output.empty() ? cfg.output_directory : cmd.output;
        return body(cfg, out, std::cout);
    } catch (const orthomg::InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return orthomg::kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return orthomg::kExitSolverError;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Orthonormalization multigrid solver and benchmark harness"};
    app.require_subcommand(1);

    Command solve, compare, scaling;
    auto add = [&](const char* name, const char* help, Command& c) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config,-c", c.config, "run configuration file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--output,-o", c.output,
                        "output directory (default: output.directory from the config)");
        return sub;
    };
    auto* s = add("solve", "run one solve; writes history.csv and summary.json", solve);
    auto* c = add("compare", "run every listed variant on the same system; writes compare.csv",
                  compare);
    auto* k = add("scaling", "sweep worker counts and sizes; writes scaling.csv", scaling);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : orthomg::kExitInvalid;
    }

    if (s->parsed()) {
        return run(solve, orthomg::cmd_solve);
    }
    if (c->parsed()) {
        return run(compare, orthomg::cmd_compare);
    }
    return run(scaling, orthomg::cmd_scaling);
}
