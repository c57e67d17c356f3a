// refract command-line interface.
//
// Subcommands: solve, sweep, simulate, check, special.  Exit codes:
//   0  success, all diagnostics within thresholds
//   1  validation or configuration error (bad flags, bad config, bad model)
//   2  numerical failure (a solver or series did not converge)
//   3  diagnostics computed but at least one missed its threshold

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "refract/commands.hpp"
#include "refract/config.hpp"
#include "refract/error.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    bool quiet = false;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "run configuration file (INI)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", args.out_dir, "output directory (overrides the config)");
    sub->add_flag("--quiet", args.quiet, "suppress the console summary");
}

refract::RunConfig load_with_overrides(const CommonArgs& args) {
    refract::RunConfig cfg = refract::load_run_config(args.config_path);
    if (!args.out_dir.empty()) cfg.output.directory = args.out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"refract: optimal withdrawal from a diffusion under a state-dependent bound"};
    app.require_subcommand(1);

    CommonArgs solve_args;
    refract::SolveFlags solve_flags;
    std::string dump_fund, dump_res;
    CLI::App* solve = app.add_subcommand(
        "solve", "solve the control problem and write solution.json + CSV tables");
    add_common(solve, solve_args);
    solve->add_option("--dump-fundamentals", dump_fund,
                      "write the fundamental-pair table to this path");
    solve->add_option("--dump-resolvent", dump_res, "write the resolvent table to this path");

    CommonArgs sweep_args;
    CLI::App* sweep = app.add_subcommand(
        "sweep", "sweep the withdrawal bound's (intercept, slope) grid into heatmap.csv");
    add_common(sweep, sweep_args);

    CommonArgs sim_args;
    double sim_barrier = 0.0, sim_dt = 0.0, sim_x0 = 0.0;
    long long sim_paths = 0;
    std::uint64_t sim_seed = 0;
    CLI::App* simulate = app.add_subcommand(
        "simulate", "Monte Carlo the refraction strategy and compare to the analytic value");
    add_common(simulate, sim_args);
    simulate->add_option("--barrier", sim_barrier,
                         "refraction barrier (defaults to the solved optimum)");
    simulate->add_option("--paths", sim_paths, "number of Monte Carlo paths");
    simulate->add_option("--dt", sim_dt, "Euler step size");
    simulate->add_option("--x0", sim_x0, "starting state");
    simulate->add_option("--seed", sim_seed, "random seed");

    CommonArgs check_args;
    CLI::App* check = app.add_subcommand(
        "check", "run the cross-module invariant battery and write check_report.json");
    add_common(check, check_args);

    std::string sf_name;
    std::vector<double> sf_params;
    CLI::App* special =
        app.add_subcommand("special", "evaluate one special-function kernel as JSON");
    special->add_option("name", sf_name, "M | U | D (or kummer_m, tricomi_u, parabolic_cylinder_d)")
        ->required();
    special->add_option("params", sf_params, "parameters: M/U take a b z, D takes lambda z");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help and friends: print and exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // usage problems are configuration errors
    }

    try {
        if (solve->parsed()) {
            solve_flags.quiet = solve_args.quiet;
            if (!dump_fund.empty()) solve_flags.dump_fundamentals = dump_fund;
            if (!dump_res.empty()) solve_flags.dump_resolvent = dump_res;
            return refract::run_solve(load_with_overrides(solve_args), solve_flags);
        }
        if (sweep->parsed())
            return refract::run_sweep(load_with_overrides(sweep_args), sweep_args.quiet);
        if (simulate->parsed()) {
            refract::RunConfig cfg = load_with_overrides(sim_args);
            if (simulate->count("--paths") > 0) cfg.sim.n_paths = sim_paths;
            if (simulate->count("--dt") > 0) cfg.sim.dt = sim_dt;
            if (simulate->count("--x0") > 0) cfg.sim.x0 = sim_x0;
            if (simulate->count("--seed") > 0) cfg.sim.seed = sim_seed;
            std::optional<double> barrier;
            if (simulate->count("--barrier") > 0) barrier = sim_barrier;
            return refract::run_simulate(cfg, barrier, sim_args.quiet);
        }
        if (check->parsed())
            return refract::run_check(load_with_overrides(check_args), check_args.quiet);
        if (special->parsed()) return refract::run_special(sf_name, sf_params);
    } catch (const refract::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return refract::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
