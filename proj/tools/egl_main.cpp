// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// egl run    --config <path> --seed <u64> --out <dir> [--force]
// egl sweep  --config <path> --axis <key=v1,v2,...> [--axis ...] --seeds <s1,s2,...> --out <dir> [--force]
// egl verify
//
// EGL_THREADS caps worker-level parallelism; unset means single-threaded.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "egl/commands.hpp"
#include "egl/errors.hpp"
#include "egl/sim.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Lock-step simulator for gossip-based distributed SGD"};
    app.require_subcommand(1);

    std::string run_config;
    std::uint64_t run_seed = 0;
    std::string run_out;
    bool run_force = false;
    auto* run = app.add_subcommand("run", "Run one experiment");
    run->add_option("--config", run_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    auto* seed_opt = run->add_option("--seed", run_seed, "Master seed (overrides the config)");
    run->add_option("--out", run_out, "Output directory")->required();
    run->add_flag("--force", run_force, "Overwrite existing outputs");

    std::string sweep_config;
    std::vector<std::string> sweep_axes;
    std::vector<std::uint64_t> sweep_seeds;
    std::string sweep_out;
    bool sweep_force = false;
    auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of axis values x seeds");
    sweep->add_option("--config", sweep_config, "Base experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--axis", sweep_axes, "key=v1,v2,... (repeatable)");
    sweep->add_option("--seeds", sweep_seeds, "Comma-separated seeds")->required()->delimiter(',');
    sweep->add_option("--out", sweep_out, "Output directory")->required();
    sweep->add_flag("--force", sweep_force, "Overwrite existing outputs");

    auto* verify = app.add_subcommand("verify", "Run the built-in invariant checks");

    CLI11_PARSE(app, argc, argv);

    const std::size_t threads = egl::threads_from_env();
    if (run->parsed()) {
        std::optional<std::uint64_t> seed;
        if (seed_opt->count() > 0) {
            seed = run_seed;
        }
        return egl::cmd_run(run_config, seed, run_out, run_force, threads, std::cerr);
    }
    if (sweep->parsed()) {
        std::vector<egl::SweepAxis> axes;
        try {
            for (const auto& a : sweep_axes) {
                axes.push_back(egl::parse_axis(a));
            }
        } catch (const egl::ConfigError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return egl::exit_failure;
        }
        return egl::cmd_sweep(sweep_config, axes, sweep_seeds, sweep_out, sweep_force, threads, std::cerr);
    }
    if (verify->parsed()) {
        return egl::cmd_verify(std::cout);
    }
    return egl::exit_failure;
}
