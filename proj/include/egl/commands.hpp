// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Entry points behind the `egl` command-line tool. Each returns a process
// exit status and reports diagnostics on `log`.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "egl/sim.hpp"

namespace egl {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_io_error = 2,
    exit_diverged = 3,
};

inline constexpr const char* metrics_file = "metrics.csv";
inline constexpr const char* checkpoint_file = "checkpoint.bin";
inline constexpr const char* resolved_config_file = "config.json";
inline constexpr const char* summary_file = "summary.csv";

/// Runs one experiment and writes metrics.csv, checkpoint.bin and the
/// resolved config.json into `outdir`. Existing outputs are kept unless
/// `force` is set.
int cmd_run(const ExperimentConfig& config, const std::filesystem::path& outdir, bool force, std::size_t threads,
            std::ostream& log);

/// Same, reading the config from disk; `seed` overrides the file's seed.
int cmd_run(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
            const std::filesystem::path& outdir, bool force, std::size_t threads, std::ostream& log);

/// One `key=v1,v2,...` sweep axis over a dotted config key.
struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

/// Throws ConfigError on a malformed or empty axis.
SweepAxis parse_axis(const std::string& text);

/// Cartesian product of axes x seeds. Each cell runs in its own labelled
/// subdirectory; summary.csv lists the final accuracies of every cell. A
/// failed cell is recorded and the sweep continues.
int cmd_sweep(const std::filesystem::path& config_path, const std::vector<SweepAxis>& axes,
              const std::vector<std::uint64_t>& seeds, const std::filesystem::path& outdir, bool force,
              std::size_t threads, std::ostream& log);

/// Built-in invariant checks; one PASS/FAIL line each.
int cmd_verify(std::ostream& log);

}  // namespace egl
