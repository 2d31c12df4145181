// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Lock-step simulation of a synchronous worker cluster.
//
// One round, for every worker i:
//   1. g^i at the current (pre-communication) θ^i
//   2. v^i ← µ v^i − η g^i
//   3. if the schedule fires: communication update of θ^i from the
//      pre-round snapshot of all parameters
//   4. θ^i ← θ^i − η g^i + µ v^i
//   5. t^i ← t^i + 1
// All-reduce replaces g^i by the cluster mean before step 2.
//
// Workers never wait on each other: all clocks advance together, so the
// barrier of the synchronous algorithms holds by construction. An
// asynchronous variant would give each worker its own tick count; the
// per-worker clocks are kept for that reason.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "egl/data.hpp"
#include "egl/metrics.hpp"
#include "egl/nn.hpp"
#include "egl/protocols.hpp"
#include "egl/rng.hpp"

namespace egl {

struct WorkerState {
    Rank rank = 0;
    ParamVector params;
    Velocity velocity;
    /// Completed gradient updates.
    std::uint64_t clock = 0;
    WorkerStreams streams;
};

struct OptimizerSpec {
    double eta = 0.01;
    double mu = 0.9;
    friend bool operator==(const OptimizerSpec&, const OptimizerSpec&) = default;
};

/// Computes one worker's minibatch loss and gradient. Calls for distinct
/// ranks may run concurrently; calls for one rank never do.
class GradientSource {
public:
    virtual ~GradientSource() = default;
    virtual double compute(WorkerState& worker, Gradient& gradient) = 0;
};

/// What happened during one round; kept for inspection and tests.
struct RoundTrace {
    std::vector<bool> communicated;
    Selections selections;
    std::vector<double> losses;
};

struct SimulatorOptions {
    ProtocolSpec protocol;
    OptimizerSpec optimizer;
    std::size_t workers = 1;
    std::uint64_t seed = 0;
    /// Worker threads for the gradient phase; 0 or 1 is the sequential
    /// reference mode.
    std::size_t threads = 1;
};

inline constexpr double divergence_limit = 1e12;

class Simulator {
public:
    /// Every worker starts from `init`; velocities start at zero.
    Simulator(SimulatorOptions options, const ParamVector& init, GradientSource& source);

    /// Advances every worker by one round. Throws DivergenceError on a
    /// non-finite loss or a parameter beyond divergence_limit; the state
    /// is then left as it was before the round.
    void step();

    std::uint64_t rounds() const noexcept { return rounds_; }
    const std::vector<WorkerState>& workers() const noexcept { return workers_; }
    /// Only present for EASGD.
    const std::optional<ParamVector>& center() const noexcept { return center_; }
    const RoundTrace& last_round() const noexcept { return trace_; }
    std::vector<ParamVector> params() const;

private:
    void communicate(std::vector<ParamVector>& params);

    SimulatorOptions options_;
    GradientSource& source_;
    std::vector<WorkerState> workers_;
    std::optional<ParamVector> center_;
    std::uint64_t rounds_ = 0;
    RoundTrace trace_;
};

/// Minibatch cross-entropy gradients of an MLP on per-worker partitions.
class MlpGradientSource : public GradientSource {
public:
    MlpGradientSource(MlpSpec spec, const Dataset& train, const std::vector<Partition>& partitions,
                      std::size_t batch, bool shuffle = true);

    double compute(WorkerState& worker, Gradient& gradient) override;

private:
    MlpSpec spec_;
    const Dataset& train_;
    std::vector<MinibatchSampler> samplers_;
    std::size_t batch_;
};

enum class DataSource { synthetic, idx };

struct DataSpec {
    DataSource source = DataSource::synthetic;
    /// Seeds dataset generation and the validation split.
    std::uint64_t seed = 1;
    std::size_t n = 3000;
    std::size_t dims = 10;
    std::size_t classes = 3;
    double spread = 0.3;
    std::filesystem::path train_images;
    std::filesystem::path train_labels;
    std::size_t validation_holdout = 600;
    PartitionMode partition_mode = PartitionMode::uniform;
    double majority_share = default_majority_share;
    /// false walks every partition in stored order (for equivalence tests).
    bool shuffle = true;

    friend bool operator==(const DataSpec&, const DataSpec&) = default;
};

struct ExperimentConfig {
    MlpSpec model;
    ProtocolSpec protocol;
    OptimizerSpec optimizer;
    std::size_t workers = 1;
    std::size_t effective_batch = 32;
    std::size_t steps = 2000;
    std::uint64_t seed = 0;
    std::size_t eval_every = 100;
    DataSpec data;

    /// Throws ConfigError naming the offending key.
    void validate() const;
    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct DataBundle {
    Dataset train;
    Dataset validation;
};

/// Loads or generates the data, holds out validation rows and standardises
/// both sets with training statistics.
DataBundle load_data(const DataSpec& spec);

struct RunOptions {
    std::size_t threads = 1;
};

struct RunResult {
    MetricsSeries metrics;
    std::vector<ParamVector> final_params;
    std::optional<ParamVector> center;
    std::size_t steps_completed = 0;
    bool diverged = false;
    std::string diagnostic;
};

/// Runs config.steps lock-step rounds, evaluating every eval_every rounds
/// and after the last one. Deterministic in (config, data); the thread
/// count never changes the result.
RunResult run_experiment(const ExperimentConfig& config, const DataBundle& data, RunOptions options = {});

/// Runs `n` independent tasks on up to `threads` threads. Task i only
/// touches state owned by i.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& task);

/// Reads EGL_THREADS; unset or invalid means 1.
std::size_t threads_from_env();

}  // namespace egl
