// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace egl {

/// 64-bit avalanche mix (splitmix64 finaliser).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Single-owner deterministic random stream. Never share one across threads.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform01();
    double normal(double mean, double stddev);
    /// Uniform in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);
    bool bernoulli(double p);

    template <typename T>
    void shuffle(std::span<T> values) {
        // Fisher-Yates over our own uniform_index so the permutation only
        // depends on the engine, not on the standard library's shuffle.
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Derivation keys for the per-purpose streams of one experiment.
enum class StreamPurpose : std::uint64_t {
    init = 1,
    data = 2,
    dropout = 3,
    peer = 4,
    schedule = 5,
    split = 6,
};

/// Seed for (master, rank, purpose); distinct keys give independent streams.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t rank, StreamPurpose purpose) noexcept;

struct WorkerStreams {
    RngStream data;
    RngStream dropout;
    RngStream peer;
    RngStream schedule;
};

/// One set of per-worker streams. The shared init and split streams are
/// derived separately via derive_seed with rank 0.
std::vector<WorkerStreams> derive_rng_streams(std::uint64_t master_seed, std::size_t workers);

}  // namespace egl
