// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "egl/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace egl {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double RngStream::uniform01() {
    // 53 high bits -> [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal(double mean, double stddev) {
    // Box-Muller, one draw per call so stream consumption is fixed.
    double u1 = uniform01();
    while (u1 <= 0.0) {
        u1 = uniform01();
    }
    const double u2 = uniform01();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
}

std::size_t RngStream::uniform_index(std::size_t n) {
    if (n == 0) {
        throw std::invalid_argument("uniform_index over empty range");
    }
    // Rejection sampling removes modulo bias.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return static_cast<std::size_t>(x % bound);
}

bool RngStream::bernoulli(double p) {
    return uniform01() < p;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t rank, StreamPurpose purpose) noexcept {
    std::uint64_t h = mix64(master_seed);
    h = mix64(h ^ mix64(rank + 0x632be59bd9b4e019ULL));
    h = mix64(h ^ mix64(static_cast<std::uint64_t>(purpose) * 0xd6e8feb86659fd93ULL));
    return h;
}

std::vector<WorkerStreams> derive_rng_streams(std::uint64_t master_seed, std::size_t workers) {
    std::vector<WorkerStreams> streams;
    streams.reserve(workers);
    for (std::size_t r = 0; r < workers; ++r) {
        streams.push_back(WorkerStreams{
            RngStream(derive_seed(master_seed, r, StreamPurpose::data)),
            RngStream(derive_seed(master_seed, r, StreamPurpose::dropout)),
            RngStream(derive_seed(master_seed, r, StreamPurpose::peer)),
            RngStream(derive_seed(master_seed, r, StreamPurpose::schedule)),
        });
    }
    return streams;
}

}  // namespace egl
