// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Communication-related updates of every supported protocol.
//
// Every step is a pure function of a pre-step snapshot: all outputs read
// the same immutable inputs, so per-worker results may be computed in any
// order (or in parallel) without changing the result.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "egl/nn.hpp"
#include "egl/rng.hpp"

namespace egl {

enum class Method { all_reduce, easgd, pull_gossip, push_gossip, elastic_gossip, full_consensus, none };

std::string_view to_string(Method m) noexcept;
/// Throws std::invalid_argument on an unknown name.
Method method_from_string(std::string_view name);

/// Whether the method has a moving rate.
bool uses_alpha(Method m) noexcept;
/// Whether the method exchanges parameters on a period/probability schedule.
bool uses_schedule(Method m) noexcept;

/// Communicate when the clock is a multiple of tau.
struct Period {
    std::uint64_t tau = 1;
    friend bool operator==(const Period&, const Period&) = default;
};

/// Communicate with independent Bernoulli(p) draws.
struct Probability {
    double p = 1.0;
    friend bool operator==(const Probability&, const Probability&) = default;
};

using Schedule = std::variant<std::monostate, Period, Probability>;

struct ProtocolSpec {
    Method method = Method::none;
    std::optional<double> alpha;
    Schedule schedule;

    void validate() const;
    friend bool operator==(const ProtocolSpec&, const ProtocolSpec&) = default;
};

using Rank = std::size_t;

/// peer[i] is the rank worker i chose this round, or empty if i did not
/// initiate communication.
struct Selections {
    std::vector<std::optional<Rank>> peer;

    std::size_t workers() const noexcept { return peer.size(); }
};

/// K_i for each worker, ascending and duplicate-free.
using GossipSets = std::vector<std::vector<Rank>>;

enum class GossipVariant {
    /// K_i = {k'(i)} ∪ {j : k'(j) = i}
    elastic,
    /// K_i = {i} ∪ {j : k'(j) = i}
    push,
};

/// Uniform draw from {0..workers-1} \ {rank}.
Rank select_peer(Rank rank, std::size_t workers, RngStream& rng);

/// Every worker selects a peer, in rank order, from one stream.
Selections select_peers(std::size_t workers, RngStream& rng);

GossipSets build_gossip_sets(const Selections& sel, GossipVariant variant);

using Snapshot = std::span<const ParamVector>;

/// θ^i ← θ^i − α Σ_{k∈K_i} (θ^i − θ^k)
std::vector<ParamVector> elastic_gossip_step(Snapshot snapshot, const GossipSets& sets, double alpha);

/// θ^i ← ½(θ^i + θ^{k'(i)}) for workers that selected a peer.
std::vector<ParamVector> pull_gossip_step(Snapshot snapshot, const Selections& sel);

/// θ^i ← mean over K_i (push variant sets).
std::vector<ParamVector> push_gossip_step(Snapshot snapshot, const GossipSets& sets);

struct EasgdResult {
    std::vector<ParamVector> workers;
    ParamVector center;
};

/// z^i = α(θ^i − θ̃); θ^i ← θ^i − z^i; θ̃ ← θ̃ + Σ z^i.
/// `participants` restricts the exchange; empty means every worker.
EasgdResult easgd_step(Snapshot snapshot, const ParamVector& center, double alpha,
                       const std::vector<bool>& participants = {});

/// θ^i ← θ^i − α Σ_{k∈P} (θ^i − θ^k) for i ∈ P; empty P means every worker.
std::vector<ParamVector> full_consensus_step(Snapshot snapshot, double alpha,
                                             const std::vector<bool>& participants = {});

/// (1/|W|) Σ g^k
Gradient allreduce_mean(std::span<const Gradient> gradients);

/// Period mode: t mod τ == 0 (no randomness consumed). Probability mode:
/// one Bernoulli(p) draw from `rng`. all_reduce always, none never.
bool should_communicate(const ProtocolSpec& spec, std::uint64_t t, RngStream& rng);

/// Run label used for sweep directories, e.g. "EG-4-0.0312-0.50" or "AR-4".
std::string protocol_label(const ProtocolSpec& spec, std::size_t workers);

}  // namespace egl
