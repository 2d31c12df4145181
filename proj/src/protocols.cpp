// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "egl/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "egl/numeric.hpp"

namespace egl {

namespace {

struct MethodName {
    Method method;
    std::string_view name;
    std::string_view label;
};

constexpr MethodName method_names[] = {
    {Method::all_reduce, "all_reduce", "AR"},
    {Method::easgd, "easgd", "EASGD"},
    {Method::pull_gossip, "pull_gossip", "GS"},
    {Method::push_gossip, "push_gossip", "GSP"},
    {Method::elastic_gossip, "elastic_gossip", "EG"},
    {Method::full_consensus, "full_consensus", "FC"},
    {Method::none, "none", "NC"},
};

void check_congruent(Snapshot snapshot) {
    for (const auto& v : snapshot) {
        if (v.size() != snapshot.front().size()) {
            throw DimensionError("worker parameter vectors are not congruent");
        }
    }
}

bool participates(const std::vector<bool>& participants, std::size_t i) {
    return participants.empty() || participants[i];
}

// Trim a fixed-point rendering to at most `digits` decimals, keeping at
// least `min_digits`.
std::string trimmed_decimal(double v, int digits, int min_digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s = buf;
    const auto dot = s.find('.');
    if (dot == std::string::npos) {
        return s;
    }
    const std::size_t keep = dot + 1 + static_cast<std::size_t>(min_digits);
    while (s.size() > keep && s.back() == '0') {
        s.pop_back();
    }
    if (s.back() == '.') {
        s.pop_back();
    }
    return s;
}

}  // namespace

std::string_view to_string(Method m) noexcept {
    for (const auto& e : method_names) {
        if (e.method == m) {
            return e.name;
        }
    }
    return "unknown";
}

Method method_from_string(std::string_view name) {
    for (const auto& e : method_names) {
        if (e.name == name) {
            return e.method;
        }
    }
    throw std::invalid_argument("unknown protocol method '" + std::string(name) + "'");
}

bool uses_alpha(Method m) noexcept {
    return m == Method::elastic_gossip || m == Method::easgd || m == Method::full_consensus;
}

bool uses_schedule(Method m) noexcept {
    return m != Method::all_reduce && m != Method::none;
}

void ProtocolSpec::validate() const {
    const std::string name(to_string(method));
    if (uses_alpha(method)) {
        if (!alpha) {
            throw std::invalid_argument("method " + name + " requires alpha");
        }
        if (!(*alpha >= 0.0 && *alpha <= 1.0)) {
            throw std::invalid_argument("alpha must lie in [0, 1]");
        }
    } else if (alpha) {
        throw std::invalid_argument("method " + name + " does not take alpha");
    }
    if (uses_schedule(method)) {
        if (std::holds_alternative<std::monostate>(schedule)) {
            throw std::invalid_argument("method " + name + " requires exactly one of tau or comm_probability");
        }
        if (const auto* per = std::get_if<Period>(&schedule); per && per->tau == 0) {
            throw std::invalid_argument("tau must be a positive count");
        }
        if (const auto* prob = std::get_if<Probability>(&schedule); prob && !(prob->p > 0.0 && prob->p <= 1.0)) {
            throw std::invalid_argument("comm_probability must lie in (0, 1]");
        }
    } else if (!std::holds_alternative<std::monostate>(schedule)) {
        throw std::invalid_argument("method " + name + " does not take tau or comm_probability");
    }
}

Rank select_peer(Rank rank, std::size_t workers, RngStream& rng) {
    if (workers < 2) {
        throw std::invalid_argument("peer selection needs at least 2 workers");
    }
    const Rank draw = rng.uniform_index(workers - 1);
    return draw < rank ? draw : draw + 1;
}

Selections select_peers(std::size_t workers, RngStream& rng) {
    if (workers < 2) {
        throw std::invalid_argument("peer selection needs at least 2 workers");
    }
    Selections sel;
    sel.peer.resize(workers);
    for (Rank i = 0; i < workers; ++i) {
        sel.peer[i] = select_peer(i, workers, rng);
    }
    return sel;
}

GossipSets build_gossip_sets(const Selections& sel, GossipVariant variant) {
    const std::size_t n = sel.workers();
    std::vector<std::vector<bool>> member(n, std::vector<bool>(n, false));
    for (Rank i = 0; i < n; ++i) {
        if (variant == GossipVariant::push) {
            member[i][i] = true;
        }
        if (const auto& k = sel.peer[i]) {
            if (*k >= n || *k == i) {
                throw std::invalid_argument("invalid selection " + std::to_string(i) + " -> " + std::to_string(*k));
            }
            if (variant == GossipVariant::elastic) {
                member[i][*k] = true;
            }
            member[*k][i] = true;
        }
    }
    GossipSets sets(n);
    for (Rank i = 0; i < n; ++i) {
        for (Rank k = 0; k < n; ++k) {
            if (member[i][k]) {
                sets[i].push_back(k);
            }
        }
    }
    return sets;
}

std::vector<ParamVector> elastic_gossip_step(Snapshot snapshot, const GossipSets& sets, double alpha) {
    check_congruent(snapshot);
    if (sets.size() != snapshot.size()) {
        throw DimensionError("gossip sets do not cover every worker");
    }
    std::vector<ParamVector> out(snapshot.begin(), snapshot.end());
    const std::size_t dim = snapshot.empty() ? 0 : snapshot.front().size();
    for (Rank i = 0; i < snapshot.size(); ++i) {
        if (sets[i].empty()) {
            continue;
        }
        const auto& self = snapshot[i];
        for (std::size_t c = 0; c < dim; ++c) {
            double pull = 0.0;
            for (Rank k : sets[i]) {
                pull += self[c] - snapshot[k][c];
            }
            out[i][c] = self[c] - alpha * pull;
        }
    }
    return out;
}

std::vector<ParamVector> pull_gossip_step(Snapshot snapshot, const Selections& sel) {
    check_congruent(snapshot);
    if (sel.workers() != snapshot.size()) {
        throw DimensionError("selections do not cover every worker");
    }
    std::vector<ParamVector> out(snapshot.begin(), snapshot.end());
    for (Rank i = 0; i < snapshot.size(); ++i) {
        if (!sel.peer[i]) {
            continue;
        }
        const auto& self = snapshot[i];
        const auto& peer = snapshot[*sel.peer[i]];
        for (std::size_t c = 0; c < self.size(); ++c) {
            out[i][c] = 0.5 * (self[c] + peer[c]);
        }
    }
    return out;
}

std::vector<ParamVector> push_gossip_step(Snapshot snapshot, const GossipSets& sets) {
    check_congruent(snapshot);
    if (sets.size() != snapshot.size()) {
        throw DimensionError("gossip sets do not cover every worker");
    }
    std::vector<ParamVector> out(snapshot.begin(), snapshot.end());
    for (Rank i = 0; i < snapshot.size(); ++i) {
        // A worker alone in its set keeps its value bit for bit.
        if (sets[i].size() <= 1) {
            continue;
        }
        const auto count = static_cast<double>(sets[i].size());
        for (std::size_t c = 0; c < snapshot[i].size(); ++c) {
            double sum = 0.0;
            for (Rank k : sets[i]) {
                sum += snapshot[k][c];
            }
            out[i][c] = sum / count;
        }
    }
    return out;
}

EasgdResult easgd_step(Snapshot snapshot, const ParamVector& center, double alpha,
                       const std::vector<bool>& participants) {
    check_congruent(snapshot);
    if (!snapshot.empty() && center.size() != snapshot.front().size()) {
        throw DimensionError("center variable is not congruent with worker parameters");
    }
    EasgdResult out{std::vector<ParamVector>(snapshot.begin(), snapshot.end()), center};
    for (std::size_t c = 0; c < center.size(); ++c) {
        double moved = 0.0;
        for (Rank i = 0; i < snapshot.size(); ++i) {
            if (!participates(participants, i)) {
                continue;
            }
            const double z = alpha * (snapshot[i][c] - center[c]);
            out.workers[i][c] = snapshot[i][c] - z;
            moved += z;
        }
        out.center[c] = center[c] + moved;
    }
    return out;
}

std::vector<ParamVector> full_consensus_step(Snapshot snapshot, double alpha, const std::vector<bool>& participants) {
    check_congruent(snapshot);
    std::vector<ParamVector> out(snapshot.begin(), snapshot.end());
    const std::size_t dim = snapshot.empty() ? 0 : snapshot.front().size();
    for (Rank i = 0; i < snapshot.size(); ++i) {
        if (!participates(participants, i)) {
            continue;
        }
        for (std::size_t c = 0; c < dim; ++c) {
            double pull = 0.0;
            for (Rank k = 0; k < snapshot.size(); ++k) {
                if (participates(participants, k)) {
                    pull += snapshot[i][c] - snapshot[k][c];
                }
            }
            out[i][c] = snapshot[i][c] - alpha * pull;
        }
    }
    return out;
}

Gradient allreduce_mean(std::span<const Gradient> gradients) {
    if (gradients.empty()) {
        throw std::invalid_argument("allreduce over zero workers");
    }
    check_congruent(gradients);
    Gradient mean(gradients.front().size(), 0.0);
    for (const auto& g : gradients) {
        for (std::size_t c = 0; c < g.size(); ++c) {
            mean[c] += g[c];
        }
    }
    const auto n = static_cast<double>(gradients.size());
    for (auto& v : mean) {
        v /= n;
    }
    return mean;
}

bool should_communicate(const ProtocolSpec& spec, std::uint64_t t, RngStream& rng) {
    switch (spec.method) {
    case Method::none:
        return false;
    case Method::all_reduce:
        return true;
    default:
        break;
    }
    if (const auto* per = std::get_if<Period>(&spec.schedule)) {
        return t % per->tau == 0;
    }
    if (const auto* prob = std::get_if<Probability>(&spec.schedule)) {
        return rng.bernoulli(prob->p);
    }
    return false;
}

std::string protocol_label(const ProtocolSpec& spec, std::size_t workers) {
    std::string label;
    for (const auto& e : method_names) {
        if (e.method == spec.method) {
            label = e.label;
        }
    }
    label += "-" + std::to_string(workers);
    if (const auto* per = std::get_if<Period>(&spec.schedule)) {
        label += "-t" + std::to_string(per->tau);
    } else if (const auto* prob = std::get_if<Probability>(&spec.schedule)) {
        label += "-" + trimmed_decimal(prob->p, 4, 1);
    }
    if (spec.alpha && uses_alpha(spec.method)) {
        label += "-" + trimmed_decimal(*spec.alpha, 4, 2);
    }
    return label;
}

}  // namespace egl
