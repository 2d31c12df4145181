// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each check states its tolerance and its time budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "egl/config.hpp"
#include "egl/data.hpp"
#include "egl/nn.hpp"
#include "egl/protocols.hpp"
#include "egl/sim.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using namespace egl;

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;  // 0 means no stated budget
    std::function<Verdict()> run;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

const fs::path config_dir = fs::path(EGL_SOURCE_DIR) / "configs";

ParamVector normal_vector(RngStream& rng, std::size_t dim) {
    ParamVector v(dim);
    for (auto& x : v) {
        x = rng.normal(0.0, 1.0);
    }
    return v;
}

std::vector<ParamVector> normal_cluster(RngStream& rng, std::size_t workers, std::size_t dim) {
    std::vector<ParamVector> out;
    for (std::size_t i = 0; i < workers; ++i) {
        out.push_back(normal_vector(rng, dim));
    }
    return out;
}

// 1 ----------------------------------------------------------------------

Verdict gradient_check() {
    const MlpSpec spec{{6, 5, 3}};
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RngStream rng(derive_seed(seed, 0, StreamPurpose::init));
        ParamVector p = kaiming_init(spec, rng);
        for (std::size_t l = 0; l < spec.layer_count(); ++l) {
            for (std::size_t j = 0; j < spec.layer_sizes[l + 1]; ++j) {
                p[spec.bias_offset(l) + j] = rng.normal(0.0, 0.1);
            }
        }
        Matrix x(4, 6);
        for (auto& v : x.data()) {
            v = rng.normal(0.0, 1.0);
        }
        std::vector<Label> labels(4);
        for (auto& l : labels) {
            l = static_cast<Label>(rng.uniform_index(3));
        }
        const auto analytic = loss_and_gradient(spec, p, x, labels).gradient;
        const auto numeric = finite_diff_grad(spec, p, x, labels, 1e-6);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-8});
            worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
        }
    }
    return {worst < 1e-5, "max relative error " + sci(worst) + " over 20 seeds (tol 1e-5)"};
}

// 2 ----------------------------------------------------------------------

Verdict allreduce_big_batch() {
    const auto cfg = parse_config(config_dir / "desk_all_reduce.json");
    const auto data = load_data(cfg.data);
    const MlpSpec spec = cfg.model;
    RngStream init_rng(derive_seed(0, 0, StreamPurpose::init));
    const ParamVector init = kaiming_init(spec, init_rng);

    // Interleaved ownership so the four unshuffled 8-row batches of each round
    // tile exactly the 32-row batch the single worker reads.
    std::vector<Partition> parts(4);
    Partition whole{0, {}};
    for (std::size_t r = 0; r < data.train.size(); ++r) {
        parts[r % 4].worker_rank = r % 4;
        parts[r % 4].indices.push_back(r);
        whole.indices.push_back(r);
    }
    MlpGradientSource four(spec, data.train, parts, 8, false);
    MlpGradientSource one(spec, data.train, {whole}, 32, false);
    Simulator ar(SimulatorOptions{{Method::all_reduce, std::nullopt, {}}, cfg.optimizer, 4, 0, 1}, init, four);
    Simulator big(SimulatorOptions{{Method::none, std::nullopt, {}}, cfg.optimizer, 1, 0, 1}, init, one);
    for (int t = 0; t < 200; ++t) {
        ar.step();
        big.step();
    }
    double worst = 0.0;
    for (const auto& w : ar.workers()) {
        for (std::size_t j = 0; j < init.size(); ++j) {
            worst = std::max(worst, std::abs(w.params[j] - big.workers()[0].params[j]));
        }
    }
    return {worst < 1e-9, "max |dtheta| " + sci(worst) + " after 200 steps (tol 1e-9)"};
}

// 3 ----------------------------------------------------------------------

double sum_drift(const std::vector<const std::vector<ParamVector>*>& before,
                 const std::vector<const std::vector<ParamVector>*>& after) {
    // Relative to the magnitude of the summed terms, per coordinate.
    double worst = 0.0;
    const std::size_t dim = before.front()->front().size();
    for (std::size_t c = 0; c < dim; ++c) {
        double s0 = 0.0, s1 = 0.0, mag = 0.0;
        for (const auto* group : before) {
            for (const auto& p : *group) {
                s0 += p[c];
                mag += std::abs(p[c]);
            }
        }
        for (const auto* group : after) {
            for (const auto& p : *group) {
                s1 += p[c];
            }
        }
        worst = std::max(worst, std::abs(s1 - s0) / std::max(mag, 1e-300));
    }
    return worst;
}

Verdict conservation() {
    RngStream rng(derive_seed(3, 0, StreamPurpose::peer));
    double worst[3] = {0.0, 0.0, 0.0};
    const double alphas[] = {0.1, 0.5, 0.9};
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t w = 2 + rng.uniform_index(7);
        const double alpha = alphas[trial % 3];
        const auto theta = normal_cluster(rng, w, 1000);

        const auto sets = build_gossip_sets(select_peers(w, rng), GossipVariant::elastic);
        const auto eg = elastic_gossip_step(theta, sets, alpha);
        worst[0] = std::max(worst[0], sum_drift({&theta}, {&eg}));

        const auto fc = full_consensus_step(theta, alpha);
        worst[1] = std::max(worst[1], sum_drift({&theta}, {&fc}));

        const std::vector<ParamVector> center{normal_vector(rng, 1000)};
        const auto r = easgd_step(theta, center[0], alpha);
        const std::vector<ParamVector> center_after{r.center};
        worst[2] = std::max(worst[2], sum_drift({&theta, &center}, {&r.workers, &center_after}));
    }
    const bool pass = worst[0] < 1e-9 && worst[1] < 1e-9 && worst[2] < 1e-9;
    return {pass, "max relative drift elastic " + sci(worst[0]) + ", full_consensus " + sci(worst[1]) + ", easgd " +
                      sci(worst[2]) + " (tol 1e-9, 1000 trials, dim 1000)"};
}

// 4 ----------------------------------------------------------------------

Verdict moving_rate_boundaries() {
    RngStream rng(derive_seed(4, 0, StreamPurpose::peer));
    bool identity = true;
    bool swap = true;
    double average_err = 0.0;
    double general_swap_err = 0.0;
    const GossipSets pair{{1}, {0}};

    const std::vector<ParamVector> example{ParamVector(std::vector<double>{0.0}),
                                           ParamVector(std::vector<double>{2.0})};
    const auto ex1 = elastic_gossip_step(example, pair, 1.0);
    swap = swap && ex1[0] == example[1] && ex1[1] == example[0];
    const auto ex_half = elastic_gossip_step(example, pair, 0.5);
    average_err = std::max({average_err, std::abs(ex_half[0][0] - 1.0), std::abs(ex_half[1][0] - 1.0)});

    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t w = 2 + rng.uniform_index(7);
        const auto theta = normal_cluster(rng, w, 64);
        const auto sets = build_gossip_sets(select_peers(w, rng), GossipVariant::elastic);
        identity = identity && elastic_gossip_step(theta, sets, 0.0) == theta;

        const auto two = normal_cluster(rng, 2, 64);
        const auto half = elastic_gossip_step(two, pair, 0.5);
        const auto full = elastic_gossip_step(two, pair, 1.0);
        for (std::size_t c = 0; c < 64; ++c) {
            const double mean = 0.5 * (two[0][c] + two[1][c]);
            average_err = std::max({average_err, std::abs(half[0][c] - mean), std::abs(half[1][c] - mean)});
            general_swap_err = std::max({general_swap_err, std::abs(full[0][c] - two[1][c]),
                                         std::abs(full[1][c] - two[0][c])});
        }

        // Values on a 2^-10 grid: every difference is exact, so the swap must be bitwise.
        std::vector<ParamVector> grid(2, ParamVector(64));
        for (auto& p : grid) {
            for (auto& v : p) {
                v = (static_cast<double>(rng.uniform_index(1u << 21)) - (1u << 20)) / 1024.0;
            }
        }
        const auto swapped = elastic_gossip_step(grid, pair, 1.0);
        swap = swap && swapped[0] == grid[1] && swapped[1] == grid[0];
    }
    const bool pass = identity && swap && average_err <= 1e-12;
    return {pass, std::string("alpha=0 identity ") + (identity ? "bitwise" : "BROKEN") + ", alpha=1 swap " +
                      (swap ? "bitwise" : "BROKEN") + " on exact-arithmetic inputs (arbitrary doubles within " +
                      sci(general_swap_err) + "), alpha=0.5 average err " + sci(average_err) + " (tol 1e-12)"};
}

// 5 ----------------------------------------------------------------------

Verdict oracle_equivalence() {
    RngStream rng(derive_seed(5, 0, StreamPurpose::peer));
    int mismatches[3] = {0, 0, 0};
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t w = 2 + rng.uniform_index(4);
        const auto theta = normal_cluster(rng, w, 1 + rng.uniform_index(16));
        Selections s = select_peers(w, rng);
        // Every other case models probability mode: some workers stay silent.
        if (trial % 2 == 1) {
            for (auto& p : s.peer) {
                if (rng.bernoulli(0.3)) {
                    p.reset();
                }
            }
        }
        const double alpha = rng.uniform01();
        if (elastic_gossip_step(theta, build_gossip_sets(s, GossipVariant::elastic), alpha) !=
            oracle::elastic_oracle(theta, s, alpha)) {
            ++mismatches[0];
        }
        if (pull_gossip_step(theta, s) != oracle::pull_oracle(theta, s)) {
            ++mismatches[1];
        }
        if (push_gossip_step(theta, build_gossip_sets(s, GossipVariant::push)) != oracle::push_oracle(theta, s)) {
            ++mismatches[2];
        }
    }
    const bool pass = mismatches[0] == 0 && mismatches[1] == 0 && mismatches[2] == 0;
    return {pass, "bitwise mismatches over 1000 cases: elastic " + std::to_string(mismatches[0]) + ", pull " +
                      std::to_string(mismatches[1]) + ", push " + std::to_string(mismatches[2])};
}

// 6 ----------------------------------------------------------------------

Verdict bernoulli_rate() {
    const double p = 1.0 / 32.0;
    const ProtocolSpec spec{Method::elastic_gossip, 0.5, Probability{p}};
    RngStream rng(derive_seed(0, 0, StreamPurpose::schedule));
    const std::size_t ticks = 100000;
    std::size_t hits = 0;
    for (std::uint64_t t = 0; t < ticks; ++t) {
        hits += should_communicate(spec, t, rng) ? 1 : 0;
    }
    const double rate = static_cast<double>(hits) / ticks;
    const double bound = 3.0 * std::sqrt(p * (1 - p) / ticks);
    return {std::abs(rate - p) <= bound,
            "rate " + sci(rate) + " vs 0.03125, |diff| " + sci(std::abs(rate - p)) + " (bound " + sci(bound) + ")"};
}

// 7, 8 -------------------------------------------------------------------

double median_aggregate(const fs::path& config_path, std::vector<double>& per_seed) {
    auto cfg = parse_config(config_path);
    const auto data = load_data(cfg.data);
    per_seed.clear();
    for (std::uint64_t seed : {0, 1, 2}) {
        cfg.seed = seed;
        const auto result = run_experiment(cfg, data);
        per_seed.push_back(result.diverged || result.metrics.empty() ? 0.0 : result.metrics.back().aggregate_acc);
    }
    auto sorted = per_seed;
    std::sort(sorted.begin(), sorted.end());
    return sorted[1];
}

std::string list(const std::vector<double>& v) {
    std::string out;
    for (double x : v) {
        out += (out.empty() ? "" : "/") + sci(x);
    }
    return out;
}

Verdict learning_ordering() {
    std::vector<double> eg_runs, nc_runs;
    const double eg = median_aggregate(config_dir / "desk_elastic_gossip.json", eg_runs);
    const double nc = median_aggregate(config_dir / "desk_no_communication.json", nc_runs);
    const bool pass = eg >= 0.95 && eg - nc >= 0.02;
    return {pass, "median aggregate EG-4-t32-0.50 " + sci(eg) + " [" + list(eg_runs) + "] vs NC-4 " + sci(nc) + " [" +
                      list(nc_runs) + "], margin " + sci(eg - nc) + " (need EG >= 0.95, margin >= 0.02)"};
}

Verdict period_probability_parity() {
    std::vector<double> tau_runs, p_runs;
    const double tau = median_aggregate(config_dir / "desk_pull_gossip_tau32.json", tau_runs);
    const double prob = median_aggregate(config_dir / "desk_pull_gossip_p32.json", p_runs);
    return {std::abs(tau - prob) <= 0.03, "median aggregate GS tau=32 " + sci(tau) + " [" + list(tau_runs) +
                                              "] vs p=1/32 " + sci(prob) + " [" + list(p_runs) + "], |diff| " +
                                              sci(std::abs(tau - prob)) + " (tol 0.03)"};
}

// 9 ----------------------------------------------------------------------

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& env, const fs::path& out) {
    const std::string cmd = env + " " + EGL_CLI_PATH + " run --config " + (config_dir / "desk_elastic_gossip.json").string() +
                            " --seed 0 --out " + out.string() + " --force > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism() {
    const fs::path root = fs::temp_directory_path() / "egl_acceptance_determinism";
    fs::remove_all(root);
    const int a = run_cli("env -u EGL_THREADS", root / "first");
    const int b = run_cli("env -u EGL_THREADS", root / "second");
    const int c = run_cli("env EGL_THREADS=4", root / "threads4");
    if (a != 0 || b != 0 || c != 0) {
        return {false, "cli exit codes " + std::to_string(a) + "/" + std::to_string(b) + "/" + std::to_string(c)};
    }
    const auto first = slurp(root / "first" / "metrics.csv");
    const bool repeat = !first.empty() && first == slurp(root / "second" / "metrics.csv");
    const bool threaded = first == slurp(root / "threads4" / "metrics.csv");
    const bool ckpt = slurp(root / "first" / "checkpoint.bin") == slurp(root / "threads4" / "checkpoint.bin");
    fs::remove_all(root);
    return {repeat && threaded && ckpt, std::string("repeat run metrics ") + (repeat ? "identical" : "DIFFER") +
                                            ", EGL_THREADS=4 metrics " + (threaded ? "identical" : "DIFFER") +
                                            ", checkpoints " + (ckpt ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "gradient correctness", 5, gradient_check},
        {2, "all-reduce equals big batch", 10, allreduce_big_batch},
        {3, "elastic symmetry conservation", 5, conservation},
        {4, "moving-rate boundaries", 0, moving_rate_boundaries},
        {5, "protocol oracle equivalence", 0, oracle_equivalence},
        {6, "Bernoulli schedule rate", 0, bernoulli_rate},
        {7, "desk-scale learning ordering", 60, learning_ordering},
        {8, "period vs probability parity", 0, period_probability_parity},
        {9, "determinism", 0, determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Verdict v;
        const auto start = std::chrono::steady_clock::now();
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = sci(secs) + " s";
        if (c.budget_seconds > 0) {
            timing += " of " + sci(c.budget_seconds) + " s";
            if (secs >= c.budget_seconds) {
                v.pass = false;
                v.detail += "; over time budget";
            }
        }
        failures += v.pass ? 0 : 1;
        std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.name << ": " << v.detail << " [" << timing
                  << "]" << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
