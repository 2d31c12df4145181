// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "egl/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "egl/checkpoint.hpp"
#include "egl/config.hpp"
#include "egl/errors.hpp"
#include "egl/metrics.hpp"
#include "egl/protocols.hpp"

namespace egl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
    try {
        return fn();
    } catch (const IoError& e) {
        log << "error: " << e.what() << '\n';
        return exit_io_error;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

struct RunOutcome {
    int status = exit_failure;
    std::optional<MetricsRecord> last;
    std::size_t steps_completed = 0;
};

RunOutcome run_into(const ExperimentConfig& config, const fs::path& outdir, bool force, std::size_t threads,
                    std::ostream& log) {
    ensure_directory(outdir);
    if (!force) {
        for (const char* name : {metrics_file, checkpoint_file, resolved_config_file}) {
            if (fs::exists(outdir / name)) {
                throw IoError("refusing to overwrite " + (outdir / name).string() + " (use --force)");
            }
        }
    }
    const DataBundle data = load_data(config.data);
    const RunResult result = run_experiment(config, data, RunOptions{threads});

    write_metrics(result.metrics, config.workers, outdir / metrics_file);
    write_checkpoint(Checkpoint{config_hash(config), result.final_params, result.center}, outdir / checkpoint_file);
    write_text(outdir / resolved_config_file, config_to_json(config).dump(2) + "\n");

    RunOutcome outcome;
    outcome.steps_completed = result.steps_completed;
    if (!result.metrics.empty()) {
        outcome.last = result.metrics.back();
    }
    if (result.diverged) {
        log << "diverged: " << result.diagnostic << '\n';
        outcome.status = exit_diverged;
    } else {
        outcome.status = exit_ok;
    }
    return outcome;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json axis_value(const std::string& text) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(text, &used);
        if (used == text.size()) {
            return i >= 0 ? json(static_cast<std::uint64_t>(i)) : json(i);
        }
    } catch (const std::exception&) {
    }
    try {
        std::size_t used = 0;
        const double d = std::stod(text, &used);
        if (used == text.size()) {
            return d;
        }
    } catch (const std::exception&) {
    }
    if (text == "true" || text == "false") {
        return text == "true";
    }
    return text;
}

void set_path(json& doc, const std::string& key, const json& value) {
    json* node = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        parts.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        json& next = (*node)[parts[i]];
        if (next.is_null()) {
            next = json::object();
        }
        node = &next;
    }
    (*node)[parts.back()] = value;

    // An axis on one schedule key replaces the other; a method axis drops
    // keys the chosen method does not take.
    if (key == "protocol.tau") {
        doc["protocol"].erase("comm_probability");
    } else if (key == "protocol.comm_probability") {
        doc["protocol"].erase("tau");
    } else if (key == "protocol.method" && value.is_string()) {
        try {
            const Method m = method_from_string(value.get<std::string>());
            if (!uses_alpha(m)) {
                doc["protocol"].erase("alpha");
            }
            if (!uses_schedule(m)) {
                doc["protocol"].erase("tau");
                doc["protocol"].erase("comm_probability");
            }
        } catch (const std::invalid_argument&) {
            // reported when the cell's config is parsed
        }
    }
}

std::string csv_field(std::string text) {
    std::replace(text.begin(), text.end(), ',', ';');
    std::replace(text.begin(), text.end(), '\n', ' ');
    return text;
}

}  // namespace

int cmd_run(const ExperimentConfig& config, const fs::path& outdir, bool force, std::size_t threads,
            std::ostream& log) {
    return guarded(log, [&] { return run_into(config, outdir, force, threads, log).status; });
}

int cmd_run(const fs::path& config_path, std::optional<std::uint64_t> seed, const fs::path& outdir, bool force,
            std::size_t threads, std::ostream& log) {
    return guarded(log, [&] {
        ExperimentConfig config = parse_config(config_path);
        if (seed) {
            config.seed = *seed;
        }
        return run_into(config, outdir, force, threads, log).status;
    });
}

SweepAxis parse_axis(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("sweep axis '" + text + "' must look like key=v1,v2,...");
    }
    SweepAxis axis{text.substr(0, eq), {}};
    std::stringstream ss(text.substr(eq + 1));
    std::string value;
    while (std::getline(ss, value, ',')) {
        if (!value.empty()) {
            axis.values.push_back(value);
        }
    }
    if (axis.values.empty()) {
        throw ConfigError("sweep axis '" + axis.key + "' has no values");
    }
    return axis;
}

int cmd_sweep(const fs::path& config_path, const std::vector<SweepAxis>& axes, const std::vector<std::uint64_t>& seeds,
              const fs::path& outdir, bool force, std::size_t threads, std::ostream& log) {
    return guarded(log, [&]() -> int {
        if (seeds.empty()) {
            throw ConfigError("sweep needs at least one seed");
        }
        for (const auto& axis : axes) {
            if (axis.values.empty()) {
                throw ConfigError("sweep axis '" + axis.key + "' has no values");
            }
        }
        const json base = read_json(config_path);
        ensure_directory(outdir);
        if (!force && fs::exists(outdir / summary_file)) {
            throw IoError("refusing to overwrite " + (outdir / summary_file).string() + " (use --force)");
        }

        std::vector<json> cells{base};
        for (const auto& axis : axes) {
            std::vector<json> expanded;
            for (const auto& cell : cells) {
                for (const auto& v : axis.values) {
                    json next = cell;
                    set_path(next, axis.key, axis_value(v));
                    expanded.push_back(std::move(next));
                }
            }
            cells = std::move(expanded);
        }

        std::ostringstream summary;
        summary << "label,seed,status,steps_completed,rank0_acc,aggregate_acc\n";
        std::set<std::string> used;
        bool any_failed = false;
        std::size_t index = 0;
        for (const auto& cell : cells) {
            for (auto seed : seeds) {
                ++index;
                std::string label = "invalid";
                std::string status;
                std::optional<MetricsRecord> last;
                std::size_t steps = 0;
                try {
                    ExperimentConfig config = config_from_json(cell, config_path.parent_path());
                    config.seed = seed;
                    label = protocol_label(config.protocol, config.workers);
                    std::string dir = label + "_s" + std::to_string(seed);
                    if (!used.insert(dir).second) {
                        dir += "_c" + std::to_string(index);
                        used.insert(dir);
                    }
                    const RunOutcome outcome = run_into(config, outdir / dir, force, threads, log);
                    status = outcome.status == exit_ok ? "ok" : "diverged";
                    last = outcome.last;
                    steps = outcome.steps_completed;
                } catch (const std::exception& e) {
                    status = "failed: " + csv_field(e.what());
                }
                if (status != "ok") {
                    any_failed = true;
                    log << "cell " << label << " seed " << seed << ": " << status << '\n';
                }
                summary << label << ',' << seed << ',' << status << ',' << steps << ','
                        << (last ? format_real(last->rank0_acc) : "") << ','
                        << (last ? format_real(last->aggregate_acc) : "") << '\n';
            }
        }
        write_text(outdir / summary_file, summary.str());
        return any_failed ? exit_failure : exit_ok;
    });
}

namespace {

struct Check {
    std::string name;
    std::function<bool()> run;
};

ParamVector random_vector(RngStream& rng, std::size_t dim) {
    ParamVector v(dim);
    for (auto& x : v) {
        x = rng.normal(0.0, 1.0);
    }
    return v;
}

std::vector<ParamVector> random_cluster(RngStream& rng, std::size_t workers, std::size_t dim) {
    std::vector<ParamVector> out;
    for (std::size_t i = 0; i < workers; ++i) {
        out.push_back(random_vector(rng, dim));
    }
    return out;
}

bool conserves(const std::vector<ParamVector>& before, const std::vector<ParamVector>& after,
               const ParamVector* center_before = nullptr, const ParamVector* center_after = nullptr) {
    for (std::size_t c = 0; c < before.front().size(); ++c) {
        double s0 = 0.0;
        double s1 = 0.0;
        double scale = 0.0;
        for (std::size_t i = 0; i < before.size(); ++i) {
            s0 += before[i][c];
            s1 += after[i][c];
            scale += std::abs(before[i][c]);
        }
        if (center_before != nullptr) {
            s0 += (*center_before)[c];
            s1 += (*center_after)[c];
            scale += std::abs((*center_before)[c]);
        }
        if (std::abs(s1 - s0) > 1e-9 * std::max(scale, 1.0)) {
            return false;
        }
    }
    return true;
}

std::vector<Check> invariant_checks() {
    std::vector<Check> checks;
    checks.push_back({"backprop matches central differences", [] {
                          const MlpSpec spec{{6, 5, 3}, 0.0, 0.0};
                          for (std::uint64_t seed = 0; seed < 5; ++seed) {
                              RngStream rng(seed);
                              const ParamVector p = kaiming_init(spec, rng);
                              Matrix x(4, 6);
                              for (auto& v : x.data()) {
                                  v = rng.normal(0.0, 1.0);
                              }
                              const std::vector<Label> y{0, 1, 2, 1};
                              const auto g = loss_and_gradient(spec, p, x, y).gradient;
                              const auto fd = finite_diff_grad(spec, p, x, y, 1e-6);
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                  const double denom = std::max({std::abs(g[i]), std::abs(fd[i]), 1e-8});
                                  if (std::abs(g[i] - fd[i]) / denom >= 1e-5) {
                                      return false;
                                  }
                              }
                          }
                          return true;
                      }});
    checks.push_back({"elastic symmetry conserves the parameter sum", [] {
                          RngStream rng(7);
                          for (int trial = 0; trial < 200; ++trial) {
                              const std::size_t w = 2 + rng.uniform_index(7);
                              const double alpha = rng.uniform01();
                              const auto theta = random_cluster(rng, w, 50);
                              const auto sets = build_gossip_sets(select_peers(w, rng), GossipVariant::elastic);
                              if (!conserves(theta, elastic_gossip_step(theta, sets, alpha)) ||
                                  !conserves(theta, full_consensus_step(theta, alpha))) {
                                  return false;
                              }
                              const ParamVector center = random_vector(rng, 50);
                              const auto e = easgd_step(theta, center, alpha);
                              if (!conserves(theta, e.workers, &center, &e.center)) {
                                  return false;
                              }
                          }
                          return true;
                      }});
    checks.push_back({"moving rate boundaries (0 identity, 1 swap, 0.5 average)", [] {
                          const std::vector<ParamVector> theta{ParamVector(std::vector<double>{0.0}),
                                                               ParamVector(std::vector<double>{2.0})};
                          const GossipSets pair{{1}, {0}};
                          const auto a0 = elastic_gossip_step(theta, pair, 0.0);
                          const auto a1 = elastic_gossip_step(theta, pair, 1.0);
                          const auto ah = elastic_gossip_step(theta, pair, 0.5);
                          return a0 == theta && a1[0] == theta[1] && a1[1] == theta[0] &&
                                 std::abs(ah[0][0] - 1.0) <= 1e-12 && std::abs(ah[1][0] - 1.0) <= 1e-12;
                      }});
    checks.push_back({"identical clusters are fixed points of every protocol", [] {
                          RngStream rng(11);
                          const ParamVector v = random_vector(rng, 20);
                          const std::vector<ParamVector> same(4, v);
                          const auto sel = select_peers(4, rng);
                          auto close = [&](const std::vector<ParamVector>& out) {
                              for (const auto& w : out) {
                                  for (std::size_t c = 0; c < v.size(); ++c) {
                                      if (std::abs(w[c] - v[c]) > 1e-15) {
                                          return false;
                                      }
                                  }
                              }
                              return true;
                          };
                          return close(elastic_gossip_step(same, build_gossip_sets(sel, GossipVariant::elastic), 0.7)) &&
                                 close(pull_gossip_step(same, sel)) &&
                                 close(push_gossip_step(same, build_gossip_sets(sel, GossipVariant::push))) &&
                                 close(full_consensus_step(same, 0.3)) && close(easgd_step(same, v, 0.4).workers);
                      }});
    checks.push_back({"Bernoulli schedule rate p=1/32", [] {
                          const ProtocolSpec spec{Method::elastic_gossip, 0.5, Probability{1.0 / 32.0}};
                          RngStream rng(derive_seed(3, 0, StreamPurpose::schedule));
                          constexpr int ticks = 100000;
                          int hits = 0;
                          for (int t = 0; t < ticks; ++t) {
                              hits += should_communicate(spec, static_cast<std::uint64_t>(t), rng) ? 1 : 0;
                          }
                          const double p = 1.0 / 32.0;
                          return std::abs(hits / double(ticks) - p) <= 3.0 * std::sqrt(p * (1 - p) / ticks);
                      }});
    checks.push_back({"momentum-free NAG equals plain gradient descent", [] {
                          RngStream rng(5);
                          ParamVector theta = random_vector(rng, 30);
                          const ParamVector g = random_vector(rng, 30);
                          ParamVector expect = theta;
                          for (std::size_t i = 0; i < expect.size(); ++i) {
                              expect[i] = theta[i] - 0.05 * g[i];
                          }
                          Velocity v(30, 0.0);
                          nag_update(theta, v, g, 0.05, 0.0);
                          return theta == expect;
                      }});
    return checks;
}

}  // namespace

int cmd_verify(std::ostream& log) {
    bool ok = true;
    for (const auto& check : invariant_checks()) {
        bool passed = false;
        try {
            passed = check.run();
        } catch (const std::exception& e) {
            log << "  exception: " << e.what() << '\n';
        }
        log << (passed ? "[PASS] " : "[FAIL] ") << check.name << '\n';
        ok = ok && passed;
    }
    return ok ? exit_ok : exit_failure;
}

}  // namespace egl
