// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON experiment configuration.
//
//   {
//     "protocol":  {"method": "elastic_gossip", "alpha": 0.5, "comm_probability": 0.03125},
//     "optimizer": {"eta": 0.01, "mu": 0.9},
//     "model":     {"layer_sizes": [10, 32, 32, 3], "input_dropout": 0, "hidden_dropout": 0},
//     "workers": 4, "effective_batch": 32, "steps": 2000, "seed": 0, "eval_every": 100,
//     "data": {"source": "synthetic", "partition_mode": "class_biased", ...}
//   }
//
// Unknown keys are rejected. Omitted keys take the defaults of
// ExperimentConfig / DataSpec; model.layer_sizes defaults to
// [dims, 32, 32, classes] for synthetic data and is required for IDX data.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "egl/sim.hpp"

namespace egl {

/// Relative IDX paths are resolved against `base_dir`.
ExperimentConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Reads and validates a config file. Throws ConfigError / IoError.
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Fully explicit tree; config_from_json(config_to_json(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical JSON dump.
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace egl
