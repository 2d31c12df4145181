// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "egl/data.hpp"
#include "egl/nn.hpp"

namespace egl {

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Dropout-free mean cross-entropy and argmax accuracy (ties go to the
/// lowest class index).
Evaluation evaluate(const MlpSpec& spec, const ParamVector& params, const Dataset& data);

/// Per-coordinate mean over workers.
ParamVector aggregate_model(std::span<const ParamVector> workers);

/// Σ_{i<k} ‖θ^i − θ^k‖²; zero for fewer than two workers.
double pairwise_disagreement(std::span<const ParamVector> workers);

struct MetricsRecord {
    std::size_t step = 0;
    double epoch = 0.0;
    double train_loss_mean = 0.0;
    double rank0_acc = 0.0;
    double aggregate_acc = 0.0;
    double pairwise_disagreement = 0.0;
    std::vector<double> val_loss;
    std::vector<double> val_acc;

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

using MetricsSeries = std::vector<MetricsRecord>;

/// Header for a run with `workers` workers.
std::string metrics_header(std::size_t workers);

/// Writes the CSV (header once, 17 significant digits). Throws IoError.
void write_metrics(const MetricsSeries& series, std::size_t workers, const std::filesystem::path& path);

/// Parses a file produced by write_metrics. Throws FormatError.
MetricsSeries read_metrics(const std::filesystem::path& path);

/// 17-significant-digit rendering used for every CSV real.
std::string format_real(double v);

}  // namespace egl
