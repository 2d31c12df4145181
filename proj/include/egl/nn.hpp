// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-layer perceptron: ReLU hidden layers, softmax cross-entropy output,
// inverted dropout, Kaiming initialisation and the Nesterov-style update used
// by every training protocol.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "egl/numeric.hpp"
#include "egl/rng.hpp"

namespace egl {

using Label = std::uint32_t;

struct MlpSpec {
    /// input, hidden..., output
    std::vector<std::size_t> layer_sizes;
    double input_dropout = 0.0;
    double hidden_dropout = 0.0;

    /// Throws std::invalid_argument if the spec is malformed.
    void validate() const;
    std::size_t layer_count() const noexcept { return layer_sizes.size() - 1; }
    std::size_t input_size() const noexcept { return layer_sizes.front(); }
    std::size_t output_size() const noexcept { return layer_sizes.back(); }
    std::size_t param_count() const noexcept;
    /// Offset of layer l's row-major (fan_in x fan_out) weight block.
    std::size_t weight_offset(std::size_t layer) const noexcept;
    /// Offset of layer l's bias block, which directly follows its weights.
    std::size_t bias_offset(std::size_t layer) const noexcept;
    bool has_dropout() const noexcept { return input_dropout > 0.0 || hidden_dropout > 0.0; }

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Flat model parameters. Layout: for each layer, weights row-major
/// (fan_in x fan_out) then biases. Gradients and velocities share it.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
    explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

    std::size_t size() const noexcept { return values_.size(); }
    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& raw() const noexcept { return values_; }

    auto begin() noexcept { return values_.begin(); }
    auto end() noexcept { return values_.end(); }
    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    std::vector<double> values_;
};

using Gradient = ParamVector;
using Velocity = ParamVector;

/// 8-byte little-endian reals in layout order.
std::vector<std::uint8_t> serialize(const ParamVector& params);
ParamVector deserialize(std::span<const std::uint8_t> bytes);

/// One multiplicative mask per layer input; entries are 0 or 1/(1-p).
struct DropoutMasks {
    std::vector<Matrix> per_layer;
};

struct ForwardCache {
    /// Input to each layer after masking.
    std::vector<Matrix> inputs;
    /// Pre-activation of each hidden layer.
    std::vector<Matrix> hidden_pre;
    std::vector<Matrix> masks;
};

struct ForwardResult {
    Matrix logits;
    ForwardCache cache;
};

struct LossGrad {
    double loss = 0.0;
    Matrix dlogits;
};

/// Weights ~ N(0, 2/fan_in), biases zero.
ParamVector kaiming_init(const MlpSpec& spec, RngStream& rng);

DropoutMasks dropout_masks(const MlpSpec& spec, RngStream& rng, std::size_t batch);

/// Pass masks only in training mode.
ForwardResult forward(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                      const DropoutMasks* masks = nullptr);

/// Mean cross-entropy over the batch; dlogits = (softmax - onehot) / batch.
LossGrad softmax_ce(const Matrix& logits, std::span<const Label> labels);

Gradient backward(const MlpSpec& spec, const ParamVector& params, const ForwardCache& cache,
                  const Matrix& dlogits);

struct LossAndGradient {
    double loss = 0.0;
    Gradient gradient;
};

LossAndGradient loss_and_gradient(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                                  std::span<const Label> labels, const DropoutMasks* masks = nullptr);

/// Central differences of the dropout-free loss; test oracle for backward.
Gradient finite_diff_grad(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                          std::span<const Label> labels, double epsilon);

/// v <- mu v - eta g
void nag_velocity(Velocity& velocity, const Gradient& gradient, double eta, double mu);
/// theta <- theta - eta g + mu v, with v already updated by nag_velocity.
void nag_apply(ParamVector& params, const Velocity& velocity, const Gradient& gradient, double eta, double mu);
/// Both lines in order.
void nag_update(ParamVector& params, Velocity& velocity, const Gradient& gradient, double eta, double mu);

}  // namespace egl
