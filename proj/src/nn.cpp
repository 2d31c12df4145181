// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "egl/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace egl {

void MlpSpec::validate() const {
    if (layer_sizes.size() < 2) {
        throw std::invalid_argument("MlpSpec needs at least input and output sizes");
    }
    for (auto s : layer_sizes) {
        if (s == 0) {
            throw std::invalid_argument("MlpSpec layer sizes must be >= 1");
        }
    }
    if (!(input_dropout >= 0.0 && input_dropout < 1.0) || !(hidden_dropout >= 0.0 && hidden_dropout < 1.0)) {
        throw std::invalid_argument("dropout probabilities must lie in [0, 1)");
    }
}

std::size_t MlpSpec::param_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
    }
    return n;
}

std::size_t MlpSpec::weight_offset(std::size_t layer) const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l < layer; ++l) {
        n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
    }
    return n;
}

std::size_t MlpSpec::bias_offset(std::size_t layer) const noexcept {
    return weight_offset(layer) + layer_sizes[layer] * layer_sizes[layer + 1];
}

std::vector<std::uint8_t> serialize(const ParamVector& params) {
    std::vector<std::uint8_t> out;
    out.reserve(params.size() * 8);
    for (double v : params) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) {
            out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
        }
    }
    return out;
}

ParamVector deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % 8 != 0) {
        throw std::invalid_argument("parameter blob length " + std::to_string(bytes.size()) +
                                    " is not a multiple of 8");
    }
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        }
        values[i] = std::bit_cast<double>(bits);
    }
    return ParamVector(std::move(values));
}

namespace {

void check_params(const MlpSpec& spec, const ParamVector& params) {
    if (params.size() != spec.param_count()) {
        throw DimensionError("parameter vector has " + std::to_string(params.size()) + " entries, spec needs " +
                             std::to_string(spec.param_count()));
    }
}

Matrix weight_matrix(const MlpSpec& spec, const ParamVector& params, std::size_t layer) {
    const std::size_t fan_in = spec.layer_sizes[layer];
    const std::size_t fan_out = spec.layer_sizes[layer + 1];
    const auto begin = params.raw().begin() + static_cast<std::ptrdiff_t>(spec.weight_offset(layer));
    return Matrix(fan_in, fan_out, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(fan_in * fan_out)));
}

double dropout_rate(const MlpSpec& spec, std::size_t layer) {
    return layer == 0 ? spec.input_dropout : spec.hidden_dropout;
}

}  // namespace

ParamVector kaiming_init(const MlpSpec& spec, RngStream& rng) {
    spec.validate();
    ParamVector params(spec.param_count(), 0.0);
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t fan_in = spec.layer_sizes[l];
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        const std::size_t off = spec.weight_offset(l);
        const std::size_t count = fan_in * spec.layer_sizes[l + 1];
        for (std::size_t i = 0; i < count; ++i) {
            params[off + i] = rng.normal(0.0, stddev);
        }
    }
    return params;
}

DropoutMasks dropout_masks(const MlpSpec& spec, RngStream& rng, std::size_t batch) {
    DropoutMasks masks;
    masks.per_layer.reserve(spec.layer_count());
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const double p = dropout_rate(spec, l);
        Matrix m(batch, spec.layer_sizes[l], 1.0);
        if (p > 0.0) {
            const double scale = 1.0 / (1.0 - p);
            for (auto& v : m.data()) {
                v = rng.uniform01() < p ? 0.0 : scale;
            }
        }
        masks.per_layer.push_back(std::move(m));
    }
    return masks;
}

ForwardResult forward(const MlpSpec& spec, const ParamVector& params, const Matrix& x, const DropoutMasks* masks) {
    check_params(spec, params);
    if (x.cols() != spec.input_size()) {
        throw DimensionError("forward input " + x.shape_string() + " does not match input size " +
                             std::to_string(spec.input_size()));
    }
    if (masks != nullptr && masks->per_layer.size() != spec.layer_count()) {
        throw DimensionError("dropout masks for " + std::to_string(masks->per_layer.size()) + " layers, network has " +
                             std::to_string(spec.layer_count()));
    }

    ForwardResult result;
    auto& cache = result.cache;
    Matrix activation = x;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        if (masks != nullptr) {
            const Matrix& m = masks->per_layer[l];
            if (m.rows() != activation.rows() || m.cols() != activation.cols()) {
                throw DimensionError("dropout mask " + m.shape_string() + " vs activation " +
                                     activation.shape_string());
            }
            for (std::size_t i = 0; i < activation.size(); ++i) {
                activation.data()[i] *= m.data()[i];
            }
            cache.masks.push_back(m);
        }
        Matrix z = matmul(activation, weight_matrix(spec, params, l));
        const std::size_t boff = spec.bias_offset(l);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto row = z.row(r);
            for (std::size_t c = 0; c < z.cols(); ++c) {
                row[c] += params[boff + c];
            }
        }
        cache.inputs.push_back(std::move(activation));
        if (l + 1 == spec.layer_count()) {
            result.logits = std::move(z);
            break;
        }
        activation = z;
        for (auto& v : activation.data()) {
            v = std::max(v, 0.0);
        }
        cache.hidden_pre.push_back(std::move(z));
    }
    return result;
}

LossGrad softmax_ce(const Matrix& logits, std::span<const Label> labels) {
    if (labels.size() != logits.rows()) {
        throw DimensionError("softmax_ce: " + std::to_string(labels.size()) + " labels for logits " +
                             logits.shape_string());
    }
    if (logits.rows() == 0) {
        throw DimensionError("softmax_ce on empty batch");
    }
    const std::size_t classes = logits.cols();
    const auto batch = static_cast<double>(logits.rows());
    LossGrad out{0.0, Matrix(logits.rows(), classes)};
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        if (labels[r] >= classes) {
            throw std::out_of_range("label " + std::to_string(labels[r]) + " out of range for " +
                                    std::to_string(classes) + " classes");
        }
        auto z = logits.row(r);
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double v : z) {
            denom += std::exp(v - zmax);
        }
        const double log_denom = std::log(denom);
        out.loss -= (z[labels[r]] - zmax) - log_denom;
        auto d = out.dlogits.row(r);
        for (std::size_t c = 0; c < classes; ++c) {
            d[c] = std::exp(z[c] - zmax - log_denom);
        }
        d[labels[r]] -= 1.0;
        for (auto& v : d) {
            v /= batch;
        }
    }
    out.loss /= batch;
    return out;
}

Gradient backward(const MlpSpec& spec, const ParamVector& params, const ForwardCache& cache, const Matrix& dlogits) {
    check_params(spec, params);
    if (cache.inputs.size() != spec.layer_count()) {
        throw DimensionError("forward cache does not match network depth");
    }
    Gradient grad(spec.param_count(), 0.0);
    Matrix delta = dlogits;
    for (std::size_t l = spec.layer_count(); l-- > 0;) {
        const Matrix& input = cache.inputs[l];
        if (delta.rows() != input.rows() || delta.cols() != spec.layer_sizes[l + 1]) {
            throw DimensionError("backward delta " + delta.shape_string() + " at layer " + std::to_string(l));
        }
        const Matrix dw = matmul_at_b(input, delta);
        std::copy(dw.data().begin(), dw.data().end(),
                  grad.begin() + static_cast<std::ptrdiff_t>(spec.weight_offset(l)));
        const auto db = column_sums(delta);
        std::copy(db.begin(), db.end(), grad.begin() + static_cast<std::ptrdiff_t>(spec.bias_offset(l)));
        if (l == 0) {
            break;
        }
        Matrix upstream = matmul_a_bt(delta, weight_matrix(spec, params, l));
        const bool masked = cache.masks.size() == spec.layer_count();
        const Matrix& pre = cache.hidden_pre[l - 1];
        for (std::size_t i = 0; i < upstream.size(); ++i) {
            double g = upstream.data()[i];
            if (masked) {
                g *= cache.masks[l].data()[i];
            }
            upstream.data()[i] = pre.data()[i] > 0.0 ? g : 0.0;
        }
        delta = std::move(upstream);
    }
    return grad;
}

LossAndGradient loss_and_gradient(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                                  std::span<const Label> labels, const DropoutMasks* masks) {
    auto fwd = forward(spec, params, x, masks);
    auto lg = softmax_ce(fwd.logits, labels);
    return {lg.loss, backward(spec, params, fwd.cache, lg.dlogits)};
}

Gradient finite_diff_grad(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                          std::span<const Label> labels, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("finite_diff_grad needs epsilon > 0");
    }
    Gradient grad(params.size(), 0.0);
    ParamVector probe = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        probe[i] = params[i] + epsilon;
        const double up = softmax_ce(forward(spec, probe, x).logits, labels).loss;
        probe[i] = params[i] - epsilon;
        const double down = softmax_ce(forward(spec, probe, x).logits, labels).loss;
        probe[i] = params[i];
        grad[i] = (up - down) / (2.0 * epsilon);
    }
    return grad;
}

void nag_velocity(Velocity& velocity, const Gradient& gradient, double eta, double mu) {
    if (velocity.size() != gradient.size()) {
        throw DimensionError("velocity/gradient length mismatch");
    }
    for (std::size_t i = 0; i < velocity.size(); ++i) {
        velocity[i] = mu * velocity[i] - eta * gradient[i];
    }
}

void nag_apply(ParamVector& params, const Velocity& velocity, const Gradient& gradient, double eta, double mu) {
    if (params.size() != gradient.size() || params.size() != velocity.size()) {
        throw DimensionError("params/velocity/gradient length mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] = params[i] - eta * gradient[i] + mu * velocity[i];
    }
}

void nag_update(ParamVector& params, Velocity& velocity, const Gradient& gradient, double eta, double mu) {
    nag_velocity(velocity, gradient, eta, mu);
    nag_apply(params, velocity, gradient, eta, mu);
}

}  // namespace egl
