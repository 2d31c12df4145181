// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Datasets, normalisation, validation split, per-worker partitions and
// minibatch sampling.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "egl/nn.hpp"
#include "egl/numeric.hpp"
#include "egl/rng.hpp"

namespace egl {

struct Dataset {
    Matrix features;
    std::vector<Label> labels;
    std::size_t class_count = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dims() const noexcept { return features.cols(); }
    Dataset subset(std::span<const std::size_t> rows) const;
    void validate() const;
};

/// Reads an IDX image/label pair. Pixels become row-major features / 255.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writers for the same container; used by tests and fixture generation.
void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

/// Gaussian blobs: class c is centred on basis vector e_c (random unit
/// vectors once classes exceed dims), isotropic noise of std `spread`.
/// Rows cycle through classes so the set is balanced.
Dataset make_synthetic(std::uint64_t seed, std::size_t n, std::size_t dims, std::size_t classes, double spread);

struct Normalizer {
    ColumnStats stats;
    Dataset apply(const Dataset& data) const;
};

struct NormalizedData {
    Dataset train;
    std::vector<Dataset> others;
    Normalizer normalizer;
};

/// Fits on `train` only and applies the same statistics to every set.
NormalizedData fit_apply_normalizer(const Dataset& train, std::span<const Dataset> others);

struct TrainValidation {
    Dataset train;
    Dataset validation;
};

TrainValidation split_validation(const Dataset& data, std::size_t holdout, RngStream& rng);

enum class PartitionMode { uniform, class_biased };

struct Partition {
    std::size_t worker_rank = 0;
    std::vector<std::size_t> indices;
};

inline constexpr double default_majority_share = 0.8;

/// Splits the rows of `train` across workers. Uniform: shuffle, then
/// contiguous chunks whose sizes differ by at most one. Class-biased: each
/// worker fills `majority_share` of its quota from classes assigned to it
/// round-robin, the rest from whatever remains.
std::vector<Partition> partition(const Dataset& train, std::size_t workers, PartitionMode mode, RngStream& rng,
                                 double majority_share = default_majority_share);

/// Effective batch split evenly over workers; throws ConfigError otherwise.
std::size_t per_worker_batch(std::size_t effective_batch, std::size_t workers);

/// Walks a partition in epoch-shuffled order. Batches are consecutive
/// chunks of the concatenated epoch permutations, so every index appears
/// exactly once per epoch even when the batch does not divide the size.
///
/// The sampler holds no randomness of its own; the owning worker passes its
/// data stream on every call.
class MinibatchSampler {
public:
    explicit MinibatchSampler(std::vector<std::size_t> indices, bool shuffle = true);

    std::vector<std::size_t> next(std::size_t batch, RngStream& rng);
    /// Number of epochs started so far.
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t partition_size() const noexcept { return indices_.size(); }

private:
    void start_epoch(RngStream& rng);

    std::vector<std::size_t> indices_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::size_t epoch_ = 0;
    bool shuffle_;
};

struct Minibatch {
    Matrix x;
    std::vector<Label> labels;
};

Minibatch sample_minibatch(const Dataset& data, MinibatchSampler& sampler, RngStream& rng, std::size_t batch);

}  // namespace egl
