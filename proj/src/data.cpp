// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "egl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "egl/errors.hpp"

namespace egl {

namespace {

constexpr std::uint32_t idx_images_magic = 0x00000803;
constexpr std::uint32_t idx_labels_magic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::string& what) {
    if (offset + 4 > bytes.size()) {
        throw FormatError("truncated IDX header reading " + what, offset);
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.class_count = class_count;
    out.features = Matrix(rows.size(), dims());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = features.row(rows[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.labels.push_back(labels[rows[i]]);
    }
    return out;
}

void Dataset::validate() const {
    if (features.rows() != labels.size()) {
        throw DimensionError("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                             std::to_string(labels.size()) + " labels");
    }
    for (auto l : labels) {
        if (l >= class_count) {
            throw std::out_of_range("label " + std::to_string(l) + " >= class count " + std::to_string(class_count));
        }
    }
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    if (const auto magic = read_be32(img, 0, "image magic"); magic != idx_images_magic) {
        throw FormatError(images_path.string() + ": bad image magic " + std::to_string(magic), 0);
    }
    if (const auto magic = read_be32(lab, 0, "label magic"); magic != idx_labels_magic) {
        throw FormatError(labels_path.string() + ": bad label magic " + std::to_string(magic), 0);
    }
    const std::size_t count = read_be32(img, 4, "image count");
    const std::size_t rows = read_be32(img, 8, "image rows");
    const std::size_t cols = read_be32(img, 12, "image cols");
    const std::size_t label_count = read_be32(lab, 4, "label count");
    if (label_count != count) {
        throw FormatError("label file declares " + std::to_string(label_count) + " items, image file declares " +
                              std::to_string(count),
                          4);
    }
    const std::size_t dims = rows * cols;
    constexpr std::size_t image_header = 16;
    constexpr std::size_t label_header = 8;
    if (img.size() < image_header + count * dims) {
        throw FormatError(images_path.string() + ": truncated pixel data, expected " +
                              std::to_string(count * dims) + " bytes",
                          img.size());
    }
    if (lab.size() < label_header + count) {
        throw FormatError(labels_path.string() + ": truncated label data", lab.size());
    }

    Dataset data;
    data.features = Matrix(count, dims);
    auto feat = data.features.data();
    for (std::size_t i = 0; i < count * dims; ++i) {
        feat[i] = static_cast<double>(img[image_header + i]) / 255.0;
    }
    data.labels.resize(count);
    std::size_t max_label = 0;
    for (std::size_t i = 0; i < count; ++i) {
        data.labels[i] = lab[label_header + i];
        max_label = std::max<std::size_t>(max_label, data.labels[i]);
    }
    data.class_count = std::max<std::size_t>(10, max_label + 1);
    return data;
}

void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels) {
    const std::size_t dims = rows * cols;
    if (dims == 0 || pixels.size() % dims != 0) {
        throw DimensionError("pixel buffer of " + std::to_string(pixels.size()) + " bytes is not a whole number of " +
                             std::to_string(rows) + "x" + std::to_string(cols) + " images");
    }
    std::vector<std::uint8_t> out;
    out.reserve(16 + pixels.size());
    put_be32(out, idx_images_magic);
    put_be32(out, static_cast<std::uint32_t>(pixels.size() / dims));
    put_be32(out, static_cast<std::uint32_t>(rows));
    put_be32(out, static_cast<std::uint32_t>(cols));
    out.insert(out.end(), pixels.begin(), pixels.end());
    write_file(path, out);
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.size());
    put_be32(out, idx_labels_magic);
    put_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    write_file(path, out);
}

Dataset make_synthetic(std::uint64_t seed, std::size_t n, std::size_t dims, std::size_t classes, double spread) {
    if (classes < 2) {
        throw std::invalid_argument("make_synthetic needs at least 2 classes");
    }
    if (n < classes) {
        throw std::invalid_argument("make_synthetic needs n >= classes");
    }
    if (dims == 0) {
        throw std::invalid_argument("make_synthetic needs dims >= 1");
    }
    RngStream rng(seed);
    Matrix centers(classes, dims);
    for (std::size_t c = 0; c < classes; ++c) {
        if (classes <= dims) {
            centers(c, c) = 1.0;
            continue;
        }
        double norm = 0.0;
        for (auto& v : centers.row(c)) {
            v = rng.normal(0.0, 1.0);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (auto& v : centers.row(c)) {
            v /= norm;
        }
    }
    Dataset data;
    data.class_count = classes;
    data.features = Matrix(n, dims);
    data.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<Label>(i % classes);
        data.labels[i] = c;
        auto row = data.features.row(i);
        for (std::size_t j = 0; j < dims; ++j) {
            // Always draw, so the noise stream does not depend on spread.
            const double noise = rng.normal(0.0, 1.0);
            row[j] = centers(c, j) + spread * noise;
        }
    }
    return data;
}

Dataset Normalizer::apply(const Dataset& data) const {
    Dataset out = data;
    if (data.size() > 0) {
        out.features = standardize(data.features, stats);
    }
    return out;
}

NormalizedData fit_apply_normalizer(const Dataset& train, std::span<const Dataset> others) {
    NormalizedData out;
    out.normalizer.stats = column_stats(train.features);
    out.train = out.normalizer.apply(train);
    out.others.reserve(others.size());
    for (const auto& d : others) {
        out.others.push_back(out.normalizer.apply(d));
    }
    return out;
}

TrainValidation split_validation(const Dataset& data, std::size_t holdout, RngStream& rng) {
    if (holdout >= data.size()) {
        throw std::invalid_argument("validation holdout " + std::to_string(holdout) + " must be < dataset size " +
                                    std::to_string(data.size()));
    }
    if (holdout == 0) {
        Dataset empty;
        empty.class_count = data.class_count;
        empty.features = Matrix(0, data.dims());
        return {data, std::move(empty)};
    }
    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<std::size_t> held(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(holdout));
    std::vector<std::size_t> kept(perm.begin() + static_cast<std::ptrdiff_t>(holdout), perm.end());
    std::sort(kept.begin(), kept.end());
    return {data.subset(kept), data.subset(held)};
}

namespace {

std::vector<std::size_t> quotas(std::size_t n, std::size_t workers) {
    std::vector<std::size_t> q(workers, n / workers);
    for (std::size_t w = 0; w < n % workers; ++w) {
        ++q[w];
    }
    return q;
}

}  // namespace

std::vector<Partition> partition(const Dataset& train, std::size_t workers, PartitionMode mode, RngStream& rng,
                                 double majority_share) {
    const std::size_t n = train.size();
    if (workers == 0) {
        throw std::invalid_argument("partition needs at least one worker");
    }
    if (workers > n) {
        throw std::invalid_argument("cannot partition " + std::to_string(n) + " rows across " +
                                    std::to_string(workers) + " workers");
    }
    if (!(majority_share >= 0.0 && majority_share <= 1.0)) {
        throw std::invalid_argument("majority share must lie in [0, 1]");
    }
    const auto quota = quotas(n, workers);
    std::vector<Partition> parts(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        parts[w].worker_rank = w;
        parts[w].indices.reserve(quota[w]);
    }

    if (mode == PartitionMode::uniform) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(perm));
        std::size_t pos = 0;
        for (std::size_t w = 0; w < workers; ++w) {
            parts[w].indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                                    perm.begin() + static_cast<std::ptrdiff_t>(pos + quota[w]));
            pos += quota[w];
        }
        return parts;
    }

    // Class-biased: per-class pools, drawn without replacement.
    const std::size_t classes = train.class_count;
    std::vector<std::vector<std::size_t>> pools(classes);
    for (std::size_t i = 0; i < n; ++i) {
        pools[train.labels[i]].push_back(i);
    }
    for (auto& pool : pools) {
        rng.shuffle(std::span<std::size_t>(pool));
    }
    std::vector<std::vector<std::size_t>> majority(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        if (classes >= workers) {
            for (std::size_t c = w; c < classes; c += workers) {
                majority[w].push_back(c);
            }
        } else {
            majority[w].push_back(w % classes);
        }
    }
    for (std::size_t w = 0; w < workers; ++w) {
        const auto want = static_cast<std::size_t>(std::llround(majority_share * static_cast<double>(quota[w])));
        std::size_t taken = 0;
        // Round-robin over the worker's majority classes.
        bool progress = true;
        while (taken < want && progress) {
            progress = false;
            for (auto c : majority[w]) {
                if (taken == want) {
                    break;
                }
                if (!pools[c].empty()) {
                    parts[w].indices.push_back(pools[c].back());
                    pools[c].pop_back();
                    ++taken;
                    progress = true;
                }
            }
        }
    }
    std::vector<std::size_t> rest;
    for (auto& pool : pools) {
        rest.insert(rest.end(), pool.begin(), pool.end());
    }
    std::sort(rest.begin(), rest.end());
    rng.shuffle(std::span<std::size_t>(rest));
    std::size_t pos = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        while (parts[w].indices.size() < quota[w]) {
            parts[w].indices.push_back(rest[pos++]);
        }
        rng.shuffle(std::span<std::size_t>(parts[w].indices));
    }
    return parts;
}

std::size_t per_worker_batch(std::size_t effective_batch, std::size_t workers) {
    if (workers == 0 || effective_batch == 0) {
        throw ConfigError("effective_batch and workers must be positive");
    }
    if (effective_batch % workers != 0) {
        throw ConfigError("effective_batch " + std::to_string(effective_batch) + " is not divisible by " +
                          std::to_string(workers) + " workers");
    }
    return effective_batch / workers;
}

MinibatchSampler::MinibatchSampler(std::vector<std::size_t> indices, bool shuffle)
    : indices_(std::move(indices)), shuffle_(shuffle) {
    if (indices_.empty()) {
        throw std::invalid_argument("cannot sample from an empty partition");
    }
}

void MinibatchSampler::start_epoch(RngStream& rng) {
    order_ = indices_;
    if (shuffle_) {
        rng.shuffle(std::span<std::size_t>(order_));
    }
    cursor_ = 0;
    ++epoch_;
}

std::vector<std::size_t> MinibatchSampler::next(std::size_t batch, RngStream& rng) {
    if (batch == 0) {
        throw std::invalid_argument("batch size must be >= 1");
    }
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
        if (cursor_ == order_.size()) {
            start_epoch(rng);
        }
        out.push_back(order_[cursor_++]);
    }
    return out;
}

Minibatch sample_minibatch(const Dataset& data, MinibatchSampler& sampler, RngStream& rng, std::size_t batch) {
    const auto rows = sampler.next(batch, rng);
    Dataset sub = data.subset(rows);
    return {std::move(sub.features), std::move(sub.labels)};
}

}  // namespace egl
