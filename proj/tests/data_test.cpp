// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "egl/data.hpp"
#include "egl/errors.hpp"
#include "egl/metrics.hpp"
#include "egl/sim.hpp"
#include "test_helpers.hpp"

namespace egl {
namespace {

namespace fs = std::filesystem;

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> image_file(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     const std::vector<std::uint8_t>& pixels) {
    std::vector<std::uint8_t> out{0, 0, 8, 3};
    for (std::uint32_t v : {count, rows, cols}) {
        for (int shift = 24; shift >= 0; shift -= 8) {
            out.push_back(static_cast<std::uint8_t>(v >> shift));
        }
    }
    for (std::uint8_t p : pixels) {
        out.push_back(p);
    }
    return out;
}

std::vector<std::uint8_t> label_file(std::uint32_t count, const std::vector<std::uint8_t>& labels) {
    std::vector<std::uint8_t> out{0, 0, 8, 1, 0, 0, static_cast<std::uint8_t>(count >> 8),
                                  static_cast<std::uint8_t>(count)};
    for (std::uint8_t l : labels) {
        out.push_back(l);
    }
    return out;
}

class IdxTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = testing::scratch_dir("idx");
        images_ = dir_ / "images.idx";
        labels_ = dir_ / "labels.idx";
    }
    fs::path dir_, images_, labels_;
};

TEST_F(IdxTest, HeaderArithmetic) {
    write_bytes(images_, image_file(2, 2, 2, {0, 255, 51, 102, 1, 2, 3, 4}));
    write_bytes(labels_, label_file(2, {7, 1}));
    const Dataset d = load_idx(images_, labels_);
    EXPECT_EQ(d.features.rows(), 2u);
    EXPECT_EQ(d.features.cols(), 4u);
    EXPECT_EQ(d.features(0, 0), 0.0);
    EXPECT_EQ(d.features(0, 1), 1.0);
    EXPECT_EQ(d.features(0, 2), 0.2);
    EXPECT_EQ(d.labels, (std::vector<Label>{7, 1}));
    EXPECT_EQ(d.class_count, 10u);
}

TEST_F(IdxTest, CountMismatchIsFormatError) {
    write_bytes(images_, image_file(2, 1, 1, {1, 2}));
    write_bytes(labels_, label_file(3, {0, 1, 2}));
    EXPECT_THROW(load_idx(images_, labels_), FormatError);
}

TEST_F(IdxTest, BadMagicIsFormatError) {
    auto bytes = image_file(1, 1, 1, {9});
    bytes[3] = 0x01;
    write_bytes(images_, bytes);
    write_bytes(labels_, label_file(1, {0}));
    try {
        load_idx(images_, labels_);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 0u);
        EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
    }
}

TEST_F(IdxTest, TruncationIsFormatError) {
    auto bytes = image_file(2, 2, 2, {1, 2, 3, 4, 5, 6, 7});
    write_bytes(images_, bytes);
    write_bytes(labels_, label_file(2, {0, 1}));
    EXPECT_THROW(load_idx(images_, labels_), FormatError);
    write_bytes(images_, {0, 0, 8, 3, 0, 0});
    EXPECT_THROW(load_idx(images_, labels_), FormatError);
}

TEST_F(IdxTest, MissingFileIsIoError) {
    EXPECT_THROW(load_idx(dir_ / "nope", dir_ / "nope2"), IoError);
}

TEST_F(IdxTest, WriterRoundTripIsBitExact) {
    RngStream rng(5);
    std::vector<std::uint8_t> pixels(6 * 3 * 4);
    for (auto& p : pixels) {
        p = static_cast<std::uint8_t>(rng.uniform_index(256));
    }
    const std::vector<std::uint8_t> labels{0, 9, 3, 3, 12, 5};
    write_idx_images(images_, 3, 4, pixels);
    write_idx_labels(labels_, labels);
    const Dataset d = load_idx(images_, labels_);
    ASSERT_EQ(d.size(), 6u);
    ASSERT_EQ(d.dims(), 12u);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        EXPECT_EQ(d.features.data()[i], pixels[i] / 255.0);
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        EXPECT_EQ(d.labels[i], labels[i]);
    }
    EXPECT_EQ(d.class_count, 13u);
    // The writer's bytes must equal the hand-built encoding.
    std::ifstream in(images_, std::ios::binary);
    const std::vector<std::uint8_t> written((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(written, image_file(6, 3, 4, pixels));
}

TEST(Synthetic, ZeroSpreadIsLinearlySeparable) {
    const Dataset d = make_synthetic(3, 90, 5, 3, 0.0);
    // Weights = identity on the first 3 dims: logit c is feature c.
    const MlpSpec spec{{5, 3}};
    ParamVector p(spec.param_count());
    for (std::size_t c = 0; c < 3; ++c) {
        p[c * 3 + c] = 1.0;
    }
    EXPECT_EQ(evaluate(spec, p, d).accuracy, 1.0);
}

TEST(Synthetic, DeterministicInSeed) {
    const Dataset a = make_synthetic(4, 100, 6, 4, 0.3);
    const Dataset b = make_synthetic(4, 100, 6, 4, 0.3);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(make_synthetic(5, 100, 6, 4, 0.3).features, a.features);
}

TEST(Synthetic, MoreClassesThanDimsStillBalanced) {
    const Dataset d = make_synthetic(4, 70, 2, 7, 0.1);
    std::map<Label, int> counts;
    for (Label l : d.labels) {
        ++counts[l];
    }
    EXPECT_EQ(counts.size(), 7u);
    for (const auto& [label, count] : counts) {
        EXPECT_EQ(count, 10);
    }
    EXPECT_THROW(make_synthetic(1, 5, 3, 1, 0.1), std::invalid_argument);
    EXPECT_THROW(make_synthetic(1, 2, 3, 3, 0.1), std::invalid_argument);
}

TEST(Synthetic, SingleWorkerMlpLearnsDeskTask) {
    ExperimentConfig cfg;
    cfg.model = MlpSpec{{10, 32, 32, 3}};
    cfg.protocol.method = Method::none;
    cfg.workers = 1;
    cfg.steps = 2000;
    cfg.eval_every = 2000;
    const auto data = load_data(cfg.data);
    const auto result = run_experiment(cfg, data);
    ASSERT_FALSE(result.diverged);
    EXPECT_GE(result.metrics.back().rank0_acc, 0.95);
}

TEST(Normalizer, TrainColumnsStandardized) {
    const Dataset train = make_synthetic(8, 300, 6, 3, 0.7);
    const auto out = fit_apply_normalizer(train, {});
    const auto s = column_stats(out.train.features);
    for (std::size_t c = 0; c < 6; ++c) {
        EXPECT_LE(std::abs(s.mean[c]), 1e-10);
        EXPECT_NEAR(s.std[c], 1.0, 1e-10);
    }
}

TEST(Normalizer, ConstantColumnMapsToZero) {
    Dataset train = make_synthetic(8, 30, 3, 3, 0.5);
    for (std::size_t r = 0; r < train.size(); ++r) {
        train.features(r, 1) = 4.25;
    }
    const auto out = fit_apply_normalizer(train, {});
    for (std::size_t r = 0; r < train.size(); ++r) {
        EXPECT_EQ(out.train.features(r, 1), 0.0);
    }
}

TEST(Normalizer, OthersUseTrainStatistics) {
    const Dataset train = make_synthetic(8, 400, 4, 2, 0.5);
    Dataset shifted = train;
    for (auto& v : shifted.features.data()) {
        v += 5.0;
    }
    const std::vector<Dataset> others{shifted};
    const auto out = fit_apply_normalizer(train, others);
    const auto train_stats = column_stats(train.features);
    const auto s = column_stats(out.others[0].features);
    for (std::size_t c = 0; c < 4; ++c) {
        // Own statistics would give mean 0; train statistics give 5/std.
        EXPECT_NEAR(s.mean[c], 5.0 / train_stats.std[c], 1e-9);
    }
}

TEST(Split, ZeroHoldoutKeepsEverything) {
    const Dataset d = make_synthetic(1, 50, 3, 2, 0.3);
    RngStream rng(1);
    const auto split = split_validation(d, 0, rng);
    EXPECT_EQ(split.train.features, d.features);
    EXPECT_EQ(split.train.labels, d.labels);
    EXPECT_EQ(split.validation.size(), 0u);
}

TEST(Split, DisjointExhaustiveDeterministic) {
    // Tag each row with its index in feature 0 to recover provenance.
    Dataset d = make_synthetic(1, 200, 3, 4, 0.3);
    for (std::size_t r = 0; r < d.size(); ++r) {
        d.features(r, 0) = static_cast<double>(r);
    }
    RngStream a(9);
    RngStream b(9);
    const auto s1 = split_validation(d, 37, a);
    const auto s2 = split_validation(d, 37, b);
    EXPECT_EQ(s1.validation.features, s2.validation.features);
    ASSERT_EQ(s1.train.size() + s1.validation.size(), 200u);
    EXPECT_EQ(s1.validation.size(), 37u);
    std::set<double> seen;
    for (const Dataset* part : {&s1.train, &s1.validation}) {
        for (std::size_t r = 0; r < part->size(); ++r) {
            EXPECT_TRUE(seen.insert(part->features(r, 0)).second);
        }
    }
    EXPECT_EQ(seen.size(), 200u);
}

TEST(Split, HoldoutTooLargeThrows) {
    const Dataset d = make_synthetic(1, 20, 3, 2, 0.3);
    RngStream rng(1);
    EXPECT_THROW(split_validation(d, 20, rng), std::invalid_argument);
}

void expect_exhaustive_disjoint(const std::vector<Partition>& parts, std::size_t n) {
    std::vector<int> hits(n, 0);
    for (std::size_t w = 0; w < parts.size(); ++w) {
        EXPECT_EQ(parts[w].worker_rank, w);
        for (std::size_t i : parts[w].indices) {
            ASSERT_LT(i, n);
            ++hits[i];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_EQ(hits[i], 1) << "row " << i;
    }
}

TEST(PartitionTest, SingleWorkerGetsEverything) {
    const Dataset d = make_synthetic(2, 40, 3, 4, 0.3);
    RngStream rng(3);
    const auto parts = partition(d, 1, PartitionMode::uniform, rng);
    ASSERT_EQ(parts.size(), 1u);
    expect_exhaustive_disjoint(parts, 40);
}

TEST(PartitionTest, UniformSizesDifferByAtMostOne) {
    const Dataset d = make_synthetic(2, 10, 3, 2, 0.3);
    RngStream rng(3);
    const auto parts = partition(d, 4, PartitionMode::uniform, rng);
    ASSERT_EQ(parts.size(), 4u);
    EXPECT_EQ(parts[0].indices.size(), 3u);
    EXPECT_EQ(parts[1].indices.size(), 3u);
    EXPECT_EQ(parts[2].indices.size(), 2u);
    EXPECT_EQ(parts[3].indices.size(), 2u);
}

TEST(PartitionTest, FullSkewGivesOneClassPerWorker) {
    const Dataset d = make_synthetic(2, 120, 4, 4, 0.3);
    RngStream rng(3);
    const auto parts = partition(d, 4, PartitionMode::class_biased, rng, 1.0);
    for (const auto& p : parts) {
        std::set<Label> classes;
        for (std::size_t i : p.indices) {
            classes.insert(d.labels[i]);
        }
        EXPECT_EQ(classes.size(), 1u);
    }
    expect_exhaustive_disjoint(parts, 120);
}

TEST(PartitionTest, BiasedMajorityShareIsApproximatelyQ) {
    const Dataset d = make_synthetic(2, 3000, 4, 3, 0.3);
    RngStream rng(4);
    const auto parts = partition(d, 3, PartitionMode::class_biased, rng, 0.8);
    for (std::size_t w = 0; w < 3; ++w) {
        std::size_t majority = 0;
        for (std::size_t i : parts[w].indices) {
            majority += d.labels[i] == w ? 1 : 0;
        }
        const double share = static_cast<double>(majority) / parts[w].indices.size();
        // 80% drawn from the own class, plus its share of the uniform remainder.
        EXPECT_GT(share, 0.8);
        EXPECT_LT(share, 0.95);
    }
}

TEST(PartitionTest, ExhaustiveAndDisjointAcrossConfigurations) {
    RngStream meta(17);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t classes = 2 + meta.uniform_index(6);
        const std::size_t n = classes + meta.uniform_index(300);
        const std::size_t workers = 1 + meta.uniform_index(std::min<std::size_t>(n, 9));
        const double q = meta.uniform01();
        const Dataset d = make_synthetic(trial, n, 3, classes, 0.3);
        for (auto mode : {PartitionMode::uniform, PartitionMode::class_biased}) {
            RngStream rng(trial);
            const auto parts = partition(d, workers, mode, rng, q);
            ASSERT_EQ(parts.size(), workers);
            expect_exhaustive_disjoint(parts, n);
            for (const auto& p : parts) {
                EXPECT_LE(p.indices.size(), n / workers + 1);
                EXPECT_GE(p.indices.size(), n / workers);
            }
        }
    }
}

TEST(PartitionTest, TooManyWorkersThrows) {
    const Dataset d = make_synthetic(2, 5, 3, 2, 0.3);
    RngStream rng(3);
    EXPECT_THROW(partition(d, 6, PartitionMode::uniform, rng), std::invalid_argument);
    EXPECT_THROW(partition(d, 0, PartitionMode::uniform, rng), std::invalid_argument);
}

TEST(Sampler, FullBatchCoversPartitionOnce) {
    std::vector<std::size_t> idx{4, 8, 15, 16, 23, 42};
    MinibatchSampler sampler(idx);
    RngStream rng(1);
    auto batch = sampler.next(6, rng);
    std::sort(batch.begin(), batch.end());
    EXPECT_EQ(batch, idx);
    EXPECT_EQ(sampler.epoch(), 1u);
}

TEST(Sampler, SuccessiveEpochsUseDifferentPermutations) {
    std::vector<std::size_t> idx(50);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    MinibatchSampler sampler(idx);
    RngStream rng(2);
    const auto first = sampler.next(50, rng);
    const auto second = sampler.next(50, rng);
    EXPECT_NE(first, second);
    EXPECT_EQ(sampler.epoch(), 2u);
}

TEST(Sampler, EveryIndexOncePerEpochEvenWhenBatchDoesNotDivide) {
    std::vector<std::size_t> idx(20);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = 100 + i;
    }
    MinibatchSampler sampler(idx);
    RngStream rng(3);
    std::vector<std::size_t> stream;
    for (int b = 0; b < 20; ++b) {
        const auto batch = sampler.next(7, rng);
        stream.insert(stream.end(), batch.begin(), batch.end());
    }
    for (std::size_t epoch = 0; epoch < 7; ++epoch) {
        std::vector<std::size_t> slice(stream.begin() + epoch * 20, stream.begin() + (epoch + 1) * 20);
        std::sort(slice.begin(), slice.end());
        EXPECT_EQ(slice, idx) << "epoch " << epoch;
    }
}

TEST(Sampler, UnshuffledReadsInOrder) {
    MinibatchSampler sampler({5, 6, 7}, false);
    RngStream rng(3);
    EXPECT_EQ(sampler.next(4, rng), (std::vector<std::size_t>{5, 6, 7, 5}));
}

TEST(Sampler, MinibatchRowsMatchDataset) {
    const Dataset d = make_synthetic(1, 30, 3, 3, 0.3);
    MinibatchSampler sampler({3, 9, 27}, false);
    RngStream rng(1);
    const auto mb = sample_minibatch(d, sampler, rng, 2);
    ASSERT_EQ(mb.x.rows(), 2u);
    EXPECT_EQ(mb.labels[1], d.labels[9]);
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(mb.x(1, c), d.features(9, c));
    }
}

TEST(PerWorkerBatch, DividesEffectiveBatch) {
    EXPECT_EQ(per_worker_batch(128, 2), 64u);
    EXPECT_EQ(per_worker_batch(32, 4), 8u);
    EXPECT_THROW(per_worker_batch(10, 4), ConfigError);
}

}  // namespace
}  // namespace egl
