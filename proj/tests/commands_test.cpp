// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "egl/checkpoint.hpp"
#include "egl/commands.hpp"
#include "egl/config.hpp"
#include "egl/errors.hpp"
#include "test_helpers.hpp"

namespace egl {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto path = dir / "base.json";
    std::ofstream(path) << text;
    return path;
}

constexpr const char* small_gossip = R"({
    "protocol": {"method": "elastic_gossip", "alpha": 0.5, "tau": 4},
    "model": {"layer_sizes": [10, 16, 3]},
    "workers": 2, "steps": 40, "eval_every": 20,
    "data": {"n": 400, "validation_holdout": 80}
})";

int run_cli(const std::string& args) {
    const int status = std::system((std::string(EGL_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CommandsTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = testing::scratch_dir(std::string("cmd_") + info->name());
    }
    fs::path dir_;
    std::ostringstream log_;
};

TEST_F(CommandsTest, DeskRunWritesThreeFilesQuickly) {
    const auto start = std::chrono::steady_clock::now();
    const int code = cmd_run(fs::path(EGL_SOURCE_DIR) / "configs" / "desk_elastic_gossip.json", std::nullopt,
                             dir_ / "run", false, 1, log_);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    ASSERT_EQ(code, exit_ok) << log_.str();
    EXPECT_LT(elapsed, std::chrono::seconds(60));
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir_ / "run")) {
        ++files;
    }
    EXPECT_EQ(files, 3u);
    EXPECT_TRUE(fs::exists(dir_ / "run" / metrics_file));
    EXPECT_TRUE(fs::exists(dir_ / "run" / checkpoint_file));
    EXPECT_TRUE(fs::exists(dir_ / "run" / resolved_config_file));
}

TEST_F(CommandsTest, SameSeedGivesIdenticalCsv) {
    const auto cfg = write_config(dir_, small_gossip);
    ASSERT_EQ(cmd_run(cfg, 5, dir_ / "a", false, 1, log_), exit_ok);
    ASSERT_EQ(cmd_run(cfg, 5, dir_ / "b", false, 1, log_), exit_ok);
    ASSERT_EQ(cmd_run(cfg, 6, dir_ / "c", false, 1, log_), exit_ok);
    EXPECT_EQ(slurp(dir_ / "a" / metrics_file), slurp(dir_ / "b" / metrics_file));
    EXPECT_NE(slurp(dir_ / "a" / metrics_file), slurp(dir_ / "c" / metrics_file));
}

TEST_F(CommandsTest, ResolvedConfigAndCheckpointMatchRun) {
    const auto cfg_path = write_config(dir_, small_gossip);
    ASSERT_EQ(cmd_run(cfg_path, 9, dir_ / "out", false, 1, log_), exit_ok);
    auto original = parse_config(cfg_path);
    original.seed = 9;
    const auto resolved = parse_config(dir_ / "out" / resolved_config_file);
    EXPECT_EQ(resolved, original);
    const auto ckpt = read_checkpoint(dir_ / "out" / checkpoint_file);
    EXPECT_EQ(ckpt.config_hash, config_hash(original));
    EXPECT_EQ(ckpt.workers.size(), 2u);
    EXPECT_EQ(ckpt.workers[0].size(), original.model.param_count());
    EXPECT_FALSE(ckpt.center.has_value());
}

TEST_F(CommandsTest, UnwritableOutdirIsIoExit) {
    const auto cfg = write_config(dir_, small_gossip);
    std::ofstream(dir_ / "blocker") << "file, not a directory";
    EXPECT_EQ(cmd_run(cfg, std::nullopt, dir_ / "blocker" / "out", false, 1, log_), exit_io_error);
    EXPECT_EQ(cmd_run(dir_ / "missing.json", std::nullopt, dir_ / "out", false, 1, log_), exit_io_error);
}

TEST_F(CommandsTest, RefusesOverwriteWithoutForce) {
    const auto cfg = write_config(dir_, small_gossip);
    ASSERT_EQ(cmd_run(cfg, std::nullopt, dir_ / "out", false, 1, log_), exit_ok);
    std::ofstream(dir_ / "out" / metrics_file) << "sentinel";
    EXPECT_EQ(cmd_run(cfg, std::nullopt, dir_ / "out", false, 1, log_), exit_io_error);
    EXPECT_EQ(slurp(dir_ / "out" / metrics_file), "sentinel");
    EXPECT_EQ(cmd_run(cfg, std::nullopt, dir_ / "out", true, 1, log_), exit_ok);
    EXPECT_NE(slurp(dir_ / "out" / metrics_file), "sentinel");
}

TEST_F(CommandsTest, DivergenceHasItsOwnExitCode) {
    auto cfg = config_from_json(nlohmann::json::parse(small_gossip));
    cfg.optimizer.eta = 1e9;
    EXPECT_EQ(cmd_run(cfg, dir_ / "out", false, 1, log_), exit_diverged);
    EXPECT_TRUE(fs::exists(dir_ / "out" / metrics_file));
}

TEST_F(CommandsTest, InvalidConfigIsFailure) {
    const auto cfg = write_config(dir_, R"({"protocol": {"method": "warp"}})");
    EXPECT_EQ(cmd_run(cfg, std::nullopt, dir_ / "out", false, 1, log_), exit_failure);
    EXPECT_NE(log_.str().find("protocol.method"), std::string::npos);
}

TEST(ParseAxis, SplitsValues) {
    const auto axis = parse_axis("protocol.alpha=0.05,0.25,0.5");
    EXPECT_EQ(axis.key, "protocol.alpha");
    EXPECT_EQ(axis.values, (std::vector<std::string>{"0.05", "0.25", "0.5"}));
    EXPECT_THROW(parse_axis("protocol.alpha="), ConfigError);
    EXPECT_THROW(parse_axis("protocol.alpha"), ConfigError);
}

struct SummaryRow {
    std::string label, seed, status, steps, rank0, aggregate;
};

std::vector<SummaryRow> read_summary(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "label,seed,status,steps_completed,rank0_acc,aggregate_acc");
    std::vector<SummaryRow> rows;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        SummaryRow r;
        std::getline(ss, r.label, ',');
        std::getline(ss, r.seed, ',');
        std::getline(ss, r.status, ',');
        std::getline(ss, r.steps, ',');
        std::getline(ss, r.rank0, ',');
        std::getline(ss, r.aggregate, ',');
        rows.push_back(r);
    }
    return rows;
}

TEST_F(CommandsTest, TwoByTwoSweep) {
    const auto cfg = write_config(dir_, small_gossip);
    const std::vector<SweepAxis> axes{parse_axis("workers=2,4"), parse_axis("protocol.alpha=0.25,0.5")};
    ASSERT_EQ(cmd_sweep(cfg, axes, {3}, dir_ / "sweep", false, 1, log_), exit_ok) << log_.str();
    std::size_t dirs = 0;
    for (const auto& e : fs::directory_iterator(dir_ / "sweep")) {
        dirs += e.is_directory() ? 1 : 0;
    }
    EXPECT_EQ(dirs, 4u);
    const auto rows = read_summary(dir_ / "sweep" / summary_file);
    ASSERT_EQ(rows.size(), 4u);
    for (const auto& row : rows) {
        EXPECT_EQ(row.status, "ok");
        const auto series = read_metrics(dir_ / "sweep" / (row.label + "_s" + row.seed) / metrics_file);
        ASSERT_FALSE(series.empty());
        EXPECT_EQ(std::stod(row.rank0), series.back().rank0_acc);
        EXPECT_EQ(std::stod(row.aggregate), series.back().aggregate_acc);
        EXPECT_EQ(row.steps, "40");
    }
    EXPECT_TRUE(fs::exists(dir_ / "sweep" / "EG-4-t4-0.25_s3"));
}

TEST_F(CommandsTest, MovingRateGridAcrossSeeds) {
    const auto cfg = write_config(dir_, R"({
        "protocol": {"method": "elastic_gossip", "alpha": 0.5, "comm_probability": 0.0312},
        "model": {"layer_sizes": [10, 8, 3]},
        "workers": 4, "steps": 10, "eval_every": 10,
        "data": {"n": 300, "validation_holdout": 60}
    })");
    const std::vector<SweepAxis> axes{parse_axis("protocol.alpha=0.05,0.25,0.5,0.75,0.95")};
    ASSERT_EQ(cmd_sweep(cfg, axes, {0, 1}, dir_ / "sweep", false, 1, log_), exit_ok) << log_.str();
    const auto rows = read_summary(dir_ / "sweep" / summary_file);
    ASSERT_EQ(rows.size(), 10u);
    std::map<std::string, int> labels;
    for (const auto& row : rows) {
        ++labels[row.label];
    }
    EXPECT_EQ(labels.size(), 5u);
    EXPECT_EQ(labels.count("EG-4-0.0312-0.05"), 1u);
    EXPECT_EQ(labels.count("EG-4-0.0312-0.95"), 1u);
}

TEST_F(CommandsTest, SweepSwitchesScheduleAndMethod) {
    const auto cfg = write_config(dir_, small_gossip);
    const std::vector<SweepAxis> axes{parse_axis("protocol.comm_probability=0.5"),
                                      parse_axis("protocol.method=elastic_gossip,pull_gossip")};
    ASSERT_EQ(cmd_sweep(cfg, axes, {1}, dir_ / "sweep", false, 1, log_), exit_ok) << log_.str();
    EXPECT_TRUE(fs::exists(dir_ / "sweep" / "EG-2-0.5-0.50_s1"));
    EXPECT_TRUE(fs::exists(dir_ / "sweep" / "GS-2-0.5_s1"));
}

TEST_F(CommandsTest, FailedCellIsRecordedAndSweepContinues) {
    const auto cfg = write_config(dir_, small_gossip);
    const std::vector<SweepAxis> axes{parse_axis("workers=2,3")};  // 32 rows do not split over 3
    EXPECT_EQ(cmd_sweep(cfg, axes, {1}, dir_ / "sweep", false, 1, log_), exit_failure);
    const auto rows = read_summary(dir_ / "sweep" / summary_file);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].status, "ok");
    EXPECT_EQ(rows[1].status.rfind("failed", 0), 0u);
}

TEST_F(CommandsTest, EmptyAxisIsRejected) {
    const auto cfg = write_config(dir_, small_gossip);
    EXPECT_EQ(cmd_sweep(cfg, {SweepAxis{"workers", {}}}, {1}, dir_ / "sweep", false, 1, log_), exit_failure);
    EXPECT_FALSE(fs::exists(dir_ / "sweep" / summary_file));
}

TEST_F(CommandsTest, CheckpointRoundTrip) {
    RngStream rng(4);
    const Checkpoint ckpt{0xDEADBEEFCAFEF00DULL,
                          {testing::random_params(rng, 17), testing::random_params(rng, 17)},
                          testing::random_params(rng, 17)};
    write_checkpoint(ckpt, dir_ / "c.bin");
    EXPECT_EQ(read_checkpoint(dir_ / "c.bin"), ckpt);
    std::ofstream(dir_ / "bad.bin") << "EGLCKPT0";
    EXPECT_THROW(read_checkpoint(dir_ / "bad.bin"), FormatError);
}

TEST_F(CommandsTest, BinaryEntryPoints) {
    EXPECT_EQ(run_cli("verify"), 0);
    EXPECT_NE(run_cli("run --config " + (dir_ / "missing.json").string() + " --out " + (dir_ / "o").string()), 0);
    EXPECT_NE(run_cli("bogus"), 0);
    const auto cfg = write_config(dir_, small_gossip);
    EXPECT_EQ(run_cli("run --config " + cfg.string() + " --seed 2 --out " + (dir_ / "cli").string()), 0);
    EXPECT_TRUE(fs::exists(dir_ / "cli" / metrics_file));
}

}  // namespace
}  // namespace egl
