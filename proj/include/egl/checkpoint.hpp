// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint layout (all integers little-endian):
//   8 bytes   magic "EGLCKPT1"
//   u64       config hash
//   u64       worker count W
//   u64       parameters per worker P
//   u64       1 if an EASGD center follows, else 0
//   W blobs   P reals each, ParamVector layout (8-byte LE)
//   [1 blob]  center variable

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "egl/nn.hpp"

namespace egl {

struct Checkpoint {
    std::uint64_t config_hash = 0;
    std::vector<ParamVector> workers;
    std::optional<ParamVector> center;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace egl
