// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "egl/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include "egl/errors.hpp"

namespace egl {

namespace {

constexpr char magic[8] = {'E', 'G', 'L', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    }
}

std::uint64_t get_u64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + 8 > in.size()) {
        throw FormatError("truncated checkpoint header", pos);
    }
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
        v |= static_cast<std::uint64_t>(in[pos + b]) << (8 * b);
    }
    pos += 8;
    return v;
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const std::size_t dim = ckpt.workers.empty() ? 0 : ckpt.workers.front().size();
    std::vector<std::uint8_t> out(std::begin(magic), std::end(magic));
    put_u64(out, ckpt.config_hash);
    put_u64(out, ckpt.workers.size());
    put_u64(out, dim);
    put_u64(out, ckpt.center ? 1 : 0);
    auto append = [&](const ParamVector& p) {
        if (p.size() != dim) {
            throw DimensionError("checkpoint parameter vectors are not congruent");
        }
        const auto blob = serialize(p);
        out.insert(out.end(), blob.begin(), blob.end());
    };
    std::for_each(ckpt.workers.begin(), ckpt.workers.end(), append);
    if (ckpt.center) {
        append(*ckpt.center);
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) {
        throw IoError("write failed for " + path.string());
    }
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open " + path.string());
    }
    const std::vector<std::uint8_t> in{std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()};
    if (in.size() < sizeof magic || std::memcmp(in.data(), magic, sizeof magic) != 0) {
        throw FormatError(path.string() + ": not a checkpoint file", 0);
    }
    std::size_t pos = sizeof magic;
    Checkpoint ckpt;
    ckpt.config_hash = get_u64(in, pos);
    const std::uint64_t workers = get_u64(in, pos);
    const std::uint64_t dim = get_u64(in, pos);
    const std::uint64_t has_center = get_u64(in, pos);
    if (has_center > 1) {
        throw FormatError(path.string() + ": bad center flag", pos - 8);
    }
    const std::uint64_t blobs = workers + has_center;
    if (in.size() != pos + blobs * dim * 8) {
        throw FormatError(path.string() + ": expected " + std::to_string(blobs * dim * 8) + " payload bytes",
                          in.size());
    }
    auto take = [&] {
        ParamVector p = deserialize(std::span<const std::uint8_t>(in.data() + pos, dim * 8));
        pos += dim * 8;
        return p;
    };
    for (std::uint64_t w = 0; w < workers; ++w) {
        ckpt.workers.push_back(take());
    }
    if (has_center == 1) {
        ckpt.center = take();
    }
    return ckpt;
}

}  // namespace egl
