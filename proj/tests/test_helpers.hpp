// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "egl/nn.hpp"
#include "egl/numeric.hpp"
#include "egl/rng.hpp"

namespace egl::testing {

inline ParamVector vec(std::initializer_list<double> values) {
    return ParamVector(std::vector<double>(values));
}

inline std::vector<ParamVector> scalars(std::initializer_list<double> values) {
    std::vector<ParamVector> out;
    for (double v : values) {
        out.push_back(vec({v}));
    }
    return out;
}

inline Matrix random_matrix(RngStream& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) {
        v = rng.normal(0.0, 1.0);
    }
    return m;
}

inline ParamVector random_params(RngStream& rng, std::size_t dim, double scale = 1.0) {
    ParamVector v(dim);
    for (auto& x : v) {
        x = rng.normal(0.0, scale);
    }
    return v;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("egl_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace egl::testing
