// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference evaluations of the exchange rules, written without
// reusing any of the library's set construction or step code.

#pragma once

#include <algorithm>
#include <vector>

#include "egl/protocols.hpp"

namespace egl::oracle {

// Literal reading of the update line: membership of k in K_i is decided
// straight from the selections, without going through set construction.
inline std::vector<ParamVector> elastic_oracle(const std::vector<ParamVector>& theta, const Selections& s, double alpha) {
    const std::size_t w = theta.size();
    std::vector<ParamVector> out = theta;
    for (Rank i = 0; i < w; ++i) {
        for (std::size_t c = 0; c < theta[i].size(); ++c) {
            double acc = 0.0;
            for (Rank k = 0; k < w; ++k) {
                const bool chosen_by_i = s.peer[i] == k;
                const bool chose_i = k != i && s.peer[k] == i;
                if (chosen_by_i || chose_i) {
                    acc += theta[i][c] - theta[k][c];
                }
            }
            out[i][c] = theta[i][c] - alpha * acc;
        }
    }
    return out;
}

inline std::vector<ParamVector> push_oracle(const std::vector<ParamVector>& theta, const Selections& s) {
    const std::size_t w = theta.size();
    std::vector<ParamVector> out = theta;
    for (Rank i = 0; i < w; ++i) {
        std::vector<Rank> members{i};
        for (Rank k = 0; k < w; ++k) {
            if (k != i && s.peer[k] == i) {
                members.push_back(k);
            }
        }
        if (members.size() == 1) {
            continue;
        }
        std::sort(members.begin(), members.end());
        for (std::size_t c = 0; c < theta[i].size(); ++c) {
            double acc = 0.0;
            for (Rank k : members) {
                acc += theta[k][c];
            }
            out[i][c] = acc / static_cast<double>(members.size());
        }
    }
    return out;
}

inline std::vector<ParamVector> pull_oracle(const std::vector<ParamVector>& theta, const Selections& s) {
    std::vector<ParamVector> out = theta;
    for (Rank i = 0; i < theta.size(); ++i) {
        if (!s.peer[i]) {
            continue;
        }
        for (std::size_t c = 0; c < theta[i].size(); ++c) {
            out[i][c] = 0.5 * (theta[i][c] + theta[*s.peer[i]][c]);
        }
    }
    return out;
}

}  // namespace egl::oracle
