// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "egl/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "egl/errors.hpp"

namespace egl {

Evaluation evaluate(const MlpSpec& spec, const ParamVector& params, const Dataset& data) {
    if (data.size() == 0) {
        throw std::invalid_argument("cannot evaluate on an empty dataset");
    }
    const Matrix logits = forward(spec, params, data.features).logits;
    const double loss = softmax_ce(logits, data.labels).loss;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = logits.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (row[c] > row[best]) {
                best = c;
            }
        }
        correct += best == data.labels[r] ? 1 : 0;
    }
    return {loss, static_cast<double>(correct) / static_cast<double>(data.size())};
}

ParamVector aggregate_model(std::span<const ParamVector> workers) {
    if (workers.empty()) {
        throw std::invalid_argument("aggregate_model needs at least one worker");
    }
    ParamVector mean(workers.front().size(), 0.0);
    for (const auto& w : workers) {
        if (w.size() != mean.size()) {
            throw DimensionError("worker parameter vectors are not congruent");
        }
        for (std::size_t c = 0; c < w.size(); ++c) {
            mean[c] += w[c];
        }
    }
    const auto n = static_cast<double>(workers.size());
    for (auto& v : mean) {
        v /= n;
    }
    return mean;
}

double pairwise_disagreement(std::span<const ParamVector> workers) {
    double total = 0.0;
    for (std::size_t i = 0; i < workers.size(); ++i) {
        for (std::size_t k = i + 1; k < workers.size(); ++k) {
            if (workers[i].size() != workers[k].size()) {
                throw DimensionError("worker parameter vectors are not congruent");
            }
            for (std::size_t c = 0; c < workers[i].size(); ++c) {
                const double d = workers[i][c] - workers[k][c];
                total += d * d;
            }
        }
    }
    return total;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string metrics_header(std::size_t workers) {
    std::string h = "step,epoch,train_loss_mean,rank0_acc,aggregate_acc,pairwise_disagreement";
    for (std::size_t r = 0; r < workers; ++r) {
        h += ",val_loss_r" + std::to_string(r);
    }
    for (std::size_t r = 0; r < workers; ++r) {
        h += ",val_acc_r" + std::to_string(r);
    }
    return h;
}

void write_metrics(const MetricsSeries& series, std::size_t workers, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << metrics_header(workers) << '\n';
    for (const auto& rec : series) {
        if (rec.val_loss.size() != workers || rec.val_acc.size() != workers) {
            throw DimensionError("metrics record at step " + std::to_string(rec.step) + " does not have " +
                                 std::to_string(workers) + " workers");
        }
        out << rec.step << ',' << format_real(rec.epoch) << ',' << format_real(rec.train_loss_mean) << ','
            << format_real(rec.rank0_acc) << ',' << format_real(rec.aggregate_acc) << ','
            << format_real(rec.pairwise_disagreement);
        for (double v : rec.val_loss) {
            out << ',' << format_real(v);
        }
        for (double v : rec.val_acc) {
            out << ',' << format_real(v);
        }
        out << '\n';
    }
    out.flush();
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

MetricsSeries read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    std::uint64_t offset = 0;
    if (!std::getline(in, line)) {
        throw FormatError(path.string() + ": missing header", 0);
    }
    std::size_t columns = 1;
    for (char ch : line) {
        columns += ch == ',' ? 1 : 0;
    }
    constexpr std::size_t fixed = 6;
    if (columns < fixed + 2 || (columns - fixed) % 2 != 0) {
        throw FormatError(path.string() + ": unexpected column count " + std::to_string(columns), 0);
    }
    const std::size_t workers = (columns - fixed) / 2;
    if (line != metrics_header(workers)) {
        throw FormatError(path.string() + ": header does not match the metrics schema", 0);
    }
    offset += line.size() + 1;

    MetricsSeries series;
    while (std::getline(in, line)) {
        if (line.empty()) {
            offset += 1;
            continue;
        }
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string cell;
        std::size_t step = 0;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            try {
                if (first) {
                    step = std::stoull(cell);
                    first = false;
                } else {
                    fields.push_back(std::stod(cell));
                }
            } catch (const std::exception&) {
                throw FormatError(path.string() + ": bad numeric field '" + cell + "'", offset);
            }
        }
        if (fields.size() + 1 != columns) {
            throw FormatError(path.string() + ": row has " + std::to_string(fields.size() + 1) + " columns", offset);
        }
        MetricsRecord rec;
        rec.step = step;
        rec.epoch = fields[0];
        rec.train_loss_mean = fields[1];
        rec.rank0_acc = fields[2];
        rec.aggregate_acc = fields[3];
        rec.pairwise_disagreement = fields[4];
        rec.val_loss.assign(fields.begin() + 5, fields.begin() + 5 + static_cast<std::ptrdiff_t>(workers));
        rec.val_acc.assign(fields.begin() + 5 + static_cast<std::ptrdiff_t>(workers), fields.end());
        series.push_back(std::move(rec));
        offset += line.size() + 1;
    }
    return series;
}

}  // namespace egl
