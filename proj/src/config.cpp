// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "egl/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <optional>

#include "egl/errors.hpp"

namespace egl {

namespace {

using nlohmann::json;

// Typed, path-aware access to one JSON object.
class Section {
public:
    Section(const json& node, std::string path, std::initializer_list<std::string_view> allowed)
        : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) {
            throw ConfigError(where("") + " must be an object");
        }
        for (const auto& [key, value] : node_.items()) {
            bool known = false;
            for (auto a : allowed) {
                known = known || a == key;
            }
            if (!known) {
                throw ConfigError("unknown key " + where(key));
            }
        }
    }

    bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }
    const json& at(const std::string& key) const { return node_.at(key); }

    std::optional<double> real(const std::string& key) const {
        if (!has(key)) {
            return std::nullopt;
        }
        const auto& v = node_.at(key);
        if (!v.is_number()) {
            throw ConfigError(where(key) + " must be a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            throw ConfigError(where(key) + " must be finite");
        }
        return d;
    }

    std::optional<std::uint64_t> count(const std::string& key) const {
        if (!has(key)) {
            return std::nullopt;
        }
        const auto& v = node_.at(key);
        if (v.is_number_unsigned()) {
            return v.get<std::uint64_t>();
        }
        if (v.is_number_integer()) {
            throw ConfigError(where(key) + " must be non-negative");
        }
        throw ConfigError(where(key) + " must be a non-negative integer");
    }

    std::optional<std::string> text(const std::string& key) const {
        if (!has(key)) {
            return std::nullopt;
        }
        const auto& v = node_.at(key);
        if (!v.is_string()) {
            throw ConfigError(where(key) + " must be a string");
        }
        return v.get<std::string>();
    }

    std::optional<bool> flag(const std::string& key) const {
        if (!has(key)) {
            return std::nullopt;
        }
        const auto& v = node_.at(key);
        if (!v.is_boolean()) {
            throw ConfigError(where(key) + " must be true or false");
        }
        return v.get<bool>();
    }

    std::string where(const std::string& key) const {
        if (path_.empty()) {
            return key.empty() ? "config root" : key;
        }
        return key.empty() ? path_ : path_ + "." + key;
    }

private:
    const json& node_;
    std::string path_;
};

const json empty_object = json::object();

const json& child(const Section& parent, const std::string& key) {
    return parent.has(key) ? parent.at(key) : empty_object;
}

std::string partition_mode_name(PartitionMode m) {
    return m == PartitionMode::uniform ? "uniform" : "class_biased";
}

}  // namespace

ExperimentConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
    const Section root(doc, "",
                       {"model", "protocol", "optimizer", "workers", "effective_batch", "steps", "seed", "eval_every",
                        "data"});
    ExperimentConfig cfg;

    const Section protocol(child(root, "protocol"), "protocol", {"method", "alpha", "tau", "comm_probability"});
    const auto method = protocol.text("method");
    if (!method) {
        throw ConfigError("missing required key protocol.method");
    }
    try {
        cfg.protocol.method = method_from_string(*method);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("protocol.method: ") + e.what());
    }
    cfg.protocol.alpha = protocol.real("alpha");
    const auto tau = protocol.count("tau");
    const auto prob = protocol.real("comm_probability");
    if (tau && prob) {
        throw ConfigError("protocol.tau and protocol.comm_probability are mutually exclusive");
    }
    if (tau) {
        cfg.protocol.schedule = Period{*tau};
    } else if (prob) {
        cfg.protocol.schedule = Probability{*prob};
    }

    const Section optimizer(child(root, "optimizer"), "optimizer", {"eta", "mu"});
    cfg.optimizer.eta = optimizer.real("eta").value_or(cfg.optimizer.eta);
    cfg.optimizer.mu = optimizer.real("mu").value_or(cfg.optimizer.mu);

    cfg.workers = root.count("workers").value_or(cfg.workers);
    cfg.effective_batch = root.count("effective_batch").value_or(cfg.effective_batch);
    cfg.steps = root.count("steps").value_or(cfg.steps);
    cfg.seed = root.count("seed").value_or(cfg.seed);
    cfg.eval_every = root.count("eval_every").value_or(cfg.eval_every);

    const Section data(child(root, "data"), "data",
                       {"source", "seed", "n", "dims", "classes", "spread", "train_images", "train_labels",
                        "validation_holdout", "partition_mode", "majority_share", "shuffle"});
    DataSpec& d = cfg.data;
    const auto source = data.text("source").value_or("synthetic");
    if (source == "synthetic") {
        d.source = DataSource::synthetic;
    } else if (source == "idx") {
        d.source = DataSource::idx;
    } else {
        throw ConfigError("data.source must be 'synthetic' or 'idx', got '" + source + "'");
    }
    d.seed = data.count("seed").value_or(d.seed);
    d.n = data.count("n").value_or(d.n);
    d.dims = data.count("dims").value_or(d.dims);
    d.classes = data.count("classes").value_or(d.classes);
    d.spread = data.real("spread").value_or(d.spread);
    auto resolve = [&](const std::string& key) -> std::filesystem::path {
        const auto p = data.text(key);
        if (!p) {
            return {};
        }
        std::filesystem::path path(*p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    d.train_images = resolve("train_images");
    d.train_labels = resolve("train_labels");
    const std::size_t default_holdout = d.source == DataSource::synthetic ? d.n / 5 : 8800;
    d.validation_holdout = data.count("validation_holdout").value_or(default_holdout);
    const auto mode = data.text("partition_mode").value_or("uniform");
    if (mode == "uniform") {
        d.partition_mode = PartitionMode::uniform;
    } else if (mode == "class_biased") {
        d.partition_mode = PartitionMode::class_biased;
    } else {
        throw ConfigError("data.partition_mode must be 'uniform' or 'class_biased', got '" + mode + "'");
    }
    d.majority_share = data.real("majority_share").value_or(d.majority_share);
    d.shuffle = data.flag("shuffle").value_or(d.shuffle);

    const Section model(child(root, "model"), "model", {"layer_sizes", "input_dropout", "hidden_dropout"});
    if (model.has("layer_sizes")) {
        const auto& sizes = model.at("layer_sizes");
        if (!sizes.is_array()) {
            throw ConfigError("model.layer_sizes must be an array of positive integers");
        }
        for (const auto& s : sizes) {
            if (!s.is_number_unsigned()) {
                throw ConfigError("model.layer_sizes must be an array of positive integers");
            }
            cfg.model.layer_sizes.push_back(s.get<std::size_t>());
        }
    } else if (d.source == DataSource::synthetic) {
        cfg.model.layer_sizes = {d.dims, 32, 32, d.classes};
    } else {
        throw ConfigError("missing required key model.layer_sizes (needed for data.source idx)");
    }
    cfg.model.input_dropout = model.real("input_dropout").value_or(0.0);
    cfg.model.hidden_dropout = model.real("hidden_dropout").value_or(0.0);

    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(doc, path.parent_path());
}

json config_to_json(const ExperimentConfig& cfg) {
    json protocol = {{"method", std::string(to_string(cfg.protocol.method))}};
    if (cfg.protocol.alpha) {
        protocol["alpha"] = *cfg.protocol.alpha;
    }
    if (const auto* per = std::get_if<Period>(&cfg.protocol.schedule)) {
        protocol["tau"] = per->tau;
    } else if (const auto* prob = std::get_if<Probability>(&cfg.protocol.schedule)) {
        protocol["comm_probability"] = prob->p;
    }
    const DataSpec& d = cfg.data;
    json data = {
        {"source", d.source == DataSource::synthetic ? "synthetic" : "idx"},
        {"seed", d.seed},
        {"validation_holdout", d.validation_holdout},
        {"partition_mode", partition_mode_name(d.partition_mode)},
        {"majority_share", d.majority_share},
        {"shuffle", d.shuffle},
    };
    data["n"] = d.n;
    data["dims"] = d.dims;
    data["classes"] = d.classes;
    data["spread"] = d.spread;
    if (!d.train_images.empty()) {
        data["train_images"] = d.train_images.string();
    }
    if (!d.train_labels.empty()) {
        data["train_labels"] = d.train_labels.string();
    }
    return json{
        {"model",
         {{"layer_sizes", cfg.model.layer_sizes},
          {"input_dropout", cfg.model.input_dropout},
          {"hidden_dropout", cfg.model.hidden_dropout}}},
        {"protocol", protocol},
        {"optimizer", {{"eta", cfg.optimizer.eta}, {"mu", cfg.optimizer.mu}}},
        {"workers", cfg.workers},
        {"effective_batch", cfg.effective_batch},
        {"steps", cfg.steps},
        {"seed", cfg.seed},
        {"eval_every", cfg.eval_every},
        {"data", data},
    };
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config_to_json(config).dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace egl
