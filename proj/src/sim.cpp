// Copyright (c) 2026, The Elastic Gossip Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "egl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include "egl/errors.hpp"

namespace egl {

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& task) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            task(i);
        }
        return;
    }
    const std::size_t pool = std::min(threads, n);
    std::vector<std::exception_ptr> errors(n);
    {
        std::vector<std::jthread> running;
        running.reserve(pool);
        for (std::size_t t = 0; t < pool; ++t) {
            running.emplace_back([&, t] {
                for (std::size_t i = t; i < n; i += pool) {
                    try {
                        task(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    // Lowest index wins so the reported failure matches sequential mode.
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

std::size_t threads_from_env() {
    const char* env = std::getenv("EGL_THREADS");
    if (env == nullptr || *env == '\0') {
        return 1;
    }
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v == 0) {
        return 1;
    }
    return static_cast<std::size_t>(v);
}

Simulator::Simulator(SimulatorOptions options, const ParamVector& init, GradientSource& source)
    : options_(std::move(options)), source_(source) {
    if (options_.workers == 0) {
        throw std::invalid_argument("simulator needs at least one worker");
    }
    options_.protocol.validate();
    if (uses_schedule(options_.protocol.method) && options_.protocol.method != Method::easgd &&
        options_.protocol.method != Method::full_consensus && options_.workers < 2) {
        throw std::invalid_argument("gossip protocols need at least 2 workers");
    }
    auto streams = derive_rng_streams(options_.seed, options_.workers);
    workers_.reserve(options_.workers);
    for (std::size_t r = 0; r < options_.workers; ++r) {
        workers_.push_back(WorkerState{r, init, Velocity(init.size(), 0.0), 0, std::move(streams[r])});
    }
    if (options_.protocol.method == Method::easgd) {
        center_ = init;
    }
}

std::vector<ParamVector> Simulator::params() const {
    std::vector<ParamVector> out;
    out.reserve(workers_.size());
    for (const auto& w : workers_) {
        out.push_back(w.params);
    }
    return out;
}

void Simulator::communicate(std::vector<ParamVector>& params) {
    const std::size_t n = workers_.size();
    const auto& protocol = options_.protocol;
    trace_.communicated.assign(n, false);
    trace_.selections.peer.assign(n, std::nullopt);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
        trace_.communicated[i] = should_communicate(protocol, workers_[i].clock, workers_[i].streams.schedule);
        any = any || trace_.communicated[i];
    }
    if (!any || protocol.method == Method::all_reduce || protocol.method == Method::none) {
        return;
    }

    const double alpha = protocol.alpha.value_or(0.0);
    switch (protocol.method) {
    case Method::easgd: {
        auto result = easgd_step(params, *center_, alpha, trace_.communicated);
        params = std::move(result.workers);
        center_ = std::move(result.center);
        return;
    }
    case Method::full_consensus:
        params = full_consensus_step(params, alpha, trace_.communicated);
        return;
    default:
        break;
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (trace_.communicated[i]) {
            trace_.selections.peer[i] = select_peer(i, n, workers_[i].streams.peer);
        }
    }
    switch (protocol.method) {
    case Method::elastic_gossip:
        params = elastic_gossip_step(params, build_gossip_sets(trace_.selections, GossipVariant::elastic), alpha);
        break;
    case Method::pull_gossip:
        params = pull_gossip_step(params, trace_.selections);
        break;
    case Method::push_gossip:
        params = push_gossip_step(params, build_gossip_sets(trace_.selections, GossipVariant::push));
        break;
    default:
        break;
    }
}

void Simulator::step() {
    const std::size_t n = workers_.size();
    const auto& opt = options_.optimizer;

    std::vector<Gradient> grads(n);
    trace_.losses.assign(n, 0.0);
    parallel_for(n, options_.threads, [&](std::size_t i) { trace_.losses[i] = source_.compute(workers_[i], grads[i]); });
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(trace_.losses[i])) {
            throw DivergenceError("non-finite training loss on worker " + std::to_string(i) + " at round " +
                                  std::to_string(rounds_));
        }
    }
    if (options_.protocol.method == Method::all_reduce) {
        const Gradient mean = allreduce_mean(grads);
        std::fill(grads.begin(), grads.end(), mean);
    }

    std::vector<Velocity> velocities(n);
    for (std::size_t i = 0; i < n; ++i) {
        velocities[i] = workers_[i].velocity;
        nag_velocity(velocities[i], grads[i], opt.eta, opt.mu);
    }

    std::vector<ParamVector> params = this->params();
    const auto center_before = center_;
    communicate(params);

    for (std::size_t i = 0; i < n; ++i) {
        nag_apply(params[i], velocities[i], grads[i], opt.eta, opt.mu);
        for (double v : params[i]) {
            if (!std::isfinite(v) || std::abs(v) > divergence_limit) {
                center_ = center_before;
                throw DivergenceError("parameters of worker " + std::to_string(i) + " left the finite range at round " +
                                      std::to_string(rounds_));
            }
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        workers_[i].params = std::move(params[i]);
        workers_[i].velocity = std::move(velocities[i]);
        ++workers_[i].clock;
    }
    ++rounds_;
}

MlpGradientSource::MlpGradientSource(MlpSpec spec, const Dataset& train, const std::vector<Partition>& partitions,
                                     std::size_t batch, bool shuffle)
    : spec_(std::move(spec)), train_(train), batch_(batch) {
    samplers_.reserve(partitions.size());
    for (const auto& p : partitions) {
        samplers_.emplace_back(p.indices, shuffle);
    }
}

double MlpGradientSource::compute(WorkerState& worker, Gradient& gradient) {
    const auto mb = sample_minibatch(train_, samplers_.at(worker.rank), worker.streams.data, batch_);
    std::optional<DropoutMasks> masks;
    if (spec_.has_dropout()) {
        masks = dropout_masks(spec_, worker.streams.dropout, batch_);
    }
    auto lg = loss_and_gradient(spec_, worker.params, mb.x, mb.labels, masks ? &*masks : nullptr);
    gradient = std::move(lg.gradient);
    return lg.loss;
}

void ExperimentConfig::validate() const {
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    try {
        protocol.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("protocol: ") + e.what());
    }
    if (!(optimizer.eta > 0.0)) {
        throw ConfigError("optimizer.eta must be > 0");
    }
    if (!(optimizer.mu >= 0.0 && optimizer.mu < 1.0)) {
        throw ConfigError("optimizer.mu must lie in [0, 1)");
    }
    if (workers == 0) {
        throw ConfigError("workers must be >= 1");
    }
    if (workers == 1 && protocol.method != Method::none && protocol.method != Method::all_reduce) {
        throw ConfigError("workers = 1 requires protocol.method none or all_reduce");
    }
    if (steps == 0) {
        throw ConfigError("steps must be >= 1");
    }
    if (eval_every == 0) {
        throw ConfigError("eval_every must be >= 1");
    }
    per_worker_batch(effective_batch, workers);
    if (!(data.majority_share >= 0.0 && data.majority_share <= 1.0)) {
        throw ConfigError("data.majority_share must lie in [0, 1]");
    }
    if (data.source == DataSource::synthetic) {
        if (data.classes < 2) {
            throw ConfigError("data.classes must be >= 2");
        }
        if (data.n < data.classes) {
            throw ConfigError("data.n must be >= data.classes");
        }
        if (data.validation_holdout >= data.n) {
            throw ConfigError("data.validation_holdout must be < data.n");
        }
        if (data.validation_holdout == 0) {
            throw ConfigError("data.validation_holdout must be >= 1");
        }
        if (model.input_size() != data.dims) {
            throw ConfigError("model.layer_sizes input " + std::to_string(model.input_size()) +
                              " does not match data.dims " + std::to_string(data.dims));
        }
        if (model.output_size() != data.classes) {
            throw ConfigError("model.layer_sizes output " + std::to_string(model.output_size()) +
                              " does not match data.classes " + std::to_string(data.classes));
        }
        if (workers > data.n - data.validation_holdout) {
            throw ConfigError("more workers than training rows");
        }
    } else if (data.train_images.empty() || data.train_labels.empty()) {
        throw ConfigError("data.train_images and data.train_labels are required for data.source idx");
    }
}

DataBundle load_data(const DataSpec& spec) {
    Dataset full = spec.source == DataSource::synthetic
                       ? make_synthetic(spec.seed, spec.n, spec.dims, spec.classes, spec.spread)
                       : load_idx(spec.train_images, spec.train_labels);
    RngStream split_rng(derive_seed(spec.seed, 0, StreamPurpose::split));
    auto split = split_validation(full, spec.validation_holdout, split_rng);
    const Dataset others[] = {std::move(split.validation)};
    auto norm = fit_apply_normalizer(split.train, others);
    return {std::move(norm.train), std::move(norm.others.front())};
}

namespace {

MetricsRecord evaluate_round(const ExperimentConfig& config, const std::vector<ParamVector>& params,
                             const Dataset& validation, std::size_t step, double epoch, double train_loss,
                             std::size_t threads) {
    MetricsRecord rec;
    rec.step = step;
    rec.epoch = epoch;
    rec.train_loss_mean = train_loss;
    std::vector<Evaluation> evals(params.size());
    parallel_for(params.size(), threads,
                 [&](std::size_t i) { evals[i] = evaluate(config.model, params[i], validation); });
    for (const auto& e : evals) {
        rec.val_loss.push_back(e.loss);
        rec.val_acc.push_back(e.accuracy);
    }
    rec.rank0_acc = evals.front().accuracy;
    rec.aggregate_acc = evaluate(config.model, aggregate_model(params), validation).accuracy;
    rec.pairwise_disagreement = pairwise_disagreement(params);
    return rec;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const DataBundle& data, RunOptions options) {
    config.validate();
    if (data.train.dims() != config.model.input_size()) {
        throw ConfigError("training data has " + std::to_string(data.train.dims()) +
                          " features, model.layer_sizes expects " + std::to_string(config.model.input_size()));
    }
    if (data.train.class_count > config.model.output_size()) {
        throw ConfigError("data has " + std::to_string(data.train.class_count) +
                          " classes, model output has " + std::to_string(config.model.output_size()));
    }
    if (data.validation.size() == 0) {
        throw ConfigError("validation set is empty");
    }

    RngStream split_rng(derive_seed(config.seed, 0, StreamPurpose::split));
    const auto parts = partition(data.train, config.workers, config.data.partition_mode, split_rng,
                                 config.data.majority_share);
    const std::size_t batch = per_worker_batch(config.effective_batch, config.workers);
    RngStream init_rng(derive_seed(config.seed, 0, StreamPurpose::init));
    const ParamVector init = kaiming_init(config.model, init_rng);

    MlpGradientSource source(config.model, data.train, parts, batch, config.data.shuffle);
    Simulator sim(SimulatorOptions{config.protocol, config.optimizer, config.workers, config.seed, options.threads},
                  init, source);

    const double rounds_per_epoch =
        static_cast<double>(parts.front().indices.size()) / static_cast<double>(batch);

    RunResult result;
    double loss_sum = 0.0;
    std::size_t loss_rounds = 0;
    for (std::size_t r = 1; r <= config.steps; ++r) {
        try {
            sim.step();
        } catch (const DivergenceError& e) {
            result.diverged = true;
            result.diagnostic = e.what();
            break;
        }
        double round_loss = 0.0;
        for (double l : sim.last_round().losses) {
            round_loss += l;
        }
        loss_sum += round_loss / static_cast<double>(config.workers);
        ++loss_rounds;
        result.steps_completed = r;
        if (r % config.eval_every == 0 || r == config.steps) {
            result.metrics.push_back(evaluate_round(config, sim.params(), data.validation, r,
                                                    static_cast<double>(r) / rounds_per_epoch,
                                                    loss_sum / static_cast<double>(loss_rounds), options.threads));
            loss_sum = 0.0;
            loss_rounds = 0;
        }
    }
    result.final_params = sim.params();
    result.center = sim.center();
    return result;
}

}  // namespace egl
