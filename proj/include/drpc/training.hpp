#pragma once

// Mini-batch Adam training with seeded shuffling and best-dev retention.

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <thread>

#include "drpc/adam.hpp"
#include "drpc/checkpoint.hpp"
#include "drpc/scoring.hpp"

namespace drpc {

struct TrainConfig {
    ModelConfig model;
    double lambda = 0.01;
    AdamConfig adam;  // lr 0.3 unless overridden
    std::size_t batch_size = 50;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    double clip_norm = 5.0;  // 0 disables clipping
    std::size_t jobs = 1;
    std::size_t patience = 0;  // epochs without dev improvement before stopping; 0 never stops early

    void validate() const {
        model.validate();
        if (!(lambda >= 0)) throw PreconditionError("lambda must be non-negative");
        if (!(adam.lr > 0)) throw PreconditionError("learning rate must be positive");
        if (batch_size == 0) throw PreconditionError("batch size must be at least 1");
        if (epochs == 0) throw PreconditionError("epochs must be at least 1");
        if (jobs == 0) throw PreconditionError("jobs must be at least 1");
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"model", to_json(c.model)},
            {"lambda", c.lambda},
            {"lr", c.adam.lr},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"eps", c.adam.eps},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"clip_norm", c.clip_norm},
            {"jobs", c.jobs},
            {"patience", c.patience}};
}

inline void update_from_json(TrainConfig& c, const nlohmann::json& j) {
    if (j.contains("model")) update_from_json(c.model, j.at("model"));
    detail::read_opt(j, "lambda", c.lambda);
    detail::read_opt(j, "lr", c.adam.lr);
    detail::read_opt(j, "beta1", c.adam.beta1);
    detail::read_opt(j, "beta2", c.adam.beta2);
    detail::read_opt(j, "eps", c.adam.eps);
    detail::read_opt(j, "batch_size", c.batch_size);
    detail::read_opt(j, "epochs", c.epochs);
    detail::read_opt(j, "seed", c.seed);
    detail::read_opt(j, "clip_norm", c.clip_norm);
    detail::read_opt(j, "jobs", c.jobs);
    detail::read_opt(j, "patience", c.patience);
}

struct EpochLog {
    std::size_t epoch = 0;
    double loss_label = 0, loss_dep = 0, loss_total = 0;
    std::optional<double> dev_f1;
};

inline nlohmann::json to_json(const EpochLog& e) {
    return {{"epoch", e.epoch},
            {"loss_label", e.loss_label},
            {"loss_dep", e.loss_dep},
            {"loss_total", e.loss_total},
            {"dev_f1", e.dev_f1 ? nlohmann::json(*e.dev_f1) : nlohmann::json(nullptr)}};
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads, each taking a
// contiguous block.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t j = 0; j < jobs; ++j)
        threads.emplace_back([&, j] {
            try {
                for (std::size_t i = j * n / jobs; i < (j + 1) * n / jobs; ++i) fn(i);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        });
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

template <class T>
struct BatchResult {
    double loss_label = 0, loss_dep = 0, loss_total = 0;  // sums over the batch
    std::vector<Tensor<T>> grad;                         // mean over the batch
};

// Losses and parameter gradients of a batch. Each instance gets its own tape;
// per-thread partial sums are combined in block order, so the result depends
// only on the batch and `jobs`.
template <class T>
BatchResult<T> batch_gradient(const Model<T>& model, const std::vector<const RelationInstance*>& batch, double lambda,
                              std::size_t jobs = 1) {
    if (batch.empty()) throw PreconditionError("empty batch");
    jobs = std::max<std::size_t>(1, std::min(jobs, batch.size()));
    std::vector<BatchResult<T>> parts(jobs);
    for (auto& p : parts)
        for (const auto& e : model.params) p.grad.emplace_back(e.value.shape());
    parallel_for(jobs, jobs, [&](std::size_t j) {
        auto& part = parts[j];
        for (std::size_t i = j * batch.size() / jobs; i < (j + 1) * batch.size() / jobs; ++i) {
            Tape<T> tape;
            ParamBinding<T> bind(tape, model.params);
            auto tr = forward_instance(bind, model, *batch[i], lambda);
            if (!tr.loss_total.valid()) throw PreconditionError("label '" + batch[i]->label + "' unknown to the model");
            const double lt = static_cast<double>(tr.loss_total.value().item());
            if (!std::isfinite(lt)) throw NonFiniteError("non-finite loss on batch instance " + std::to_string(i));
            part.loss_label += static_cast<double>(tr.loss_label.value().item());
            part.loss_dep += static_cast<double>(tr.loss_dep.value().item());
            part.loss_total += lt;
            tape.backward(tr.loss_total);
            for (std::size_t s = 0; s < model.params.size(); ++s)
                if (const Tensor<T>* g = tape.parameter_grad(s)) {
                    auto& acc = part.grad[s];
                    for (std::size_t k = 0; k < g->size(); ++k) acc[k] += (*g)[k];
                }
        }
    });
    BatchResult<T> out = std::move(parts[0]);
    for (std::size_t j = 1; j < jobs; ++j) {
        out.loss_label += parts[j].loss_label;
        out.loss_dep += parts[j].loss_dep;
        out.loss_total += parts[j].loss_total;
        for (std::size_t s = 0; s < out.grad.size(); ++s)
            for (std::size_t k = 0; k < out.grad[s].size(); ++k) out.grad[s][k] += parts[j].grad[s][k];
    }
    const T inv = static_cast<T>(1.0 / static_cast<double>(batch.size()));
    for (auto& g : out.grad)
        for (auto& v : g.values()) v *= inv;
    return out;
}

template <class T>
std::vector<std::string> predict_labels(const Model<T>& model, const std::vector<RelationInstance>& instances,
                                        std::size_t jobs = 1) {
    std::vector<std::string> out(instances.size());
    parallel_for(instances.size(), jobs, [&](std::size_t i) {
        Tape<T> tape;
        ParamBinding<T> bind(tape, model.params);
        auto tr = forward_instance(bind, model, instances[i], 0.0, false);
        out[i] = model.vocab.labels[tr.predicted()];
    });
    return out;
}

template <class T>
ScoreReport evaluate(const Model<T>& model, const std::vector<RelationInstance>& instances, std::size_t jobs = 1) {
    std::vector<std::string> golds;
    golds.reserve(instances.size());
    for (const auto& i : instances) golds.push_back(i.label);
    return score(predict_labels(model, instances, jobs), golds, model.vocab.labels);
}

template <class T>
struct TrainResult {
    Model<T> model;  // best dev epoch, or the last epoch without a dev set
    CheckpointInfo info;
    std::vector<EpochLog> log;
};

// `on_epoch` sees each log entry as it is produced; returning false stops
// training after that epoch.
template <class T>
TrainResult<T> train(const Corpus& corpus, const Corpus* dev, const TrainConfig& cfg,
                     const EmbeddingTable* pretrained = nullptr,
                     const std::function<bool(const EpochLog&)>& on_epoch = {}) {
    cfg.validate();
    if (corpus.instances.empty()) throw PreconditionError("training corpus is empty");
    Model<T> model = init_model<T>(cfg.model, build_vocabularies(corpus), cfg.seed, pretrained);
    Adam<T> adam(cfg.adam, model.params);
    Rng shuffle_rng(sub_seed(cfg.seed, "shuffle"));

    TrainResult<T> result;
    result.model = model;
    double best = -1;
    std::size_t since_best = 0;
    const std::size_t n = corpus.instances.size();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        shuffle_rng.shuffle(order.begin(), order.end());
        EpochLog entry;
        entry.epoch = epoch;
        for (std::size_t start = 0, b = 0; start < n; start += cfg.batch_size, ++b) {
            std::vector<const RelationInstance*> batch;
            for (std::size_t i = start; i < std::min(n, start + cfg.batch_size); ++i)
                batch.push_back(&corpus.instances[order[i]]);
            BatchResult<T> r;
            try {
                r = batch_gradient(model, batch, cfg.lambda, cfg.jobs);
            } catch (const NonFiniteError& e) {
                throw NonFiniteError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(b) + ")");
            }
            entry.loss_label += r.loss_label;
            entry.loss_dep += r.loss_dep;
            entry.loss_total += r.loss_total;
            clip_global_norm(r.grad, cfg.clip_norm);
            try {
                adam.step(model.params, r.grad);
            } catch (const NonFiniteError& e) {
                throw NonFiniteError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(b) + ")");
            }
        }
        entry.loss_label /= static_cast<double>(n);
        entry.loss_dep /= static_cast<double>(n);
        entry.loss_total /= static_cast<double>(n);

        bool improved = true;
        if (dev && !dev->instances.empty()) {
            entry.dev_f1 = evaluate(model, dev->instances, cfg.jobs).f1;
            improved = *entry.dev_f1 > best;
        }
        if (improved) {
            best = entry.dev_f1.value_or(0.0);
            result.model = model;
            result.info.epoch = epoch;
            result.info.dev_f1 = best;
            since_best = 0;
        } else {
            ++since_best;
        }
        result.log.push_back(entry);
        if (on_epoch && !on_epoch(entry)) break;
        if (cfg.patience && since_best >= cfg.patience) break;
    }
    result.info.extra = {{"train", to_json(cfg)}};
    return result;
}

}  // namespace drpc
