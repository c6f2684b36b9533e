#pragma once

// All-pairs dependency-edge head and its auxiliary loss.
//
//   a_hat(i, j) = sigmoid(W2 * g(W1 * [h'_i, h'_j] + b1) + b2)
//
// for every ordered pair (i, j), the diagonal included. W1 is split into the
// blocks acting on h'_i and h'_j so the n^2 pre-activations cost one
// broadcast sum instead of n^2 matrix products.

#include <cmath>

#include "drpc/config.hpp"
#include "drpc/corpus.hpp"
#include "drpc/params.hpp"
#include "drpc/rng.hpp"

namespace drpc {

template <class T>
void add_dep_params(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng) {
    auto uniform = [&](Shape s) {
        Tensor<T> t(std::move(s));
        for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-0.1, 0.1));
        return t;
    };
    store.add("dep.W1", uniform({cfg.dep_hidden, 2 * cfg.context_dim()}));
    store.add("dep.b1", Tensor<T>({cfg.dep_hidden}));
    store.add("dep.W2", uniform({1, cfg.dep_hidden}));
    store.add("dep.b2", Tensor<T>({1}));
}

// n x n pre-sigmoid scores; entry (i, j) scores the ordered pair [h'_i, h'_j].
template <class T>
Var<T> edge_logits(ParamBinding<T>& bind, const Var<T>& context, Nonlinearity g = Nonlinearity::tanh) {
    const std::size_t n = context.rows(), d = context.cols();
    const Var<T> w1 = bind("dep.W1");
    if (w1.cols() != 2 * d)
        throw DimensionError("dep.W1 expects pairs of width " + std::to_string(w1.cols()) + ", got 2x" +
                             std::to_string(d));
    const Var<T> left = add(matmul_nt(context, slice_cols(w1, 0, d)), bind("dep.b1"));
    const Var<T> right = matmul_nt(context, slice_cols(w1, d, 2 * d));
    Var<T> hidden = pairwise_sum(left, right);
    hidden = g == Nonlinearity::tanh ? tanh(hidden) : relu(hidden);
    const Var<T> scores = add(matmul_nt(hidden, bind("dep.W2")), bind("dep.b2"));
    return reshape(scores, {n, n});
}

template <class T>
Var<T> edge_probs(ParamBinding<T>& bind, const Var<T>& context, Nonlinearity g = Nonlinearity::tanh) {
    return sigmoid(edge_logits(bind, context, g));
}

template <class T>
Tensor<T> adjacency_tensor(const AdjacencyTarget& a) {
    Tensor<T> t({a.n, a.n});
    for (std::size_t i = 0; i < a.a.size(); ++i) t[i] = static_cast<T>(a.a[i]);
    return t;
}

// -sum_ij [a log a_hat + (1 - a) log(1 - a_hat)] for one instance, from
// probabilities. Entries of a_hat must lie strictly inside (0, 1).
template <class T>
Var<T> dep_loss(const Var<T>& probs, const AdjacencyTarget& target) {
    const Tensor<T>& pv = probs.value();
    if (pv.rows() != target.n || pv.cols() != target.n)
        throw DimensionError("dep_loss: probabilities " + shape_str(pv.shape()) + " vs target " +
                             std::to_string(target.n) + "x" + std::to_string(target.n));
    for (auto v : pv.values())
        if (!(v > T{0} && v < T{1})) throw DomainError("edge probability outside (0, 1)");
    Tape<T>& tape = *probs.tape();
    const Var<T> a = tape.constant(adjacency_tensor<T>(target));
    Tensor<T> ones_t(pv.shape(), T{1});
    const Var<T> ones = tape.constant(std::move(ones_t));
    const Var<T> on = mul(a, log(probs));
    const Var<T> off = mul(sub(ones, a), log(sub(ones, probs)));
    return neg(sum(add(on, off)));
}

// Same quantity as dep_loss(sigmoid(logits), target), evaluated stably from
// the logits.
template <class T>
Var<T> dep_loss_from_logits(const Var<T>& logits, const AdjacencyTarget& target) {
    if (logits.rows() != target.n || logits.cols() != target.n)
        throw DimensionError("dep_loss: logits " + shape_str(logits.shape()) + " vs target " +
                             std::to_string(target.n) + "x" + std::to_string(target.n));
    return bce_from_logits(logits, adjacency_tensor<T>(target));
}

// Entries where (p > threshold) agrees with the target; counts the diagonal.
template <class T>
std::size_t edge_agreements(const Tensor<T>& probs, const AdjacencyTarget& target, double threshold = 0.5) {
    if (probs.rows() != target.n || probs.cols() != target.n)
        throw DimensionError("edge_agreements: probabilities " + shape_str(probs.shape()) + " vs target " +
                             std::to_string(target.n) + "x" + std::to_string(target.n));
    std::size_t ok = 0;
    for (std::size_t k = 0; k < target.a.size(); ++k) ok += (probs[k] > threshold) == (target.a[k] == 1);
    return ok;
}

}  // namespace drpc
