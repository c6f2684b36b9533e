#pragma once

// Single-head self-attention over the BiLSTM states.

#include <cmath>

#include "drpc/config.hpp"
#include "drpc/params.hpp"
#include "drpc/rng.hpp"

namespace drpc {

template <class T>
struct AttentionOutput {
    Var<T> states;   // H', n x attn_dim
    Var<T> weights;  // n x n, row i is token i's distribution over tokens
};

template <class T>
void add_attention_params(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng) {
    const std::size_t in = cfg.hidden_dim(), out = cfg.attn_dim;
    for (const char* m : {"k", "q", "v"}) {
        Tensor<T> w({out, in});
        for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-0.1, 0.1));
        store.add(std::string("attn.W") + m, std::move(w));
        store.add(std::string("attn.b") + m, Tensor<T>({out}));
    }
}

// Logits are the raw dot products q_i . k_j unless `scaled` is set. Every
// token attends to every token, itself included.
template <class T>
AttentionOutput<T> self_attention(const Var<T>& keys, const Var<T>& queries, const Var<T>& values, bool scaled = false) {
    Var<T> logits = matmul_nt(queries, keys);
    if (scaled) logits = scale(logits, static_cast<T>(1.0 / std::sqrt(static_cast<double>(keys.cols()))));
    Var<T> weights = softmax_rows(logits);
    return {matmul(weights, values), weights};
}

template <class T>
AttentionOutput<T> self_attention(ParamBinding<T>& bind, const Var<T>& h, bool scaled = false) {
    const Var<T> k = affine(h, bind("attn.Wk"), bind("attn.bk"));
    const Var<T> q = affine(h, bind("attn.Wq"), bind("attn.bq"));
    const Var<T> v = affine(h, bind("attn.Wv"), bind("attn.bv"));
    return self_attention(k, q, v, scaled);
}

}  // namespace drpc
