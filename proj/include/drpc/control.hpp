#pragma once

// Entity-conditioned gating. p filters H; the pooled summary m and the two
// mention states produce c, which gates H'.

#include "drpc/config.hpp"
#include "drpc/params.hpp"
#include "drpc/rng.hpp"

namespace drpc {

template <class T>
struct ControlFilter {
    Var<T> p;         // 1 x hidden_dim, >= 0
    Var<T> filtered;  // H-bar, n x hidden_dim
};

template <class T>
struct ControlGate {
    Var<T> alpha;     // 1 x n
    Var<T> memory;    // m, 1 x hidden_dim
    Var<T> c;         // 1 x context_dim, >= 0
    Var<T> gated;     // H-bar', n x context_dim
};

template <class T>
void add_control_params(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng) {
    auto uniform = [&](Shape s) {
        Tensor<T> t(std::move(s));
        for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-0.1, 0.1));
        return t;
    };
    const std::size_t h = cfg.hidden_dim(), ctx = cfg.context_dim();
    store.add("ctl.Wp", uniform({h, 2 * h}));
    store.add("ctl.bp", Tensor<T>({h}));
    store.add("ctl.Wa", uniform({1, h}));
    store.add("ctl.ba", Tensor<T>({1}));
    store.add("ctl.Wc", uniform({ctx, 3 * h}));
    store.add("ctl.bc", Tensor<T>({ctx}));
}

template <class T>
ControlFilter<T> control_filter(ParamBinding<T>& bind, const Var<T>& h, std::size_t s, std::size_t o) {
    const Var<T> pair = concat({row(h, s), row(h, o)}, 1);
    const Var<T> p = relu(affine(pair, bind("ctl.Wp"), bind("ctl.bp")));
    return {p, mul(h, p)};
}

// Scores come from the filtered states; the weighted sum runs over H unless
// `pool_filtered` is set.
template <class T>
ControlGate<T> control_gate(ParamBinding<T>& bind, const Var<T>& h, const Var<T>& filtered, const Var<T>& context,
                            std::size_t s, std::size_t o, bool pool_filtered = false) {
    const Var<T> scores = add(matmul_nt(bind("ctl.Wa"), filtered), bind("ctl.ba"));  // 1 x n
    const Var<T> alpha = softmax_row(scores);
    const Var<T> m = matmul(alpha, pool_filtered ? filtered : h);
    const Var<T> in = concat({m, row(h, s), row(h, o)}, 1);
    const Var<T> c = relu(affine(in, bind("ctl.Wc"), bind("ctl.bc")));
    return {alpha, m, c, mul(context, c)};
}

}  // namespace drpc
