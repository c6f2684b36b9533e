#pragma once

// Aggregation vector, relation distribution and the joint objective.

#include <cmath>

#include "drpc/config.hpp"
#include "drpc/params.hpp"
#include "drpc/rng.hpp"

namespace drpc {

template <class T>
struct Prediction {
    Var<T> logits;  // 1 x K
    Var<T> probs;   // 1 x K

    // Lowest index wins ties.
    std::size_t label() const {
        const auto& v = probs.value().values();
        std::size_t best = 0;
        for (std::size_t k = 1; k < v.size(); ++k)
            if (v[k] > v[best]) best = k;
        return best;
    }
};

template <class T>
void add_classifier_params(ParamStore<T>& store, const ModelConfig& cfg, std::size_t labels, Rng& rng) {
    if (labels < 2) throw PreconditionError("classifier needs at least two labels");
    auto uniform = [&](Shape s) {
        Tensor<T> t(std::move(s));
        for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-0.1, 0.1));
        return t;
    };
    store.add("cls.W1", uniform({cfg.ff_hidden, cfg.aggregate_dim()}));
    store.add("cls.b1", Tensor<T>({cfg.ff_hidden}));
    store.add("cls.W2", uniform({labels, cfg.ff_hidden}));
    store.add("cls.b2", Tensor<T>({labels}));
}

// o = [h_s, h_o, g_s, g_o, max_i g_i] as a 1 x (2 dim(h) + 3 dim(g)) row.
template <class T>
Var<T> aggregate(const Var<T>& h, const Var<T>& gated, std::size_t s, std::size_t o) {
    if (s >= h.rows() || o >= h.rows()) throw PreconditionError("mention index out of range");
    return concat({row(h, s), row(h, o), row(gated, s), row(gated, o), max_rows(gated)}, 1);
}

template <class T>
Prediction<T> predict(ParamBinding<T>& bind, const Var<T>& o, bool ff_relu = false) {
    Var<T> hidden = affine(o, bind("cls.W1"), bind("cls.b1"));
    if (ff_relu) hidden = relu(hidden);
    const Var<T> logits = affine(hidden, bind("cls.W2"), bind("cls.b2"));
    return {logits, softmax_row(logits)};
}

// -log P(y), read off the probabilities.
template <class T>
Var<T> label_loss(const Var<T>& probs, std::size_t y) {
    if (y >= probs.cols()) throw PreconditionError("label index out of range");
    return neg(sum(log(slice_cols(probs, y, y + 1))));
}

// Same value from the logits, finite for any logit scale.
template <class T>
Var<T> label_loss_from_logits(const Var<T>& logits, std::size_t y) {
    return nll_from_logits(logits, y);
}

// L_label + lambda L_dep. With lambda = 0 the label loss is returned as is.
template <class T>
Var<T> total_loss(const Var<T>& label, const Var<T>& dep, double lambda) {
    if (!(lambda >= 0)) throw PreconditionError("lambda must be non-negative");
    if (lambda == 0) return label;
    return add(label, scale(dep, static_cast<T>(lambda)));
}

}  // namespace drpc
