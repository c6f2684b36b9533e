#pragma once

// The full relation classifier: parameters, vocabularies and the forward pass
// for one instance.

#include <optional>

#include "drpc/attention.hpp"
#include "drpc/classifier.hpp"
#include "drpc/control.hpp"
#include "drpc/depsupervise.hpp"
#include "drpc/embeddings.hpp"
#include "drpc/encoder.hpp"

namespace drpc {

template <class T>
struct Model {
    ModelConfig config;
    Vocabularies vocab;
    ParamStore<T> params;

    std::size_t label_count() const { return vocab.labels.size(); }
};

// Parameters are created only for enabled components, in a fixed order.
template <class T>
Model<T> init_model(const ModelConfig& cfg, Vocabularies vocab, std::uint64_t seed,
                    const EmbeddingTable* pretrained = nullptr) {
    cfg.validate();
    Model<T> m{cfg, std::move(vocab), {}};
    Rng rng(sub_seed(seed, "init"));
    add_encoder_params(m.params, cfg, m.vocab, rng);
    if (cfg.ablation.self_attention) add_attention_params(m.params, cfg, rng);
    if (cfg.ablation.dep_prediction) add_dep_params(m.params, cfg, rng);
    if (cfg.ablation.control) add_control_params(m.params, cfg, rng);
    add_classifier_params(m.params, cfg, m.label_count(), rng);
    if (pretrained) {
        if (pretrained->dim() != cfg.features.word_dim)
            throw PreconditionError("embedding dimension " + std::to_string(pretrained->dim()) +
                                    " does not match word_dim " + std::to_string(cfg.features.word_dim));
        Tensor<T>& words = m.params.at("embed.word");
        for (std::size_t w = 1; w < m.vocab.words.size(); ++w) {
            const auto& form = m.vocab.words[w];
            if (!pretrained->contains(form)) continue;
            const auto v = pretrained->lookup(form);
            for (std::size_t k = 0; k < v.size(); ++k) words(w, k) = static_cast<T>(v[k]);
        }
    }
    return m;
}

// Every intermediate of one forward pass. Vars of skipped components stay
// invalid.
template <class T>
struct ForwardTrace {
    Var<T> w, h, context, attn_weights;
    Var<T> edge_logits, edge_probs;
    Var<T> p, filtered, alpha, memory, c, gated;
    Var<T> o;
    Prediction<T> prediction;
    Var<T> loss_label, loss_dep, loss_total;

    std::size_t predicted() const { return prediction.label(); }
};

// `lambda` weighs the dependency loss. Losses are built only when
// `with_loss` is set and the label is known to the model.
template <class T>
ForwardTrace<T> forward_instance(ParamBinding<T>& bind, const Model<T>& model, const RelationInstance& inst,
                                 double lambda, bool with_loss = true) {
    const ModelConfig& cfg = model.config;
    Tape<T>& tape = bind.tape();
    ForwardTrace<T> tr;
    const TokenFeatures feats = featurize(inst, cfg.features, model.vocab);
    tr.w = embed_tokens(bind, feats, cfg.features);
    tr.h = bilstm(bind, tr.w);

    if (cfg.ablation.self_attention) {
        auto att = self_attention(bind, tr.h, cfg.scale_attention);
        tr.context = att.states;
        tr.attn_weights = att.weights;
    } else {
        tr.context = tr.h;
    }

    if (cfg.ablation.dep_prediction) {
        tr.edge_logits = edge_logits(bind, tr.context, cfg.dep_nonlinearity);
        tr.edge_probs = sigmoid(tr.edge_logits);
    }

    if (cfg.ablation.control) {
        auto f = control_filter(bind, tr.h, inst.s, inst.o);
        tr.p = f.p;
        tr.filtered = f.filtered;
        auto g = control_gate(bind, tr.h, tr.filtered, tr.context, inst.s, inst.o, cfg.memory_from_filtered);
        tr.alpha = g.alpha;
        tr.memory = g.memory;
        tr.c = g.c;
        tr.gated = g.gated;
    } else {
        tr.gated = tr.context;
    }

    tr.o = aggregate(tr.h, tr.gated, inst.s, inst.o);
    tr.prediction = predict(bind, tr.o, cfg.ff_relu);

    if (with_loss && model.vocab.has_label(inst.label)) {
        tr.loss_label = label_loss_from_logits(tr.prediction.logits, model.vocab.label_id(inst.label));
        if (cfg.ablation.dep_prediction) {
            const auto target = adjacency_from_tree(inst.sentence.tree, inst.sentence.size());
            tr.loss_dep = dep_loss_from_logits(tr.edge_logits, target);
            tr.loss_total = total_loss(tr.loss_label, tr.loss_dep, lambda);
        } else {
            tr.loss_dep = tape.constant(Tensor<T>::scalar(T{0}));
            tr.loss_total = tr.loss_label;
        }
    }
    return tr;
}

}  // namespace drpc
