#pragma once

// Token feature vectors and the bidirectional LSTM over them.

#include <algorithm>
#include <string>
#include <vector>

#include "drpc/config.hpp"
#include "drpc/params.hpp"
#include "drpc/rng.hpp"
#include "drpc/vocab.hpp"

namespace drpc {

// Ids and binary features of one instance; everything embed_tokens needs
// besides the parameters.
struct TokenFeatures {
    std::vector<std::size_t> word;
    std::vector<std::size_t> pos_s;
    std::vector<std::size_t> pos_o;
    std::vector<std::size_t> entity;
    std::vector<std::size_t> chunk;
    std::vector<int> path;
    std::vector<std::vector<int>> deprel;

    std::size_t size() const noexcept { return word.size(); }
};

// Row index of relative distance `offset` in a position table of
// 2 * window + 1 rows.
inline std::size_t position_index(long offset, std::size_t window) {
    const long w = static_cast<long>(window);
    return static_cast<std::size_t>(std::clamp(offset, -w, w) + w);
}

// Dependency relations outside the vocabulary contribute no multi-hot column.
inline TokenFeatures featurize(const RelationInstance& inst, const FeatureConfig& cfg, const Vocabularies& vocab) {
    const auto& toks = inst.sentence.tokens;
    const std::size_t n = toks.size();
    TokenFeatures f;
    for (std::size_t i = 0; i < n; ++i) {
        f.word.push_back(vocab.words.id(toks[i].form));
        f.pos_s.push_back(position_index(static_cast<long>(i) - static_cast<long>(inst.s), cfg.position_window));
        f.pos_o.push_back(position_index(static_cast<long>(i) - static_cast<long>(inst.o), cfg.position_window));
        f.entity.push_back(vocab.entity_tags.id(toks[i].entity_tag));
        f.chunk.push_back(vocab.chunk_tags.id(toks[i].chunk_tag));
    }
    if (cfg.use_path_flag) f.path = path_flags(inst.sentence.tree, inst.s, inst.o);
    if (cfg.use_deprel_multihot) {
        std::vector<std::string> labels = vocab.deprels;
        for (const auto& r : inst.sentence.tree.rel_label)
            if (!std::binary_search(vocab.deprels.begin(), vocab.deprels.end(), r) &&
                std::find(labels.begin(), labels.end(), r) == labels.end())
                labels.push_back(r);
        f.deprel = dep_relation_multihot(inst.sentence.tree, labels);
        for (auto& row : f.deprel) row.resize(vocab.deprels.size());
    }
    return f;
}

template <class T>
void add_encoder_params(ParamStore<T>& store, const ModelConfig& cfg, const Vocabularies& vocab, Rng& rng) {
    auto uniform = [&](Shape s) {
        Tensor<T> t(std::move(s));
        for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-0.1, 0.1));
        return t;
    };
    const auto& f = cfg.features;
    const std::size_t positions = 2 * f.position_window + 1;
    Tensor<T> words = uniform({vocab.words.size(), f.word_dim});
    std::fill(words.data(), words.data() + f.word_dim, T{0});  // unk row
    store.add("embed.word", std::move(words));
    store.add("embed.pos_s", uniform({positions, f.position_dim}));
    store.add("embed.pos_o", uniform({positions, f.position_dim}));
    if (f.use_entity_tag) store.add("embed.entity", uniform({vocab.entity_tags.size(), f.entity_tag_dim}));
    if (f.use_chunk_tag) store.add("embed.chunk", uniform({vocab.chunk_tags.size(), f.chunk_tag_dim}));

    const std::size_t in = f.token_dim(vocab.deprels.size());
    const std::size_t d = cfg.lstm_hidden;
    for (const char* dir : {"fwd", "bwd"}) {
        const std::string p = std::string("lstm.") + dir;
        store.add(p + ".Wx", uniform({4 * d, in}));
        store.add(p + ".Wh", uniform({4 * d, d}));
        Tensor<T> b({4 * d});
        for (std::size_t k = d; k < 2 * d; ++k) b[k] = T{1};  // forget gate
        store.add(p + ".b", std::move(b));
    }
}

// The token vectors w_i as rows of an n x token_dim matrix.
template <class T>
Var<T> embed_tokens(ParamBinding<T>& bind, const TokenFeatures& feats, const FeatureConfig& cfg) {
    Tape<T>& tape = bind.tape();
    const std::size_t n = feats.size();
    std::vector<Var<T>> parts;
    parts.push_back(gather_rows(bind("embed.word"), feats.word));
    parts.push_back(gather_rows(bind("embed.pos_s"), feats.pos_s));
    parts.push_back(gather_rows(bind("embed.pos_o"), feats.pos_o));
    if (cfg.use_entity_tag) parts.push_back(gather_rows(bind("embed.entity"), feats.entity));
    if (cfg.use_chunk_tag) parts.push_back(gather_rows(bind("embed.chunk"), feats.chunk));
    if (cfg.use_path_flag) {
        Tensor<T> p({n, 1});
        for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<T>(feats.path[i]);
        parts.push_back(tape.constant(std::move(p)));
    }
    if (cfg.use_deprel_multihot && !feats.deprel.empty() && !feats.deprel[0].empty()) {
        const std::size_t r = feats.deprel[0].size();
        Tensor<T> g({n, r});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < r; ++k) g(i, k) = static_cast<T>(feats.deprel[i][k]);
        parts.push_back(tape.constant(std::move(g)));
    }
    return concat(std::span<const Var<T>>(parts), 1);
}

// One LSTM direction over the rows of x; gate order is input, forget,
// candidate, output. Returns n x hidden with row t the state after token t.
template <class T>
Var<T> lstm_pass(ParamBinding<T>& bind, const Var<T>& x, const std::string& prefix, bool reverse) {
    const std::size_t n = x.rows();
    const Var<T> wh = bind(prefix + ".Wh");
    const std::size_t d = wh.cols();
    const Var<T> proj = add(matmul_nt(x, bind(prefix + ".Wx")), bind(prefix + ".b"));
    std::vector<Var<T>> out(n);
    Var<T> h, c;
    for (std::size_t step = 0; step < n; ++step) {
        const std::size_t t = reverse ? n - 1 - step : step;
        Var<T> gates = row(proj, t);
        if (step > 0) gates = add(gates, matmul_nt(h, wh));
        const Var<T> in = sigmoid(slice_cols(gates, 0, d));
        const Var<T> forget = sigmoid(slice_cols(gates, d, 2 * d));
        const Var<T> cand = tanh(slice_cols(gates, 2 * d, 3 * d));
        const Var<T> outg = sigmoid(slice_cols(gates, 3 * d, 4 * d));
        c = step > 0 ? add(mul(forget, c), mul(in, cand)) : mul(in, cand);
        h = mul(outg, tanh(c));
        out[t] = h;
    }
    return concat(std::span<const Var<T>>(out), 0);
}

// H = [forward || backward] per token, n x 2*lstm_hidden.
template <class T>
Var<T> bilstm(ParamBinding<T>& bind, const Var<T>& w) {
    if (w.rows() == 0) throw PreconditionError("bilstm over an empty sequence");
    const Var<T> fwd = lstm_pass(bind, w, "lstm.fwd", false);
    const Var<T> bwd = lstm_pass(bind, w, "lstm.bwd", true);
    return concat({fwd, bwd}, 1);
}

}  // namespace drpc
