#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "drpc/tensor.hpp"

namespace drpc {

// Which parts of the token vector [e, ps, po, t, c, p, g] are active, and
// their sizes. Word and position parts are mandatory.
struct FeatureConfig {
    bool use_word = true;
    bool use_positions = true;
    bool use_entity_tag = true;
    bool use_chunk_tag = true;
    bool use_path_flag = true;
    bool use_deprel_multihot = true;
    std::size_t word_dim = 300;
    std::size_t position_dim = 50;
    std::size_t entity_tag_dim = 50;
    std::size_t chunk_tag_dim = 50;
    // Relative distances are clipped to [-position_window, position_window].
    std::size_t position_window = 50;

    void validate() const {
        if (!use_word || !use_positions)
            throw PreconditionError("word and position features cannot be disabled");
        if (word_dim == 0 || position_dim == 0) throw PreconditionError("feature dimensions must be positive");
        if (use_entity_tag && entity_tag_dim == 0) throw PreconditionError("entity tag dimension must be positive");
        if (use_chunk_tag && chunk_tag_dim == 0) throw PreconditionError("chunk tag dimension must be positive");
    }

    // Only word and position embeddings.
    static FeatureConfig no_linguistic() {
        FeatureConfig f;
        f.use_entity_tag = f.use_chunk_tag = f.use_path_flag = f.use_deprel_multihot = false;
        return f;
    }

    std::size_t token_dim(std::size_t deprel_count) const {
        return word_dim + 2 * position_dim + (use_entity_tag ? entity_tag_dim : 0) +
               (use_chunk_tag ? chunk_tag_dim : 0) + (use_path_flag ? 1 : 0) +
               (use_deprel_multihot ? deprel_count : 0);
    }

    friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

// Component switches. The named presets remove components cumulatively.
struct Ablation {
    bool self_attention = true;
    bool dep_prediction = true;
    bool control = true;

    static Ablation from_name(const std::string& name) {
        if (name == "full") return {true, true, true};
        if (name == "no_CM") return {true, true, false};
        if (name == "no_DP_CM") return {true, false, false};
        if (name == "no_SA_DP_CM") return {false, false, false};
        if (name == "no_DP") return {true, false, true};
        if (name == "no_SA") return {false, true, true};
        throw PreconditionError("unknown ablation '" + name +
                                "' (expected full, no_CM, no_DP_CM, no_SA_DP_CM, no_DP or no_SA)");
    }

    std::string name() const {
        if (self_attention && dep_prediction && control) return "full";
        if (self_attention && dep_prediction && !control) return "no_CM";
        if (self_attention && !dep_prediction && !control) return "no_DP_CM";
        if (!self_attention && !dep_prediction && !control) return "no_SA_DP_CM";
        if (self_attention && !dep_prediction && control) return "no_DP";
        if (!self_attention && dep_prediction && control) return "no_SA";
        std::string n;
        if (!self_attention) n += "no_SA_";
        if (!dep_prediction) n += "no_DP_";
        if (!control) n += "no_CM_";
        return n.substr(0, n.size() - 1);
    }

    friend bool operator==(const Ablation&, const Ablation&) = default;
};

enum class Nonlinearity { tanh, relu };

struct ModelConfig {
    FeatureConfig features;
    std::size_t lstm_hidden = 100;  // per direction
    std::size_t attn_dim = 200;
    std::size_t dep_hidden = 200;
    std::size_t ff_hidden = 200;
    Ablation ablation;
    bool scale_attention = false;          // divide q.k by sqrt(attn_dim)
    Nonlinearity dep_nonlinearity = Nonlinearity::tanh;
    bool ff_relu = false;                  // relu between the two classifier layers
    bool memory_from_filtered = false;     // pool filtered vectors instead of H in the control gate

    std::size_t hidden_dim() const { return 2 * lstm_hidden; }
    // Width of H' (H itself when self-attention is ablated).
    std::size_t context_dim() const { return ablation.self_attention ? attn_dim : hidden_dim(); }
    std::size_t aggregate_dim() const { return 2 * hidden_dim() + 3 * context_dim(); }

    void validate() const {
        features.validate();
        if (lstm_hidden == 0 || attn_dim == 0 || dep_hidden == 0 || ff_hidden == 0)
            throw PreconditionError("model dimensions must be positive");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline nlohmann::json to_json(const FeatureConfig& f) {
    return {{"use_word", f.use_word},
            {"use_positions", f.use_positions},
            {"use_entity_tag", f.use_entity_tag},
            {"use_chunk_tag", f.use_chunk_tag},
            {"use_path_flag", f.use_path_flag},
            {"use_deprel_multihot", f.use_deprel_multihot},
            {"word_dim", f.word_dim},
            {"position_dim", f.position_dim},
            {"entity_tag_dim", f.entity_tag_dim},
            {"chunk_tag_dim", f.chunk_tag_dim},
            {"position_window", f.position_window}};
}

inline nlohmann::json to_json(const ModelConfig& m) {
    return {{"features", to_json(m.features)},
            {"lstm_hidden", m.lstm_hidden},
            {"attn_dim", m.attn_dim},
            {"dep_hidden", m.dep_hidden},
            {"ff_hidden", m.ff_hidden},
            {"ablation", m.ablation.name()},
            {"self_attention", m.ablation.self_attention},
            {"dep_prediction", m.ablation.dep_prediction},
            {"control", m.ablation.control},
            {"scale_attention", m.scale_attention},
            {"dep_nonlinearity", m.dep_nonlinearity == Nonlinearity::tanh ? "tanh" : "relu"},
            {"ff_relu", m.ff_relu},
            {"memory_from_filtered", m.memory_from_filtered}};
}

namespace detail {
template <class V>
void read_opt(const nlohmann::json& j, const char* key, V& out) {
    if (j.contains(key)) out = j.at(key).get<V>();
}
}  // namespace detail

// Missing keys keep their defaults, so partial config files are accepted.
inline void update_from_json(FeatureConfig& f, const nlohmann::json& j) {
    detail::read_opt(j, "use_word", f.use_word);
    detail::read_opt(j, "use_positions", f.use_positions);
    detail::read_opt(j, "use_entity_tag", f.use_entity_tag);
    detail::read_opt(j, "use_chunk_tag", f.use_chunk_tag);
    detail::read_opt(j, "use_path_flag", f.use_path_flag);
    detail::read_opt(j, "use_deprel_multihot", f.use_deprel_multihot);
    detail::read_opt(j, "word_dim", f.word_dim);
    detail::read_opt(j, "position_dim", f.position_dim);
    detail::read_opt(j, "entity_tag_dim", f.entity_tag_dim);
    detail::read_opt(j, "chunk_tag_dim", f.chunk_tag_dim);
    detail::read_opt(j, "position_window", f.position_window);
}

inline void update_from_json(ModelConfig& m, const nlohmann::json& j) {
    if (j.contains("features")) update_from_json(m.features, j.at("features"));
    detail::read_opt(j, "lstm_hidden", m.lstm_hidden);
    detail::read_opt(j, "attn_dim", m.attn_dim);
    detail::read_opt(j, "dep_hidden", m.dep_hidden);
    detail::read_opt(j, "ff_hidden", m.ff_hidden);
    if (j.contains("ablation")) m.ablation = Ablation::from_name(j.at("ablation").get<std::string>());
    detail::read_opt(j, "self_attention", m.ablation.self_attention);
    detail::read_opt(j, "dep_prediction", m.ablation.dep_prediction);
    detail::read_opt(j, "control", m.ablation.control);
    detail::read_opt(j, "scale_attention", m.scale_attention);
    if (j.contains("dep_nonlinearity")) {
        const auto g = j.at("dep_nonlinearity").get<std::string>();
        if (g != "tanh" && g != "relu") throw PreconditionError("dep_nonlinearity must be tanh or relu");
        m.dep_nonlinearity = g == "tanh" ? Nonlinearity::tanh : Nonlinearity::relu;
    }
    detail::read_opt(j, "ff_relu", m.ff_relu);
    detail::read_opt(j, "memory_from_filtered", m.memory_from_filtered);
}

}  // namespace drpc
