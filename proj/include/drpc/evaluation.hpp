#pragma once

// Sample-complexity sweep and cross-domain representation similarity.

#include <cmath>
#include <map>

#include "drpc/training.hpp"

namespace drpc {

struct SweepPoint {
    double ratio = 0;
    std::size_t size = 0;
    double f1 = 0;
};

// Indices of the subset for `ratio`: the first floor(ratio * n) entries of one
// seeded permutation, put back in corpus order. Subsets are nested across
// ratios and ratio 1 is the whole corpus in its original order.
inline std::vector<std::size_t> sweep_subset(std::size_t n, double ratio, std::uint64_t seed) {
    if (!(ratio > 0 && ratio <= 1)) throw PreconditionError("sweep ratio must lie in (0, 1]");
    const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    if (k == 0) throw PreconditionError("ratio " + std::to_string(ratio) + " selects no training instances");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(sub_seed(seed, "sweep"));
    rng.shuffle(perm.begin(), perm.end());
    perm.resize(k);
    std::sort(perm.begin(), perm.end());
    return perm;
}

template <class T>
std::vector<SweepPoint> sample_complexity_sweep(const Corpus& corpus, const Corpus& dev, const TrainConfig& cfg,
                                                const std::vector<double>& ratios) {
    if (ratios.empty()) throw PreconditionError("no sweep ratios given");
    for (double r : ratios) sweep_subset(corpus.size(), r, cfg.seed);  // reject bad ratios before training
    std::vector<SweepPoint> out;
    for (double r : ratios) {
        std::vector<RelationInstance> subset;
        for (auto i : sweep_subset(corpus.size(), r, cfg.seed)) subset.push_back(corpus.instances[i]);
        const Corpus part = make_corpus(std::move(subset));
        const auto result = train<T>(part, &dev, cfg);
        out.push_back({r, part.size(), result.info.dev_f1});
    }
    return out;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::string s = "ratio,f1\n";
    for (const auto& p : points) s += format_double(p.ratio) + "," + format_double(p.f1) + "\n";
    return s;
}

struct SimilarityStats {
    double mean_cosine = 0;
    std::size_t pairs = 0;        // pairs averaged
    std::size_t total_pairs = 0;  // all cross pairs between usable vectors
    bool sampled = false;
    std::size_t excluded_left = 0, excluded_right = 0;  // zero-norm vectors
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// Mean cosine over all (left, right) pairs, or over `sample_cap` pairs drawn
// uniformly with replacement when there are more pairs than that.
inline SimilarityStats mean_cross_cosine(const std::vector<std::vector<double>>& left,
                                         const std::vector<std::vector<double>>& right, std::size_t sample_cap,
                                         std::uint64_t seed) {
    auto usable = [](const std::vector<std::vector<double>>& vs, std::size_t& excluded) {
        std::vector<const std::vector<double>*> out;
        for (const auto& v : vs) {
            double n = 0;
            for (double x : v) n += x * x;
            if (n > 0) out.push_back(&v);
            else ++excluded;
        }
        return out;
    };
    SimilarityStats st;
    const auto a = usable(left, st.excluded_left);
    const auto b = usable(right, st.excluded_right);
    if (a.empty() || b.empty()) throw PreconditionError("similarity needs nonzero vectors on both sides");
    st.total_pairs = a.size() * b.size();
    double sum = 0;
    if (st.total_pairs <= sample_cap) {
        for (const auto* x : a)
            for (const auto* y : b) sum += cosine(*x, *y);
        st.pairs = st.total_pairs;
    } else {
        Rng rng(sub_seed(seed, "similarity"));
        for (std::size_t k = 0; k < sample_cap; ++k) sum += cosine(*a[rng.below(a.size())], *b[rng.below(b.size())]);
        st.pairs = sample_cap;
        st.sampled = true;
    }
    st.mean_cosine = sum / static_cast<double>(st.pairs);
    return st;
}

template <class T>
std::vector<std::vector<double>> aggregation_vectors(const Model<T>& model,
                                                     const std::vector<RelationInstance>& instances,
                                                     std::size_t jobs = 1) {
    std::vector<std::vector<double>> out(instances.size());
    parallel_for(instances.size(), jobs, [&](std::size_t i) {
        Tape<T> tape;
        ParamBinding<T> bind(tape, model.params);
        auto tr = forward_instance(bind, model, instances[i], 0.0, false);
        const auto& v = tr.o.value().values();
        out[i].assign(v.begin(), v.end());
    });
    return out;
}

struct SimilarityReport {
    SimilarityStats overall;
    std::map<std::string, SimilarityStats> per_domain;  // keyed by the test instances' domain
    std::size_t sample_cap = 0;
};

template <class T>
SimilarityReport representation_similarity(const Model<T>& model, const std::vector<RelationInstance>& train_side,
                                           const std::vector<RelationInstance>& test_side,
                                           std::size_t sample_cap = 1000000, std::uint64_t seed = 1,
                                           std::size_t jobs = 1) {
    if (train_side.empty() || test_side.empty()) throw PreconditionError("similarity needs instances on both sides");
    const auto left = aggregation_vectors(model, train_side, jobs);
    const auto right = aggregation_vectors(model, test_side, jobs);
    SimilarityReport r;
    r.sample_cap = sample_cap;
    r.overall = mean_cross_cosine(left, right, sample_cap, seed);
    std::map<std::string, std::vector<std::vector<double>>> by_domain;
    for (std::size_t i = 0; i < test_side.size(); ++i) by_domain[test_side[i].domain].push_back(right[i]);
    for (const auto& [d, vs] : by_domain) r.per_domain[d] = mean_cross_cosine(left, vs, sample_cap, seed);
    return r;
}

inline nlohmann::json to_json(const SimilarityStats& s) {
    return {{"mean_cosine", s.mean_cosine},   {"pairs", s.pairs},
            {"total_pairs", s.total_pairs},   {"sampled", s.sampled},
            {"excluded_zero_norm_train", s.excluded_left}, {"excluded_zero_norm_test", s.excluded_right}};
}

inline nlohmann::json to_json(const SimilarityReport& r) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [d, s] : r.per_domain) per[d] = to_json(s);
    return {{"overall", to_json(r.overall)}, {"per_domain", per}, {"sample_cap", r.sample_cap}};
}

struct EdgeAccuracy {
    std::size_t correct = 0;
    std::size_t total = 0;
    std::size_t edges = 0;  // ones in the targets

    double accuracy() const { return safe_ratio(correct, total); }
    // accuracy of predicting no edge anywhere
    double empty_baseline() const { return total ? 1.0 - safe_ratio(edges, total) : 0.0; }
};

// Thresholded dependency-head predictions against the gold adjacency, pooled
// over all n x n entries of every instance.
template <class T>
EdgeAccuracy edge_accuracy(const Model<T>& model, const std::vector<RelationInstance>& instances,
                           double threshold = 0.5, std::size_t jobs = 1) {
    if (!model.config.ablation.dep_prediction) throw PreconditionError("model has no dependency head");
    std::vector<EdgeAccuracy> per(instances.size());
    parallel_for(instances.size(), jobs, [&](std::size_t i) {
        Tape<T> tape;
        ParamBinding<T> bind(tape, model.params);
        const auto tr = forward_instance(bind, model, instances[i], 0.0, false);
        const auto target = adjacency_from_tree(instances[i].sentence.tree, instances[i].sentence.size());
        per[i] = {edge_agreements(tr.edge_probs.value(), target, threshold), target.a.size(), target.ones()};
    });
    EdgeAccuracy out;
    for (const auto& e : per) {
        out.correct += e.correct;
        out.total += e.total;
        out.edges += e.edges;
    }
    return out;
}

}  // namespace drpc

