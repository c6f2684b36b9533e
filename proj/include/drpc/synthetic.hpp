#pragma once

// Seeded generator of relation corpora whose labels follow a known rule, used
// to check that the model learns at desk scale.
//
// Label rule, applied by synthetic_oracle_label():
//   * None when the s mention is a location
//   * None unless a trigger word ("trig_a"/"trig_b") lies strictly between s and o
//   * otherwise "A" or "B" by trigger, with suffix "_neg" when the marker word
//     "not" occurs at a token OFF the s-o dependency path.
// The marker is also planted on the path as a distractor, so the rule cannot
// be read off the dependency path alone nor ignore the tree.

#include <string>
#include <unordered_set>
#include <vector>

#include "drpc/corpus.hpp"
#include "drpc/rng.hpp"
#include "drpc/tensor.hpp"

namespace drpc {

struct SyntheticSpec {
    std::size_t count = 2000;
    std::size_t min_len = 6;
    std::size_t max_len = 14;
    // Filler words per attachment class (five classes).
    std::size_t fillers_per_class = 8;
    // Probability that a subtree head sits next to its parent.
    double adjacency_bias = 0.85;
    // Probability that a left/right dependent block keeps growing instead of
    // starting a new sibling subtree.
    double segment_extend = 0.8;
    // Shifted domain: filler words from a disjoint vocabulary and flatter trees.
    bool shifted = false;
    std::string domain = "src";

    void validate() const {
        if (min_len < 3) throw PreconditionError("synthetic sentences need at least 3 tokens");
        if (max_len < min_len) throw PreconditionError("synthetic max_len below min_len");
        if (count == 0) throw PreconditionError("synthetic count must be positive");
        if (fillers_per_class == 0) throw PreconditionError("synthetic vocabulary is empty");
        if (adjacency_bias < 0 || adjacency_bias > 1 || segment_extend < 0 || segment_extend >= 1)
            throw PreconditionError("synthetic tree probabilities out of range");
    }

    // The distribution actually used for the shifted domain.
    SyntheticSpec shifted_variant() const {
        SyntheticSpec s = *this;
        s.shifted = true;
        s.adjacency_bias = 0.5;
        s.segment_extend = 0.5;
        s.domain = "shift";
        return s;
    }
};

inline const std::string kTriggerA = "trig_a";
inline const std::string kTriggerB = "trig_b";
inline const std::string kMarker = "not";

namespace detail {

inline const char* const kEntityTypes[] = {"PER", "ORG", "LOC"};

// Attachment classes drive both filler choice and relation labels, so that
// edges are partly predictable from words as in natural text.
enum class Attach { root, left_near, left_far, right_near, right_far };

inline Attach attach_class(const DependencyTree& tree, std::size_t i) {
    const int h = tree.head[i];
    if (h == kRoot) return Attach::root;
    const long d = static_cast<long>(i) - h;
    if (d > 0) return d == 1 ? Attach::left_near : Attach::left_far;  // head to the left
    return d == -1 ? Attach::right_near : Attach::right_far;
}

inline const char* attach_rel(Attach a) {
    switch (a) {
        case Attach::root: return "root";
        case Attach::left_near: return "amod";
        case Attach::left_far: return "nmod";
        case Attach::right_near: return "det";
        case Attach::right_far: return "advmod";
    }
    return "dep";
}

// Projective tree over [l, r] whose head attaches to `parent`.
inline void build_span(Rng& rng, const SyntheticSpec& spec, std::vector<int>& head, long l, long r, int parent) {
    if (l > r) return;
    long h;
    if (parent != kRoot && parent == l - 1 && rng.chance(spec.adjacency_bias)) h = l;
    else if (parent != kRoot && parent == r + 1 && rng.chance(spec.adjacency_bias)) h = r;
    else h = l + static_cast<long>(rng.below(static_cast<std::size_t>(r - l + 1)));
    head[static_cast<std::size_t>(h)] = parent;
    // Split each side into contiguous dependent blocks, nearest first.
    for (long b = h - 1; b >= l;) {
        long a = b;
        while (a > l && rng.chance(spec.segment_extend)) --a;
        build_span(rng, spec, head, a, b, static_cast<int>(h));
        b = a - 1;
    }
    for (long a = h + 1; a <= r;) {
        long b = a;
        while (b < r && rng.chance(spec.segment_extend)) ++b;
        build_span(rng, spec, head, a, b, static_cast<int>(h));
        a = b + 1;
    }
}

}  // namespace detail

inline DependencyTree random_projective_tree(Rng& rng, const SyntheticSpec& spec, std::size_t n) {
    std::vector<int> head(n, kRoot);
    detail::build_span(rng, spec, head, 0, static_cast<long>(n) - 1, kRoot);
    DependencyTree tree{head, std::vector<std::string>(n)};
    for (std::size_t i = 0; i < n; ++i) tree.rel_label[i] = detail::attach_rel(detail::attach_class(tree, i));
    validate_tree(tree, n);
    return tree;
}

inline std::string entity_type(const Token& t) {
    return t.entity_tag.size() > 2 ? t.entity_tag.substr(2) : std::string{};
}

inline std::string synthetic_oracle_label(const RelationInstance& inst) {
    const auto& toks = inst.sentence.tokens;
    if (entity_type(toks[inst.s]) == "LOC") return kNoneLabel;
    const std::size_t lo = std::min(inst.s, inst.o), hi = std::max(inst.s, inst.o);
    std::string trigger;
    for (std::size_t i = lo + 1; i < hi && trigger.empty(); ++i)
        if (toks[i].form == kTriggerA || toks[i].form == kTriggerB) trigger = toks[i].form;
    if (trigger.empty()) return kNoneLabel;
    const auto path = path_flags(inst.sentence.tree, inst.s, inst.o);
    bool negated = false;
    for (std::size_t i = 0; i < toks.size(); ++i)
        if (toks[i].form == kMarker && path[i] == 0) negated = true;
    return std::string(trigger == kTriggerA ? "A" : "B") + (negated ? "_neg" : "");
}

inline RelationInstance generate_instance(Rng& rng, const SyntheticSpec& spec) {
    const std::size_t n = rng.between(spec.min_len, spec.max_len);
    RelationInstance inst;
    inst.domain = spec.domain;
    inst.sentence.tree = random_projective_tree(rng, spec, n);
    auto& toks = inst.sentence.tokens;
    toks.assign(n, Token{});

    // Mentions at least two apart so a trigger can sit between them.
    std::size_t s, o;
    do {
        s = rng.below(n);
        o = rng.below(n);
    } while (s == o || (s > o ? s - o : o - s) < 2);
    inst.s = s;
    inst.o = o;
    std::vector<bool> used(n, false);
    used[s] = used[o] = true;
    // location subjects are rare: they always give None
    const std::size_t ts = rng.chance(0.1) ? 2 : rng.below(2);
    const std::size_t to = rng.chance(0.25) ? ts : (ts + 1 + rng.below(2)) % 3;
    toks[s].entity_tag = std::string("B-") + detail::kEntityTypes[ts];
    toks[o].entity_tag = std::string("B-") + detail::kEntityTypes[to];
    toks[s].form = "ent_" + std::string(detail::kEntityTypes[ts]) + std::to_string(rng.below(4));
    toks[o].form = "ent_" + std::string(detail::kEntityTypes[to]) + std::to_string(rng.below(4));

    auto free_in = [&](std::size_t a, std::size_t b, auto pred) {  // [a, b)
        std::vector<std::size_t> out;
        for (std::size_t i = a; i < b; ++i)
            if (!used[i] && pred(i)) out.push_back(i);
        return out;
    };
    auto any = [](std::size_t) { return true; };
    const std::size_t lo = std::min(s, o), hi = std::max(s, o);

    // Trigger: usually between the mentions, sometimes outside, sometimes absent.
    const double roll = rng.uniform();
    std::vector<std::size_t> spots;
    if (roll < 0.8) spots = free_in(lo + 1, hi, any);
    else if (roll < 0.9) {
        spots = free_in(0, lo, any);
        auto right = free_in(hi + 1, n, any);
        spots.insert(spots.end(), right.begin(), right.end());
    }
    if (!spots.empty()) {
        const std::size_t t = spots[rng.below(spots.size())];
        toks[t].form = rng.chance(0.5) ? kTriggerA : kTriggerB;
        used[t] = true;
    }

    // Marker: off the dependency path, on it as a distractor, or absent.
    const auto path = path_flags(inst.sentence.tree, s, o);
    const double mroll = rng.uniform();
    std::vector<std::size_t> mspots;
    if (mroll < 0.45) mspots = free_in(0, n, [&](std::size_t i) { return path[i] == 0; });
    else if (mroll < 0.65) mspots = free_in(0, n, [&](std::size_t i) { return path[i] == 1; });
    if (!mspots.empty()) {
        const std::size_t m = mspots[rng.below(mspots.size())];
        toks[m].form = kMarker;
        used[m] = true;
    }

    // Occasional third mention that plays no role in the label.
    if (rng.chance(0.3)) {
        auto free = free_in(0, n, any);
        if (!free.empty()) {
            const std::size_t d = free[rng.below(free.size())];
            const char* type = detail::kEntityTypes[rng.below(3)];
            toks[d].entity_tag = std::string("B-") + type;
            toks[d].form = "ent_" + std::string(type) + std::to_string(rng.below(4));
            used[d] = true;
        }
    }

    const std::string prefix = spec.shifted ? "g" : "f";
    for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        const auto cls = static_cast<int>(detail::attach_class(inst.sentence.tree, i));
        toks[i].form = prefix + std::to_string(cls) + "_" + std::to_string(rng.below(spec.fillers_per_class));
    }

    // Chunks: random NP/VP spans.
    for (std::size_t i = 0; i < n;) {
        if (rng.chance(0.3)) {
            toks[i++].chunk_tag = "O";
            continue;
        }
        const std::string type = rng.chance(0.6) ? "NP" : "VP";
        const std::size_t len = 1 + rng.below(3);
        for (std::size_t k = 0; k < len && i < n; ++k, ++i) toks[i].chunk_tag = (k == 0 ? "B-" : "I-") + type;
    }

    inst.label = synthetic_oracle_label(inst);
    validate_instance(inst);
    return inst;
}

// `exclude` holds serialized instances that must not be generated again,
// which keeps seeded splits disjoint.
inline Corpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                 const std::unordered_set<std::string>* exclude = nullptr) {
    spec.validate();
    Rng rng(seed);
    std::vector<RelationInstance> out;
    out.reserve(spec.count);
    while (out.size() < spec.count) {
        RelationInstance inst = generate_instance(rng, spec);
        if (exclude && exclude->count(to_json(inst).dump())) continue;
        out.push_back(std::move(inst));
    }
    return make_corpus(std::move(out));
}

struct SyntheticSplits {
    Corpus train, dev, test;
};

// Disjoint seeded splits. The training split is exactly
// generate_synthetic(spec with count = n_train, seed); dev and test use
// derived seeds and skip any instance already drawn. With `shift` the test
// split comes from spec.shifted_variant().
inline SyntheticSplits synthetic_splits(SyntheticSpec spec, std::uint64_t seed, std::size_t n_train, std::size_t n_dev,
                                        std::size_t n_test, bool shift = false) {
    std::unordered_set<std::string> seen;
    auto remember = [&](const Corpus& c) {
        for (const auto& i : c.instances) seen.insert(to_json(i).dump());
    };
    SyntheticSplits out;
    spec.count = n_train;
    out.train = generate_synthetic(spec, seed);
    remember(out.train);
    if (n_dev) {
        spec.count = n_dev;
        out.dev = generate_synthetic(spec, sub_seed(seed, "dev"), &seen);
        remember(out.dev);
    }
    if (n_test) {
        SyntheticSpec t = shift ? spec.shifted_variant() : spec;
        t.count = n_test;
        out.test = generate_synthetic(t, sub_seed(seed, "test"), &seen);
    }
    return out;
}

inline nlohmann::json to_json(const SyntheticSpec& s) {
    return {{"count", s.count},
            {"min_len", s.min_len},
            {"max_len", s.max_len},
            {"fillers_per_class", s.fillers_per_class},
            {"adjacency_bias", s.adjacency_bias},
            {"segment_extend", s.segment_extend},
            {"shifted", s.shifted},
            {"domain", s.domain}};
}

}  // namespace drpc
