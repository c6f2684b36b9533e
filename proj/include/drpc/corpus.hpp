#pragma once

// Relation instances, dependency trees, and the tree-derived features the
// encoder consumes. Token indices are 0-based everywhere; ROOT is -1.

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace drpc {

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kRoot = -1;
inline const std::string kNoneLabel = "None";

struct Token {
    std::string form;
    std::string entity_tag = "O";
    std::string chunk_tag = "O";

    friend bool operator==(const Token&, const Token&) = default;
};

struct DependencyTree {
    std::vector<int> head;
    std::vector<std::string> rel_label;

    std::size_t size() const noexcept { return head.size(); }
    friend bool operator==(const DependencyTree&, const DependencyTree&) = default;
};

struct Sentence {
    std::vector<Token> tokens;
    DependencyTree tree;

    std::size_t size() const noexcept { return tokens.size(); }
    friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct RelationInstance {
    Sentence sentence;
    std::size_t s = 0;
    std::size_t o = 0;
    std::string label;
    std::string domain;

    friend bool operator==(const RelationInstance&, const RelationInstance&) = default;
};

struct Corpus {
    std::vector<RelationInstance> instances;
    std::vector<std::string> labels;    // sorted
    std::vector<std::string> deprels;   // sorted, labels of non-root tokens

    std::size_t size() const noexcept { return instances.size(); }
};

// ---------------------------------------------------------------------------
// Validation

// An I-X tag may only follow B-X or I-X.
inline void validate_bio(const std::vector<std::string>& tags, const char* what) {
    std::string prev = "O";
    for (std::size_t i = 0; i < tags.size(); ++i) {
        const std::string& t = tags[i];
        if (t != "O" && (t.size() < 3 || (t[0] != 'B' && t[0] != 'I') || t[1] != '-'))
            throw CorpusError(std::string(what) + " tag '" + t + "' at token " + std::to_string(i) + " is not BIO");
        if (t[0] == 'I') {
            const std::string type = t.substr(2);
            if (prev == "O" || prev.substr(2) != type)
                throw CorpusError(std::string(what) + " tag '" + t + "' at token " + std::to_string(i) +
                                  " does not continue a " + type + " span");
        }
        prev = t;
    }
}

inline void validate_tree(const DependencyTree& tree, std::size_t n) {
    if (tree.head.size() != n || tree.rel_label.size() != n)
        throw CorpusError("dependency tree covers " + std::to_string(tree.head.size()) + " tokens, sentence has " +
                          std::to_string(n));
    std::size_t roots = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int h = tree.head[i];
        if (h == kRoot) {
            ++roots;
            continue;
        }
        if (h < 0 || static_cast<std::size_t>(h) >= n)
            throw CorpusError("head of token " + std::to_string(i) + " out of range: " + std::to_string(h));
        if (static_cast<std::size_t>(h) == i) throw CorpusError("token " + std::to_string(i) + " is its own head");
    }
    if (roots != 1) throw CorpusError("dependency tree has " + std::to_string(roots) + " roots, expected 1");
    // Every token must reach ROOT within n steps.
    for (std::size_t i = 0; i < n; ++i) {
        int cur = static_cast<int>(i);
        std::size_t steps = 0;
        while (cur != kRoot) {
            cur = tree.head[static_cast<std::size_t>(cur)];
            if (++steps > n) throw CorpusError("dependency tree has a cycle through token " + std::to_string(i));
        }
    }
}

inline void validate_instance(const RelationInstance& inst) {
    const std::size_t n = inst.sentence.size();
    if (n == 0) throw CorpusError("empty sentence");
    validate_tree(inst.sentence.tree, n);
    std::vector<std::string> ent, chunk;
    for (const auto& t : inst.sentence.tokens) {
        ent.push_back(t.entity_tag);
        chunk.push_back(t.chunk_tag);
    }
    validate_bio(ent, "entity");
    validate_bio(chunk, "chunk");
    if (inst.s >= n || inst.o >= n)
        throw CorpusError("entity index out of range (s=" + std::to_string(inst.s) + ", o=" + std::to_string(inst.o) +
                          ", n=" + std::to_string(n) + ")");
    if (inst.s == inst.o) throw CorpusError("s and o must differ (both " + std::to_string(inst.s) + ")");
    if (inst.label.empty()) throw CorpusError("empty relation label");
}

// ---------------------------------------------------------------------------
// Tree-derived features

// Symmetric 0/1 edge matrix with a zero diagonal.
struct AdjacencyTarget {
    std::size_t n = 0;
    std::vector<unsigned char> a;

    unsigned char operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
    std::size_t ones() const { return static_cast<std::size_t>(std::count(a.begin(), a.end(), 1)); }
};

inline AdjacencyTarget adjacency_from_tree(const DependencyTree& tree, std::size_t n) {
    validate_tree(tree, n);
    AdjacencyTarget t{n, std::vector<unsigned char>(n * n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        const int h = tree.head[i];
        if (h == kRoot) continue;
        const auto j = static_cast<std::size_t>(h);
        t.a[i * n + j] = 1;
        t.a[j * n + i] = 1;
    }
    return t;
}

inline std::vector<std::vector<std::size_t>> undirected_neighbors(const DependencyTree& tree) {
    std::vector<std::vector<std::size_t>> nb(tree.size());
    for (std::size_t i = 0; i < tree.size(); ++i) {
        if (tree.head[i] == kRoot) continue;
        const auto h = static_cast<std::size_t>(tree.head[i]);
        nb[i].push_back(h);
        nb[h].push_back(i);
    }
    return nb;
}

// 1 for tokens on the undirected tree path from s to o, endpoints included.
inline std::vector<int> path_flags(const DependencyTree& tree, std::size_t s, std::size_t o) {
    const std::size_t n = tree.size();
    validate_tree(tree, n);
    if (s >= n || o >= n) throw CorpusError("path endpoint out of range");
    // Walk both endpoints up to their lowest common ancestor.
    auto ancestors = [&](std::size_t x) {
        std::vector<std::size_t> chain{x};
        while (tree.head[chain.back()] != kRoot) chain.push_back(static_cast<std::size_t>(tree.head[chain.back()]));
        return chain;
    };
    const auto as = ancestors(s);
    const auto ao = ancestors(o);
    std::vector<int> depth_in_o(n, -1);
    for (std::size_t k = 0; k < ao.size(); ++k) depth_in_o[ao[k]] = static_cast<int>(k);
    std::vector<int> p(n, 0);
    for (std::size_t node : as) {
        p[node] = 1;
        if (depth_in_o[node] >= 0) {
            for (int k = 0; k <= depth_in_o[node]; ++k) p[ao[static_cast<std::size_t>(k)]] = 1;
            break;
        }
    }
    return p;
}

// Row i has a 1 at relation r iff token i is an endpoint of an edge labeled r.
// The root token's own label names no edge and is ignored.
inline std::vector<std::vector<int>> dep_relation_multihot(const DependencyTree& tree,
                                                          const std::vector<std::string>& labels) {
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < labels.size(); ++r) index.emplace(labels[r], r);
    std::vector<std::vector<int>> g(tree.size(), std::vector<int>(labels.size(), 0));
    for (std::size_t i = 0; i < tree.size(); ++i) {
        if (tree.head[i] == kRoot) continue;
        auto it = index.find(tree.rel_label[i]);
        if (it == index.end()) throw CorpusError("unknown dependency relation '" + tree.rel_label[i] + "'");
        g[i][it->second] = 1;
        g[static_cast<std::size_t>(tree.head[i])][it->second] = 1;
    }
    return g;
}

// ---------------------------------------------------------------------------
// JSON Lines

inline nlohmann::json to_json(const RelationInstance& inst) {
    nlohmann::json j;
    std::vector<std::string> forms, ent, chunk;
    for (const auto& t : inst.sentence.tokens) {
        forms.push_back(t.form);
        ent.push_back(t.entity_tag);
        chunk.push_back(t.chunk_tag);
    }
    j["tokens"] = forms;
    j["entity_bio"] = ent;
    j["chunk_bio"] = chunk;
    j["heads"] = inst.sentence.tree.head;
    j["deprels"] = inst.sentence.tree.rel_label;
    j["s"] = inst.s;
    j["o"] = inst.o;
    j["label"] = inst.label;
    j["domain"] = inst.domain;
    return j;
}

namespace detail {

// A mention is either a token index or an inclusive [first, last] span; a
// span reduces to its last token.
inline std::size_t mention_index(const nlohmann::json& v, const char* key) {
    if (v.is_number_integer()) {
        if (v.get<long long>() < 0) throw CorpusError(std::string(key) + " is negative");
        return v.get<std::size_t>();
    }
    if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer()) {
        const auto first = v[0].get<long long>(), last = v[1].get<long long>();
        if (first < 0 || last < first) throw CorpusError(std::string(key) + " span is malformed");
        return static_cast<std::size_t>(last);
    }
    throw CorpusError(std::string(key) + " must be an index or a [first, last] span");
}

}  // namespace detail

inline RelationInstance instance_from_json(const nlohmann::json& j) {
    auto req = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) throw CorpusError(std::string("missing field '") + key + "'");
        return j.at(key);
    };
    RelationInstance inst;
    try {
        const auto forms = req("tokens").get<std::vector<std::string>>();
        const auto ent = req("entity_bio").get<std::vector<std::string>>();
        const auto chunk = req("chunk_bio").get<std::vector<std::string>>();
        const auto heads = req("heads").get<std::vector<int>>();
        const auto rels = req("deprels").get<std::vector<std::string>>();
        if (ent.size() != forms.size() || chunk.size() != forms.size())
            throw CorpusError("tag sequences and tokens differ in length");
        for (std::size_t i = 0; i < forms.size(); ++i) inst.sentence.tokens.push_back({forms[i], ent[i], chunk[i]});
        inst.sentence.tree = {heads, rels};
        inst.s = detail::mention_index(req("s"), "s");
        inst.o = detail::mention_index(req("o"), "o");
        inst.label = req("label").get<std::string>();
        inst.domain = j.contains("domain") ? j.at("domain").get<std::string>() : std::string{};
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError(std::string("bad field type: ") + e.what());
    }
    validate_instance(inst);
    return inst;
}

// Collects sorted label sets from the instances.
inline void index_labels(Corpus& c) {
    std::set<std::string> labels, deprels;
    for (const auto& inst : c.instances) {
        labels.insert(inst.label);
        const auto& tree = inst.sentence.tree;
        for (std::size_t i = 0; i < tree.size(); ++i)
            if (tree.head[i] != kRoot) deprels.insert(tree.rel_label[i]);
    }
    c.labels.assign(labels.begin(), labels.end());
    c.deprels.assign(deprels.begin(), deprels.end());
}

inline Corpus read_corpus(std::istream& in) {
    Corpus c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            c.instances.push_back(instance_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw CorpusError("line " + std::to_string(lineno) + ": malformed JSON: " + e.what());
        } catch (const CorpusError& e) {
            throw CorpusError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    index_labels(c);
    return c;
}

inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open corpus file " + path);
    return read_corpus(in);
}

inline void write_corpus(std::ostream& out, const std::vector<RelationInstance>& instances) {
    for (const auto& inst : instances) out << to_json(inst).dump() << '\n';
}

inline void write_corpus(const std::string& path, const std::vector<RelationInstance>& instances) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CorpusError("cannot write corpus file " + path);
    write_corpus(out, instances);
}

inline Corpus make_corpus(std::vector<RelationInstance> instances) {
    Corpus c;
    c.instances = std::move(instances);
    index_labels(c);
    return c;
}

}  // namespace drpc
