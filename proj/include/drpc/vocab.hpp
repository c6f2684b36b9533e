#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "drpc/corpus.hpp"

namespace drpc {

// String-to-id map; id 0 is reserved for unknown strings.
class Vocab {
public:
    static inline const std::string kUnk = "<unk>";

    Vocab() : items_{kUnk} { index_.emplace(kUnk, 0); }

    explicit Vocab(const std::set<std::string>& items) : Vocab() {
        for (const auto& s : items) add(s);
    }

    std::size_t add(const std::string& s) {
        auto [it, inserted] = index_.emplace(s, items_.size());
        if (inserted) items_.push_back(s);
        return it->second;
    }

    std::size_t id(const std::string& s) const {
        auto it = index_.find(s);
        return it == index_.end() ? 0 : it->second;
    }

    bool contains(const std::string& s) const { return index_.count(s) != 0; }
    std::size_t size() const noexcept { return items_.size(); }
    const std::string& operator[](std::size_t i) const { return items_[i]; }
    const std::vector<std::string>& items() const noexcept { return items_; }

    static Vocab from_items(const std::vector<std::string>& items) {
        if (items.empty() || items[0] != kUnk) throw PreconditionError("vocabulary must start with " + kUnk);
        Vocab v;
        for (std::size_t i = 1; i < items.size(); ++i) v.add(items[i]);
        return v;
    }

    friend bool operator==(const Vocab& a, const Vocab& b) { return a.items_ == b.items_; }

private:
    std::vector<std::string> items_;
    std::map<std::string, std::size_t> index_;
};

// Everything string-valued the model needs to turn an instance into ids.
struct Vocabularies {
    Vocab words;
    Vocab entity_tags;
    Vocab chunk_tags;
    std::vector<std::string> deprels;  // sorted; multi-hot column order
    std::vector<std::string> labels;   // sorted; classifier output order

    std::size_t label_id(const std::string& label) const {
        auto it = std::lower_bound(labels.begin(), labels.end(), label);
        if (it == labels.end() || *it != label) throw PreconditionError("label '" + label + "' not in label set");
        return static_cast<std::size_t>(it - labels.begin());
    }

    bool has_label(const std::string& label) const {
        return std::binary_search(labels.begin(), labels.end(), label);
    }

    friend bool operator==(const Vocabularies&, const Vocabularies&) = default;
};

inline Vocabularies build_vocabularies(const Corpus& train) {
    std::set<std::string> words, ent, chunk;
    for (const auto& inst : train.instances)
        for (const auto& t : inst.sentence.tokens) {
            words.insert(t.form);
            ent.insert(t.entity_tag);
            chunk.insert(t.chunk_tag);
        }
    Vocabularies v{Vocab(words), Vocab(ent), Vocab(chunk), train.deprels, train.labels};
    if (v.labels.size() < 2) throw PreconditionError("training corpus needs at least two relation labels");
    return v;
}

inline nlohmann::json to_json(const Vocabularies& v) {
    return {{"words", v.words.items()},
            {"entity_tags", v.entity_tags.items()},
            {"chunk_tags", v.chunk_tags.items()},
            {"deprels", v.deprels},
            {"labels", v.labels}};
}

inline Vocabularies vocabularies_from_json(const nlohmann::json& j) {
    return {Vocab::from_items(j.at("words").get<std::vector<std::string>>()),
            Vocab::from_items(j.at("entity_tags").get<std::vector<std::string>>()),
            Vocab::from_items(j.at("chunk_tags").get<std::vector<std::string>>()),
            j.at("deprels").get<std::vector<std::string>>(), j.at("labels").get<std::vector<std::string>>()};
}

}  // namespace drpc
