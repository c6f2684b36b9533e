#pragma once

#include <map>
#include <string>
#include <vector>

#include "drpc/autodiff.hpp"

namespace drpc {

// Named trainable tensors in a fixed registration order. The slot index of a
// parameter is its position in that order.
template <class T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<T> value;
    };

    std::size_t add(std::string name, Tensor<T> value) {
        if (index_.count(name)) throw PreconditionError("duplicate parameter name " + name);
        index_.emplace(name, entries_.size());
        entries_.push_back({std::move(name), std::move(value)});
        return entries_.size() - 1;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    Entry& operator[](std::size_t i) { return entries_[i]; }
    const Entry& operator[](std::size_t i) const { return entries_[i]; }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t slot(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw PreconditionError("unknown parameter " + name);
        return it->second;
    }

    Tensor<T>& at(const std::string& name) { return entries_[slot(name)].value; }
    const Tensor<T>& at(const std::string& name) const { return entries_[slot(name)].value; }

    std::size_t total_values() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

// Group of a parameter name: the text before the first '.'.
inline std::string param_group(const std::string& name) {
    auto dot = name.find('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
}

// Places parameters on a tape on first use, so the tape only holds the
// parameters an expression actually reads.
template <class T>
class ParamBinding {
public:
    ParamBinding(Tape<T>& tape, const ParamStore<T>& store)
        : tape_(tape), store_(store), vars_(store.size()) {}

    Var<T> operator()(const std::string& name) { return get(store_.slot(name)); }

    Var<T> get(std::size_t slot) {
        if (!vars_[slot].valid()) vars_[slot] = tape_.parameter(store_[slot].value, slot);
        return vars_[slot];
    }

    Tape<T>& tape() noexcept { return tape_; }
    const ParamStore<T>& store() const noexcept { return store_; }

private:
    Tape<T>& tape_;
    const ParamStore<T>& store_;
    std::vector<Var<T>> vars_;
};

// Gradients aligned with a ParamStore. Parameters unreachable from the loss
// get zeros.
template <class T>
std::vector<Tensor<T>> collect_gradients(const Tape<T>& tape, const ParamStore<T>& store) {
    std::vector<Tensor<T>> out;
    out.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        const Tensor<T>* g = tape.parameter_grad(i);
        out.push_back(g ? *g : Tensor<T>(store[i].value.shape()));
    }
    return out;
}

}  // namespace drpc
