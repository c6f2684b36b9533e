#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "drpc/params.hpp"

namespace drpc {

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamConfig {
    double lr = 0.3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam with one pair of moment tensors per parameter.
template <class T>
class Adam {
public:
    Adam() = default;
    Adam(AdamConfig cfg, const ParamStore<T>& store) : cfg_(cfg) {
        if (!(cfg.lr > 0)) throw PreconditionError("learning rate must be positive");
        for (const auto& e : store) {
            m_.emplace_back(e.value.shape());
            v_.emplace_back(e.value.shape());
        }
    }

    // Gradients are checked before anything is modified.
    void step(ParamStore<T>& store, const std::vector<Tensor<T>>& grads) {
        if (grads.size() != store.size() || m_.size() != store.size())
            throw PreconditionError("adam: gradient count does not match the parameters");
        for (std::size_t i = 0; i < grads.size(); ++i)
            if (!grads[i].all_finite()) throw NonFiniteError("non-finite gradient for parameter " + store[i].name);
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
        for (std::size_t i = 0; i < grads.size(); ++i) {
            auto& p = store[i].value;
            auto& m = m_[i];
            auto& v = v_[i];
            const auto& g = grads[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                m[k] = b1 * m[k] + (T{1} - b1) * g[k];
                v[k] = b2 * v[k] + (T{1} - b2) * g[k] * g[k];
                const double mh = static_cast<double>(m[k]) / c1, vh = static_cast<double>(v[k]) / c2;
                p[k] -= static_cast<T>(cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
            }
        }
    }

    std::size_t steps() const noexcept { return t_; }
    const Tensor<T>& first_moment(std::size_t i) const { return m_[i]; }
    const Tensor<T>& second_moment(std::size_t i) const { return v_[i]; }

private:
    AdamConfig cfg_;
    std::vector<Tensor<T>> m_, v_;
    std::size_t t_ = 0;
};

// Scales all gradients together so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
template <class T>
double clip_global_norm(std::vector<Tensor<T>>& grads, double max_norm) {
    double sq = 0;
    for (const auto& g : grads)
        for (auto v : g.values()) sq += static_cast<double>(v) * static_cast<double>(v);
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        const T f = static_cast<T>(max_norm / norm);
        for (auto& g : grads)
            for (auto& v : g.values()) v *= f;
    }
    return norm;
}

}  // namespace drpc
