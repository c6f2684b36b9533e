#pragma once

// Tape-based reverse-mode differentiation over Tensor values.
//
// A Tape records every primitive application in creation order, which is a
// topological order of the expression graph. backward() walks it once in
// reverse. Tapes are single-use and single-threaded; independent instances
// get independent tapes.

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "drpc/tensor.hpp"

namespace drpc {

template <class T>
class Tape;

template <class T>
class Var {
public:
    Var() = default;
    Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor<T>& value() const { return tape_->value(id_); }
    const Shape& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    std::size_t size() const { return value().size(); }

    Tape<T>* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    Tape<T>* tape_ = nullptr;
    std::size_t id_ = 0;
};

template <class T>
class Tape {
public:
    // Receives the tape and the gradient flowing into the node's output.
    using BackwardFn = std::function<void(Tape&, const Tensor<T>&)>;

    static constexpr std::size_t kNoSlot = static_cast<std::size_t>(-1);

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> constant(Tensor<T> v) { return push(std::move(v), false, {}); }

    Var<T> variable(Tensor<T> v) { return push(std::move(v), true, {}); }

    // Leaf that reads an externally owned tensor without copying it. The
    // tensor must outlive the tape. `slot` identifies it in parameter_grad().
    Var<T> parameter(const Tensor<T>& external, std::size_t slot) {
        Node n;
        n.external = &external;
        n.requires_grad = true;
        n.slot = slot;
        nodes_.push_back(std::move(n));
        if (slot >= slot_nodes_.size()) slot_nodes_.resize(slot + 1, kNoSlot);
        slot_nodes_[slot] = nodes_.size() - 1;
        return Var<T>(this, nodes_.size() - 1);
    }

    // Records an op result. `fn` runs only if some input requires a gradient.
    Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
        bool rg = false;
        for (const auto& in : inputs) rg = rg || requires_grad(in);
        return push(std::move(value), rg, rg ? std::move(fn) : BackwardFn{});
    }

    Var<T> record(Tensor<T> value, std::span<const Var<T>> inputs, BackwardFn fn) {
        bool rg = false;
        for (const auto& in : inputs) rg = rg || requires_grad(in);
        return push(std::move(value), rg, rg ? std::move(fn) : BackwardFn{});
    }

    const Tensor<T>& value(std::size_t id) const {
        const Node& n = nodes_[id];
        return n.external ? *n.external : n.value;
    }

    bool requires_grad(const Var<T>& v) const { return nodes_[v.id()].requires_grad; }

    // Gradient buffer of `v`, allocated as zeros on first touch.
    Tensor<T>& grad_buffer(const Var<T>& v) {
        Node& n = nodes_[v.id()];
        if (n.grad.empty()) n.grad = Tensor<T>(value(v.id()).shape());
        return n.grad;
    }

    void accumulate(const Var<T>& v, const Tensor<T>& g) {
        if (!requires_grad(v)) return;
        Tensor<T>& buf = grad_buffer(v);
        for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
    }

    void backward(const Var<T>& loss) {
        if (backward_done_) throw PreconditionError("backward called twice on the same tape");
        if (loss.tape() != this) throw PreconditionError("loss does not belong to this tape");
        if (loss.value().size() != 1)
            throw PreconditionError("backward requires a scalar loss, got " + shape_str(loss.shape()));
        backward_done_ = true;
        if (!nodes_[loss.id()].requires_grad) return;
        grad_buffer(loss)[0] = T{1};
        for (std::size_t id = loss.id() + 1; id-- > 0;) {
            Node& n = nodes_[id];
            if (!n.backward || n.grad.empty()) continue;
            n.backward(*this, n.grad);
        }
    }

    bool backward_done() const noexcept { return backward_done_; }

    // Gradient of a leaf after backward(); zeros if the leaf was unreachable.
    Tensor<T> grad(const Var<T>& v) const {
        const Node& n = nodes_[v.id()];
        if (n.grad.empty()) return Tensor<T>(value(v.id()).shape());
        return n.grad;
    }

    // Gradient of the parameter registered under `slot`, or nullptr when the
    // slot was never placed on this tape or received no gradient.
    const Tensor<T>* parameter_grad(std::size_t slot) const {
        if (slot >= slot_nodes_.size() || slot_nodes_[slot] == kNoSlot) return nullptr;
        const Node& n = nodes_[slot_nodes_[slot]];
        return n.grad.empty() ? nullptr : &n.grad;
    }

    std::size_t size() const noexcept { return nodes_.size(); }

    // Fingerprint of every piecewise branch taken so far (relu signs, max
    // winners). Two evaluations with equal fingerprints lie on the same
    // smooth piece.
    std::uint64_t kink_signature() const noexcept { return kink_hash_; }

    void note_branch(std::uint64_t v) noexcept {
        kink_hash_ ^= v + 0x9e3779b97f4a7c15ULL + (kink_hash_ << 6) + (kink_hash_ >> 2);
    }

private:
    struct Node {
        Tensor<T> value;
        const Tensor<T>* external = nullptr;
        Tensor<T> grad;
        BackwardFn backward;
        bool requires_grad = false;
        std::size_t slot = kNoSlot;
    };

    Var<T> push(Tensor<T> v, bool rg, BackwardFn fn) {
        Node n;
        n.value = std::move(v);
        n.requires_grad = rg;
        n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return Var<T>(this, nodes_.size() - 1);
    }

    std::deque<Node> nodes_;  // stable addresses: values stay referenceable while recording
    std::vector<std::size_t> slot_nodes_;
    bool backward_done_ = false;
    std::uint64_t kink_hash_ = 0;
};

namespace detail {

template <class T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b) {
    if (a.tape() != b.tape()) throw PreconditionError("operands live on different tapes");
    return *a.tape();
}

// Broadcast kinds for binary pointwise ops: b matches a, b is a single value,
// or b is one row repeated over every row of a.
enum class Broadcast { same, scalar, row };

template <class T>
Broadcast broadcast_kind(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() == b.shape()) return Broadcast::same;
    if (b.size() == 1) return Broadcast::scalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
    throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(b.shape()) + " onto " +
                         shape_str(a.shape()));
}

template <class T>
std::size_t bindex(Broadcast k, std::size_t i, std::size_t cols) {
    switch (k) {
        case Broadcast::same: return i;
        case Broadcast::scalar: return 0;
        case Broadcast::row: return i % cols;
    }
    return 0;
}

template <class T>
Tensor<T> reduce_to(const Tensor<T>& g, const Tensor<T>& like, Broadcast k) {
    if (k == Broadcast::same) return g;
    Tensor<T> out(like.shape());
    std::size_t cols = g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) out[bindex<T>(k, i, cols)] += g[i];
    return out;
}

template <class T, class F, class D>
Var<T> unary(const Var<T>& x, F f, D dfdx_from_xy) {
    const Tensor<T>& xv = x.value();
    Tensor<T> y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
    return x.tape()->record(std::move(y), {x}, [x, dfdx_from_xy](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& xv = x.value();
        Tensor<T>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx_from_xy(xv[i]);
    });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

// a[m x k] * b[k x n]
template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tape = detail::same_tape(a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    if (bv.rows() != k)
        throw DimensionError("matmul: inner dimensions differ for " + shape_str(av.shape()) + " and " +
                             shape_str(bv.shape()));
    Tensor<T> c({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = av(i, p);
            if (aip == T{0}) continue;
            const T* brow = bv.data() + p * n;
            T* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    return tape.record(std::move(c), {a, b}, [a, b, m, k, n](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& av = a.value();
        const Tensor<T>& bv = b.value();
        if (t.requires_grad(a)) {
            Tensor<T>& ga = t.grad_buffer(a);  // g * b^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    T s{0};
                    const T* grow = g.data() + i * n;
                    const T* brow = bv.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                    ga[i * k + p] += s;
                }
        }
        if (t.requires_grad(b)) {
            Tensor<T>& gb = t.grad_buffer(b);  // a^T * g
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const T aip = av(i, p);
                    if (aip == T{0}) continue;
                    const T* grow = g.data() + i * n;
                    T* gbrow = gb.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                }
        }
    });
}

// a[m x k] * b[n x k]^T, the shape of every affine layer with weights stored
// output-major.
template <class T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tape = detail::same_tape(a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
    if (bv.cols() != k)
        throw DimensionError("matmul_nt: inner dimensions differ for " + shape_str(av.shape()) + " and " +
                             shape_str(bv.shape()) + "^T");
    Tensor<T> c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = av.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = bv.data() + j * k;
            T s{0};
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            c[i * n + j] = s;
        }
    }
    return tape.record(std::move(c), {a, b}, [a, b, m, k, n](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& av = a.value();
        const Tensor<T>& bv = b.value();
        if (t.requires_grad(a)) {
            Tensor<T>& ga = t.grad_buffer(a);  // g * b
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const T gij = g[i * n + j];
                    if (gij == T{0}) continue;
                    const T* brow = bv.data() + j * k;
                    T* garow = ga.data() + i * k;
                    for (std::size_t p = 0; p < k; ++p) garow[p] += gij * brow[p];
                }
        }
        if (t.requires_grad(b)) {
            Tensor<T>& gb = t.grad_buffer(b);  // g^T * a
            for (std::size_t i = 0; i < m; ++i) {
                const T* arow = av.data() + i * k;
                for (std::size_t j = 0; j < n; ++j) {
                    const T gij = g[i * n + j];
                    if (gij == T{0}) continue;
                    T* gbrow = gb.data() + j * k;
                    for (std::size_t p = 0; p < k; ++p) gbrow[p] += gij * arow[p];
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Pointwise

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tape = detail::same_tape(a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    auto kind = detail::broadcast_kind(av, bv, "add");
    Tensor<T> c(av.shape());
    const std::size_t cols = av.cols();
    for (std::size_t i = 0; i < av.size(); ++i) c[i] = av[i] + bv[detail::bindex<T>(kind, i, cols)];
    return tape.record(std::move(c), {a, b}, [a, b, kind](Tape<T>& t, const Tensor<T>& g) {
        t.accumulate(a, g);
        if (t.requires_grad(b)) t.accumulate(b, detail::reduce_to(g, b.value(), kind));
    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tape = detail::same_tape(a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    auto kind = detail::broadcast_kind(av, bv, "sub");
    Tensor<T> c(av.shape());
    const std::size_t cols = av.cols();
    for (std::size_t i = 0; i < av.size(); ++i) c[i] = av[i] - bv[detail::bindex<T>(kind, i, cols)];
    return tape.record(std::move(c), {a, b}, [a, b, kind](Tape<T>& t, const Tensor<T>& g) {
        t.accumulate(a, g);
        if (t.requires_grad(b)) {
            Tensor<T> gb = detail::reduce_to(g, b.value(), kind);
            for (auto& v : gb.values()) v = -v;
            t.accumulate(b, gb);
        }
    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tape = detail::same_tape(a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    auto kind = detail::broadcast_kind(av, bv, "mul");
    Tensor<T> c(av.shape());
    const std::size_t cols = av.cols();
    for (std::size_t i = 0; i < av.size(); ++i) c[i] = av[i] * bv[detail::bindex<T>(kind, i, cols)];
    return tape.record(std::move(c), {a, b}, [a, b, kind, cols](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& av = a.value();
        const Tensor<T>& bv = b.value();
        if (t.requires_grad(a)) {
            Tensor<T>& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[detail::bindex<T>(kind, i, cols)];
        }
        if (t.requires_grad(b)) {
            Tensor<T>& gb = t.grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[detail::bindex<T>(kind, i, cols)] += g[i] * av[i];
        }
    });
}

template <class T>
Var<T> scale(const Var<T>& a, T c) {
    return detail::unary(a, [c](T x) { return c * x; }, [c](T) { return c; });
}

template <class T>
Var<T> neg(const Var<T>& a) {
    return scale(a, T{-1});
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
    const Tensor<T>& xv = x.value();
    Tensor<T> y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const T z = xv[i];
        y[i] = z >= T{0} ? T{1} / (T{1} + std::exp(-z)) : std::exp(z) / (T{1} + std::exp(z));
    }
    Tensor<T> yc = y;
    return x.tape()->record(std::move(y), {x}, [x, yc = std::move(yc)](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yc[i] * (T{1} - yc[i]);
    });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
    return detail::unary(
        x, [](T z) { return std::tanh(z); },
        [](T z) {
            const T y = std::tanh(z);
            return T{1} - y * y;
        });
}

// Subgradient at exactly zero is zero.
template <class T>
Var<T> relu(const Var<T>& x) {
    const Tensor<T>& xv = x.value();
    Tape<T>& tape = *x.tape();
    std::uint64_t pattern = 1469598103934665603ULL;
    for (std::size_t i = 0; i < xv.size(); ++i) pattern = (pattern ^ (xv[i] > T{0} ? 1u : 0u)) * 1099511628211ULL;
    tape.note_branch(pattern);
    return detail::unary(
        x, [](T z) { return z > T{0} ? z : T{0}; }, [](T z) { return z > T{0} ? T{1} : T{0}; });
}

template <class T>
Var<T> exp(const Var<T>& x) {
    return detail::unary(x, [](T z) { return std::exp(z); }, [](T z) { return std::exp(z); });
}

template <class T>
Var<T> log(const Var<T>& x) {
    for (auto v : x.value().values())
        if (!(v > T{0})) throw DomainError("log of non-positive value " + std::to_string(static_cast<double>(v)));
    return detail::unary(x, [](T z) { return std::log(z); }, [](T z) { return T{1} / z; });
}

enum class Pointwise { add, mul, sigmoid, tanh, relu, exp, log, neg };

template <class T>
Var<T> elementwise(Pointwise op, const Var<T>& a) {
    switch (op) {
        case Pointwise::sigmoid: return sigmoid(a);
        case Pointwise::tanh: return tanh(a);
        case Pointwise::relu: return relu(a);
        case Pointwise::exp: return exp(a);
        case Pointwise::log: return log(a);
        case Pointwise::neg: return neg(a);
        default: throw PreconditionError("binary pointwise op given one argument");
    }
}

template <class T>
Var<T> elementwise(Pointwise op, const Var<T>& a, const Var<T>& b) {
    switch (op) {
        case Pointwise::add: return add(a, b);
        case Pointwise::mul: return mul(a, b);
        default: throw PreconditionError("unary pointwise op given two arguments");
    }
}

// ---------------------------------------------------------------------------
// Reductions and normalizers

template <class T>
Var<T> sum(const Var<T>& x) {
    T s{0};
    for (auto v : x.value().values()) s += v;
    return x.tape()->record(Tensor<T>::scalar(s), {x}, [x](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& gx = t.grad_buffer(x);
        for (auto& v : gx.values()) v += g[0];
    });
}

// Softmax of each row, with max subtraction.
template <class T>
Var<T> softmax_rows(const Var<T>& x) {
    const Tensor<T>& xv = x.value();
    const std::size_t r = xv.rows(), c = xv.cols();
    Tensor<T> y(xv.shape());
    for (std::size_t i = 0; i < r; ++i) {
        const T* in = xv.data() + i * c;
        T* out = y.data() + i * c;
        T mx = *std::max_element(in, in + c);
        T z{0};
        for (std::size_t j = 0; j < c; ++j) z += (out[j] = std::exp(in[j] - mx));
        for (std::size_t j = 0; j < c; ++j) out[j] /= z;
    }
    Tensor<T> yc = y;
    return x.tape()->record(std::move(y), {x}, [x, r, c, yc = std::move(yc)](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < r; ++i) {
            T dot{0};
            for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * yc[i * c + j];
            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += yc[i * c + j] * (g[i * c + j] - dot);
        }
    });
}

template <class T>
Var<T> softmax_row(const Var<T>& x) {
    if (x.value().rows() != 1) throw DimensionError("softmax_row expects a single row, got " + shape_str(x.shape()));
    return softmax_rows(x);
}

// -log softmax(logits)[target] for a single row of logits.
template <class T>
Var<T> nll_from_logits(const Var<T>& logits, std::size_t target) {
    const Tensor<T>& lv = logits.value();
    const std::size_t k = lv.size();
    if (target >= k) throw PreconditionError("nll target out of range");
    T mx = *std::max_element(lv.values().begin(), lv.values().end());
    T z{0};
    for (auto v : lv.values()) z += std::exp(v - mx);
    const T logz = mx + std::log(z);
    return logits.tape()->record(
        Tensor<T>::scalar(logz - lv[target]), {logits}, [logits, target, logz](Tape<T>& t, const Tensor<T>& g) {
            const Tensor<T>& lv = logits.value();
            Tensor<T>& gl = t.grad_buffer(logits);
            for (std::size_t i = 0; i < lv.size(); ++i)
                gl[i] += g[0] * (std::exp(lv[i] - logz) - (i == target ? T{1} : T{0}));
        });
}

// Sum of binary cross-entropies between sigmoid(logits) and constant targets,
// computed from logits so it stays finite when the sigmoid saturates.
template <class T>
Var<T> bce_from_logits(const Var<T>& logits, const Tensor<T>& targets) {
    const Tensor<T>& lv = logits.value();
    if (lv.size() != targets.size())
        throw DimensionError("bce: logits " + shape_str(lv.shape()) + " vs targets " + shape_str(targets.shape()));
    T s{0};
    for (std::size_t i = 0; i < lv.size(); ++i) {
        const T z = lv[i];
        // log(1 + e^z) - a z, stable in both tails
        s += std::max(z, T{0}) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
    }
    return logits.tape()->record(Tensor<T>::scalar(s), {logits}, [logits, targets](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& lv = logits.value();
        Tensor<T>& gl = t.grad_buffer(logits);
        for (std::size_t i = 0; i < lv.size(); ++i) {
            const T z = lv[i];
            const T p = z >= T{0} ? T{1} / (T{1} + std::exp(-z)) : std::exp(z) / (T{1} + std::exp(z));
            gl[i] += g[0] * (p - targets[i]);
        }
    });
}

// Coordinate-wise maximum over the rows of x. Ties route the subgradient to
// the earliest row.
template <class T>
Var<T> max_rows(const Var<T>& x) {
    const Tensor<T>& xv = x.value();
    const std::size_t r = xv.rows(), c = xv.cols();
    Tensor<T> y({1, c});
    std::vector<std::size_t> arg(c, 0);
    for (std::size_t j = 0; j < c; ++j) {
        T best = xv(0, j);
        for (std::size_t i = 1; i < r; ++i)
            if (xv(i, j) > best) {
                best = xv(i, j);
                arg[j] = i;
            }
        y[j] = best;
    }
    std::uint64_t pattern = 1469598103934665603ULL;
    for (auto a : arg) pattern = (pattern ^ a) * 1099511628211ULL;
    x.tape()->note_branch(pattern);
    return x.tape()->record(std::move(y), {x}, [x, arg = std::move(arg), c](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& gx = t.grad_buffer(x);
        for (std::size_t j = 0; j < c; ++j) gx[arg[j] * c + j] += g[j];
    });
}

// ---------------------------------------------------------------------------
// Structural

template <class T>
Var<T> reshape(const Var<T>& x, Shape s) {
    Tensor<T> y = x.value().reshaped(std::move(s));
    return x.tape()->record(std::move(y), {x}, [x](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

// axis 0 stacks rows (or joins rank-1 vectors end to end); axis 1 joins
// columns of matrices with equal row counts.
template <class T>
Var<T> concat(std::span<const Var<T>> parts, int axis) {
    if (parts.empty()) throw PreconditionError("concat of an empty list");
    Tape<T>* tape = parts[0].tape();
    for (const auto& p : parts)
        if (p.tape() != tape) throw PreconditionError("operands live on different tapes");
    const bool all_rank1 = std::all_of(parts.begin(), parts.end(), [](const Var<T>& p) { return p.value().rank() == 1; });
    if (axis == 0 && all_rank1) {
        std::vector<T> v;
        for (const auto& p : parts) v.insert(v.end(), p.value().values().begin(), p.value().values().end());
        std::vector<Var<T>> keep(parts.begin(), parts.end());
        return tape->record(Tensor<T>::vector(std::move(v)), parts, [keep](Tape<T>& t, const Tensor<T>& g) {
            std::size_t off = 0;
            for (const auto& p : keep) {
                const std::size_t n = p.value().size();
                if (t.requires_grad(p)) {
                    Tensor<T>& gp = t.grad_buffer(p);
                    for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
                }
                off += n;
            }
        });
    }
    if (axis == 0) {
        const std::size_t c = parts[0].value().cols();
        std::size_t r = 0;
        for (const auto& p : parts) {
            if (p.value().cols() != c)
                throw DimensionError("concat axis 0: column extents differ, " + shape_str(parts[0].shape()) + " vs " +
                                     shape_str(p.shape()));
            r += p.value().rows();
        }
        std::vector<T> v;
        v.reserve(r * c);
        for (const auto& p : parts) v.insert(v.end(), p.value().values().begin(), p.value().values().end());
        std::vector<Var<T>> keep(parts.begin(), parts.end());
        return tape->record(Tensor<T>({r, c}, std::move(v)), parts, [keep](Tape<T>& t, const Tensor<T>& g) {
            std::size_t off = 0;
            for (const auto& p : keep) {
                const std::size_t n = p.value().size();
                if (t.requires_grad(p)) {
                    Tensor<T>& gp = t.grad_buffer(p);
                    for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
                }
                off += n;
            }
        });
    }
    if (axis != 1) throw PreconditionError("concat axis must be 0 or 1");
    const std::size_t r = parts[0].value().rows();
    std::size_t c = 0;
    for (const auto& p : parts) {
        if (p.value().rows() != r)
            throw DimensionError("concat axis 1: row extents differ, " + shape_str(parts[0].shape()) + " vs " +
                                 shape_str(p.shape()));
        c += p.value().cols();
    }
    Tensor<T> y({r, c});
    std::size_t coff = 0;
    for (const auto& p : parts) {
        const auto& pv = p.value();
        const std::size_t pc = pv.cols();
        for (std::size_t i = 0; i < r; ++i)
            std::copy(pv.data() + i * pc, pv.data() + (i + 1) * pc, y.data() + i * c + coff);
        coff += pc;
    }
    std::vector<Var<T>> keep(parts.begin(), parts.end());
    return tape->record(std::move(y), parts, [keep, r, c](Tape<T>& t, const Tensor<T>& g) {
        std::size_t coff = 0;
        for (const auto& p : keep) {
            const std::size_t pc = p.value().cols();
            if (t.requires_grad(p)) {
                Tensor<T>& gp = t.grad_buffer(p);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < pc; ++j) gp[i * pc + j] += g[i * c + coff + j];
            }
            coff += pc;
        }
    });
}

template <class T>
Var<T> concat(std::initializer_list<Var<T>> parts, int axis) {
    return concat(std::span<const Var<T>>(parts.begin(), parts.size()), axis);
}

// Coordinate-wise maximum over a list of equal-length vectors.
template <class T>
Var<T> max_over_time(std::span<const Var<T>> vectors) {
    if (vectors.empty()) throw PreconditionError("max_over_time of an empty list");
    std::vector<Var<T>> rows;
    rows.reserve(vectors.size());
    for (const auto& v : vectors) rows.push_back(v.value().rank() == 1 ? reshape(v, {1, v.value().size()}) : v);
    return max_rows(concat(std::span<const Var<T>>(rows), 0));
}

// Rows [begin, end) of x as a matrix.
template <class T>
Var<T> slice_rows(const Var<T>& x, std::size_t begin, std::size_t end) {
    const Tensor<T>& xv = x.value();
    const std::size_t c = xv.cols();
    if (begin >= end || end > xv.rows()) throw DimensionError("slice_rows out of range for " + shape_str(xv.shape()));
    std::vector<T> v(xv.data() + begin * c, xv.data() + end * c);
    return x.tape()->record(Tensor<T>({end - begin, c}, std::move(v)), {x}, [x, begin, c](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[begin * c + i] += g[i];
    });
}

template <class T>
Var<T> row(const Var<T>& x, std::size_t i) {
    return slice_rows(x, i, i + 1);
}

// Columns [begin, end) of x.
template <class T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t end) {
    const Tensor<T>& xv = x.value();
    const std::size_t r = xv.rows(), c = xv.cols(), w = end - begin;
    if (begin >= end || end > c) throw DimensionError("slice_cols out of range for " + shape_str(xv.shape()));
    Tensor<T> y({r, w});
    for (std::size_t i = 0; i < r; ++i) std::copy(xv.data() + i * c + begin, xv.data() + i * c + end, y.data() + i * w);
    return x.tape()->record(std::move(y), {x}, [x, begin, r, c, w](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) gx[i * c + begin + j] += g[i * w + j];
    });
}

// Embedding lookup: row idx[i] of table becomes row i of the result.
template <class T>
Var<T> gather_rows(const Var<T>& table, std::vector<std::size_t> idx) {
    const Tensor<T>& tv = table.value();
    const std::size_t c = tv.cols();
    Tensor<T> y({idx.size(), c});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= tv.rows())
            throw PreconditionError("gather_rows index " + std::to_string(idx[i]) + " outside table " +
                                    shape_str(tv.shape()));
        std::copy(tv.data() + idx[i] * c, tv.data() + (idx[i] + 1) * c, y.data() + i * c);
    }
    return table.tape()->record(std::move(y), {table}, [table, idx = std::move(idx), c](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& gt = t.grad_buffer(table);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) gt[idx[i] * c + j] += g[i * c + j];
    });
}

// All ordered pairs: row i*m + j of the result is u_i + v_j for u[n x d], v[m x d].
template <class T>
Var<T> pairwise_sum(const Var<T>& u, const Var<T>& v) {
    Tape<T>& tape = detail::same_tape(u, v);
    const Tensor<T>& uv = u.value();
    const Tensor<T>& vv = v.value();
    if (uv.cols() != vv.cols())
        throw DimensionError("pairwise_sum: " + shape_str(uv.shape()) + " vs " + shape_str(vv.shape()));
    const std::size_t n = uv.rows(), m = vv.rows(), d = uv.cols();
    Tensor<T> y({n * m, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            T* out = y.data() + (i * m + j) * d;
            const T* a = uv.data() + i * d;
            const T* b = vv.data() + j * d;
            for (std::size_t k = 0; k < d; ++k) out[k] = a[k] + b[k];
        }
    return tape.record(std::move(y), {u, v}, [u, v, n, m, d](Tape<T>& t, const Tensor<T>& g) {
        const bool gu = t.requires_grad(u), gv = t.requires_grad(v);
        Tensor<T>* bu = gu ? &t.grad_buffer(u) : nullptr;
        Tensor<T>* bv = gv ? &t.grad_buffer(v) : nullptr;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const T* gr = g.data() + (i * m + j) * d;
                for (std::size_t k = 0; k < d; ++k) {
                    if (gu) (*bu)[i * d + k] += gr[k];
                    if (gv) (*bv)[j * d + k] += gr[k];
                }
            }
    });
}

// Affine layer x W^T + b for x[n x in], W[out x in], b[out].
template <class T>
Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    return add(matmul_nt(x, w), b);
}

}  // namespace drpc
