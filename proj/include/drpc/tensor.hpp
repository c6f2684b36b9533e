#pragma once

// Dense row-major tensors of rank 1 or 2. A rank-1 tensor of extent d behaves
// as a 1 x d row wherever a matrix is expected.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace drpc {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
        check_shape();
        data_.assign(shape_numel(shape_), fill);
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape();
        if (shape_numel(shape_) != data_.size())
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str(shape_));
    }

    static Tensor vector(std::vector<T> v) {
        Shape s{v.size()};
        return Tensor(std::move(s), std::move(v));
    }

    static Tensor matrix(std::size_t r, std::size_t c, std::vector<T> v) {
        return Tensor({r, c}, std::move(v));
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
        std::size_t r = rows.size();
        std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<T> v;
        v.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("ragged matrix literal");
            v.insert(v.end(), row.begin(), row.end());
        }
        return Tensor({r, c}, std::move(v));
    }

    static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t(i, i) = T{1};
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
    std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::vector<T>& values() noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }
    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    T item() const {
        if (data_.size() != 1) throw PreconditionError("item() on non-scalar tensor " + shape_str(shape_));
        return data_[0];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape s) const {
        if (shape_numel(s) != data_.size())
            throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
        return Tensor(std::move(s), data_);
    }

    template <class U>
    Tensor<U> cast() const {
        return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return v - v == T{0}; });
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void check_shape() const {
        if (shape_.empty() || shape_.size() > 2)
            throw DimensionError("tensors must have rank 1 or 2, got " + shape_str(shape_));
        for (auto e : shape_)
            if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
    }

    Shape shape_;
    std::vector<T> data_;
};

}  // namespace drpc
