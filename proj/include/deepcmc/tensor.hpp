#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepcmc {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Dense row-major tensor of rank 1..4. Layer code interprets the trailing
// dims as (channels, height, width) with an optional leading batch dim.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        size_t n = 1;
        for (int d : shape_) {
            if (d <= 0) throw ShapeError("tensor dims must be positive");
            n *= static_cast<size_t>(d);
        }
        if (shape_.empty() || shape_.size() > 4) {
            throw ShapeError("tensor rank must be 1..4");
        }
        data_.assign(n, T(0));
    }

    Tensor(std::vector<int> shape, std::vector<T> data) : Tensor(std::move(shape)) {
        if (data.size() != data_.size()) {
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape volume " + std::to_string(data_.size()));
        }
        data_ = std::move(data);
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (const T& v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    std::vector<int> shape_;
    std::vector<T> data_;
};

// Views a (C,H,W) or (N,C,H,W) tensor as batched planes.
struct Chw {
    int n, c, h, w;
};

template <typename T>
inline Chw as_nchw(const Tensor<T>& t, const char* what) {
    if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2)};
    if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
    throw ShapeError(std::string(what) + ": expected (C,H,W) or (N,C,H,W), got rank " +
                     std::to_string(t.rank()));
}

template <typename T>
inline Tensor<T> make_like(const Tensor<T>& t, Chw s) {
    if (t.rank() == 3) return Tensor<T>({s.c, s.h, s.w});
    return Tensor<T>({s.n, s.c, s.h, s.w});
}

}  // namespace deepcmc
