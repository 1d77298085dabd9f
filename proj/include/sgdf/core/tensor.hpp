#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sgdf/core/shape.hpp"

namespace sgdf {

template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape s) : shape_(s), v_(s.size(), T(0)) {}
    Tensor(int h, int w, int c) : Tensor(Shape(h, w, c)) {}
    Tensor(Shape s, std::vector<T> data) : shape_(s), v_(std::move(data)) {
        if (v_.size() != shape_.size())
            throw std::invalid_argument("Tensor: data size does not match shape " + s.str());
    }

    const Shape& shape() const { return shape_; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    int c() const { return shape_.c; }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    T* data() { return v_.data(); }
    const T* data() const { return v_.data(); }
    std::vector<T>& vec() { return v_; }
    const std::vector<T>& vec() const { return v_; }

    T& operator[](std::size_t i) { return v_[i]; }
    const T& operator[](std::size_t i) const { return v_[i]; }

    T& at(int h, int w, int c) {
        return v_[(static_cast<std::size_t>(h) * shape_.w + w) * shape_.c + c];
    }
    const T& at(int h, int w, int c) const {
        return v_[(static_cast<std::size_t>(h) * shape_.w + w) * shape_.c + c];
    }

    void fill(T x) { std::fill(v_.begin(), v_.end(), x); }
    void zero() { fill(T(0)); }

    bool all_finite() const {
        for (const T& x : v_)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    T min() const { return v_.empty() ? T(0) : *std::min_element(v_.begin(), v_.end()); }
    T max() const { return v_.empty() ? T(0) : *std::max_element(v_.begin(), v_.end()); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < v_.size(); ++i) out[i] = static_cast<U>(v_[i]);
        return out;
    }

private:
    Shape shape_;
    std::vector<T> v_;
};

using Image = Tensor<float>;

// Feature map with explicit scale tag relative to the network input.
template <typename T>
struct FeatureMap {
    Tensor<T> data;
    Scale scale = Scale::full;

    FeatureMap() = default;
    FeatureMap(Tensor<T> d, Scale s) : data(std::move(d)), scale(s) {}
};

// Per-pixel scores over disparity hypotheses; channel axis = disparity bins.
template <typename T>
struct AttentionVolume {
    Tensor<T> scores;
    AttnRes res = AttnRes::coarse;
    bool normalized = false;

    AttentionVolume() = default;
    AttentionVolume(Tensor<T> s, AttnRes r, bool norm)
        : scores(std::move(s)), res(r), normalized(norm) {}
};

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("max_abs_diff: shape mismatch " + a.shape().str() +
                                    " vs " + b.shape().str());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

}  // namespace sgdf
