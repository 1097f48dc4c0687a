#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fadml/errors.hpp"

namespace fadml {

// Dense row-major f32 array. Carries images, activations, gradients and
// adversarial noise; shape is a plain dimension list, e.g. {channels, h, w}.
class tensor {
public:
    tensor() = default;

    explicit tensor(std::vector<int> shape, float fill = 0.0f)
        : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

    tensor(std::vector<int> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_))
            throw input_error("tensor: data length does not match shape");
    }

    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    std::vector<float>& buffer() { return data_; }
    const std::vector<float>& buffer() const { return data_; }

    // (c, y, x) accessor for 3-d image tensors
    float& at(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    float at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    bool same_shape(const tensor& other) const { return shape_ == other.shape_; }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

    tensor& operator+=(const tensor& o) {
        require_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    tensor& operator-=(const tensor& o) {
        require_same_shape(o, "-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    tensor& operator*=(float s) {
        for (float& v : data_) v *= s;
        return *this;
    }

    float l2_norm() const {
        double acc = 0.0;
        for (float v : data_) acc += static_cast<double>(v) * v;
        return static_cast<float>(std::sqrt(acc));
    }

    float linf_norm() const {
        float m = 0.0f;
        for (float v : data_) m = std::max(m, std::fabs(v));
        return m;
    }

    float min() const {
        float m = data_.empty() ? 0.0f : data_[0];
        for (float v : data_) m = std::min(m, v);
        return m;
    }

    float max() const {
        float m = data_.empty() ? 0.0f : data_[0];
        for (float v : data_) m = std::max(m, v);
        return m;
    }

    bool has_nan() const {
        for (float v : data_)
            if (std::isnan(v) || std::isinf(v)) return true;
        return false;
    }

    void clip(float lo, float hi) {
        for (float& v : data_) v = std::min(hi, std::max(lo, v));
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << "]";
        return os.str();
    }

private:
    static std::size_t checked_size(const std::vector<int>& shape) {
        if (shape.empty()) throw input_error("tensor: empty shape");
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 1) throw input_error("tensor: shape dimensions must be >= 1");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    void require_same_shape(const tensor& o, const char* op) const {
        if (!same_shape(o))
            throw input_error(std::string("tensor ") + op + ": shape mismatch " +
                              shape_str(shape_) + " vs " + shape_str(o.shape_));
    }

    std::vector<int> shape_;
    std::vector<float> data_;
};

inline tensor clipped_sum(const tensor& x, const tensor& noise, float eta, float lo = 0.0f,
                          float hi = 1.0f) {
    tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        float v = x[i] + eta * noise[i];
        out[i] = std::min(hi, std::max(lo, v));
    }
    return out;
}

}  // namespace fadml
