#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace certwatch {

// Dense row-major float tensor. Shapes are small (desk-scale frames and
// feature maps), so everything lives in a single std::vector.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;

    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), 0.0f);
    }

    Tensor(std::vector<int> s, std::vector<float> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<long long>(data.size()) != numel_of(shape))
            throw std::invalid_argument("tensor: data length " +
                                        std::to_string(data.size()) +
                                        " does not match shape " + shape_str());
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, float v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static Tensor scalar(float v) { return Tensor({1}, {v}); }

    static long long numel_of(const std::vector<int>& s) {
        long long n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("tensor: non-positive dim");
            n *= d;
        }
        return n;
    }

    int numel() const { return static_cast<int>(data.size()); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape.size()); }

    float& operator[](int i) { return data[static_cast<std::size_t>(i)]; }
    float operator[](int i) const { return data[static_cast<std::size_t>(i)]; }

    // 3-d accessor (channel, row, col); the dominant layout in this project.
    float& at(int c, int h, int w) {
        return data[static_cast<std::size_t>((c * shape[1] + h) * shape[2] + w)];
    }
    float at(int c, int h, int w) const {
        return data[static_cast<std::size_t>((c * shape[1] + h) * shape[2] + w)];
    }

    // 2-d accessor (row, col) for maps and masks
    float& at(int h, int w) { return data[static_cast<std::size_t>(h * shape[1] + w)]; }
    float at(int h, int w) const { return data[static_cast<std::size_t>(h * shape[1] + w)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (float v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    float max_abs_diff(const Tensor& o) const {
        if (!same_shape(o)) throw std::invalid_argument("max_abs_diff: shape mismatch");
        float m = 0.0f;
        for (std::size_t i = 0; i < data.size(); ++i)
            m = std::max(m, std::fabs(data[i] - o.data[i]));
        return m;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape.size(); ++i)
            os << (i ? "," : "") << shape[i];
        os << "]";
        return os.str();
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
}

} // namespace certwatch
