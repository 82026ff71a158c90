#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "mritherm/errors.hpp"

namespace mritherm {

/// How a tensor's axes are to be read.
enum class Layout {
    vec,   // rank 1: N
    mat,   // rank 2: rows x cols (dense weights, pointwise weights, kernels)
    hwc,   // rank 3: feature map, height x width x channels
    kkc,   // rank 3: depthwise weights, taps x taps x channels
    kkcd,  // rank 4: standard conv weights, taps x taps x in x out
};

/// Up-to-rank-4 extent list with a layout tag.
class Shape {
public:
    Shape() = default;

    Shape(std::initializer_list<int> extents, Layout layout) : layout_(layout) {
        if (extents.size() == 0 || extents.size() > 4) {
            throw ShapeError("shape rank must be 1..4, got " + std::to_string(extents.size()));
        }
        rank_ = static_cast<int>(extents.size());
        int i = 0;
        for (int e : extents) {
            if (e < 1) {
                throw ShapeError("shape extent must be >= 1, got " + std::to_string(e));
            }
            dims_[i++] = e;
        }
        check_layout();
    }

    static Shape vec(int n) { return Shape({n}, Layout::vec); }
    static Shape mat(int rows, int cols) { return Shape({rows, cols}, Layout::mat); }
    static Shape hwc(int h, int w, int c) { return Shape({h, w, c}, Layout::hwc); }
    static Shape kkc(int k, int c) { return Shape({k, k, c}, Layout::kkc); }
    static Shape kkcd(int k, int c, int d) { return Shape({k, k, c, d}, Layout::kkcd); }

    int rank() const { return rank_; }
    Layout layout() const { return layout_; }
    int operator[](int axis) const { return dims_[axis]; }

    std::size_t count() const {
        std::size_t n = 1;
        for (int i = 0; i < rank_; ++i) n *= static_cast<std::size_t>(dims_[i]);
        return n;
    }

    bool operator==(const Shape& other) const {
        if (rank_ != other.rank_) return false;
        for (int i = 0; i < rank_; ++i)
            if (dims_[i] != other.dims_[i]) return false;
        return true;
    }
    bool operator!=(const Shape& other) const { return !(*this == other); }

    std::string str() const {
        std::ostringstream os;
        os << '[';
        for (int i = 0; i < rank_; ++i) os << (i ? "x" : "") << dims_[i];
        os << ']';
        return os.str();
    }

private:
    void check_layout() const {
        int want = 0;
        switch (layout_) {
            case Layout::vec: want = 1; break;
            case Layout::mat: want = 2; break;
            case Layout::hwc: want = 3; break;
            case Layout::kkc: want = 3; break;
            case Layout::kkcd: want = 4; break;
        }
        if (want != rank_) {
            throw ShapeError("layout tag inconsistent with rank " + std::to_string(rank_));
        }
        if (layout_ == Layout::kkc && dims_[0] != dims_[1]) {
            throw ShapeError("depthwise weight taps must be square, got " + str());
        }
        if (layout_ == Layout::kkcd && dims_[0] != dims_[1]) {
            throw ShapeError("conv weight taps must be square, got " + str());
        }
    }

    std::array<int, 4> dims_{1, 1, 1, 1};
    int rank_ = 0;
    Layout layout_ = Layout::vec;
};

/// Row-major, channel-last float32 array of rank <= 4. All public operations
/// keep stored values finite; accumulation inside heavy kernels is float64.
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, float fill) : shape_(shape) {
        constexpr std::size_t kMaxElements = std::size_t{1} << 30;
        if (shape.count() > kMaxElements) {
            throw ShapeError("tensor too large: " + shape.str());
        }
        data_.assign(shape.count(), fill);
        if (!std::isfinite(fill)) {
            throw NumericError("tensor fill value is not finite");
        }
    }

    static Tensor zeros(Shape shape) { return Tensor(shape, 0.0f); }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    const float* data() const { return data_.data(); }
    float* data() { return data_.data(); }
    const std::vector<float>& values() const { return data_; }

    float operator[](std::size_t i) const { return data_[i]; }
    float& operator[](std::size_t i) { return data_[i]; }

    float at(int i) const { return data_[static_cast<std::size_t>(i)]; }
    float& at(int i) { return data_[static_cast<std::size_t>(i)]; }

    float at(int i, int j) const { return data_[idx2(i, j)]; }
    float& at(int i, int j) { return data_[idx2(i, j)]; }

    float at(int i, int j, int c) const { return data_[idx3(i, j, c)]; }
    float& at(int i, int j, int c) { return data_[idx3(i, j, c)]; }

    float at(int u, int v, int c, int d) const { return data_[idx4(u, v, c, d)]; }
    float& at(int u, int v, int c, int d) { return data_[idx4(u, v, c, d)]; }

    bool all_finite() const {
        for (float v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_bits(const Tensor& other) const {
        if (shape_ != other.shape_) return false;
        for (std::size_t i = 0; i < data_.size(); ++i) {
            // bitwise: distinguishes -0.0f and would catch NaN payload drift
            std::uint32_t a, b;
            __builtin_memcpy(&a, &data_[i], 4);
            __builtin_memcpy(&b, &other.data_[i], 4);
            if (a != b) return false;
        }
        return true;
    }

private:
    std::size_t idx2(int i, int j) const {
        return static_cast<std::size_t>(i) * shape_[1] + j;
    }
    std::size_t idx3(int i, int j, int c) const {
        return (static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + c;
    }
    std::size_t idx4(int u, int v, int c, int d) const {
        return ((static_cast<std::size_t>(u) * shape_[1] + v) * shape_[2] + c) * shape_[3] + d;
    }

    Shape shape_;
    std::vector<float> data_;
};

inline Tensor tensor_new(Shape shape, float fill) { return Tensor(shape, fill); }

namespace detail {

/// Dot product with float64 accumulation in a fixed four-lane reduction tree.
/// The lane interleave is part of the contract: it makes results identical
/// across runs and platforms while breaking the FP dependency chain.
inline double dot_f64(const float* a, const float* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += static_cast<double>(a[i]) * b[i];
        s1 += static_cast<double>(a[i + 1]) * b[i + 1];
        s2 += static_cast<double>(a[i + 2]) * b[i + 2];
        s3 += static_cast<double>(a[i + 3]) * b[i + 3];
    }
    for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
    return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

/// out[i] = sum_j w[i,j] * x[j] + bias[i]
inline Tensor matvec(const Tensor& w, const Tensor& x, const Tensor& bias) {
    if (w.shape().rank() != 2) throw ShapeError("matvec: weight must be rank 2, got " + w.shape().str());
    if (x.shape().rank() != 1) throw ShapeError("matvec: input must be rank 1, got " + x.shape().str());
    if (bias.shape().rank() != 1) throw ShapeError("matvec: bias must be rank 1, got " + bias.shape().str());
    const int rows = w.shape()[0];
    const int cols = w.shape()[1];
    if (x.shape()[0] != cols) {
        throw ShapeError("matvec: inner dims disagree, " + w.shape().str() + " vs " + x.shape().str());
    }
    if (bias.shape()[0] != rows) {
        throw ShapeError("matvec: bias length " + bias.shape().str() + " != rows " + std::to_string(rows));
    }
    Tensor out(Shape::vec(rows), 0.0f);
    for (int i = 0; i < rows; ++i) {
        double acc = detail::dot_f64(w.data() + static_cast<std::size_t>(i) * cols, x.data(), cols);
        out.at(i) = static_cast<float>(acc + bias.at(i));
    }
    return out;
}

/// Global average pooling: out[c] = mean over (i,j) of f[i,j,c].
inline Tensor reduce_mean_spatial(const Tensor& f) {
    if (f.shape().rank() != 3) {
        throw ShapeError("reduce_mean_spatial: need rank-3 feature map, got " + f.shape().str());
    }
    const int h = f.shape()[0], w = f.shape()[1], c = f.shape()[2];
    std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
    const float* p = f.data();
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            for (int k = 0; k < c; ++k) acc[k] += *p++;
        }
    }
    Tensor out(Shape::vec(c), 0.0f);
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int k = 0; k < c; ++k) out.at(k) = static_cast<float>(acc[k] * inv);
    return out;
}

}  // namespace mritherm
