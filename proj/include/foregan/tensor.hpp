#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace foregan {

/// Dense row-major tensor of doubles. Rank is dynamic; network code uses
/// (N,C,H,W) for activations, (N,F) for flattened features and (C,H,W) for
/// single images.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, double value = 0.0);

    static Tensor from(std::vector<int> shape, std::vector<double> values);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    int size() const { return static_cast<int>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(int a, int b) { return data_[static_cast<std::size_t>(a * strides_[0] + b)]; }
    double at(int a, int b) const { return data_[static_cast<std::size_t>(a * strides_[0] + b)]; }
    double& at(int a, int b, int c) {
        return data_[static_cast<std::size_t>(a * strides_[0] + b * strides_[1] + c)];
    }
    double at(int a, int b, int c) const {
        return data_[static_cast<std::size_t>(a * strides_[0] + b * strides_[1] + c)];
    }
    double& at(int a, int b, int c, int d) {
        return data_[static_cast<std::size_t>(a * strides_[0] + b * strides_[1] + c * strides_[2] + d)];
    }
    double at(int a, int b, int c, int d) const {
        return data_[static_cast<std::size_t>(a * strides_[0] + b * strides_[1] + c * strides_[2] + d)];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    Tensor reshaped(std::vector<int> shape) const;

    void fill(double value);
    void zero() { fill(0.0); }

    double sum() const;
    double min() const;
    double max() const;
    double mean() const;
    bool all_finite() const;

    /// In-place elementwise accumulate; shapes must match.
    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double factor);

private:
    std::vector<int> shape_;
    std::vector<int> strides_; // strides_[i] = product of dims after axis i
    std::vector<double> data_;

    void compute_strides();
};

/// Sum of |a - b| over all elements; shapes must match.
double sum_abs_diff(const Tensor& a, const Tensor& b);

/// Largest |a[i] - b[i]|; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// FNV-1a hash over the raw bytes, used for parameter checksums.
std::uint64_t content_hash(const Tensor& t);

} // namespace foregan
