#include "foregan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>

#include "foregan/errors.hpp"

namespace foregan {

Tensor::Tensor(std::vector<int> shape, double value) : shape_(std::move(shape)) {
    std::size_t total = 1;
    for (int d : shape_) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive");
        total *= static_cast<std::size_t>(d);
    }
    data_.assign(total, value);
    compute_strides();
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    std::size_t total = 1;
    for (int d : t.shape_) total *= static_cast<std::size_t>(d);
    if (total != values.size()) throw ShapeError("tensor shape does not match value count");
    t.data_ = std::move(values);
    t.compute_strides();
    return t;
}

void Tensor::compute_strides() {
    strides_.assign(shape_.size(), 1);
    for (int i = static_cast<int>(shape_.size()) - 2; i >= 0; --i)
        strides_[static_cast<std::size_t>(i)] =
            strides_[static_cast<std::size_t>(i) + 1] * shape_[static_cast<std::size_t>(i) + 1];
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    Tensor t;
    t.shape_ = std::move(shape);
    std::size_t total = 1;
    for (int d : t.shape_) total *= static_cast<std::size_t>(d);
    if (total != data_.size()) throw ShapeError("reshape changes element count");
    t.data_ = data_;
    t.compute_strides();
    return t;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Tensor::min() const { return *std::min_element(data_.begin(), data_.end()); }

double Tensor::max() const { return *std::max_element(data_.begin(), data_.end()); }

double Tensor::mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size()); }

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other)) throw ShapeError("operator+=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double factor) {
    for (double& v : data_) v *= factor;
    return *this;
}

double sum_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("sum_abs_diff: shape mismatch");
    double acc = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (int i = 0; i < a.size(); ++i) acc += std::abs(pa[i] - pb[i]);
    return acc;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    double worst = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (int i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(pa[i] - pb[i]));
    return worst;
}

std::uint64_t content_hash(const Tensor& t) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const double* p = t.data();
    for (int i = 0; i < t.size(); ++i) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &p[i], sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

} // namespace foregan
