#pragma once

#include <memory>
#include <string>
#include <vector>

#include "foregan/rng.hpp"
#include "foregan/tensor.hpp"

namespace foregan {

/// One differentiable stage. forward() caches whatever backward() needs;
/// backward() accumulates parameter gradients and returns the input gradient.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& gy) = 0;
    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<Tensor*> grads() { return {}; }
    virtual std::unique_ptr<Layer> clone() const = 0;
    virtual std::string type() const = 0;
};

class Dense : public Layer {
public:
    Dense(int in_features, int out_features, Rng& rng, double init_std = 0.02);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
    std::vector<Tensor*> grads() override { return {&gweight_, &gbias_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
    std::string type() const override { return "dense"; }

private:
    int in_features_, out_features_;
    Tensor weight_, bias_, gweight_, gbias_;
    Tensor input_;
};

/// Strided 2-D convolution over (N,C,H,W) input.
class Conv2d : public Layer {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng, double init_std = 0.02);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
    std::vector<Tensor*> grads() override { return {&gweight_, &gbias_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
    std::string type() const override { return "conv"; }

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    Tensor weight_; // (out_ch, in_ch*k*k)
    Tensor bias_;   // (out_ch)
    Tensor gweight_, gbias_;
    Tensor input_;
    std::vector<double> cols_; // cached im2col buffers, one block per sample
};

/// Fractionally-strided (transposed) convolution; the exact adjoint of Conv2d.
class ConvTranspose2d : public Layer {
public:
    ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng,
                    double init_std = 0.02);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
    std::vector<Tensor*> grads() override { return {&gweight_, &gbias_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvTranspose2d>(*this); }
    std::string type() const override { return "convT"; }

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    Tensor weight_; // (in_ch, out_ch*k*k)
    Tensor bias_;   // (out_ch)
    Tensor gweight_, gbias_;
    Tensor input_;
};

class LeakyRelu : public Layer {
public:
    explicit LeakyRelu(double slope) : slope_(slope) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<LeakyRelu>(*this); }
    std::string type() const override { return "leaky_relu"; }

private:
    double slope_;
    Tensor input_;
};

class Relu : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
    std::string type() const override { return "relu"; }

private:
    Tensor input_;
};

class Tanh : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Tanh>(*this); }
    std::string type() const override { return "tanh"; }

private:
    Tensor output_;
};

/// Reinterprets each sample as `sample_shape` (e.g. flatten or unflatten).
class Reshape : public Layer {
public:
    explicit Reshape(std::vector<int> sample_shape) : sample_shape_(std::move(sample_shape)) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }
    std::string type() const override { return "reshape"; }

private:
    std::vector<int> sample_shape_;
    std::vector<int> input_shape_;
};

/// Ordered layer stack with per-layer activation caching, so callers can read
/// intermediate feature maps after a forward pass and backpropagate from any
/// layer boundary.
class Sequential {
public:
    Sequential() = default;
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    void add(std::unique_ptr<Layer> layer);
    int layer_count() const { return static_cast<int>(layers_.size()); }
    Layer& layer(int i) { return *layers_[static_cast<std::size_t>(i)]; }
    const Layer& layer(int i) const { return *layers_[static_cast<std::size_t>(i)]; }

    /// Runs layers [0, last] inclusive; pass layer_count()-1 for a full pass.
    Tensor forward_to(const Tensor& x, int last);
    Tensor forward(const Tensor& x) { return forward_to(x, layer_count() - 1); }

    /// Backpropagates from the output of layer `from` down to the input.
    /// Requires the most recent forward to have covered at least [0, from].
    Tensor backward_from(const Tensor& gy, int from);
    Tensor backward(const Tensor& gy) { return backward_from(gy, layer_count() - 1); }

    /// Cached output of layer i from the most recent forward pass.
    const Tensor& activation(int i) const { return activations_[static_cast<std::size_t>(i)]; }

    std::vector<Tensor*> params();
    std::vector<Tensor*> grads();
    void zero_grads();

    /// Combined FNV hash of all parameter tensors.
    std::uint64_t param_hash() const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<Tensor> activations_;
};

/// Adam with bias correction; moment buffers are keyed by parameter order.
class AdamOptimizer {
public:
    AdamOptimizer(double lr, double beta1, double beta2, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads);

private:
    double lr_, beta1_, beta2_, eps_;
    long step_count_ = 0;
    std::vector<Tensor> m_, v_;
};

/// Row-wise stable softmax over (N,2) logits.
Tensor softmax2(const Tensor& logits);

} // namespace foregan
