#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "foregan/image.hpp"
#include "foregan/net.hpp"
#include "foregan/rng.hpp"
#include "foregan/tensor.hpp"

namespace foregan {

/// Softmax class index carrying the "real image" probability.
inline constexpr int kRealClass = 1;
inline constexpr int kFakeClass = 0;

struct TrainConfig {
    int epochs = 200;
    int batch_size = 16;
    double learning_rate = 2e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    int latent_dim = 100;
    std::uint64_t seed = 0;
    int image_size = 64;
    int channels = 3;
    int base_width = 64; // discriminator width of the first conv; doubles per layer
    double leaky_slope = 0.2;

    void validate() const;
};

/// Transposed-convolution generator: latent vector -> (C,S,S) image in [-1,1].
class GeneratorNet {
public:
    static GeneratorNet create(const TrainConfig& cfg, Rng& rng);

    Tensor forward(const Tensor& z_batch); // (N,d) -> (N,C,S,S)
    Tensor backward(const Tensor& g_image);

    int latent_dim() const { return latent_dim_; }
    int image_size() const { return image_size_; }
    int channels() const { return channels_; }

    Sequential& net() { return net_; }
    const Sequential& net() const { return net_; }
    std::uint64_t param_hash() const { return net_.param_hash(); }

private:
    int latent_dim_ = 0, image_size_ = 0, channels_ = 0;
    Sequential net_;
};

/// Strided-convolution discriminator with a two-class softmax head and a
/// designated intermediate feature layer.
class DiscriminatorNet {
public:
    static DiscriminatorNet create(const TrainConfig& cfg, Rng& rng);

    Tensor forward_logits(const Tensor& x_batch); // (N,C,S,S) -> (N,2)
    /// Feature-layer output cached by the most recent forward_logits pass.
    const Tensor& last_features() const { return net_.activation(feature_layer_); }
    /// Runs only the prefix up to the feature layer.
    Tensor forward_features(const Tensor& x_batch);

    Tensor backward_from_logits(const Tensor& g_logits);
    Tensor backward_from_features(const Tensor& g_features);

    int feature_layer() const { return feature_layer_; }
    int image_size() const { return image_size_; }
    int channels() const { return channels_; }

    Sequential& net() { return net_; }
    const Sequential& net() const { return net_; }
    std::uint64_t param_hash() const { return net_.param_hash(); }

private:
    int image_size_ = 0, channels_ = 0, feature_layer_ = 0;
    Sequential net_;
};

/// Samples a latent vector with i.i.d. components uniform in [-1, 1].
Tensor sample_latent(int dim, Rng& rng);

/// Probabilities are clamped away from {0,1} before taking logs.
double clamp_probability(double p);

/// -[log d_real + log(1 - d_fake)]: the discriminator objective, negated so
/// lower is better for D.
double discriminator_loss(double d_real, double d_fake);

/// -log d_fake: non-saturating generator objective.
double generator_loss(double d_fake);

/// Single-image forward pass: z (d,) -> Frame.
Frame generator_forward(GeneratorNet& g, const Tensor& z);

struct DiscriminatorOutput {
    double real_probability = 0.0;
    Tensor features;
};

/// Single-image forward: returns p(real) and the intermediate feature map.
DiscriminatorOutput discriminator_forward(DiscriminatorNet& d, const Frame& x);

struct EpochLoss {
    int epoch = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
};

struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    TrainConfig config;
    std::string modality; // "rgb" | "depth"
    std::string scene;
    int epoch = 0;
    std::vector<Tensor> generator_params;
    std::vector<Tensor> discriminator_params;

    GeneratorNet make_generator() const;
    DiscriminatorNet make_discriminator() const;
    std::uint64_t param_hash() const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Alternating adversarial training (one D update then one G update per
/// batch) with Adam. Deterministic for a fixed seed.
Checkpoint train(const std::vector<Frame>& data, const TrainConfig& cfg,
                 const std::string& modality, const std::string& scene,
                 const EpochCallback& on_epoch = {});

} // namespace foregan
