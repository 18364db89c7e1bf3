#pragma once

#include <cstdint>
#include <vector>

#include "foregan/gan.hpp"
#include "foregan/image.hpp"
#include "foregan/tensor.hpp"

namespace foregan {

struct InversionConfig {
    int steps = 2000;
    double step_size = 0.01;
    double eta = 0.1; // weight of the feature-matching term
    std::uint64_t seed = 0;
    int restarts = 1;
    enum class Optimizer { adam, sgd };
    Optimizer optimizer = Optimizer::adam;
    bool clamp_latent = true; // keep z inside the sampling box [-1,1]
    bool warm_start = false;  // start the first restart from init_z
    Tensor init_z;

    void validate() const;
};

struct InversionStep {
    int step = 0;
    double residual = 0.0;
    double feature = 0.0;
    double total = 0.0;
};

struct InversionResult {
    Tensor z;        // best-loss latent over the whole trajectory
    Frame generated; // G(z) for that latent
    std::vector<InversionStep> trajectory;
    double best_total = 0.0;
    int best_step = 0;
    bool converged = false; // best loss did not exceed the initial loss
};

/// Sum of absolute pixel differences between a frame and a generated image.
double residual_loss(const Frame& x, const Frame& gz);
double residual_loss(const Tensor& x, const Tensor& gz);

/// Sum of absolute differences between discriminator feature maps of x and gz.
double feature_matching_loss(DiscriminatorNet& d, const Frame& x, const Frame& gz);

/// (1 - eta) * residual + eta * feature.
double combined_loss(double residual, double feature, double eta);

/// Gradient descent on the latent vector only; generator and discriminator
/// parameters stay frozen. Deterministic given the config seed.
InversionResult invert(const GeneratorNet& g, const DiscriminatorNet& d, const Frame& x,
                       const InversionConfig& cfg);

} // namespace foregan
