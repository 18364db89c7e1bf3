#include "foregan/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "foregan/errors.hpp"
#include "foregan/rng.hpp"

namespace foregan {

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

} // namespace

void InversionConfig::validate() const {
    if (steps < 1) throw ParameterError("inversion: steps must be >= 1");
    if (step_size <= 0.0) throw ParameterError("inversion: step size must be > 0");
    if (eta < 0.0 || eta > 1.0) throw ParameterError("inversion: eta must be in [0,1]");
    if (restarts < 1) throw ParameterError("inversion: restarts must be >= 1");
}

double residual_loss(const Tensor& x, const Tensor& gz) {
    if (!x.same_shape(gz)) throw ShapeError("residual_loss: shape mismatch");
    return sum_abs_diff(x, gz);
}

double residual_loss(const Frame& x, const Frame& gz) { return residual_loss(x.pixels, gz.pixels); }

double feature_matching_loss(DiscriminatorNet& d, const Frame& x, const Frame& gz) {
    if (!x.pixels.same_shape(gz.pixels)) throw ShapeError("feature_matching_loss: shape mismatch");
    const Tensor fx = d.forward_features(x.pixels.reshaped({1, x.channels(), x.height(), x.width()}));
    const Tensor fg =
        d.forward_features(gz.pixels.reshaped({1, gz.channels(), gz.height(), gz.width()}));
    return sum_abs_diff(fx, fg);
}

double combined_loss(double residual, double feature, double eta) {
    if (eta < 0.0 || eta > 1.0) throw ParameterError("combined_loss: eta must be in [0,1]");
    return (1.0 - eta) * residual + eta * feature;
}

InversionResult invert(const GeneratorNet& g, const DiscriminatorNet& d, const Frame& x,
                       const InversionConfig& cfg) {
    cfg.validate();
    if (x.pixels.rank() != 3 || x.channels() != g.channels() || x.height() != g.image_size() ||
        x.width() != g.image_size())
        throw ShapeError("invert: frame shape does not match the generator output");

    // Work on private copies so the caller's networks stay untouched.
    GeneratorNet gen = g;
    DiscriminatorNet disc = d;
    const int dim = gen.latent_dim();
    const Tensor x_batch = x.pixels.reshaped({1, x.channels(), x.height(), x.width()});
    const Tensor feat_x = disc.forward_features(x_batch);

    InversionResult result;
    result.best_total = std::numeric_limits<double>::infinity();
    int global_step = 0;

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(restart)));
        Tensor z;
        if (restart == 0 && cfg.warm_start && !cfg.init_z.empty()) {
            if (cfg.init_z.size() != dim)
                throw ParameterError("invert: init_z dimension mismatch");
            z = cfg.init_z.reshaped({dim});
        } else {
            z = sample_latent(dim, rng);
        }

        AdamOptimizer adam(cfg.step_size, 0.9, 0.999);
        Tensor grad({dim});
        std::vector<Tensor*> zp{&z}, zg{&grad};

        for (int step = 0; step < cfg.steps; ++step, ++global_step) {
            Tensor gz = gen.forward(z.reshaped({1, dim}));
            const double loss_f = sum_abs_diff(x_batch, gz);
            Tensor feat_gz = disc.forward_features(gz);
            const double loss_m = sum_abs_diff(feat_x, feat_gz);
            const double total = combined_loss(loss_f, loss_m, cfg.eta);
            if (!std::isfinite(total))
                throw InversionError("non-finite inversion loss at step " +
                                     std::to_string(global_step));

            result.trajectory.push_back(InversionStep{global_step, loss_f, loss_m, total});
            if (total < result.best_total) {
                result.best_total = total;
                result.best_step = global_step;
                result.z = z;
            }

            // d(total)/d(G(z)): residual term plus feature term routed back
            // through the discriminator prefix.
            Tensor g_feat = feat_gz;
            for (int i = 0; i < g_feat.size(); ++i)
                g_feat[i] = cfg.eta * sign_of(feat_gz[i] - feat_x[i]);
            Tensor g_img = disc.backward_from_features(g_feat);
            for (int i = 0; i < g_img.size(); ++i)
                g_img[i] += (1.0 - cfg.eta) * sign_of(gz[i] - x_batch[i]);

            Tensor gz_grad = gen.backward(g_img);
            for (int i = 0; i < dim; ++i) grad[i] = gz_grad[i];

            if (cfg.optimizer == InversionConfig::Optimizer::adam) {
                adam.step(zp, zg);
            } else {
                for (int i = 0; i < dim; ++i) z[i] -= cfg.step_size * grad[i];
            }
            if (cfg.clamp_latent)
                for (int i = 0; i < dim; ++i) z[i] = std::clamp(z[i], -1.0, 1.0);
        }
    }

    result.converged = result.best_total <= result.trajectory.front().total;
    result.generated = generator_forward(gen, result.z);
    return result;
}

} // namespace foregan
