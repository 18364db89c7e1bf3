#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "foregan/gan.hpp"
#include "foregan/net.hpp"
#include "foregan/rng.hpp"
#include "foregan/synth.hpp"
#include "foregan/tensor.hpp"

namespace testutil {

inline foregan::Tensor random_tensor(std::vector<int> shape, foregan::Rng& rng, double lo = -1.0,
                                     double hi = 1.0) {
    foregan::Tensor t(std::move(shape));
    for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Largest relative error between an analytic gradient and central finite
/// differences of `loss` with respect to every element of `param`.
inline double gradcheck_max_rel_err(foregan::Tensor& param, const foregan::Tensor& analytic,
                                    const std::function<double()>& loss, double h = 1e-5) {
    double worst = 0.0;
    for (int i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + h;
        const double up = loss();
        param[i] = saved - h;
        const double down = loss();
        param[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_err(analytic[i], fd));
    }
    return worst;
}

/// Small configuration for fast adversarial training in tests.
inline foregan::TrainConfig tiny_train_config() {
    foregan::TrainConfig cfg;
    cfg.image_size = 16;
    cfg.base_width = 8;
    cfg.latent_dim = 16;
    cfg.batch_size = 8;
    cfg.epochs = 30;
    cfg.seed = 11;
    return cfg;
}

/// Scene matched to the tiny config above.
inline foregan::SceneSpec tiny_scene() {
    foregan::SceneSpec s;
    s.width = 16;
    s.height = 16;
    s.frame_count = 24;
    s.object_size = 6;
    s.entry_frame = 8;
    s.object_speed = 1.0;
    s.shadow = false;
    s.noise_sigma = 0.005;
    return s;
}

/// A once-trained tiny rgb checkpoint, shared across test cases in a binary.
inline const foregan::Checkpoint& tiny_gan_fixture() {
    static const foregan::Checkpoint ckpt = [] {
        const foregan::Sequence seq = foregan::synth_generate(3, tiny_scene());
        std::vector<foregan::Frame> background;
        for (int idx : seq.background_only_indices)
            background.push_back(seq.frames[static_cast<std::size_t>(idx)]);
        return foregan::train(background, tiny_train_config(), "rgb", "tiny-fixture");
    }();
    return ckpt;
}

} // namespace testutil
