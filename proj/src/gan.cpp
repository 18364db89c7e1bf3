#include "foregan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "foregan/errors.hpp"
#include "json.hpp"

namespace foregan {

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

int int_log2(int v) {
    int n = 0;
    while (v > 1) {
        v >>= 1;
        ++n;
    }
    return n;
}

Tensor stack_frames(const std::vector<Frame>& data, const std::vector<int>& idx, int lo, int hi) {
    const Tensor& first = data[static_cast<std::size_t>(idx[static_cast<std::size_t>(lo)])].pixels;
    const int c = first.dim(0), h = first.dim(1), w = first.dim(2);
    Tensor batch({hi - lo, c, h, w});
    for (int i = lo; i < hi; ++i) {
        const Tensor& src = data[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])].pixels;
        std::memcpy(batch.data() + static_cast<std::size_t>(i - lo) * src.size(), src.data(),
                    static_cast<std::size_t>(src.size()) * sizeof(double));
    }
    return batch;
}

// d(-log p_label)/d(logits) for a two-class softmax, scaled by 1/batch.
Tensor cross_entropy_logit_grad(const Tensor& probs, int label, int batch) {
    Tensor g = probs;
    const double inv = 1.0 / static_cast<double>(batch);
    for (int i = 0; i < probs.dim(0); ++i) {
        g.at(i, 0) = (probs.at(i, 0) - (label == 0 ? 1.0 : 0.0)) * inv;
        g.at(i, 1) = (probs.at(i, 1) - (label == 1 ? 1.0 : 0.0)) * inv;
    }
    return g;
}

} // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ParameterError("train config: epochs must be >= 1");
    if (batch_size < 1) throw ParameterError("train config: batch size must be >= 1");
    if (learning_rate <= 0.0) throw ParameterError("train config: learning rate must be > 0");
    if (latent_dim < 1) throw ParameterError("train config: latent dim must be >= 1");
    if (!is_pow2(image_size) || image_size < 8)
        throw ParameterError("train config: image size must be a power of two >= 8");
    if (channels < 1) throw ParameterError("train config: channels must be >= 1");
    if (base_width < 1) throw ParameterError("train config: base width must be >= 1");
}

// ---------------------------------------------------------------------------
// Network construction

GeneratorNet GeneratorNet::create(const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    GeneratorNet g;
    g.latent_dim_ = cfg.latent_dim;
    g.image_size_ = cfg.image_size;
    g.channels_ = cfg.channels;

    const int stages = int_log2(cfg.image_size / 4); // deconvs from 4x4 up to full size
    int width = cfg.base_width << (stages - 1);      // mirrors the discriminator widths
    g.net_.add(std::make_unique<Dense>(cfg.latent_dim, width * 4 * 4, rng));
    g.net_.add(std::make_unique<Reshape>(std::vector<int>{width, 4, 4}));
    g.net_.add(std::make_unique<Relu>());
    for (int i = 0; i < stages - 1; ++i) {
        g.net_.add(std::make_unique<ConvTranspose2d>(width, width / 2, 4, 2, 1, rng));
        g.net_.add(std::make_unique<Relu>());
        width /= 2;
    }
    g.net_.add(std::make_unique<ConvTranspose2d>(width, cfg.channels, 4, 2, 1, rng));
    g.net_.add(std::make_unique<Tanh>());
    return g;
}

Tensor GeneratorNet::forward(const Tensor& z_batch) {
    if (z_batch.rank() != 2 || z_batch.dim(1) != latent_dim_)
        throw ShapeError("generator: latent batch must be (N," + std::to_string(latent_dim_) + ")");
    return net_.forward(z_batch);
}

Tensor GeneratorNet::backward(const Tensor& g_image) { return net_.backward(g_image); }

DiscriminatorNet DiscriminatorNet::create(const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    DiscriminatorNet d;
    d.image_size_ = cfg.image_size;
    d.channels_ = cfg.channels;

    const int conv_count = int_log2(cfg.image_size) - 1; // stride-2 convs down to 2x2
    int in_ch = cfg.channels;
    int width = cfg.base_width;
    for (int i = 0; i < conv_count; ++i) {
        d.net_.add(std::make_unique<Conv2d>(in_ch, width, 4, 2, 1, rng));
        d.net_.add(std::make_unique<LeakyRelu>(cfg.leaky_slope));
        in_ch = width;
        width *= 2;
    }
    // features come from the activation after the penultimate conv
    d.feature_layer_ = 2 * conv_count - 3;
    d.net_.add(std::make_unique<Reshape>(std::vector<int>{in_ch * 2 * 2}));
    d.net_.add(std::make_unique<Dense>(in_ch * 2 * 2, 2, rng));
    return d;
}

Tensor DiscriminatorNet::forward_logits(const Tensor& x_batch) {
    if (x_batch.rank() != 4 || x_batch.dim(1) != channels_ || x_batch.dim(2) != image_size_ ||
        x_batch.dim(3) != image_size_)
        throw ShapeError("discriminator: input must be (N," + std::to_string(channels_) + "," +
                         std::to_string(image_size_) + "," + std::to_string(image_size_) + ")");
    return net_.forward(x_batch);
}

Tensor DiscriminatorNet::forward_features(const Tensor& x_batch) {
    if (x_batch.rank() != 4 || x_batch.dim(2) != image_size_)
        throw ShapeError("discriminator: bad input shape for feature pass");
    return net_.forward_to(x_batch, feature_layer_);
}

Tensor DiscriminatorNet::backward_from_logits(const Tensor& g_logits) {
    return net_.backward(g_logits);
}

Tensor DiscriminatorNet::backward_from_features(const Tensor& g_features) {
    return net_.backward_from(g_features, feature_layer_);
}

// ---------------------------------------------------------------------------
// Losses

Tensor sample_latent(int dim, Rng& rng) {
    Tensor z({dim});
    for (int i = 0; i < dim; ++i) z[i] = rng.uniform(-1.0, 1.0);
    return z;
}

double clamp_probability(double p) { return std::clamp(p, 1e-7, 1.0 - 1e-7); }

double discriminator_loss(double d_real, double d_fake) {
    return -(std::log(clamp_probability(d_real)) + std::log(1.0 - clamp_probability(d_fake)));
}

double generator_loss(double d_fake) { return -std::log(clamp_probability(d_fake)); }

Frame generator_forward(GeneratorNet& g, const Tensor& z) {
    if (z.rank() != 1 || z.dim(0) != g.latent_dim())
        throw ShapeError("generator_forward: latent dimension mismatch");
    Tensor out = g.forward(z.reshaped({1, g.latent_dim()}));
    return Frame{out.reshaped({g.channels(), g.image_size(), g.image_size()})};
}

DiscriminatorOutput discriminator_forward(DiscriminatorNet& d, const Frame& x) {
    const Tensor batch = x.pixels.reshaped({1, x.channels(), x.height(), x.width()});
    const Tensor probs = softmax2(d.forward_logits(batch));
    return DiscriminatorOutput{probs.at(0, kRealClass), d.last_features()};
}

// ---------------------------------------------------------------------------
// Training

Checkpoint train(const std::vector<Frame>& data, const TrainConfig& cfg,
                 const std::string& modality, const std::string& scene,
                 const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.empty()) throw ParameterError("train: empty training set");
    for (const Frame& f : data) {
        if (f.pixels.rank() != 3 || f.channels() != cfg.channels ||
            f.height() != cfg.image_size || f.width() != cfg.image_size)
            throw ShapeError("train: frame shape does not match configuration");
    }

    Rng rng(cfg.seed);
    GeneratorNet g = GeneratorNet::create(cfg, rng);
    DiscriminatorNet d = DiscriminatorNet::create(cfg, rng);
    AdamOptimizer opt_d(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
    AdamOptimizer opt_g(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);

    const int n = static_cast<int>(data.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Fisher-Yates with our deterministic engine
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.uniform_int(0, i))]);

        double d_epoch = 0.0, g_epoch = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int stop = std::min(n, start + cfg.batch_size);
            const int nb = stop - start;

            // --- discriminator update ---
            d.net().zero_grads();
            Tensor real = stack_frames(data, order, start, stop);
            Tensor probs_real = softmax2(d.forward_logits(real));
            d.backward_from_logits(cross_entropy_logit_grad(probs_real, kRealClass, nb));

            Tensor z({nb, cfg.latent_dim});
            for (int i = 0; i < z.size(); ++i) z[i] = rng.uniform(-1.0, 1.0);
            Tensor fake = g.forward(z);
            Tensor probs_fake = softmax2(d.forward_logits(fake));
            d.backward_from_logits(cross_entropy_logit_grad(probs_fake, kFakeClass, nb));
            opt_d.step(d.net().params(), d.net().grads());

            double d_loss = 0.0;
            for (int i = 0; i < nb; ++i)
                d_loss += discriminator_loss(probs_real.at(i, kRealClass),
                                             probs_fake.at(i, kRealClass));
            d_loss /= nb;

            // --- generator update ---
            g.net().zero_grads();
            d.net().zero_grads(); // discriminator gradients from this pass are discarded
            Tensor z2({nb, cfg.latent_dim});
            for (int i = 0; i < z2.size(); ++i) z2[i] = rng.uniform(-1.0, 1.0);
            Tensor fake2 = g.forward(z2);
            Tensor probs_fake2 = softmax2(d.forward_logits(fake2));
            Tensor g_image = d.backward_from_logits(
                cross_entropy_logit_grad(probs_fake2, kRealClass, nb));
            g.backward(g_image);
            opt_g.step(g.net().params(), g.net().grads());

            double g_loss = 0.0;
            for (int i = 0; i < nb; ++i) g_loss += generator_loss(probs_fake2.at(i, kRealClass));
            g_loss /= nb;

            if (!std::isfinite(d_loss) || !std::isfinite(g_loss))
                throw TrainingError("training diverged at epoch " + std::to_string(epoch));
            d_epoch += d_loss;
            g_epoch += g_loss;
            ++batches;
        }

        if (on_epoch) on_epoch(EpochLoss{epoch, d_epoch / batches, g_epoch / batches});
    }

    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.modality = modality;
    ckpt.scene = scene;
    ckpt.epoch = cfg.epochs;
    for (Tensor* p : g.net().params()) ckpt.generator_params.push_back(*p);
    for (Tensor* p : d.net().params()) ckpt.discriminator_params.push_back(*p);
    return ckpt;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

namespace {

constexpr char kMagic[8] = {'F', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};

nlohmann::json config_to_json(const TrainConfig& c) {
    return nlohmann::json{{"epochs", c.epochs},
                          {"batch_size", c.batch_size},
                          {"learning_rate", c.learning_rate},
                          {"adam_beta1", c.adam_beta1},
                          {"adam_beta2", c.adam_beta2},
                          {"latent_dim", c.latent_dim},
                          {"seed", c.seed},
                          {"image_size", c.image_size},
                          {"channels", c.channels},
                          {"base_width", c.base_width},
                          {"leaky_slope", c.leaky_slope}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.image_size = j.at("image_size").get<int>();
    c.channels = j.at("channels").get<int>();
    c.base_width = j.at("base_width").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    return c;
}

nlohmann::json shapes_of(const std::vector<Tensor>& ts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Tensor& t : ts) arr.push_back(t.shape());
    return arr;
}

void copy_params_into(Sequential& net, const std::vector<Tensor>& stored, const char* which) {
    std::vector<Tensor*> dst = net.params();
    if (dst.size() != stored.size())
        throw ConfigError(std::string("checkpoint: ") + which + " parameter count mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (!dst[i]->same_shape(stored[i]))
            throw ConfigError(std::string("checkpoint: ") + which + " parameter shape mismatch");
        *dst[i] = stored[i];
    }
}

} // namespace

GeneratorNet Checkpoint::make_generator() const {
    Rng rng(0);
    GeneratorNet g = GeneratorNet::create(config, rng);
    copy_params_into(g.net(), generator_params, "generator");
    return g;
}

DiscriminatorNet Checkpoint::make_discriminator() const {
    Rng rng(0);
    DiscriminatorNet d = DiscriminatorNet::create(config, rng);
    copy_params_into(d.net(), discriminator_params, "discriminator");
    return d;
}

std::uint64_t Checkpoint::param_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Tensor& t : generator_params) {
        h ^= content_hash(t);
        h *= 0x100000001b3ULL;
    }
    for (const Tensor& t : discriminator_params) {
        h ^= content_hash(t);
        h *= 0x100000001b3ULL;
    }
    return h;
}

void Checkpoint::save(const std::string& path) const {
    nlohmann::json header{{"format_version", kFormatVersion},
                          {"config", config_to_json(config)},
                          {"modality", modality},
                          {"scene", scene},
                          {"epoch", epoch},
                          {"generator_shapes", shapes_of(generator_params)},
                          {"discriminator_shapes", shapes_of(discriminator_params)}};
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    auto write_tensors = [&out](const std::vector<Tensor>& ts) {
        for (const Tensor& t : ts)
            out.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(t.size() * sizeof(double)));
    };
    write_tensors(generator_params);
    write_tensors(discriminator_params);
    if (!out) throw LoadError("failed while writing checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw LoadError("not a checkpoint file: " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw LoadError("truncated checkpoint header: " + path);

    nlohmann::json header = nlohmann::json::parse(htext);
    if (header.at("format_version").get<int>() != kFormatVersion)
        throw LoadError("unsupported checkpoint version in " + path);

    Checkpoint ckpt;
    ckpt.config = config_from_json(header.at("config"));
    ckpt.modality = header.at("modality").get<std::string>();
    ckpt.scene = header.at("scene").get<std::string>();
    ckpt.epoch = header.at("epoch").get<int>();

    auto read_tensors = [&in, &path](const nlohmann::json& shapes) {
        std::vector<Tensor> out;
        for (const auto& js : shapes) {
            Tensor t(js.get<std::vector<int>>());
            in.read(reinterpret_cast<char*>(t.data()),
                    static_cast<std::streamsize>(t.size() * sizeof(double)));
            if (!in) throw LoadError("truncated checkpoint tensors: " + path);
            out.push_back(std::move(t));
        }
        return out;
    };
    ckpt.generator_params = read_tensors(header.at("generator_shapes"));
    ckpt.discriminator_params = read_tensors(header.at("discriminator_shapes"));
    return ckpt;
}

} // namespace foregan
