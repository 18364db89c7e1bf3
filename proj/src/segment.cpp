#include "foregan/segment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>
#include <thread>

#include "foregan/errors.hpp"
#include "foregan/rng.hpp"

namespace foregan {

namespace {

void check_mask_shape(const Frame& x, const MotionMask& m, const char* where) {
    if (m.height != x.height() || m.width != x.width())
        throw ShapeError(std::string(where) + ": motion mask shape does not match frame");
}

double threshold_for(const ForegroundMap& fg, const ThresholdRule& rule) {
    switch (rule.kind) {
        case ThresholdRule::Kind::fixed_tau:
            return rule.tau;
        case ThresholdRule::Kind::mean_sigma: {
            const std::size_t n = fg.residual.size();
            double mean = 0.0;
            for (double v : fg.residual) mean += v;
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (double v : fg.residual) var += (v - mean) * (v - mean);
            var /= static_cast<double>(n);
            const double sigma = std::sqrt(var);
            if (sigma < 1e-12) {
                std::cerr << "warning: degenerate residual (sigma = 0); falling back to fixed "
                             "threshold "
                          << rule.tau << "\n";
                return rule.tau;
            }
            return mean + rule.k * sigma;
        }
        case ThresholdRule::Kind::otsu: {
            const double top = *std::max_element(fg.residual.begin(), fg.residual.end());
            if (top <= 0.0) return 0.0;
            constexpr int kBins = 256;
            std::array<long long, kBins> hist{};
            for (double v : fg.residual) {
                int b = static_cast<int>(v / top * (kBins - 1));
                hist[static_cast<std::size_t>(std::clamp(b, 0, kBins - 1))]++;
            }
            const double total = static_cast<double>(fg.residual.size());
            double sum_all = 0.0;
            for (int b = 0; b < kBins; ++b) sum_all += b * static_cast<double>(hist[static_cast<std::size_t>(b)]);
            double sum_bg = 0.0, weight_bg = 0.0, best = -1.0;
            int best_bin = 0;
            for (int b = 0; b < kBins; ++b) {
                weight_bg += static_cast<double>(hist[static_cast<std::size_t>(b)]);
                if (weight_bg == 0.0) continue;
                const double weight_fg = total - weight_bg;
                if (weight_fg == 0.0) break;
                sum_bg += b * static_cast<double>(hist[static_cast<std::size_t>(b)]);
                const double mean_bg = sum_bg / weight_bg;
                const double mean_fg = (sum_all - sum_bg) / weight_fg;
                const double between = weight_bg * weight_fg * (mean_bg - mean_fg) * (mean_bg - mean_fg);
                if (between > best) {
                    best = between;
                    best_bin = b;
                }
            }
            return static_cast<double>(best_bin) / (kBins - 1) * top;
        }
    }
    return rule.tau;
}

const Checkpoint& require_modality(const Checkpoint& ckpt, const char* expected) {
    if (ckpt.modality != expected)
        throw ConfigError(std::string("checkpoint modality '") + ckpt.modality + "' where '" +
                          expected + "' is required");
    return ckpt;
}

} // namespace

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::rgb: return "rgb";
        case Modality::depth: return "depth";
        case Modality::fused: return "fused";
    }
    return "?";
}

Frame suppress_foreground(const Frame& x, const MotionMask& m) {
    check_mask_shape(x, m, "suppress_foreground");
    Frame out = x;
    const int c = x.channels(), h = x.height(), w = x.width();
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                out.pixels.at(ch, y, xx) *=
                    m.mask[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + xx];
    return out;
}

std::pair<ForegroundMap, SegmentationMask> extract_foreground(const Frame& x,
                                                              const Frame& background,
                                                              const ThresholdRule& rule,
                                                              ChannelReduce reduce,
                                                              Modality modality) {
    if (!x.pixels.same_shape(background.pixels))
        throw ShapeError("extract_foreground: frame/background shape mismatch");
    const int c = x.channels(), h = x.height(), w = x.width();
    ForegroundMap fg;
    fg.height = h;
    fg.width = w;
    fg.residual.resize(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            double acc = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                const double d = std::abs(x.pixels.at(ch, y, xx) - background.pixels.at(ch, y, xx));
                if (reduce == ChannelReduce::max)
                    acc = std::max(acc, d);
                else
                    acc += d;
            }
            if (reduce == ChannelReduce::mean) acc /= c;
            fg.residual[static_cast<std::size_t>(y) * w + xx] = acc;
        }

    const double threshold = threshold_for(fg, rule);
    SegmentationMask mask;
    mask.height = h;
    mask.width = w;
    mask.modality = modality;
    mask.mask.resize(fg.residual.size());
    for (std::size_t i = 0; i < fg.residual.size(); ++i)
        mask.mask[i] = fg.residual[i] > threshold ? 1 : 0;
    return {std::move(fg), std::move(mask)};
}

SegmentationMask apply_morphology(const SegmentationMask& mask) {
    const int h = mask.height, w = mask.width;
    auto erode = [&](const std::vector<std::uint8_t>& in) {
        std::vector<std::uint8_t> out(in.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                std::uint8_t v = 1;
                for (int dy = -1; dy <= 1 && v; ++dy)
                    for (int dx = -1; dx <= 1 && v; ++dx) {
                        const int yy = std::clamp(y + dy, 0, h - 1);
                        const int xx = std::clamp(x + dx, 0, w - 1);
                        v = in[static_cast<std::size_t>(yy) * w + xx];
                    }
                out[static_cast<std::size_t>(y) * w + x] = v;
            }
        return out;
    };
    auto dilate = [&](const std::vector<std::uint8_t>& in) {
        std::vector<std::uint8_t> out(in.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                std::uint8_t v = 0;
                for (int dy = -1; dy <= 1 && !v; ++dy)
                    for (int dx = -1; dx <= 1 && !v; ++dx) {
                        const int yy = std::clamp(y + dy, 0, h - 1);
                        const int xx = std::clamp(x + dx, 0, w - 1);
                        v = in[static_cast<std::size_t>(yy) * w + xx];
                    }
                out[static_cast<std::size_t>(y) * w + x] = v;
            }
        return out;
    };
    SegmentationMask out = mask;
    out.mask = dilate(erode(out.mask));  // open
    out.mask = erode(dilate(out.mask));  // close
    return out;
}

SegmentationMask intersect_with_moving(const SegmentationMask& mask, const MotionMask& motion) {
    if (mask.height != motion.height || mask.width != motion.width)
        throw ShapeError("intersect_with_moving: shape mismatch");
    const MotionMask moving = complement(motion);
    SegmentationMask out = mask;
    for (std::size_t i = 0; i < out.mask.size(); ++i) out.mask[i] &= moving.mask[i];
    return out;
}

SegmentationMask fuse(const SegmentationMask& a, const SegmentationMask& b) {
    if (a.height != b.height || a.width != b.width) throw ShapeError("fuse: shape mismatch");
    const bool pair_ok = (a.modality == Modality::rgb && b.modality == Modality::depth) ||
                         (a.modality == Modality::depth && b.modality == Modality::rgb);
    if (!pair_ok) throw ConfigError("fuse: expected one rgb mask and one depth mask");
    SegmentationMask out;
    out.height = a.height;
    out.width = a.width;
    out.modality = Modality::fused;
    out.mask.resize(a.mask.size());
    for (std::size_t i = 0; i < a.mask.size(); ++i)
        out.mask[i] = (a.mask[i] | b.mask[i]) ? 1 : 0;
    return out;
}

SegmentationMask segment_rgb(const Frame& x, const Frame& prev, const Checkpoint& ckpt_rgb,
                             const PipelineConfig& cfg) {
    require_modality(ckpt_rgb, "rgb");
    const MotionMask motion = motion_mask(estimate_flow(prev, x));
    const Frame suppressed = suppress_foreground(x, motion);
    GeneratorNet g = ckpt_rgb.make_generator();
    DiscriminatorNet d = ckpt_rgb.make_discriminator();
    const InversionResult inv = invert(g, d, suppressed, cfg.inversion);
    auto [residual, mask] = extract_foreground(x, inv.generated, cfg.rule, cfg.reduce, Modality::rgb);
    return cfg.morphology ? apply_morphology(mask) : mask;
}

SegmentationMask segment_depth(const DepthFrame& x_d, const MotionMask& m,
                               const Checkpoint& ckpt_depth, const PipelineConfig& cfg) {
    require_modality(ckpt_depth, "depth");
    GeneratorNet g = ckpt_depth.make_generator();
    DiscriminatorNet d = ckpt_depth.make_discriminator();
    const Frame target{x_d.pixels};
    const InversionResult inv = invert(g, d, target, cfg.inversion);
    auto [residual, mask] =
        extract_foreground(target, inv.generated, cfg.rule, cfg.reduce, Modality::depth);
    SegmentationMask denoised = intersect_with_moving(mask, m);
    return cfg.morphology ? apply_morphology(denoised) : denoised;
}

// ---------------------------------------------------------------------------
// Background providers

OracleBackgroundProvider::OracleBackgroundProvider(const Sequence& seq) : seq_(&seq) {
    if (!seq.has_oracle())
        throw ConfigError("oracle provider: sequence has no oracle backgrounds");
}

bool OracleBackgroundProvider::supports(Modality modality) const {
    if (modality == Modality::rgb) return !seq_->oracle_rgb.empty();
    if (modality == Modality::depth) return !seq_->oracle_depth.empty();
    return false;
}

Frame OracleBackgroundProvider::background(Modality modality, int frame_index, const Frame&) {
    if (modality == Modality::rgb) return seq_->oracle_rgb[static_cast<std::size_t>(frame_index)];
    if (modality == Modality::depth)
        return Frame{seq_->oracle_depth[static_cast<std::size_t>(frame_index)].pixels};
    throw ConfigError("oracle provider: unsupported modality");
}

InversionBackgroundProvider::InversionBackgroundProvider(std::optional<Checkpoint> rgb,
                                                         std::optional<Checkpoint> depth,
                                                         const InversionConfig& inversion,
                                                         bool warm_start)
    : inversion_(inversion), warm_start_(warm_start) {
    if (rgb) {
        require_modality(*rgb, "rgb");
        rgb_.emplace(ModalityState{*rgb, rgb->make_generator(), rgb->make_discriminator(), {}});
    }
    if (depth) {
        require_modality(*depth, "depth");
        depth_.emplace(
            ModalityState{*depth, depth->make_generator(), depth->make_discriminator(), {}});
    }
}

bool InversionBackgroundProvider::supports(Modality modality) const {
    if (modality == Modality::rgb) return rgb_.has_value();
    if (modality == Modality::depth) return depth_.has_value();
    return false;
}

Frame InversionBackgroundProvider::background(Modality modality, int frame_index,
                                              const Frame& target) {
    ModalityState* state = modality == Modality::rgb   ? (rgb_ ? &*rgb_ : nullptr)
                           : modality == Modality::depth ? (depth_ ? &*depth_ : nullptr)
                                                         : nullptr;
    if (!state)
        throw ConfigError(std::string("no checkpoint loaded for modality ") +
                          modality_name(modality));
    InversionConfig cfg = inversion_;
    cfg.seed = Rng::derive(inversion_.seed,
                           (static_cast<std::uint64_t>(frame_index) << 1) |
                               (modality == Modality::depth ? 1u : 0u));
    if (warm_start_ && !state->last_z.empty()) {
        cfg.warm_start = true;
        cfg.init_z = state->last_z;
    }
    InversionResult inv = invert(state->generator, state->discriminator, target, cfg);
    if (warm_start_) state->last_z = inv.z;
    if (trajectory_sink_) trajectory_sink_(modality, frame_index, inv.trajectory);
    return inv.generated;
}

// ---------------------------------------------------------------------------
// Sequence runner

std::vector<FrameResult> run_sequence(const Sequence& seq, BackgroundProvider& provider,
                                      const PipelineConfig& cfg, const SequenceRunOptions& opts) {
    const int n = seq.frame_count();
    if (n == 0) throw ParameterError("run_sequence: empty sequence");
    const bool want_rgb = opts.use_rgb;
    const bool want_depth = opts.use_depth && seq.has_depth();
    if (want_rgb && !provider.supports(Modality::rgb))
        throw ConfigError("run_sequence: rgb requested but the provider cannot supply it");
    if (want_depth && !provider.supports(Modality::depth))
        throw ConfigError("run_sequence: depth requested but the provider cannot supply it");
    if (!want_rgb && !want_depth) throw ConfigError("run_sequence: nothing to segment");

    std::vector<FrameResult> results(static_cast<std::size_t>(n));

    auto process = [&](int t) {
        FrameResult& r = results[static_cast<std::size_t>(t)];
        r.frame_index = t;
        const Frame& x = seq.frames[static_cast<std::size_t>(t)];
        const Frame& prev = seq.frames[static_cast<std::size_t>(t > 0 ? t - 1 : 0)];
        const FlowField flow = estimate_flow(prev, x);
        r.motion = motion_mask(flow);
        if (opts.keep_intermediates) r.flow_color = Frame{flow_to_color(flow)};

        if (want_rgb) {
            Frame suppressed = suppress_foreground(x, r.motion);
            Frame bg = provider.background(Modality::rgb, t, suppressed);
            auto [residual, mask] =
                extract_foreground(x, bg, cfg.rule, cfg.reduce, Modality::rgb);
            r.rgb_mask = cfg.morphology ? apply_morphology(mask) : mask;
            if (opts.keep_intermediates) {
                r.suppressed = std::move(suppressed);
                r.rgb_background = std::move(bg);
                r.rgb_residual = std::move(residual);
            }
        }
        if (want_depth) {
            const Frame target{seq.depth_frames[static_cast<std::size_t>(t)].pixels};
            Frame bg = provider.background(Modality::depth, t, target);
            auto [residual, mask] =
                extract_foreground(target, bg, cfg.rule, cfg.reduce, Modality::depth);
            SegmentationMask denoised = intersect_with_moving(mask, r.motion);
            r.depth_mask = cfg.morphology ? apply_morphology(denoised) : denoised;
            if (opts.keep_intermediates) {
                r.depth_background = std::move(bg);
                r.depth_residual = std::move(residual);
            }
        }

        if (r.rgb_mask && r.depth_mask) {
            r.fused = fuse(*r.rgb_mask, *r.depth_mask);
        } else {
            r.fused = r.rgb_mask ? *r.rgb_mask : *r.depth_mask;
            r.fused.modality = Modality::fused;
        }
    };

    // Warm-started inversion chains latents across frames, so it runs serially.
    const int workers = cfg.warm_start ? 1 : std::max(1, std::min(cfg.workers, n));
    if (workers == 1) {
        for (int t = 0; t < n; ++t) process(t);
        return results;
    }

    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int wi = 0; wi < workers; ++wi) {
        pool.emplace_back([&] {
            while (true) {
                const int t = next.fetch_add(1);
                if (t >= n) return;
                try {
                    process(t);
                } catch (...) {
                    std::scoped_lock lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (std::thread& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return results;
}

} // namespace foregan
