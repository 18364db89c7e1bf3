#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "foregan/dataset.hpp"
#include "foregan/flow.hpp"
#include "foregan/gan.hpp"
#include "foregan/inversion.hpp"

namespace foregan {

enum class Modality { rgb, depth, fused };
const char* modality_name(Modality m);

/// Per-pixel channel-reduced absolute difference between a frame and its
/// estimated background.
struct ForegroundMap {
    int height = 0;
    int width = 0;
    std::vector<double> residual;
};

struct SegmentationMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> mask;
    Modality modality = Modality::rgb;

    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (std::uint8_t v : mask) n += v;
        return n;
    }
};

struct ThresholdRule {
    enum class Kind { fixed_tau, mean_sigma, otsu };
    Kind kind = Kind::mean_sigma;
    double tau = 0.25; // fixed threshold; also the mean_sigma degenerate fallback
    double k = 2.0;    // mean + k*sigma
};

enum class ChannelReduce { max, sum, mean };

struct PipelineConfig {
    ThresholdRule rule;
    ChannelReduce reduce = ChannelReduce::max;
    bool morphology = false; // 3x3 open+close cleanup after binarization
    InversionConfig inversion;
    int workers = 1;
    bool warm_start = false; // seed each inversion from the previous frame's latent
};

/// Zeroes moving pixels: output = x * m (m is the static mask).
Frame suppress_foreground(const Frame& x, const MotionMask& m);

/// Residual map + thresholded binary mask against an estimated background.
std::pair<ForegroundMap, SegmentationMask> extract_foreground(
    const Frame& x, const Frame& background, const ThresholdRule& rule,
    ChannelReduce reduce = ChannelReduce::max, Modality modality = Modality::rgb);

/// Binary open then close with a 3x3 structuring element.
SegmentationMask apply_morphology(const SegmentationMask& mask);

/// Keeps only pixels that are foreground in the mask AND moving per the
/// complemented motion mask.
SegmentationMask intersect_with_moving(const SegmentationMask& mask, const MotionMask& motion);

/// Per-pixel OR of an rgb mask and a depth mask.
SegmentationMask fuse(const SegmentationMask& a, const SegmentationMask& b);

/// Full single-frame RGB path: flow -> motion mask -> suppression ->
/// inversion -> extraction against the unmasked frame.
SegmentationMask segment_rgb(const Frame& x, const Frame& prev, const Checkpoint& ckpt_rgb,
                             const PipelineConfig& cfg);

/// Full single-frame depth path: inversion directly on the depth frame,
/// extraction, then denoising by the moving-pixel mask.
SegmentationMask segment_depth(const DepthFrame& x_d, const MotionMask& m,
                               const Checkpoint& ckpt_depth, const PipelineConfig& cfg);

// --- sequence-level orchestration --------------------------------------------

/// Source of estimated backgrounds; either GAN inversion on trained
/// checkpoints, or the true synthetic background (oracle mode).
class BackgroundProvider {
public:
    virtual ~BackgroundProvider() = default;
    /// `target` is what the background should match: the suppressed frame for
    /// rgb, the raw depth frame for depth.
    virtual Frame background(Modality modality, int frame_index, const Frame& target) = 0;
    virtual bool supports(Modality modality) const = 0;
};

/// Reads per-frame true backgrounds from a synthetic sequence.
class OracleBackgroundProvider : public BackgroundProvider {
public:
    explicit OracleBackgroundProvider(const Sequence& seq);
    Frame background(Modality modality, int frame_index, const Frame& target) override;
    bool supports(Modality modality) const override;

private:
    const Sequence* seq_;
};

/// Receives the loss trajectory of each per-frame inversion, e.g. to dump
/// CSVs for benchmarking. Called concurrently for distinct frames.
using TrajectorySink =
    std::function<void(Modality, int frame_index, const std::vector<InversionStep>&)>;

/// Runs latent inversion against trained checkpoints; per-frame seeds are
/// derived deterministically from the inversion seed.
class InversionBackgroundProvider : public BackgroundProvider {
public:
    InversionBackgroundProvider(std::optional<Checkpoint> rgb, std::optional<Checkpoint> depth,
                                const InversionConfig& inversion, bool warm_start = false);
    Frame background(Modality modality, int frame_index, const Frame& target) override;
    bool supports(Modality modality) const override;
    void set_trajectory_sink(TrajectorySink sink) { trajectory_sink_ = std::move(sink); }

private:
    struct ModalityState {
        Checkpoint ckpt;
        GeneratorNet generator;
        DiscriminatorNet discriminator;
        Tensor last_z; // warm-start chain; only used in sequential runs
    };
    std::optional<ModalityState> rgb_, depth_;
    InversionConfig inversion_;
    bool warm_start_;
    TrajectorySink trajectory_sink_;
};

struct FrameResult {
    int frame_index = 0;
    MotionMask motion;
    std::optional<SegmentationMask> rgb_mask;
    std::optional<SegmentationMask> depth_mask;
    SegmentationMask fused;
    // intermediates, kept when requested so tooling can render step-by-step panels
    std::optional<Frame> suppressed;
    std::optional<Frame> rgb_background;
    std::optional<Frame> depth_background;
    std::optional<ForegroundMap> rgb_residual;
    std::optional<ForegroundMap> depth_residual;
    std::optional<Frame> flow_color;
};

struct SequenceRunOptions {
    bool use_rgb = true;
    bool use_depth = true;
    bool keep_intermediates = false;
};

/// Segments every frame of a sequence with a bounded worker pool; results are
/// returned ordered by frame index. Deterministic for fixed inputs and seeds.
std::vector<FrameResult> run_sequence(const Sequence& seq, BackgroundProvider& provider,
                                      const PipelineConfig& cfg, const SequenceRunOptions& opts);

} // namespace foregan
