#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "foregan/image.hpp"
#include "foregan/tensor.hpp"

namespace foregan {

/// Dense per-pixel motion between two consecutive frames, in pixels/frame.
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<double> u; // horizontal component
    std::vector<double> v; // vertical component

    double magnitude(int i) const;
    double mean_magnitude() const;
};

/// Binary motion mask: 1 marks static pixels (magnitude below the mean
/// threshold), 0 marks moving pixels.
struct MotionMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> mask;
    double threshold_used = 0.0;
};

/// Pluggable dense flow estimator over grayscale images (H,W) in [0,1].
class FlowEstimator {
public:
    virtual ~FlowEstimator() = default;
    virtual FlowField estimate(const Tensor& prev_gray, const Tensor& curr_gray) const = 0;
};

/// Baseline coarse-to-fine estimator: image pyramid with warping, each level
/// solved by Jacobi iterations of the smoothness-regularized flow equations.
class HornSchunckFlow : public FlowEstimator {
public:
    struct Params {
        int pyramid_levels = 3;
        double alpha = 0.15; // smoothness weight
        int warp_iterations = 3;
        int solver_iterations = 120;
    };

    HornSchunckFlow() = default;
    explicit HornSchunckFlow(Params p) : params_(p) {}

    FlowField estimate(const Tensor& prev_gray, const Tensor& curr_gray) const override;

private:
    Params params_;
};

/// Luma conversion from a (C,H,W) frame in [-1,1] to (H,W) gray in [0,1].
Tensor to_gray(const Tensor& chw);

/// Flow between consecutive frames with the baseline estimator.
FlowField estimate_flow(const Frame& prev, const Frame& curr);
FlowField estimate_flow(const Frame& prev, const Frame& curr, const FlowEstimator& estimator);

/// Thresholds flow magnitude at its mean T: mask = 1 where magnitude < T.
/// If T < eps the scene is considered fully static and the mask is all ones.
MotionMask motion_mask(const FlowField& flow, double eps = 1e-3);

/// Swaps static and moving pixels; threshold_used is preserved.
MotionMask complement(const MotionMask& m);

/// Standard HSV flow-color rendering as a (3,H,W) frame in [-1,1].
Tensor flow_to_color(const FlowField& flow);

} // namespace foregan
