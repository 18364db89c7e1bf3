#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "foregan/tensor.hpp"

namespace foregan {

/// Color frame in model space: (C,H,W) tensor, values in [-1, 1].
struct Frame {
    Tensor pixels;

    int channels() const { return pixels.dim(0); }
    int height() const { return pixels.dim(1); }
    int width() const { return pixels.dim(2); }
};

/// Depth frame, replicated to the model's channel count so the same network
/// architecture serves both modalities.
struct DepthFrame {
    Tensor pixels; // (C,H,W), values in [-1, 1]
    int source_bit_depth = 8;

    int channels() const { return pixels.dim(0); }
    int height() const { return pixels.dim(1); }
    int width() const { return pixels.dim(2); }
};

enum class PixelLabel : std::uint8_t { background = 0, foreground = 1, ignore = 2 };

struct GroundTruthFrame {
    int height = 0;
    int width = 0;
    std::vector<PixelLabel> labels; // row-major, height*width

    PixelLabel at(int y, int x) const {
        return labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + x];
    }
    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (PixelLabel l : labels)
            if (l == PixelLabel::foreground) ++n;
        return n;
    }
};

inline double normalize_u8(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }

inline std::uint8_t denormalize_u8(double x) {
    const double v = std::lround((x + 1.0) * 127.5);
    return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

/// Spreads a single-channel (1,H,W) tensor across `channels` identical planes.
Tensor replicate_channels(const Tensor& mono, int channels);

} // namespace foregan
