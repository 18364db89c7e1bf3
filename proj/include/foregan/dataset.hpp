#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "foregan/image.hpp"

namespace foregan {

/// Disk layout + decoding rules for one dataset root. Subdirectories are per
/// sequence: <root>/<sequence>/{rgb,depth,gt}/frame_%06d.png.
struct DatasetSpec {
    std::string root;
    std::string rgb_dir = "rgb";
    std::string depth_dir = "depth";
    std::string gt_dir = "gt";
    std::string oracle_rgb_dir = "oracle_rgb";
    std::string oracle_depth_dir = "oracle_depth";
    std::map<int, PixelLabel> label_map = {{0, PixelLabel::background},
                                           {255, PixelLabel::foreground}};
    bool background_only_from_gt = true; // derive from empty-GT frames when no explicit list
    std::vector<int> background_only;    // explicit frame indices
    std::string category = "uncategorized";
    int image_size = 64;

    static DatasetSpec from_json_file(const std::string& path);
    void save_json(const std::string& path) const;
};

struct Sequence {
    std::string name;
    std::string category;
    std::vector<Frame> frames;
    std::vector<DepthFrame> depth_frames;            // empty, or parallel to frames
    std::vector<std::optional<GroundTruthFrame>> gt; // empty, or parallel to frames
    std::vector<int> background_only_indices;        // sorted, no duplicates
    // True per-frame backgrounds for oracle-generator runs; present for
    // synthetic data only.
    std::vector<Frame> oracle_rgb;
    std::vector<DepthFrame> oracle_depth;

    int frame_count() const { return static_cast<int>(frames.size()); }
    bool has_depth() const { return !depth_frames.empty(); }
    bool has_gt(int i) const {
        return !gt.empty() && gt[static_cast<std::size_t>(i)].has_value();
    }
    bool has_oracle() const { return !oracle_rgb.empty(); }
};

/// Loads, resizes and normalizes one sequence. RGB and depth are resized with
/// area averaging, ground truth with nearest neighbor.
Sequence load_sequence(const DatasetSpec& spec, const std::string& name);

struct AugmentConfig {
    std::vector<std::pair<int, int>> translations; // (dx, dy) in pixels
    std::vector<double> rotations_deg;

    int transform_count() const {
        return static_cast<int>(translations.size() + rotations_deg.size());
    }
};

/// Returns the originals followed by one translated/rotated copy of the whole
/// input per configured transform.
std::vector<Frame> augment(const std::vector<Frame>& frames, const AugmentConfig& cfg);

/// Integer translation with replicated borders; content moves by (+dx, +dy).
Frame translate_frame(const Frame& f, int dx, int dy);

/// Rotation about the image center, bilinear sampling, replicated borders.
Frame rotate_frame(const Frame& f, double degrees);

// --- depth normalization -----------------------------------------------------

/// Min/max of the valid (non-zero) 16-bit depth values across a sequence.
std::pair<std::uint16_t, std::uint16_t> depth16_valid_range(
    const std::vector<std::vector<std::uint16_t>>& raw_frames);

/// Maps valid values into [-1,1] with the sequence-wide range; the invalid
/// sentinel 0 maps to -1.
Tensor normalize_depth16(const std::vector<std::uint16_t>& raw, int height, int width,
                         std::uint16_t lo, std::uint16_t hi);

// --- PNG helpers --------------------------------------------------------------

Frame load_rgb_png(const std::string& path, int image_size);
void write_rgb_png(const std::string& path, const Frame& frame);
void write_mask_png(const std::string& path, const std::vector<std::uint8_t>& mask, int height,
                    int width);
std::vector<std::uint8_t> read_mask_png(const std::string& path, int& height, int& width);
void write_depth16_png(const std::string& path, const std::vector<std::uint16_t>& raw, int height,
                       int width);
void write_gray8_png(const std::string& path, const std::vector<std::uint8_t>& gray, int height,
                     int width);

} // namespace foregan
