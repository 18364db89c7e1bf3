#pragma once

#include <cstdint>
#include <string>

#include "foregan/dataset.hpp"

namespace foregan {

/// Parameters of the deterministic synthetic RGB-D scene: a textured static
/// background with a bouncing textured object, optional shadow overlay and
/// color/depth camouflage, plus an optional saturated (invalid) depth region.
struct SceneSpec {
    int width = 64;
    int height = 64;
    int frame_count = 100;
    int object_size = 18;
    double object_speed = 1.6; // pixels/frame
    int entry_frame = 10;      // frames before this contain background only
    bool shadow = true;
    bool color_camouflage = false;
    bool depth_camouflage = false;
    bool out_of_range_region = false;
    double noise_sigma = 0.01; // sensor noise in normalized units
    std::string category = "synthetic";

    void validate() const;
};

/// Renders the scene into an in-memory sequence: RGB + depth frames, exact
/// ground truth, background-only indices and per-frame oracle backgrounds.
/// Bit-identical for a fixed (seed, spec) pair, and identical to what
/// save_synth_dataset + load_sequence produce.
Sequence synth_generate(std::uint64_t seed, const SceneSpec& spec);

/// Materializes the same scene as a PNG dataset under <root>/<name>/ and
/// writes the matching dataset spec to <root>/<name>.json.
DatasetSpec save_synth_dataset(std::uint64_t seed, const SceneSpec& spec, const std::string& root,
                               const std::string& name);

} // namespace foregan
