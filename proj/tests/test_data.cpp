#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "foregan/dataset.hpp"
#include "foregan/errors.hpp"
#include "foregan/synth.hpp"
#include "test_support.hpp"

using namespace foregan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("foregan_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("8-bit normalization round-trips exactly") {
    for (int v = 0; v <= 255; ++v)
        CHECK(denormalize_u8(normalize_u8(static_cast<std::uint8_t>(v))) == v);
}

TEST_CASE("16-bit depth normalization uses the sequence range and the invalid sentinel") {
    std::vector<std::vector<std::uint16_t>> raws = {{0, 1000, 2000, 3000}, {1500, 2500, 0, 1000}};
    const auto [lo, hi] = depth16_valid_range(raws);
    CHECK(lo == 1000);
    CHECK(hi == 3000);

    const Tensor t = normalize_depth16(raws[0], 2, 2, lo, hi);
    CHECK(t[0] == -1.0); // invalid sentinel
    CHECK(t[1] == doctest::Approx(-1.0));
    CHECK(t[2] == doctest::Approx(0.0));
    CHECK(t[3] == doctest::Approx(1.0));
}

TEST_CASE("augmentation identity, translation arithmetic and counting") {
    Frame base{Tensor({1, 12, 12}, 0.0)};
    base.pixels.at(0, 5, 5) = 0.9;

    AugmentConfig identity;
    identity.rotations_deg = {0.0};
    const std::vector<Frame> with_identity = augment({base}, identity);
    REQUIRE(with_identity.size() == 2);
    CHECK(max_abs_diff(with_identity[0].pixels, with_identity[1].pixels) == 0.0);

    AugmentConfig shift;
    shift.translations = {{2, 0}};
    const std::vector<Frame> shifted = augment({base}, shift);
    REQUIRE(shifted.size() == 2);
    CHECK(shifted[1].pixels.at(0, 5, 7) == doctest::Approx(0.9));
    CHECK(shifted[1].pixels.at(0, 5, 5) == doctest::Approx(0.0));

    AugmentConfig three;
    three.translations = {{1, 0}, {0, 1}};
    three.rotations_deg = {5.0};
    std::vector<Frame> ten(10, base);
    CHECK(augment(ten, three).size() == 40);
}

TEST_CASE("augmentation preserves the value range") {
    Rng rng(61);
    std::vector<Frame> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(Frame{testutil::random_tensor({3, 16, 16}, rng)});
    AugmentConfig cfg;
    cfg.translations = {{3, -2}};
    cfg.rotations_deg = {12.5, -7.0};
    for (const Frame& f : augment(frames, cfg)) {
        CHECK(f.pixels.min() >= -1.0);
        CHECK(f.pixels.max() <= 1.0);
    }
}

TEST_CASE("augmentation rejects bad inputs") {
    CHECK_THROWS_AS(augment({}, AugmentConfig{}), ParameterError);
    Frame base{Tensor({1, 8, 8})};
    AugmentConfig cfg;
    cfg.translations = {{8, 0}};
    CHECK_THROWS_AS(augment({base}, cfg), ParameterError);
}

TEST_CASE("synthetic scenes are deterministic") {
    const SceneSpec spec = testutil::tiny_scene();
    const Sequence a = synth_generate(1234, spec);
    const Sequence b = synth_generate(1234, spec);
    REQUIRE(a.frame_count() == b.frame_count());
    for (int t = 0; t < a.frame_count(); ++t) {
        CHECK(max_abs_diff(a.frames[t].pixels, b.frames[t].pixels) == 0.0);
        CHECK(max_abs_diff(a.depth_frames[t].pixels, b.depth_frames[t].pixels) == 0.0);
        CHECK(a.gt[t]->labels == b.gt[t]->labels);
    }
    CHECK(a.background_only_indices == b.background_only_indices);

    const Sequence c = synth_generate(99, spec);
    bool any_diff = false;
    for (int t = 0; t < a.frame_count() && !any_diff; ++t)
        any_diff = max_abs_diff(a.frames[t].pixels, c.frames[t].pixels) > 0.0;
    CHECK(any_diff);
}

TEST_CASE("synthetic ground truth matches the rendered object support") {
    SceneSpec spec = testutil::tiny_scene();
    spec.width = 32;
    spec.height = 32;
    spec.object_size = 8;
    spec.noise_sigma = 0.0; // image-vs-oracle diff isolates the object exactly
    const Sequence seq = synth_generate(7, spec);

    for (int idx : seq.background_only_indices) {
        CHECK(seq.gt[static_cast<std::size_t>(idx)]->foreground_count() == 0);
    }
    for (int e = 0; e < spec.entry_frame; ++e) {
        const bool listed = std::find(seq.background_only_indices.begin(),
                                      seq.background_only_indices.end(),
                                      e) != seq.background_only_indices.end();
        CHECK(listed);
    }

    std::size_t checked_full = 0;
    for (int t = 0; t < seq.frame_count(); ++t) {
        const GroundTruthFrame& gt = *seq.gt[static_cast<std::size_t>(t)];
        std::size_t mismatches = 0;
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                double diff = 0.0;
                for (int c = 0; c < 3; ++c)
                    diff = std::max(diff, std::abs(seq.frames[t].pixels.at(c, y, x) -
                                                   seq.oracle_rgb[t].pixels.at(c, y, x)));
                const bool changed = diff > 1e-9;
                const bool fg = gt.at(y, x) == PixelLabel::foreground;
                // every changed pixel must be object; object pixels may rarely
                // coincide with the background color
                if (changed && !fg) ++mismatches;
            }
        CHECK(mismatches == 0);
        if (gt.foreground_count() ==
            static_cast<std::size_t>(spec.object_size) * spec.object_size)
            ++checked_full;
    }
    CHECK(checked_full > 0); // the object was fully inside the frame at least once
}

TEST_CASE("synthetic dataset round-trips through the PNG loader") {
    TempDir tmp("roundtrip");
    SceneSpec spec = testutil::tiny_scene();
    spec.frame_count = 12;
    const DatasetSpec ds = save_synth_dataset(77, spec, tmp.path.string(), "seq");
    const Sequence from_disk = load_sequence(ds, "seq");
    const Sequence in_memory = synth_generate(77, spec);

    REQUIRE(from_disk.frame_count() == in_memory.frame_count());
    for (int t = 0; t < from_disk.frame_count(); ++t) {
        CHECK(max_abs_diff(from_disk.frames[t].pixels, in_memory.frames[t].pixels) == 0.0);
        CHECK(max_abs_diff(from_disk.depth_frames[t].pixels,
                           in_memory.depth_frames[t].pixels) == 0.0);
        CHECK(from_disk.gt[t]->labels == in_memory.gt[t]->labels);
        CHECK(max_abs_diff(from_disk.oracle_rgb[t].pixels, in_memory.oracle_rgb[t].pixels) == 0.0);
        CHECK(max_abs_diff(from_disk.oracle_depth[t].pixels,
                           in_memory.oracle_depth[t].pixels) == 0.0);
    }
    CHECK(from_disk.background_only_indices == in_memory.background_only_indices);
    CHECK(from_disk.depth_frames[0].source_bit_depth == 16);
    CHECK(from_disk.depth_frames[0].channels() == 3);

    // the spec file placed next to the sequence reloads equivalently
    const DatasetSpec reloaded =
        DatasetSpec::from_json_file((tmp.path / "seq.json").string());
    const Sequence again = load_sequence(reloaded, "seq");
    CHECK(again.frame_count() == from_disk.frame_count());
    CHECK(again.background_only_indices == from_disk.background_only_indices);
}

TEST_CASE("well-formed directory loads the expected frame count") {
    TempDir tmp("wellformed");
    SceneSpec spec = testutil::tiny_scene();
    spec.frame_count = 10;
    const DatasetSpec ds = save_synth_dataset(5, spec, tmp.path.string(), "seq");
    const Sequence seq = load_sequence(ds, "seq");
    CHECK(seq.frame_count() == 10);
}

TEST_CASE("loader errors: missing directory and mismatched counts") {
    TempDir tmp("loaderr");
    DatasetSpec ds;
    ds.root = tmp.path.string();
    CHECK_THROWS_AS(load_sequence(ds, "nope"), LoadError);

    SceneSpec spec = testutil::tiny_scene();
    spec.frame_count = 10;
    const DatasetSpec synth_ds = save_synth_dataset(5, spec, tmp.path.string(), "seq");
    fs::remove(tmp.path / "seq" / "depth" / "frame_000009.png");
    try {
        load_sequence(synth_ds, "seq");
        FAIL("expected a structural error");
    } catch (const StructuralError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("frame_000009.png") != std::string::npos);
    }
}

TEST_CASE("ground-truth decoding follows the label map") {
    TempDir tmp("gtmap");
    const fs::path seq_dir = tmp.path / "seq";
    fs::create_directories(seq_dir / "rgb");
    fs::create_directories(seq_dir / "gt");

    const int size = 16;
    Frame rgb{Tensor({3, size, size}, 0.0)};
    write_rgb_png((seq_dir / "rgb" / "frame_000000.png").string(), rgb);

    // three regions with raw values 0 / 255 / 85
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(size) * size, 0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            if (x >= 10) raw[static_cast<std::size_t>(y) * size + x] = 85;
            else if (x >= 5) raw[static_cast<std::size_t>(y) * size + x] = 255;
        }
    write_gray8_png((seq_dir / "gt" / "frame_000000.png").string(), raw, size, size);

    DatasetSpec ds;
    ds.root = tmp.path.string();
    ds.image_size = size;
    ds.label_map = {{0, PixelLabel::background},
                    {255, PixelLabel::foreground},
                    {85, PixelLabel::ignore}};
    const Sequence seq = load_sequence(ds, "seq");
    REQUIRE(seq.has_gt(0));

    std::size_t bg = 0, fg = 0, ig = 0;
    for (PixelLabel l : seq.gt[0]->labels) {
        if (l == PixelLabel::background) ++bg;
        else if (l == PixelLabel::foreground) ++fg;
        else ++ig;
    }
    // label histogram must match the raw-value histogram
    CHECK(bg == static_cast<std::size_t>(5 * size));
    CHECK(fg == static_cast<std::size_t>(5 * size));
    CHECK(ig == static_cast<std::size_t>(6 * size));
}

TEST_CASE("ground truth is resized with nearest neighbor only") {
    TempDir tmp("gtresize");
    const fs::path seq_dir = tmp.path / "seq";
    fs::create_directories(seq_dir / "rgb");
    fs::create_directories(seq_dir / "gt");

    Frame rgb{Tensor({3, 32, 32}, 0.0)};
    write_rgb_png((seq_dir / "rgb" / "frame_000000.png").string(), rgb);

    // blocky 0/255 pattern at twice the model size
    std::vector<std::uint8_t> raw(32 * 32, 0);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (((x / 8) + (y / 8)) % 2) raw[static_cast<std::size_t>(y) * 32 + x] = 255;
    write_gray8_png((seq_dir / "gt" / "frame_000000.png").string(), raw, 32, 32);

    DatasetSpec ds;
    ds.root = tmp.path.string();
    ds.image_size = 16;
    const Sequence seq = load_sequence(ds, "seq");
    REQUIRE(seq.has_gt(0));
    // interpolation would synthesize values outside {0,255}, which the default
    // map sends to ignore
    for (PixelLabel l : seq.gt[0]->labels) CHECK(l != PixelLabel::ignore);
}

TEST_CASE("challenge-category scene flags shape the rendered data") {
    SceneSpec base = testutil::tiny_scene();
    base.width = 32;
    base.height = 32;
    base.object_size = 10;
    base.noise_sigma = 0.0;
    const int t = 16; // object well inside the frame

    SceneSpec depth_cam = base;
    depth_cam.depth_camouflage = true;
    const Sequence plain = synth_generate(4, base);
    const Sequence camo = synth_generate(4, depth_cam);
    auto mean_depth_residual = [&](const Sequence& seq) {
        double total = 0.0;
        std::size_t n = 0;
        for (int f = 0; f < seq.frame_count(); ++f) {
            const GroundTruthFrame& gt = *seq.gt[f];
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x)
                    if (gt.at(y, x) == PixelLabel::foreground) {
                        total += std::abs(seq.depth_frames[f].pixels.at(0, y, x) -
                                          seq.oracle_depth[f].pixels.at(0, y, x));
                        ++n;
                    }
        }
        return total / static_cast<double>(n);
    };
    // a depth-camouflaged object mostly vanishes from the depth residual
    // (it still differs where it passes in front of nearer furniture)
    CHECK(mean_depth_residual(camo) < 0.45 * mean_depth_residual(plain));
    CHECK(mean_depth_residual(plain) > 1.0);

    SceneSpec oor = base;
    oor.out_of_range_region = true;
    const Sequence saturated = synth_generate(4, oor);
    std::size_t invalid = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (saturated.depth_frames[0].pixels.at(0, y, x) == -1.0) ++invalid;
    CHECK(invalid > 16); // the saturated region maps to the invalid sentinel

    SceneSpec color_cam = base;
    color_cam.color_camouflage = true;
    const Sequence hidden = synth_generate(4, color_cam);
    auto rgb_residual_on_object = [&](const Sequence& seq) {
        double total = 0.0;
        std::size_t n = 0;
        const GroundTruthFrame& gt = *seq.gt[t];
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x)
                    if (gt.at(y, x) == PixelLabel::foreground) {
                        total += std::abs(seq.frames[t].pixels.at(c, y, x) -
                                          seq.oracle_rgb[t].pixels.at(c, y, x));
                        ++n;
                    }
        return total / static_cast<double>(n);
    };
    CHECK(rgb_residual_on_object(hidden) < 0.2);
    CHECK(rgb_residual_on_object(plain) > 0.3);
}

TEST_CASE("background-only indices validate against the frame count") {
    TempDir tmp("bgidx");
    SceneSpec spec = testutil::tiny_scene();
    spec.frame_count = 6;
    spec.entry_frame = 2;
    DatasetSpec ds = save_synth_dataset(5, spec, tmp.path.string(), "seq");
    ds.background_only_from_gt = false;
    ds.background_only = {0, 99};
    CHECK_THROWS_AS(load_sequence(ds, "seq"), StructuralError);
}
