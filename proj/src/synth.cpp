#include "foregan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "foregan/errors.hpp"
#include "foregan/rng.hpp"

namespace fs = std::filesystem;

namespace foregan {

namespace {

struct Rect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0; // half-open, clipped to the frame
    int ox = 0, oy = 0;                 // unclipped origin: anchors the object texture
    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    bool empty() const { return x0 >= x1 || y0 >= y1; }
};

struct RawScene {
    int w = 0, h = 0;
    std::vector<std::vector<std::uint8_t>> rgb;            // per frame, h*w*3
    std::vector<std::vector<std::uint16_t>> depth;         // per frame, h*w
    std::vector<std::vector<std::uint8_t>> gt;             // per frame, h*w, 0/255
    std::vector<std::vector<std::uint8_t>> oracle_rgb;     // background incl. shadow
    std::vector<std::vector<std::uint16_t>> oracle_depth;  // background depth
    std::vector<int> background_only;
};

std::uint8_t quant8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

std::uint16_t quant16(double v) {
    return static_cast<std::uint16_t>(std::clamp(std::lround(v * 65535.0), 0L, 65535L));
}

// Object placement at frame t; empty when fully off-screen.
Rect object_rect(const SceneSpec& s, int t) {
    if (t < s.entry_frame) return Rect{};
    const double p = s.object_speed * (t - s.entry_frame) - s.object_size;
    const int travel = s.width - s.object_size;
    double x;
    if (p < 0.0) {
        x = p; // still sliding in from the left
    } else {
        const double period = 2.0 * travel;
        const double q = std::fmod(p, period);
        x = q <= travel ? q : period - q;
    }
    const double mid = (s.height - s.object_size) / 2.0;
    const double amp = std::min(mid, s.height / 6.0);
    const double y = mid + amp * std::sin(0.17 * (t - s.entry_frame));
    Rect r;
    r.ox = static_cast<int>(std::lround(x));
    r.oy = static_cast<int>(std::lround(y));
    r.x0 = std::max(0, r.ox);
    r.y0 = std::max(0, r.oy);
    r.x1 = std::min(s.width, r.ox + s.object_size);
    r.y1 = std::min(s.height, r.oy + s.object_size);
    if (r.empty()) return Rect{};
    return r;
}

Rect shadow_rect(const Rect& obj, const SceneSpec& s) {
    if (obj.empty()) return Rect{};
    Rect r;
    r.x0 = std::clamp(obj.x0 + 6, 0, s.width);
    r.y0 = std::clamp(obj.y0 + 5, 0, s.height);
    r.x1 = std::clamp(obj.x1 + 6, 0, s.width);
    r.y1 = std::clamp(obj.y1 + 5, 0, s.height);
    return r;
}

RawScene render_scene(std::uint64_t seed, const SceneSpec& s) {
    s.validate();
    RawScene scene;
    scene.w = s.width;
    scene.h = s.height;
    const int w = s.width, h = s.height;
    const std::size_t npx = static_cast<std::size_t>(w) * h;

    // static background appearance (shared by every frame)
    Rng texture_rng(Rng::derive(seed, 0xbac4d));
    std::vector<double> bg_r(npx), bg_g(npx), bg_b(npx), bg_d(npx);
    const Rect furniture1{w / 10, 2 * h / 3, w / 10 + w / 4, h};        // near block
    const Rect furniture2{2 * w / 3, h / 4, 2 * w / 3 + w / 5, 3 * h / 5};
    const Rect invalid_region = s.out_of_range_region ? Rect{3 * w / 4, 0, w, h / 5} : Rect{};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double fy = static_cast<double>(y) / (h - 1);
            double r = 0.55 - 0.18 * fy, g = 0.57 - 0.22 * fy, b = 0.62 - 0.28 * fy;
            double d = 0.78 + 0.04 * fy; // far wall, slightly slanted
            if (furniture1.contains(x, y)) {
                r = 0.30; g = 0.42; b = 0.52;
                d = 0.62;
            } else if (furniture2.contains(x, y)) {
                r = 0.58; g = 0.48; b = 0.32;
                d = 0.66;
            }
            const double grain = texture_rng.uniform(-0.06, 0.06);
            bg_r[i] = std::clamp(r + grain, 0.0, 1.0);
            bg_g[i] = std::clamp(g + grain, 0.0, 1.0);
            bg_b[i] = std::clamp(b + grain * 0.8, 0.0, 1.0);
            bg_d[i] = invalid_region.contains(x, y) ? 0.0 : d;
        }

    // object appearance: 2x2 checker texture so optical flow has structure
    double c1[3] = {0.85, 0.20, 0.15}, c2[3] = {0.95, 0.80, 0.25};
    if (s.color_camouflage) {
        const std::size_t center = (static_cast<std::size_t>(h / 2) * w) + w / 2;
        c1[0] = std::clamp(bg_r[center] + 0.04, 0.0, 1.0);
        c1[1] = std::clamp(bg_g[center] + 0.04, 0.0, 1.0);
        c1[2] = std::clamp(bg_b[center] + 0.04, 0.0, 1.0);
        c2[0] = std::clamp(bg_r[center] - 0.04, 0.0, 1.0);
        c2[1] = std::clamp(bg_g[center] - 0.04, 0.0, 1.0);
        c2[2] = std::clamp(bg_b[center] - 0.04, 0.0, 1.0);
    }
    const double object_depth = s.depth_camouflage ? 0.79 : 0.25;

    for (int t = 0; t < s.frame_count; ++t) {
        const Rect obj = object_rect(s, t);
        const Rect shadow = s.shadow ? shadow_rect(obj, s) : Rect{};
        if (obj.empty()) scene.background_only.push_back(t);

        Rng noise_rng(Rng::derive(seed, 0x70000 + static_cast<std::uint64_t>(t)));
        std::vector<std::uint8_t> rgb(npx * 3), orgb(npx * 3), gt(npx, 0);
        std::vector<std::uint16_t> depth(npx), odepth(npx);

        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                double r = bg_r[i], g = bg_g[i], b = bg_b[i], d = bg_d[i];
                const bool in_shadow = shadow.contains(x, y);
                if (in_shadow) {
                    r *= 0.55;
                    g *= 0.55;
                    b *= 0.58;
                }
                orgb[i * 3 + 0] = quant8(r);
                orgb[i * 3 + 1] = quant8(g);
                orgb[i * 3 + 2] = quant8(b);
                odepth[i] = quant16(d);

                if (obj.contains(x, y)) {
                    const int checker = (((x - obj.ox) / 4) + ((y - obj.oy) / 4)) % 2;
                    const double* c = checker ? c2 : c1;
                    r = c[0];
                    g = c[1];
                    b = c[2];
                    d = object_depth;
                    gt[i] = 255;
                }
                const double nr = noise_rng.normal(0.0, s.noise_sigma * 0.5);
                const double ng = noise_rng.normal(0.0, s.noise_sigma * 0.5);
                const double nb = noise_rng.normal(0.0, s.noise_sigma * 0.5);
                const double nd = noise_rng.normal(0.0, s.noise_sigma * 0.1);
                rgb[i * 3 + 0] = quant8(r + nr);
                rgb[i * 3 + 1] = quant8(g + ng);
                rgb[i * 3 + 2] = quant8(b + nb);
                depth[i] = d == 0.0 ? 0 : quant16(d + nd); // keep the invalid sentinel exact
            }

        scene.rgb.push_back(std::move(rgb));
        scene.depth.push_back(std::move(depth));
        scene.gt.push_back(std::move(gt));
        scene.oracle_rgb.push_back(std::move(orgb));
        scene.oracle_depth.push_back(std::move(odepth));
    }
    return scene;
}

Frame rgb_to_frame(const std::vector<std::uint8_t>& rgb, int h, int w) {
    Tensor t({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            t.at(0, y, x) = normalize_u8(rgb[i * 3 + 0]);
            t.at(1, y, x) = normalize_u8(rgb[i * 3 + 1]);
            t.at(2, y, x) = normalize_u8(rgb[i * 3 + 2]);
        }
    return Frame{std::move(t)};
}

GroundTruthFrame gt_to_frame(const std::vector<std::uint8_t>& raw, int h, int w) {
    GroundTruthFrame gt;
    gt.height = h;
    gt.width = w;
    gt.labels.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        gt.labels[i] = raw[i] == 255 ? PixelLabel::foreground : PixelLabel::background;
    return gt;
}

} // namespace

void SceneSpec::validate() const {
    if (width < 16 || height < 16) throw ParameterError("scene: size must be at least 16x16");
    if (frame_count < 2) throw ParameterError("scene: need at least 2 frames");
    if (object_size < 4 || object_size >= std::min(width, height))
        throw ParameterError("scene: object size out of range");
    if (object_speed <= 0.0) throw ParameterError("scene: object speed must be > 0");
    if (entry_frame < 0 || entry_frame >= frame_count)
        throw ParameterError("scene: entry frame out of range");
    if (noise_sigma < 0.0) throw ParameterError("scene: noise sigma must be >= 0");
}

Sequence synth_generate(std::uint64_t seed, const SceneSpec& spec) {
    const RawScene scene = render_scene(seed, spec);
    Sequence seq;
    seq.name = "synthetic";
    seq.category = spec.category;
    const int h = scene.h, w = scene.w;

    const auto [lo, hi] = depth16_valid_range(scene.depth);
    for (int t = 0; t < spec.frame_count; ++t) {
        seq.frames.push_back(rgb_to_frame(scene.rgb[static_cast<std::size_t>(t)], h, w));
        seq.depth_frames.push_back(DepthFrame{
            replicate_channels(
                normalize_depth16(scene.depth[static_cast<std::size_t>(t)], h, w, lo, hi), 3),
            16});
        seq.gt.push_back(gt_to_frame(scene.gt[static_cast<std::size_t>(t)], h, w));
        seq.oracle_rgb.push_back(rgb_to_frame(scene.oracle_rgb[static_cast<std::size_t>(t)], h, w));
        seq.oracle_depth.push_back(DepthFrame{
            replicate_channels(
                normalize_depth16(scene.oracle_depth[static_cast<std::size_t>(t)], h, w, lo, hi),
                3),
            16});
    }
    seq.background_only_indices = scene.background_only;
    return seq;
}

DatasetSpec save_synth_dataset(std::uint64_t seed, const SceneSpec& spec, const std::string& root,
                               const std::string& name) {
    const RawScene scene = render_scene(seed, spec);
    const fs::path base = fs::path(root) / name;
    const fs::path rgb_dir = base / "rgb";
    const fs::path depth_dir = base / "depth";
    const fs::path gt_dir = base / "gt";
    const fs::path orgb_dir = base / "oracle_rgb";
    const fs::path odepth_dir = base / "oracle_depth";
    for (const fs::path& d : {rgb_dir, depth_dir, gt_dir, orgb_dir, odepth_dir})
        fs::create_directories(d);

    char buf[32];
    for (int t = 0; t < spec.frame_count; ++t) {
        std::snprintf(buf, sizeof buf, "frame_%06d.png", t);
        write_rgb_png((rgb_dir / buf).string(),
                      rgb_to_frame(scene.rgb[static_cast<std::size_t>(t)], scene.h, scene.w));
        write_depth16_png((depth_dir / buf).string(), scene.depth[static_cast<std::size_t>(t)],
                          scene.h, scene.w);
        write_gray8_png((gt_dir / buf).string(), scene.gt[static_cast<std::size_t>(t)], scene.h,
                        scene.w);
        write_rgb_png((orgb_dir / buf).string(),
                      rgb_to_frame(scene.oracle_rgb[static_cast<std::size_t>(t)], scene.h, scene.w));
        write_depth16_png((odepth_dir / buf).string(),
                          scene.oracle_depth[static_cast<std::size_t>(t)], scene.h, scene.w);
    }

    DatasetSpec ds;
    ds.root = root;
    ds.category = spec.category;
    ds.image_size = spec.width;
    ds.background_only_from_gt = false;
    ds.background_only = scene.background_only;
    ds.save_json((fs::path(root) / (name + ".json")).string());
    return ds;
}

} // namespace foregan
