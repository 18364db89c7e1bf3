#include "foregan/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "foregan/errors.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace foregan {

namespace {

std::vector<fs::path> list_pngs(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

int trailing_index(const fs::path& file) {
    const std::string stem = file.stem().string();
    int end = static_cast<int>(stem.size());
    while (end > 0 && std::isdigit(static_cast<unsigned char>(stem[static_cast<std::size_t>(end) - 1])))
        --end;
    if (end == static_cast<int>(stem.size()))
        throw StructuralError("cannot parse frame index from " + file.string());
    return std::stoi(stem.substr(static_cast<std::size_t>(end)));
}

cv::Mat resize_to(const cv::Mat& img, int size, int interpolation) {
    if (img.rows == size && img.cols == size) return img;
    cv::Mat out;
    cv::resize(img, out, cv::Size(size, size), 0, 0, interpolation);
    return out;
}

Frame decode_rgb(const fs::path& path, int image_size) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw LoadError("cannot decode image: " + path.string());
    bgr = resize_to(bgr, image_size, cv::INTER_AREA);
    Tensor t({3, image_size, image_size});
    for (int y = 0; y < image_size; ++y)
        for (int x = 0; x < image_size; ++x) {
            const cv::Vec3b px = bgr.at<cv::Vec3b>(y, x);
            t.at(0, y, x) = normalize_u8(px[2]);
            t.at(1, y, x) = normalize_u8(px[1]);
            t.at(2, y, x) = normalize_u8(px[0]);
        }
    return Frame{std::move(t)};
}

struct RawDepth {
    std::vector<std::uint16_t> values;
    int bit_depth = 8;
};

RawDepth decode_depth_raw(const fs::path& path, int image_size) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (img.empty()) throw LoadError("cannot decode depth image: " + path.string());
    if (img.channels() != 1) cv::cvtColor(img, img, cv::COLOR_BGR2GRAY);
    RawDepth raw;
    raw.bit_depth = img.depth() == CV_16U ? 16 : 8;
    img = resize_to(img, image_size, cv::INTER_AREA);
    raw.values.resize(static_cast<std::size_t>(image_size) * image_size);
    for (int y = 0; y < image_size; ++y)
        for (int x = 0; x < image_size; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * image_size + x;
            raw.values[i] = raw.bit_depth == 16 ? img.at<std::uint16_t>(y, x)
                                                : static_cast<std::uint16_t>(img.at<std::uint8_t>(y, x));
        }
    return raw;
}

GroundTruthFrame decode_gt(const fs::path& path, int image_size,
                           const std::map<int, PixelLabel>& label_map) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (img.empty()) throw LoadError("cannot decode ground truth: " + path.string());
    img = resize_to(img, image_size, cv::INTER_NEAREST);
    GroundTruthFrame gt;
    gt.height = image_size;
    gt.width = image_size;
    gt.labels.resize(static_cast<std::size_t>(image_size) * image_size);
    for (int y = 0; y < image_size; ++y)
        for (int x = 0; x < image_size; ++x) {
            const int raw = img.at<std::uint8_t>(y, x);
            const auto it = label_map.find(raw);
            gt.labels[static_cast<std::size_t>(y) * image_size + x] =
                it == label_map.end() ? PixelLabel::ignore : it->second;
        }
    return gt;
}

void require_matched_counts(const std::vector<fs::path>& reference,
                            const std::vector<fs::path>& other, const std::string& what) {
    if (reference.size() == other.size()) return;
    if (other.size() < reference.size()) {
        const fs::path& unmatched = reference[other.size()];
        throw StructuralError(what + " frame count (" + std::to_string(other.size()) +
                              ") does not match rgb count (" + std::to_string(reference.size()) +
                              "): no counterpart for " + unmatched.string());
    }
    const fs::path& extra = other[reference.size()];
    throw StructuralError(what + " frame count (" + std::to_string(other.size()) +
                          ") does not match rgb count (" + std::to_string(reference.size()) +
                          "): unexpected file " + extra.string());
}

} // namespace

// ---------------------------------------------------------------------------
// DatasetSpec JSON

DatasetSpec DatasetSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open dataset spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("invalid dataset spec JSON in " + path + ": " + e.what());
    }

    DatasetSpec spec;
    const fs::path spec_dir = fs::path(path).parent_path();
    std::string root = j.value("root", std::string());
    if (root.empty()) {
        spec.root = spec_dir.string();
    } else if (fs::path(root).is_relative()) {
        spec.root = (spec_dir / root).string();
    } else {
        spec.root = root;
    }
    spec.rgb_dir = j.value("rgb_dir", spec.rgb_dir);
    spec.depth_dir = j.value("depth_dir", spec.depth_dir);
    spec.gt_dir = j.value("gt_dir", spec.gt_dir);
    spec.oracle_rgb_dir = j.value("oracle_rgb_dir", spec.oracle_rgb_dir);
    spec.oracle_depth_dir = j.value("oracle_depth_dir", spec.oracle_depth_dir);
    spec.category = j.value("category", spec.category);
    spec.image_size = j.value("image_size", spec.image_size);
    if (j.contains("label_map")) {
        spec.label_map.clear();
        for (const auto& [key, value] : j.at("label_map").items()) {
            const std::string name = value.get<std::string>();
            PixelLabel label;
            if (name == "background") label = PixelLabel::background;
            else if (name == "foreground") label = PixelLabel::foreground;
            else if (name == "ignore") label = PixelLabel::ignore;
            else throw LoadError("dataset spec: unknown label '" + name + "' in " + path);
            spec.label_map[std::stoi(key)] = label;
        }
    }
    if (j.contains("background_only")) {
        spec.background_only_from_gt = false;
        spec.background_only = j.at("background_only").get<std::vector<int>>();
    }
    return spec;
}

void DatasetSpec::save_json(const std::string& path) const {
    nlohmann::json j;
    j["root"] = ".";
    j["rgb_dir"] = rgb_dir;
    j["depth_dir"] = depth_dir;
    j["gt_dir"] = gt_dir;
    j["oracle_rgb_dir"] = oracle_rgb_dir;
    j["oracle_depth_dir"] = oracle_depth_dir;
    j["category"] = category;
    j["image_size"] = image_size;
    nlohmann::json lm = nlohmann::json::object();
    for (const auto& [raw, label] : label_map) {
        const char* name = label == PixelLabel::background  ? "background"
                           : label == PixelLabel::foreground ? "foreground"
                                                             : "ignore";
        lm[std::to_string(raw)] = name;
    }
    j["label_map"] = lm;
    if (!background_only_from_gt) j["background_only"] = background_only;

    std::ofstream out(path);
    if (!out) throw LoadError("cannot write dataset spec: " + path);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Sequence loading

Sequence load_sequence(const DatasetSpec& spec, const std::string& name) {
    const fs::path seq_dir = fs::path(spec.root) / name;
    const fs::path rgb_dir = seq_dir / spec.rgb_dir;
    if (!fs::is_directory(rgb_dir))
        throw LoadError("missing rgb directory: " + rgb_dir.string());
    const std::vector<fs::path> rgb_files = list_pngs(rgb_dir);
    if (rgb_files.empty()) throw LoadError("no rgb frames in " + rgb_dir.string());

    Sequence seq;
    seq.name = name;
    seq.category = spec.category;
    for (const fs::path& f : rgb_files) seq.frames.push_back(decode_rgb(f, spec.image_size));
    const int n = seq.frame_count();

    const fs::path depth_dir = seq_dir / spec.depth_dir;
    if (fs::is_directory(depth_dir)) {
        const std::vector<fs::path> depth_files = list_pngs(depth_dir);
        if (!depth_files.empty()) {
            require_matched_counts(rgb_files, depth_files, "depth");
            std::vector<RawDepth> raws;
            raws.reserve(depth_files.size());
            for (const fs::path& f : depth_files)
                raws.push_back(decode_depth_raw(f, spec.image_size));

            const bool sixteen = raws.front().bit_depth == 16;
            std::uint16_t lo = 0, hi = 255;
            if (sixteen) {
                std::vector<std::vector<std::uint16_t>> all;
                for (const RawDepth& r : raws) all.push_back(r.values);
                std::tie(lo, hi) = depth16_valid_range(all);
            }
            for (const RawDepth& r : raws) {
                Tensor mono =
                    sixteen ? normalize_depth16(r.values, spec.image_size, spec.image_size, lo, hi)
                            : [&] {
                                  Tensor t({1, spec.image_size, spec.image_size});
                                  for (int i = 0; i < t.size(); ++i)
                                      t[i] = normalize_u8(static_cast<std::uint8_t>(r.values[
                                          static_cast<std::size_t>(i)]));
                                  return t;
                              }();
                seq.depth_frames.push_back(
                    DepthFrame{replicate_channels(mono, 3), r.bit_depth});
            }
            // oracle depth reuses the main sequence's normalization range
            const fs::path odir = seq_dir / spec.oracle_depth_dir;
            if (fs::is_directory(odir)) {
                const std::vector<fs::path> ofiles = list_pngs(odir);
                if (!ofiles.empty()) {
                    require_matched_counts(rgb_files, ofiles, "oracle depth");
                    for (const fs::path& f : ofiles) {
                        RawDepth r = decode_depth_raw(f, spec.image_size);
                        Tensor mono =
                            sixteen ? normalize_depth16(r.values, spec.image_size, spec.image_size,
                                                        lo, hi)
                                    : [&] {
                                          Tensor t({1, spec.image_size, spec.image_size});
                                          for (int i = 0; i < t.size(); ++i)
                                              t[i] = normalize_u8(static_cast<std::uint8_t>(
                                                  r.values[static_cast<std::size_t>(i)]));
                                          return t;
                                      }();
                        seq.oracle_depth.push_back(
                            DepthFrame{replicate_channels(mono, 3), r.bit_depth});
                    }
                }
            }
        }
    }

    const fs::path gt_dir = seq_dir / spec.gt_dir;
    if (fs::is_directory(gt_dir)) {
        const std::vector<fs::path> gt_files = list_pngs(gt_dir);
        if (!gt_files.empty()) {
            seq.gt.assign(static_cast<std::size_t>(n), std::nullopt);
            for (const fs::path& f : gt_files) {
                const int idx = trailing_index(f);
                if (idx < 0 || idx >= n)
                    throw StructuralError("ground truth file " + f.string() +
                                          " has no matching rgb frame (index " +
                                          std::to_string(idx) + ")");
                seq.gt[static_cast<std::size_t>(idx)] = decode_gt(f, spec.image_size, spec.label_map);
            }
        }
    }

    const fs::path orgb_dir = seq_dir / spec.oracle_rgb_dir;
    if (fs::is_directory(orgb_dir)) {
        const std::vector<fs::path> ofiles = list_pngs(orgb_dir);
        if (!ofiles.empty()) {
            require_matched_counts(rgb_files, ofiles, "oracle rgb");
            for (const fs::path& f : ofiles) seq.oracle_rgb.push_back(decode_rgb(f, spec.image_size));
        }
    }

    if (!spec.background_only_from_gt) {
        for (int idx : spec.background_only) {
            if (idx < 0 || idx >= n)
                throw StructuralError("background_only index " + std::to_string(idx) +
                                      " is out of range for sequence " + name);
        }
        seq.background_only_indices = spec.background_only;
        std::sort(seq.background_only_indices.begin(), seq.background_only_indices.end());
    } else if (!seq.gt.empty()) {
        for (int i = 0; i < n; ++i)
            if (seq.gt[static_cast<std::size_t>(i)] &&
                seq.gt[static_cast<std::size_t>(i)]->foreground_count() == 0)
                seq.background_only_indices.push_back(i);
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Augmentation

Frame translate_frame(const Frame& f, int dx, int dy) {
    const int c = f.channels(), h = f.height(), w = f.width();
    if (std::abs(dx) >= w || std::abs(dy) >= h)
        throw ParameterError("translation exceeds image extent");
    Frame out{Tensor({c, h, w})};
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int sy = std::clamp(y - dy, 0, h - 1);
                const int sx = std::clamp(x - dx, 0, w - 1);
                out.pixels.at(ch, y, x) = f.pixels.at(ch, sy, sx);
            }
    return out;
}

Frame rotate_frame(const Frame& f, double degrees) {
    const int c = f.channels(), h = f.height(), w = f.width();
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    Frame out{Tensor({c, h, w})};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double sx = cs * (x - cx) + sn * (y - cy) + cx;
            const double sy = -sn * (x - cx) + cs * (y - cy) + cy;
            const double fx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
            const double fy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
            const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
            const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
            const double ax = fx - x0, ay = fy - y0;
            for (int ch = 0; ch < c; ++ch) {
                const double v = f.pixels.at(ch, y0, x0) * (1 - ay) * (1 - ax) +
                                 f.pixels.at(ch, y0, x1) * (1 - ay) * ax +
                                 f.pixels.at(ch, y1, x0) * ay * (1 - ax) +
                                 f.pixels.at(ch, y1, x1) * ay * ax;
                out.pixels.at(ch, y, x) = v;
            }
        }
    return out;
}

std::vector<Frame> augment(const std::vector<Frame>& frames, const AugmentConfig& cfg) {
    if (frames.empty()) throw ParameterError("augment: empty input");
    std::vector<Frame> out = frames;
    out.reserve(frames.size() * static_cast<std::size_t>(1 + cfg.transform_count()));
    for (const auto& [dx, dy] : cfg.translations)
        for (const Frame& f : frames) out.push_back(translate_frame(f, dx, dy));
    for (double deg : cfg.rotations_deg)
        for (const Frame& f : frames) out.push_back(rotate_frame(f, deg));
    return out;
}

// ---------------------------------------------------------------------------
// Depth normalization

std::pair<std::uint16_t, std::uint16_t> depth16_valid_range(
    const std::vector<std::vector<std::uint16_t>>& raw_frames) {
    std::uint16_t lo = 65535, hi = 0;
    bool any = false;
    for (const auto& frame : raw_frames)
        for (std::uint16_t v : frame) {
            if (v == 0) continue; // invalid-depth sentinel
            any = true;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!any) return {1, 1};
    return {lo, hi};
}

Tensor normalize_depth16(const std::vector<std::uint16_t>& raw, int height, int width,
                         std::uint16_t lo, std::uint16_t hi) {
    Tensor t({1, height, width});
    const double span = hi > lo ? static_cast<double>(hi - lo) : 1.0;
    for (int i = 0; i < t.size(); ++i) {
        const std::uint16_t v = raw[static_cast<std::size_t>(i)];
        t[i] = v == 0 ? -1.0 : 2.0 * (static_cast<double>(v - lo) / span) - 1.0;
    }
    return t;
}

// ---------------------------------------------------------------------------
// PNG helpers

Frame load_rgb_png(const std::string& path, int image_size) {
    return decode_rgb(fs::path(path), image_size);
}

void write_rgb_png(const std::string& path, const Frame& frame) {
    const int h = frame.height(), w = frame.width();
    cv::Mat bgr(h, w, CV_8UC3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int c = frame.channels();
            const std::uint8_t r = denormalize_u8(frame.pixels.at(0, y, x));
            const std::uint8_t g = denormalize_u8(frame.pixels.at(c > 1 ? 1 : 0, y, x));
            const std::uint8_t b = denormalize_u8(frame.pixels.at(c > 2 ? 2 : 0, y, x));
            bgr.at<cv::Vec3b>(y, x) = cv::Vec3b(b, g, r);
        }
    if (!cv::imwrite(path, bgr)) throw LoadError("cannot write image: " + path);
}

void write_mask_png(const std::string& path, const std::vector<std::uint8_t>& mask, int height,
                    int width) {
    cv::Mat img(height, width, CV_8UC1);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img.at<std::uint8_t>(y, x) =
                mask[static_cast<std::size_t>(y) * width + x] ? 255 : 0;
    if (!cv::imwrite(path, img)) throw LoadError("cannot write mask: " + path);
}

std::vector<std::uint8_t> read_mask_png(const std::string& path, int& height, int& width) {
    cv::Mat img = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (img.empty()) throw LoadError("cannot read mask: " + path);
    height = img.rows;
    width = img.cols;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            mask[static_cast<std::size_t>(y) * width + x] = img.at<std::uint8_t>(y, x) >= 128 ? 1 : 0;
    return mask;
}

void write_depth16_png(const std::string& path, const std::vector<std::uint16_t>& raw, int height,
                       int width) {
    cv::Mat img(height, width, CV_16UC1);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img.at<std::uint16_t>(y, x) = raw[static_cast<std::size_t>(y) * width + x];
    if (!cv::imwrite(path, img)) throw LoadError("cannot write depth image: " + path);
}

void write_gray8_png(const std::string& path, const std::vector<std::uint8_t>& gray, int height,
                     int width) {
    cv::Mat img(height, width, CV_8UC1);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img.at<std::uint8_t>(y, x) = gray[static_cast<std::size_t>(y) * width + x];
    if (!cv::imwrite(path, img)) throw LoadError("cannot write image: " + path);
}

} // namespace foregan
