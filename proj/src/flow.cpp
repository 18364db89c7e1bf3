#include "foregan/flow.hpp"

#include <algorithm>
#include <cmath>

#include "foregan/errors.hpp"

namespace foregan {

namespace {

double sample_bilinear(const std::vector<double>& img, int h, int w, double y, double x) {
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const double fy = y - y0, fx = x - x0;
    const double a = img[static_cast<std::size_t>(y0) * w + x0];
    const double b = img[static_cast<std::size_t>(y0) * w + x1];
    const double c = img[static_cast<std::size_t>(y1) * w + x0];
    const double d = img[static_cast<std::size_t>(y1) * w + x1];
    return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx;
}

struct Pyramid {
    std::vector<int> hs, ws;
    std::vector<std::vector<double>> imgs;
};

std::vector<double> downsample2(const std::vector<double>& img, int h, int w, int& oh, int& ow) {
    // 5-tap binomial blur, then decimate by 2
    static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    std::vector<double> tmp(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t)
                acc += k[t + 2] * img[static_cast<std::size_t>(y) * w + std::clamp(x + t, 0, w - 1)];
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    std::vector<double> blur(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t)
                acc += k[t + 2] * tmp[static_cast<std::size_t>(std::clamp(y + t, 0, h - 1)) * w + x];
            blur[static_cast<std::size_t>(y) * w + x] = acc;
        }
    oh = (h + 1) / 2;
    ow = (w + 1) / 2;
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out[static_cast<std::size_t>(y) * ow + x] = blur[static_cast<std::size_t>(2 * y) * w + 2 * x];
    return out;
}

Pyramid build_pyramid(const Tensor& gray, int levels) {
    Pyramid p;
    p.hs.push_back(gray.dim(0));
    p.ws.push_back(gray.dim(1));
    p.imgs.emplace_back(gray.data(), gray.data() + gray.size());
    for (int l = 1; l < levels; ++l) {
        const int h = p.hs.back(), w = p.ws.back();
        if (h < 16 || w < 16) break;
        int oh = 0, ow = 0;
        p.imgs.push_back(downsample2(p.imgs.back(), h, w, oh, ow));
        p.hs.push_back(oh);
        p.ws.push_back(ow);
    }
    return p;
}

void upsample_flow(std::vector<double>& u, std::vector<double>& v, int h, int w, int nh, int nw) {
    std::vector<double> nu(static_cast<std::size_t>(nh) * nw), nv(nu.size());
    const double sy = static_cast<double>(h) / nh, sx = static_cast<double>(w) / nw;
    for (int y = 0; y < nh; ++y)
        for (int x = 0; x < nw; ++x) {
            const double src_y = (y + 0.5) * sy - 0.5;
            const double src_x = (x + 0.5) * sx - 0.5;
            nu[static_cast<std::size_t>(y) * nw + x] = 2.0 * sample_bilinear(u, h, w, src_y, src_x);
            nv[static_cast<std::size_t>(y) * nw + x] = 2.0 * sample_bilinear(v, h, w, src_y, src_x);
        }
    u = std::move(nu);
    v = std::move(nv);
}

// One pyramid level: warp, linearize, then Jacobi iterations on the full flow
// field with the classic 8-neighbor smoothness average.
void refine_level(const std::vector<double>& i1, const std::vector<double>& i2, int h, int w,
                  std::vector<double>& u, std::vector<double>& v,
                  const HornSchunckFlow::Params& prm) {
    const auto idx = [w](int y, int x) { return static_cast<std::size_t>(y) * w + x; };
    std::vector<double> warped(static_cast<std::size_t>(h) * w);
    std::vector<double> ix(warped.size()), iy(warped.size()), c(warped.size());

    for (int pass = 0; pass < prm.warp_iterations; ++pass) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                warped[idx(y, x)] = sample_bilinear(i2, h, w, y + v[idx(y, x)], x + u[idx(y, x)]);

        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
                const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
                // average the two images' gradients for a symmetric data term
                ix[idx(y, x)] = 0.25 * (i1[idx(y, xp)] - i1[idx(y, xm)] + warped[idx(y, xp)] -
                                        warped[idx(y, xm)]);
                iy[idx(y, x)] = 0.25 * (i1[idx(yp, x)] - i1[idx(ym, x)] + warped[idx(yp, x)] -
                                        warped[idx(ym, x)]);
                // data residual linearized at the current flow
                c[idx(y, x)] = warped[idx(y, x)] - i1[idx(y, x)] - ix[idx(y, x)] * u[idx(y, x)] -
                               iy[idx(y, x)] * v[idx(y, x)];
            }

        const double a2 = prm.alpha * prm.alpha;
        std::vector<double> ubar(u.size()), vbar(v.size());
        for (int it = 0; it < prm.solver_iterations; ++it) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
                    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
                    ubar[idx(y, x)] =
                        (u[idx(ym, x)] + u[idx(yp, x)] + u[idx(y, xm)] + u[idx(y, xp)]) / 6.0 +
                        (u[idx(ym, xm)] + u[idx(ym, xp)] + u[idx(yp, xm)] + u[idx(yp, xp)]) / 12.0;
                    vbar[idx(y, x)] =
                        (v[idx(ym, x)] + v[idx(yp, x)] + v[idx(y, xm)] + v[idx(y, xp)]) / 6.0 +
                        (v[idx(ym, xm)] + v[idx(ym, xp)] + v[idx(yp, xm)] + v[idx(yp, xp)]) / 12.0;
                }
            for (std::size_t i = 0; i < u.size(); ++i) {
                const double frac =
                    (ix[i] * ubar[i] + iy[i] * vbar[i] + c[i]) / (a2 + ix[i] * ix[i] + iy[i] * iy[i]);
                u[i] = ubar[i] - ix[i] * frac;
                v[i] = vbar[i] - iy[i] * frac;
            }
        }
    }
}

} // namespace

double FlowField::magnitude(int i) const {
    return std::sqrt(u[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)] +
                     v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)]);
}

double FlowField::mean_magnitude() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        acc += std::sqrt(u[i] * u[i] + v[i] * v[i]);
    return u.empty() ? 0.0 : acc / static_cast<double>(u.size());
}

Tensor to_gray(const Tensor& chw) {
    if (chw.rank() != 3) throw ShapeError("to_gray: expected (C,H,W)");
    const int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    Tensor gray({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double lum;
            if (c >= 3) {
                lum = 0.299 * chw.at(0, y, x) + 0.587 * chw.at(1, y, x) + 0.114 * chw.at(2, y, x);
            } else {
                lum = chw.at(0, y, x);
            }
            gray.at(y, x) = (lum + 1.0) * 0.5;
        }
    return gray;
}

FlowField HornSchunckFlow::estimate(const Tensor& prev_gray, const Tensor& curr_gray) const {
    if (!prev_gray.same_shape(curr_gray) || prev_gray.rank() != 2)
        throw ShapeError("flow: grayscale inputs must share an (H,W) shape");
    const Pyramid p1 = build_pyramid(prev_gray, params_.pyramid_levels);
    const Pyramid p2 = build_pyramid(curr_gray, params_.pyramid_levels);
    const int levels = static_cast<int>(p1.imgs.size());

    std::vector<double> u(static_cast<std::size_t>(p1.hs[levels - 1]) * p1.ws[levels - 1], 0.0);
    std::vector<double> v(u.size(), 0.0);
    for (int l = levels - 1; l >= 0; --l) {
        if (l != levels - 1) upsample_flow(u, v, p1.hs[l + 1], p1.ws[l + 1], p1.hs[l], p1.ws[l]);
        refine_level(p1.imgs[static_cast<std::size_t>(l)], p2.imgs[static_cast<std::size_t>(l)],
                     p1.hs[l], p1.ws[l], u, v, params_);
    }

    FlowField f;
    f.height = prev_gray.dim(0);
    f.width = prev_gray.dim(1);
    f.u = std::move(u);
    f.v = std::move(v);
    return f;
}

FlowField estimate_flow(const Frame& prev, const Frame& curr, const FlowEstimator& estimator) {
    if (!prev.pixels.same_shape(curr.pixels)) throw ShapeError("estimate_flow: shape mismatch");
    return estimator.estimate(to_gray(prev.pixels), to_gray(curr.pixels));
}

FlowField estimate_flow(const Frame& prev, const Frame& curr) {
    static const HornSchunckFlow baseline;
    return estimate_flow(prev, curr, baseline);
}

MotionMask motion_mask(const FlowField& flow, double eps) {
    const std::size_t n = flow.u.size();
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(flow.u[i]) || !std::isfinite(flow.v[i]))
            throw DataError("motion_mask: non-finite flow values");

    MotionMask m;
    m.height = flow.height;
    m.width = flow.width;
    m.mask.assign(n, 0);
    const double threshold = flow.mean_magnitude();
    m.threshold_used = threshold;
    if (threshold < eps) {
        std::fill(m.mask.begin(), m.mask.end(), static_cast<std::uint8_t>(1));
        return m;
    }
    for (std::size_t i = 0; i < n; ++i)
        m.mask[i] = std::sqrt(flow.u[i] * flow.u[i] + flow.v[i] * flow.v[i]) < threshold ? 1 : 0;
    return m;
}

MotionMask complement(const MotionMask& m) {
    MotionMask out = m;
    for (auto& px : out.mask) px = px ? 0 : 1;
    return out;
}

Tensor flow_to_color(const FlowField& flow) {
    const int h = flow.height, w = flow.width;
    double max_mag = 1e-9;
    for (std::size_t i = 0; i < flow.u.size(); ++i) max_mag = std::max(max_mag, flow.magnitude(static_cast<int>(i)));
    Tensor out({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double ang = std::atan2(flow.v[i], flow.u[i]); // [-pi, pi]
            const double sat = std::sqrt(flow.u[i] * flow.u[i] + flow.v[i] * flow.v[i]) / max_mag;
            const double hue = (ang + 3.14159265358979323846) / (2.0 * 3.14159265358979323846) * 6.0;
            const int sector = std::min(5, static_cast<int>(hue));
            const double f = hue - sector;
            const double p = 1.0 - sat, q = 1.0 - sat * f, t = 1.0 - sat * (1.0 - f);
            double r = 1, g = 1, b = 1;
            switch (sector) {
                case 0: g = t; b = p; break;
                case 1: r = q; b = p; break;
                case 2: r = p; b = t; break;
                case 3: r = p; g = q; break;
                case 4: r = t; g = p; break;
                default: g = p; b = q; break;
            }
            out.at(0, y, x) = r * 2.0 - 1.0;
            out.at(1, y, x) = g * 2.0 - 1.0;
            out.at(2, y, x) = b * 2.0 - 1.0;
        }
    return out;
}

} // namespace foregan
