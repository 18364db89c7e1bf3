#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "foregan/errors.hpp"
#include "foregan/flow.hpp"
#include "test_support.hpp"

using namespace foregan;

namespace {

// textured frame so the flow data term is well conditioned everywhere
Frame textured_frame(int size, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t({3, size, size});
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double base = 0.4 * std::sin(0.55 * x) * std::cos(0.45 * y);
            const double grain = rng.uniform(-0.35, 0.35);
            for (int c = 0; c < 3; ++c) t.at(c, y, x) = std::clamp(base + grain, -0.95, 0.95);
        }
    return Frame{t};
}

Frame shifted(const Frame& f, int dx, int dy) {
    const int h = f.height(), w = f.width(), c = f.channels();
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

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

// median flow error against a constant ground-truth displacement, measured
// over the interior (borders lack flow support)
std::pair<double, double> median_flow(const FlowField& f, int margin) {
    std::vector<double> us, vs;
    for (int y = margin; y < f.height - margin; ++y)
        for (int x = margin; x < f.width - margin; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * f.width + x;
            us.push_back(f.u[i]);
            vs.push_back(f.v[i]);
        }
    return {median(us), median(vs)};
}

} // namespace

TEST_CASE("identical frames yield near-zero flow") {
    const Frame f = textured_frame(64, 51);
    const FlowField flow = estimate_flow(f, f);
    std::vector<double> mags;
    for (std::size_t i = 0; i < flow.u.size(); ++i)
        mags.push_back(flow.magnitude(static_cast<int>(i)));
    CHECK(median(mags) < 0.05);
}

TEST_CASE("horizontal translation is recovered") {
    const Frame f = textured_frame(64, 52);
    const Frame g = shifted(f, 1, 0);
    const FlowField flow = estimate_flow(f, g);
    const auto [mu, mv] = median_flow(flow, 8);
    CHECK(std::abs(mu - 1.0) <= 0.25);
    CHECK(std::abs(mv - 0.0) <= 0.25);
}

TEST_CASE("vertical translation of a checkerboard is recovered") {
    const int size = 64;
    Tensor t({3, size, size});
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            // soft checkerboard: binary tiles carry no gradient inside cells,
            // so modulate them with a smooth ramp
            const double tile = ((x / 4 + y / 4) % 2) ? 0.6 : -0.6;
            const double ramp = 0.25 * std::sin(0.4 * x) + 0.25 * std::cos(0.35 * y);
            for (int c = 0; c < 3; ++c) t.at(c, y, x) = std::clamp(tile + ramp, -1.0, 1.0);
        }
    const Frame f{t};
    const Frame g = shifted(f, 0, 2);
    const FlowField flow = estimate_flow(f, g);
    const auto [mu, mv] = median_flow(flow, 8);
    CHECK(std::abs(mu - 0.0) <= 0.25);
    CHECK(std::abs(mv - 2.0) <= 0.25);
}

TEST_CASE("motion mask thresholds at the mean magnitude") {
    FlowField flow;
    flow.height = 4;
    flow.width = 4;
    flow.u.assign(16, 0.0);
    flow.v.assign(16, 0.0);
    for (int y = 0; y < 4; ++y)
        for (int x = 2; x < 4; ++x) flow.u[static_cast<std::size_t>(y) * 4 + x] = 2.0;

    const MotionMask m = motion_mask(flow);
    CHECK(m.threshold_used == doctest::Approx(1.0));
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const std::uint8_t expected = x < 2 ? 1 : 0;
            CHECK(m.mask[static_cast<std::size_t>(y) * 4 + x] == expected);
        }
}

TEST_CASE("all-zero flow degenerates to the all-static mask") {
    FlowField flow;
    flow.height = 3;
    flow.width = 3;
    flow.u.assign(9, 0.0);
    flow.v.assign(9, 0.0);
    const MotionMask m = motion_mask(flow);
    CHECK(m.threshold_used < 1e-3);
    for (std::uint8_t v : m.mask) CHECK(v == 1);
}

TEST_CASE("uniform nonzero magnitude leaves no static pixel") {
    // strict '<' comparison: magnitude equal to the mean is not static, and
    // the epsilon rule only applies to near-zero thresholds
    FlowField flow;
    flow.height = 3;
    flow.width = 3;
    flow.u.assign(9, 5.0);
    flow.v.assign(9, 0.0);
    const MotionMask m = motion_mask(flow);
    CHECK(m.threshold_used == doctest::Approx(5.0));
    for (std::uint8_t v : m.mask) CHECK(v == 0);
}

TEST_CASE("non-finite flow is rejected") {
    FlowField flow;
    flow.height = 2;
    flow.width = 2;
    flow.u = {0.0, 1.0, std::nan(""), 0.0};
    flow.v.assign(4, 0.0);
    CHECK_THROWS_AS(motion_mask(flow), DataError);
}

TEST_CASE("complement flips every pixel and is an involution") {
    MotionMask m;
    m.height = 2;
    m.width = 4;
    m.mask = {1, 0, 1, 1, 0, 0, 1, 0};
    m.threshold_used = 0.7;

    const MotionMask c = complement(m);
    CHECK(c.threshold_used == 0.7);
    std::size_t ones_m = 0, ones_c = 0;
    for (std::size_t i = 0; i < m.mask.size(); ++i) {
        CHECK(c.mask[i] == (m.mask[i] ? 0 : 1));
        ones_m += m.mask[i];
        ones_c += c.mask[i];
    }
    CHECK(ones_m + ones_c == m.mask.size());

    const MotionMask cc = complement(c);
    for (std::size_t i = 0; i < m.mask.size(); ++i) CHECK(cc.mask[i] == m.mask[i]);
}

TEST_CASE("mask properties on estimated flow") {
    const Frame f = textured_frame(48, 53);
    const Frame g = shifted(f, 1, 1);
    const FlowField flow = estimate_flow(f, g);
    const MotionMask m = motion_mask(flow);

    // binarity
    for (std::uint8_t v : m.mask) CHECK((v == 0 || v == 1));

    // threshold consistency with the stored field
    CHECK(std::abs(m.threshold_used - flow.mean_magnitude()) < 1e-6);

    // re-applying the rule with the stored threshold reproduces the mask
    for (std::size_t i = 0; i < m.mask.size(); ++i) {
        const std::uint8_t expected =
            flow.magnitude(static_cast<int>(i)) < m.threshold_used ? 1 : 0;
        CHECK(m.mask[i] == expected);
    }
}

TEST_CASE("flow estimation rejects mismatched shapes") {
    Frame a{Tensor({3, 32, 32})};
    Frame b{Tensor({3, 16, 16})};
    CHECK_THROWS_AS(estimate_flow(a, b), ShapeError);
}

TEST_CASE("flow color rendering stays in frame range") {
    const Frame f = textured_frame(32, 54);
    const FlowField flow = estimate_flow(f, shifted(f, 1, 0));
    const Tensor img = flow_to_color(flow);
    CHECK(img.shape() == std::vector<int>{3, 32, 32});
    CHECK(img.min() >= -1.0);
    CHECK(img.max() <= 1.0);
}
