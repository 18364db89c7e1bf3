#include "doctest.h"

#include <algorithm>

#include "foregan/errors.hpp"
#include "foregan/eval.hpp"
#include "test_support.hpp"

using namespace foregan;

namespace {

GroundTruthFrame make_gt(int h, int w, const std::vector<PixelLabel>& labels) {
    GroundTruthFrame gt;
    gt.height = h;
    gt.width = w;
    gt.labels = labels;
    return gt;
}

SegmentationMask make_pred(int h, int w, const std::vector<std::uint8_t>& values,
                           Modality modality = Modality::fused) {
    SegmentationMask m;
    m.height = h;
    m.width = w;
    m.modality = modality;
    m.mask = values;
    return m;
}

FrameEval frame_eval(long long tp, long long fp, long long fn, long long tn) {
    FrameEval fe;
    fe.counts = ConfusionCounts{tp, fp, fn, tn};
    fe.scores = metrics(fe.counts);
    fe.gt_has_foreground = (tp + fn) > 0;
    return fe;
}

} // namespace

TEST_CASE("confusion counting with ignore pixels") {
    using L = PixelLabel;
    const GroundTruthFrame gt = make_gt(1, 4, {L::foreground, L::foreground, L::background, L::ignore});
    const SegmentationMask pred = make_pred(1, 4, {1, 0, 1, 1});
    const ConfusionCounts c = confusion(pred, gt);
    CHECK(c.tp == 1);
    CHECK(c.fn == 1);
    CHECK(c.fp == 1);
    CHECK(c.tn == 0);
    CHECK(c.tp + c.fp + c.fn + c.tn == 3); // the ignore pixel is invisible

    CHECK_THROWS_AS(confusion(make_pred(2, 2, {0, 0, 0, 0}), gt), ShapeError);
}

TEST_CASE("perfect and empty predictions") {
    using L = PixelLabel;
    const GroundTruthFrame gt =
        make_gt(1, 5, {L::foreground, L::foreground, L::foreground, L::background, L::background});

    const ConfusionCounts perfect = confusion(make_pred(1, 5, {1, 1, 1, 0, 0}), gt);
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);
    CHECK(metrics(perfect).f_measure == 1.0);

    const ConfusionCounts empty = confusion(make_pred(1, 5, {0, 0, 0, 0, 0}), gt);
    CHECK(empty.tp == 0);
    CHECK(empty.fn == 3);
}

TEST_CASE("metric arithmetic and degenerate conventions") {
    const Metrics m = metrics(ConfusionCounts{8, 2, 2, 0});
    CHECK(m.precision == 0.8);
    CHECK(m.recall == 0.8);
    CHECK(m.f_measure == doctest::Approx(0.8).epsilon(1e-15));

    const Metrics zero = metrics(ConfusionCounts{0, 0, 5, 10});
    CHECK(zero.precision == 0.0);
    CHECK(zero.recall == 0.0);
    CHECK(zero.f_measure == 0.0);

    const Metrics all_zero = metrics(ConfusionCounts{0, 0, 0, 0});
    CHECK(all_zero.f_measure == 0.0);
}

TEST_CASE("f-measure lies between precision and recall") {
    Rng rng(81);
    for (int i = 0; i < 500; ++i) {
        ConfusionCounts c{rng.uniform_int(0, 50), rng.uniform_int(0, 50), rng.uniform_int(0, 50),
                          rng.uniform_int(0, 50)};
        const Metrics m = metrics(c);
        if (m.precision + m.recall > 0.0) {
            CHECK(m.f_measure >= std::min(m.precision, m.recall) - 1e-12);
            CHECK(m.f_measure <= std::max(m.precision, m.recall) + 1e-12);
        }
    }
}

TEST_CASE("ignored pixels are invisible to the counts") {
    Rng rng(82);
    const int n = 10;
    std::vector<PixelLabel> labels(n * n);
    for (auto& l : labels) {
        const double r = rng.uniform01();
        l = r < 0.3 ? PixelLabel::ignore
                    : (r < 0.6 ? PixelLabel::foreground : PixelLabel::background);
    }
    const GroundTruthFrame gt = make_gt(n, n, labels);

    std::vector<std::uint8_t> pred(n * n);
    for (auto& v : pred) v = rng.uniform01() < 0.5 ? 1 : 0;
    const ConfusionCounts before = confusion(make_pred(n, n, pred), gt);

    std::vector<std::uint8_t> flipped = pred;
    for (std::size_t i = 0; i < flipped.size(); ++i)
        if (labels[i] == PixelLabel::ignore) flipped[i] ^= 1;
    const ConfusionCounts after = confusion(make_pred(n, n, flipped), gt);

    CHECK(before.tp == after.tp);
    CHECK(before.fp == after.fp);
    CHECK(before.fn == after.fn);
    CHECK(before.tn == after.tn);
}

TEST_CASE("aggregation modes") {
    CHECK_THROWS_AS(aggregate({}, AggregateMode::mean_of_frames), ParameterError);

    const FrameEval single = frame_eval(8, 2, 2, 20);
    CHECK(aggregate({single}, AggregateMode::mean_of_frames).f_measure ==
          doctest::Approx(0.8));
    CHECK(aggregate({single}, AggregateMode::pooled_counts).f_measure == doctest::Approx(0.8));

    // two frames with F = 1 and F = 0
    const FrameEval good = frame_eval(4, 0, 0, 10);
    const FrameEval bad = frame_eval(0, 0, 4, 10);
    CHECK(aggregate({good, bad}, AggregateMode::mean_of_frames).f_measure == doctest::Approx(0.5));

    // pooled: (tp=1,fp=0,fn=0) + (tp=0,fp=0,fn=1) -> P=1, R=0.5, F=2/3
    const FrameEval a = frame_eval(1, 0, 0, 0);
    const FrameEval b = frame_eval(0, 0, 1, 0);
    const Metrics pooled = aggregate({a, b}, AggregateMode::pooled_counts);
    CHECK(pooled.precision == doctest::Approx(1.0));
    CHECK(pooled.recall == doctest::Approx(0.5));
    CHECK(pooled.f_measure == doctest::Approx(2.0 / 3.0));

    // pooling identical frames reproduces the single-frame metrics
    const Metrics pooled_same = aggregate({single, single, single}, AggregateMode::pooled_counts);
    CHECK(pooled_same.f_measure == doctest::Approx(0.8));
}

TEST_CASE("sequence evaluation skips empty-gt frames in the frame mean") {
    using L = PixelLabel;
    const GroundTruthFrame with_fg = make_gt(1, 2, {L::foreground, L::background});
    const GroundTruthFrame without_fg = make_gt(1, 2, {L::background, L::background});

    std::vector<SegmentationMask> preds = {make_pred(1, 2, {1, 0}), make_pred(1, 2, {0, 0})};
    std::vector<std::optional<GroundTruthFrame>> gt = {with_fg, without_fg};

    const SequenceEval eval =
        evaluate_sequence("s", "cat", preds, gt, AggregateMode::mean_of_frames);
    CHECK(eval.frames.size() == 2);
    CHECK(eval.scores.f_measure == doctest::Approx(1.0)); // empty frame carries no F

    const SequenceEval pooled =
        evaluate_sequence("s", "cat", preds, gt, AggregateMode::pooled_counts);
    CHECK(pooled.scores.f_measure == doctest::Approx(1.0));
}

TEST_CASE("report aggregates categories and renders a table") {
    SequenceEval s1;
    s1.name = "a";
    s1.category = "catA";
    s1.frames = {frame_eval(8, 2, 2, 0)};
    s1.scores = metrics(ConfusionCounts{8, 2, 2, 0});
    s1.pooled = ConfusionCounts{8, 2, 2, 0};

    SequenceEval s2 = s1;
    s2.name = "b";
    s2.category = "catB";
    s2.frames = {frame_eval(4, 0, 0, 4)};
    s2.scores = metrics(ConfusionCounts{4, 0, 0, 4});
    s2.pooled = ConfusionCounts{4, 0, 0, 4};

    const EvalReport report = build_report({s1, s2}, AggregateMode::mean_of_frames);
    CHECK(report.per_category.at("catA").f_measure == doctest::Approx(0.8));
    CHECK(report.per_category.at("catB").f_measure == doctest::Approx(1.0));
    CHECK(report.overall.f_measure == doctest::Approx(0.9));

    const std::string json = report_to_json(report);
    CHECK(json.find("\"catA\"") != std::string::npos);
    CHECK(json.find("f_measure") != std::string::npos);

    const std::string table =
        render_table(report, {{"baseline", {{"catA", 0.5}, {"catB", 0.25}}}});
    CHECK(table.find("catA") != std::string::npos);
    CHECK(table.find("baseline") != std::string::npos);
    CHECK(table.find("0.8000") != std::string::npos);
    CHECK(table.find("Average") != std::string::npos);
    CHECK(table.find("0.3750") != std::string::npos); // external column average
}
