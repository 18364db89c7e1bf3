#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "foregan/image.hpp"
#include "foregan/segment.hpp"

namespace foregan {

struct ConfusionCounts {
    long long tp = 0, fp = 0, fn = 0, tn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
};

/// Pixel-level confusion counts; ignore-labeled pixels are excluded entirely.
ConfusionCounts confusion(const SegmentationMask& pred, const GroundTruthFrame& gt);

/// P = tp/(tp+fp), R = tp/(tp+fn), F = 2PR/(P+R); every degenerate
/// denominator yields 0.
Metrics metrics(const ConfusionCounts& c);

struct FrameEval {
    int frame_index = 0;
    ConfusionCounts counts;
    Metrics scores;
    bool gt_has_foreground = false;
};

enum class AggregateMode { mean_of_frames, pooled_counts };
const char* aggregate_mode_name(AggregateMode mode);

/// mean_of_frames: plain average of the per-frame scores in the list.
/// pooled_counts: sums the confusion counts first, then applies the formulas.
Metrics aggregate(const std::vector<FrameEval>& frames, AggregateMode mode);

struct SequenceEval {
    std::string name;
    std::string category;
    std::vector<FrameEval> frames; // one entry per GT-bearing frame
    Metrics scores;
    ConfusionCounts pooled;
};

struct EvalReport {
    AggregateMode mode = AggregateMode::mean_of_frames;
    std::vector<SequenceEval> sequences;
    std::map<std::string, Metrics> per_category;
    Metrics overall;
};

/// Scores one mask stream against the sequence ground truth. In
/// mean_of_frames mode, frames whose ground truth contains no foreground are
/// excluded from the average (their F is undefined rather than zero); pooled
/// mode keeps every pixel.
SequenceEval evaluate_sequence(const std::string& name, const std::string& category,
                               const std::vector<SegmentationMask>& preds,
                               const std::vector<std::optional<GroundTruthFrame>>& gt,
                               AggregateMode mode);

/// Per-category averages (mean of sequence scores) and the overall average
/// (mean of category scores), mirroring the usual change-detection tables.
EvalReport build_report(std::vector<SequenceEval> sequences, AggregateMode mode);

std::string report_to_json(const EvalReport& report);

/// Aligned categories-by-methods text table. External method scores, when
/// provided, appear as extra display-only columns.
std::string render_table(const EvalReport& report,
                         const std::map<std::string, std::map<std::string, double>>& external = {},
                         const std::string& own_column = "foregan");

} // namespace foregan
