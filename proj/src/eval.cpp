#include "foregan/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "foregan/errors.hpp"
#include "json.hpp"

namespace foregan {

ConfusionCounts confusion(const SegmentationMask& pred, const GroundTruthFrame& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeError("confusion: mask/ground-truth shape mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.mask.size(); ++i) {
        const PixelLabel label = gt.labels[i];
        if (label == PixelLabel::ignore) continue;
        const bool hit = pred.mask[i] != 0;
        const bool fg = label == PixelLabel::foreground;
        if (hit && fg) ++c.tp;
        else if (hit && !fg) ++c.fp;
        else if (!hit && fg) ++c.fn;
        else ++c.tn;
    }
    return c;
}

Metrics metrics(const ConfusionCounts& c) {
    Metrics m;
    m.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
                                    : 0.0;
    m.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                                 : 0.0;
    m.f_measure = (m.precision + m.recall) > 0.0
                      ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                      : 0.0;
    return m;
}

const char* aggregate_mode_name(AggregateMode mode) {
    return mode == AggregateMode::mean_of_frames ? "mean-of-frames" : "pooled-counts";
}

Metrics aggregate(const std::vector<FrameEval>& frames, AggregateMode mode) {
    if (frames.empty()) throw ParameterError("aggregate: empty frame list");
    if (mode == AggregateMode::pooled_counts) {
        ConfusionCounts pooled;
        for (const FrameEval& f : frames) pooled += f.counts;
        return metrics(pooled);
    }
    Metrics m;
    for (const FrameEval& f : frames) {
        m.precision += f.scores.precision;
        m.recall += f.scores.recall;
        m.f_measure += f.scores.f_measure;
    }
    const double n = static_cast<double>(frames.size());
    m.precision /= n;
    m.recall /= n;
    m.f_measure /= n;
    return m;
}

SequenceEval evaluate_sequence(const std::string& name, const std::string& category,
                               const std::vector<SegmentationMask>& preds,
                               const std::vector<std::optional<GroundTruthFrame>>& gt,
                               AggregateMode mode) {
    SequenceEval out;
    out.name = name;
    out.category = category;
    const std::size_t n = std::min(preds.size(), gt.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!gt[i]) continue;
        FrameEval fe;
        fe.frame_index = static_cast<int>(i);
        fe.counts = confusion(preds[i], *gt[i]);
        fe.scores = metrics(fe.counts);
        fe.gt_has_foreground = (fe.counts.tp + fe.counts.fn) > 0;
        out.pooled += fe.counts;
        out.frames.push_back(fe);
    }
    if (out.frames.empty()) throw ParameterError("evaluate_sequence: no ground-truth frames");

    if (mode == AggregateMode::pooled_counts) {
        out.scores = metrics(out.pooled);
    } else {
        std::vector<FrameEval> scored;
        for (const FrameEval& f : out.frames)
            if (f.gt_has_foreground) scored.push_back(f);
        // a pure-background sequence has no frame with defined F; fall back to all
        out.scores = aggregate(scored.empty() ? out.frames : scored, mode);
    }
    return out;
}

EvalReport build_report(std::vector<SequenceEval> sequences, AggregateMode mode) {
    if (sequences.empty()) throw ParameterError("build_report: no sequences");
    EvalReport report;
    report.mode = mode;
    report.sequences = std::move(sequences);

    std::map<std::string, std::vector<const SequenceEval*>> by_category;
    for (const SequenceEval& s : report.sequences) by_category[s.category].push_back(&s);

    for (const auto& [category, seqs] : by_category) {
        if (mode == AggregateMode::pooled_counts) {
            ConfusionCounts pooled;
            for (const SequenceEval* s : seqs) pooled += s->pooled;
            report.per_category[category] = metrics(pooled);
        } else {
            Metrics m;
            for (const SequenceEval* s : seqs) {
                m.precision += s->scores.precision;
                m.recall += s->scores.recall;
                m.f_measure += s->scores.f_measure;
            }
            const double n = static_cast<double>(seqs.size());
            report.per_category[category] = Metrics{m.precision / n, m.recall / n, m.f_measure / n};
        }
    }

    if (mode == AggregateMode::pooled_counts) {
        ConfusionCounts pooled;
        for (const SequenceEval& s : report.sequences) pooled += s.pooled;
        report.overall = metrics(pooled);
    } else {
        Metrics m;
        for (const auto& [category, scores] : report.per_category) {
            m.precision += scores.precision;
            m.recall += scores.recall;
            m.f_measure += scores.f_measure;
        }
        const double n = static_cast<double>(report.per_category.size());
        report.overall = Metrics{m.precision / n, m.recall / n, m.f_measure / n};
    }
    return report;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["aggregation"] = aggregate_mode_name(report.mode);
    nlohmann::json seqs = nlohmann::json::array();
    for (const SequenceEval& s : report.sequences) {
        nlohmann::json frames = nlohmann::json::array();
        for (const FrameEval& f : s.frames)
            frames.push_back({{"frame", f.frame_index},
                              {"tp", f.counts.tp},
                              {"fp", f.counts.fp},
                              {"fn", f.counts.fn},
                              {"tn", f.counts.tn},
                              {"precision", f.scores.precision},
                              {"recall", f.scores.recall},
                              {"f_measure", f.scores.f_measure},
                              {"gt_has_foreground", f.gt_has_foreground}});
        seqs.push_back({{"name", s.name},
                        {"category", s.category},
                        {"precision", s.scores.precision},
                        {"recall", s.scores.recall},
                        {"f_measure", s.scores.f_measure},
                        {"frames", std::move(frames)}});
    }
    j["sequences"] = std::move(seqs);
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [category, m] : report.per_category)
        cats[category] = {{"precision", m.precision}, {"recall", m.recall}, {"f_measure", m.f_measure}};
    j["per_category"] = std::move(cats);
    j["overall"] = {{"precision", report.overall.precision},
                    {"recall", report.overall.recall},
                    {"f_measure", report.overall.f_measure}};
    return j.dump(2) + "\n";
}

std::string render_table(const EvalReport& report,
                         const std::map<std::string, std::map<std::string, double>>& external,
                         const std::string& own_column) {
    std::vector<std::string> methods;
    for (const auto& [method, scores] : external) methods.push_back(method);
    methods.push_back(own_column);

    std::size_t cat_width = std::string("Average").size();
    for (const auto& [category, m] : report.per_category)
        cat_width = std::max(cat_width, category.size());
    cat_width = std::max(cat_width, std::string("Category").size());

    std::ostringstream os;
    auto pad = [](const std::string& s, std::size_t w) {
        std::string out = s;
        out.resize(std::max(w, s.size()), ' ');
        return out;
    };
    os << pad("Category", cat_width + 2);
    for (const std::string& m : methods) os << pad(m, std::max<std::size_t>(m.size() + 2, 10));
    os << "\n";

    char buf[32];
    auto cell = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    for (const auto& [category, m] : report.per_category) {
        os << pad(category, cat_width + 2);
        for (const std::string& method : methods) {
            std::string value = "---";
            if (method == own_column) {
                value = cell(m.f_measure);
            } else {
                const auto mit = external.find(method);
                if (mit != external.end()) {
                    const auto cit = mit->second.find(category);
                    if (cit != mit->second.end()) value = cell(cit->second);
                }
            }
            os << pad(value, std::max<std::size_t>(method.size() + 2, 10));
        }
        os << "\n";
    }

    os << pad("Average", cat_width + 2);
    for (const std::string& method : methods) {
        std::string value = "---";
        if (method == own_column) {
            value = cell(report.overall.f_measure);
        } else {
            const auto mit = external.find(method);
            if (mit != external.end() && !mit->second.empty()) {
                double sum = 0.0;
                std::size_t n = 0;
                for (const auto& [category, score] : mit->second) {
                    sum += score;
                    ++n;
                }
                value = cell(sum / static_cast<double>(n));
            }
        }
        os << pad(value, std::max<std::size_t>(method.size() + 2, 10));
    }
    os << "\n";
    return os.str();
}

} // namespace foregan
