#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "foregan/dataset.hpp"
#include "foregan/errors.hpp"
#include "foregan/eval.hpp"
#include "foregan/gan.hpp"
#include "foregan/inversion.hpp"
#include "foregan/segment.hpp"
#include "foregan/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace foregan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct RunConfig {
    std::string dataset;
    std::string sequence;
    std::string output_dir = "out";
    std::string modality = "rgbd"; // rgbd | rgb | depth
    std::uint64_t seed = 1;
    int workers = 2;

    TrainConfig train;
    std::optional<int> image_size_override; // explicit config/flag value beats the dataset spec
    AugmentConfig augment = {{{3, 0}, {-3, 0}}, {5.0, -5.0}};
    bool augment_enabled = true;

    InversionConfig inversion;
    PipelineConfig pipeline;
    bool oracle = false;
    bool save_intermediates = true;
    bool save_trajectories = false;
    std::string rgb_checkpoint;
    std::string depth_checkpoint;

    RunConfig() { pipeline.morphology = true; } // dataset-run default

    AggregateMode aggregation = AggregateMode::mean_of_frames;
    std::string external_scores;
};

ThresholdRule::Kind parse_rule(const std::string& name) {
    if (name == "fixed") return ThresholdRule::Kind::fixed_tau;
    if (name == "mean_sigma") return ThresholdRule::Kind::mean_sigma;
    if (name == "otsu") return ThresholdRule::Kind::otsu;
    throw ConfigError("unknown threshold rule: " + name);
}

ChannelReduce parse_reduce(const std::string& name) {
    if (name == "max") return ChannelReduce::max;
    if (name == "sum") return ChannelReduce::sum;
    if (name == "mean") return ChannelReduce::mean;
    throw ConfigError("unknown channel reduction: " + name);
}

AggregateMode parse_aggregation(const std::string& name) {
    if (name == "mean-of-frames") return AggregateMode::mean_of_frames;
    if (name == "pooled-counts") return AggregateMode::pooled_counts;
    throw ConfigError("unknown aggregation mode: " + name);
}

RunConfig load_run_config(const std::string& path) {
    RunConfig rc;
    if (path.empty()) return rc;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("invalid config JSON in " + path + ": " + e.what());
    }

    const fs::path cfg_dir = fs::path(path).parent_path();
    auto resolve = [&cfg_dir](std::string p) {
        if (p.empty() || fs::path(p).is_absolute()) return p;
        return (cfg_dir / p).string();
    };

    rc.dataset = resolve(j.value("dataset", std::string()));
    rc.sequence = j.value("sequence", std::string());
    rc.output_dir = resolve(j.value("output_dir", rc.output_dir));
    rc.modality = j.value("modality", rc.modality);
    rc.seed = j.value("seed", rc.seed);
    rc.workers = j.value("workers", rc.workers);

    if (j.contains("train")) {
        const json& t = j.at("train");
        rc.train.epochs = t.value("epochs", rc.train.epochs);
        rc.train.batch_size = t.value("batch_size", rc.train.batch_size);
        rc.train.learning_rate = t.value("learning_rate", rc.train.learning_rate);
        rc.train.adam_beta1 = t.value("adam_beta1", rc.train.adam_beta1);
        rc.train.adam_beta2 = t.value("adam_beta2", rc.train.adam_beta2);
        rc.train.latent_dim = t.value("latent_dim", rc.train.latent_dim);
        if (t.contains("image_size")) {
            rc.image_size_override = t.at("image_size").get<int>();
            rc.train.image_size = *rc.image_size_override;
        }
        rc.train.base_width = t.value("base_width", rc.train.base_width);
        rc.train.leaky_slope = t.value("leaky_slope", rc.train.leaky_slope);
        if (t.contains("augment")) {
            const json& a = t.at("augment");
            rc.augment_enabled = a.value("enabled", true);
            if (a.contains("translations")) {
                rc.augment.translations.clear();
                for (const auto& pair : a.at("translations"))
                    rc.augment.translations.emplace_back(pair.at(0).get<int>(),
                                                         pair.at(1).get<int>());
            }
            if (a.contains("rotations_deg"))
                rc.augment.rotations_deg = a.at("rotations_deg").get<std::vector<double>>();
        }
    }

    if (j.contains("inversion")) {
        const json& i = j.at("inversion");
        rc.inversion.steps = i.value("steps", rc.inversion.steps);
        rc.inversion.step_size = i.value("step_size", rc.inversion.step_size);
        rc.inversion.eta = i.value("eta", rc.inversion.eta);
        rc.inversion.restarts = i.value("restarts", rc.inversion.restarts);
        rc.inversion.clamp_latent = i.value("clamp_latent", rc.inversion.clamp_latent);
        const std::string opt = i.value("optimizer", std::string("adam"));
        if (opt == "adam") rc.inversion.optimizer = InversionConfig::Optimizer::adam;
        else if (opt == "sgd") rc.inversion.optimizer = InversionConfig::Optimizer::sgd;
        else throw ConfigError("unknown inversion optimizer: " + opt);
        rc.pipeline.warm_start = i.value("warm_start", rc.pipeline.warm_start);
    }

    if (j.contains("pipeline")) {
        const json& p = j.at("pipeline");
        if (p.contains("threshold")) {
            const json& t = p.at("threshold");
            rc.pipeline.rule.kind = parse_rule(t.value("rule", std::string("mean_sigma")));
            rc.pipeline.rule.tau = t.value("tau", rc.pipeline.rule.tau);
            rc.pipeline.rule.k = t.value("k", rc.pipeline.rule.k);
        }
        rc.pipeline.reduce = parse_reduce(p.value("reduce", std::string("max")));
        rc.pipeline.morphology = p.value("morphology", true);
        rc.oracle = p.value("oracle", rc.oracle);
        rc.save_intermediates = p.value("save_intermediates", rc.save_intermediates);
        rc.save_trajectories = p.value("save_trajectories", rc.save_trajectories);
        rc.rgb_checkpoint = resolve(p.value("rgb_checkpoint", std::string()));
        rc.depth_checkpoint = resolve(p.value("depth_checkpoint", std::string()));
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        rc.aggregation = parse_aggregation(e.value("aggregation", std::string("mean-of-frames")));
        rc.external_scores = resolve(e.value("external_scores", std::string()));
    }
    return rc;
}

void apply_seed_env(RunConfig& rc) {
    if (const char* env = std::getenv("FOREGAN_SEED")) {
        try {
            rc.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("FOREGAN_SEED is not an integer");
        }
    }
}

Sequence load_configured_sequence(RunConfig& rc) {
    if (rc.dataset.empty()) throw ConfigError("no dataset spec configured (use --dataset)");
    if (rc.sequence.empty()) throw ConfigError("no sequence name configured (use --sequence)");
    DatasetSpec spec = DatasetSpec::from_json_file(rc.dataset);
    if (rc.image_size_override) spec.image_size = *rc.image_size_override;
    rc.train.image_size = spec.image_size; // networks follow the data resolution
    return load_sequence(spec, rc.sequence);
}

std::string frame_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%06d.png", index);
    return buf;
}

void write_residual_png(const std::string& path, const ForegroundMap& fg) {
    std::vector<std::uint8_t> gray(fg.residual.size());
    for (std::size_t i = 0; i < fg.residual.size(); ++i) {
        const double v = std::clamp(fg.residual[i] / 2.0, 0.0, 1.0);
        gray[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    write_gray8_png(path, gray, fg.height, fg.width);
}

std::string hash_hex(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// synth

int run_synth(const RunConfig& rc, const SceneSpec& scene, const std::string& out_root,
              const std::string& name) {
    fs::create_directories(out_root);
    save_synth_dataset(rc.seed, scene, out_root, name);
    std::cout << "wrote synthetic sequence '" << name << "' (" << scene.frame_count
              << " frames) under " << out_root << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

int run_train(RunConfig rc, const std::string& modality) {
    if (modality != "rgb" && modality != "depth")
        throw ConfigError("train: modality must be rgb or depth");
    const Sequence seq = load_configured_sequence(rc);

    std::vector<Frame> data;
    if (modality == "rgb") {
        data = seq.frames;
    } else {
        if (!seq.has_depth()) throw ConfigError("train: sequence has no depth frames");
        if (seq.background_only_indices.empty())
            throw ConfigError("train: depth model needs background-only frames and none are known");
        for (int idx : seq.background_only_indices)
            data.push_back(Frame{seq.depth_frames[static_cast<std::size_t>(idx)].pixels});
    }
    if (rc.augment_enabled && rc.augment.transform_count() > 0) data = augment(data, rc.augment);

    TrainConfig cfg = rc.train;
    cfg.seed = rc.seed;
    fs::create_directories(rc.output_dir);
    const std::string csv_path =
        (fs::path(rc.output_dir) / ("loss_" + modality + ".csv")).string();
    std::ofstream csv(csv_path);
    if (!csv) throw ConfigError("cannot write loss log: " + csv_path);
    csv << "epoch,d_loss,g_loss\n";

    std::cout << "training " << modality << " model on " << data.size() << " frames, "
              << cfg.epochs << " epochs\n";
    char row[96];
    Checkpoint ckpt = train(data, cfg, modality, seq.name, [&csv, &row](const EpochLoss& e) {
        std::snprintf(row, sizeof row, "%d,%.17g,%.17g\n", e.epoch, e.d_loss, e.g_loss);
        csv << row;
    });

    const std::string ckpt_path =
        (fs::path(rc.output_dir) / ("ckpt_" + modality + ".bin")).string();
    ckpt.save(ckpt_path);
    std::cout << "checkpoint: " << ckpt_path << " (params " << hash_hex(ckpt.param_hash())
              << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// segment

int run_segment(RunConfig rc) {
    // accept the spelled-out forms as well
    if (rc.modality == "rgb-only") rc.modality = "rgb";
    if (rc.modality == "depth-only") rc.modality = "depth";
    const Sequence seq = load_configured_sequence(rc);

    SequenceRunOptions opts;
    opts.use_rgb = rc.modality == "rgbd" || rc.modality == "rgb";
    opts.use_depth = (rc.modality == "rgbd" || rc.modality == "depth") && seq.has_depth();
    if (rc.modality == "depth" && !seq.has_depth())
        throw ConfigError("segment: depth requested but the sequence has no depth frames");
    opts.keep_intermediates = rc.save_intermediates;

    PipelineConfig pipeline = rc.pipeline;
    pipeline.workers = rc.workers;
    pipeline.inversion = rc.inversion;
    pipeline.inversion.seed = rc.seed;

    std::unique_ptr<BackgroundProvider> provider;
    std::optional<Checkpoint> rgb_ckpt, depth_ckpt;
    if (rc.oracle) {
        if (!seq.has_oracle())
            throw ConfigError("segment: --oracle requires oracle backgrounds in the dataset");
        provider = std::make_unique<OracleBackgroundProvider>(seq);
    } else {
        if (opts.use_rgb) {
            if (rc.rgb_checkpoint.empty())
                throw ConfigError("segment: missing rgb checkpoint (or use --oracle)");
            rgb_ckpt = Checkpoint::load(rc.rgb_checkpoint);
        }
        if (opts.use_depth) {
            if (rc.depth_checkpoint.empty())
                throw ConfigError("segment: missing depth checkpoint (or use --oracle)");
            depth_ckpt = Checkpoint::load(rc.depth_checkpoint);
        }
        auto inv_provider = std::make_unique<InversionBackgroundProvider>(
            rgb_ckpt, depth_ckpt, pipeline.inversion, pipeline.warm_start);
        if (rc.save_trajectories) {
            const fs::path traj_root = fs::path(rc.output_dir) / "trajectories";
            fs::create_directories(traj_root / "rgb");
            fs::create_directories(traj_root / "depth");
            inv_provider->set_trajectory_sink(
                [traj_root](Modality m, int frame, const std::vector<InversionStep>& steps) {
                    const fs::path path =
                        traj_root / modality_name(m) / (frame_name(frame).substr(0, 12) + ".csv");
                    std::ofstream csv(path);
                    csv << "step,residual,feature,total\n";
                    char row[128];
                    for (const InversionStep& s : steps) {
                        std::snprintf(row, sizeof row, "%d,%.17g,%.17g,%.17g\n", s.step,
                                      s.residual, s.feature, s.total);
                        csv << row;
                    }
                });
        }
        provider = std::move(inv_provider);
    }

    const std::vector<FrameResult> results = run_sequence(seq, *provider, pipeline, opts);

    const fs::path out(rc.output_dir);
    fs::create_directories(out / "masks" / "fused");
    if (opts.use_rgb) fs::create_directories(out / "masks" / "rgb");
    if (opts.use_depth) fs::create_directories(out / "masks" / "depth");
    if (opts.keep_intermediates) {
        fs::create_directories(out / "intermediates" / "motion");
        fs::create_directories(out / "intermediates" / "flow");
        if (opts.use_rgb) {
            fs::create_directories(out / "intermediates" / "suppressed");
            fs::create_directories(out / "intermediates" / "rgb_background");
            fs::create_directories(out / "intermediates" / "rgb_residual");
        }
        if (opts.use_depth) {
            fs::create_directories(out / "intermediates" / "depth_background");
            fs::create_directories(out / "intermediates" / "depth_residual");
        }
    }

    json frames = json::array();
    for (const FrameResult& r : results) {
        const std::string name = frame_name(r.frame_index);
        json entry{{"index", r.frame_index}};
        write_mask_png((out / "masks" / "fused" / name).string(), r.fused.mask, r.fused.height,
                       r.fused.width);
        entry["fused"] = "masks/fused/" + name;
        if (r.rgb_mask) {
            write_mask_png((out / "masks" / "rgb" / name).string(), r.rgb_mask->mask,
                           r.rgb_mask->height, r.rgb_mask->width);
            entry["rgb"] = "masks/rgb/" + name;
        }
        if (r.depth_mask) {
            write_mask_png((out / "masks" / "depth" / name).string(), r.depth_mask->mask,
                           r.depth_mask->height, r.depth_mask->width);
            entry["depth"] = "masks/depth/" + name;
        }
        if (opts.keep_intermediates) {
            write_mask_png((out / "intermediates" / "motion" / name).string(), r.motion.mask,
                           r.motion.height, r.motion.width);
            entry["motion"] = "intermediates/motion/" + name;
            if (r.flow_color) {
                write_rgb_png((out / "intermediates" / "flow" / name).string(), *r.flow_color);
                entry["flow"] = "intermediates/flow/" + name;
            }
            if (r.suppressed) {
                write_rgb_png((out / "intermediates" / "suppressed" / name).string(),
                              *r.suppressed);
                entry["suppressed"] = "intermediates/suppressed/" + name;
            }
            if (r.rgb_background) {
                write_rgb_png((out / "intermediates" / "rgb_background" / name).string(),
                              *r.rgb_background);
                entry["rgb_background"] = "intermediates/rgb_background/" + name;
            }
            if (r.rgb_residual) {
                write_residual_png((out / "intermediates" / "rgb_residual" / name).string(),
                                   *r.rgb_residual);
                entry["rgb_residual"] = "intermediates/rgb_residual/" + name;
            }
            if (r.depth_background) {
                write_rgb_png((out / "intermediates" / "depth_background" / name).string(),
                              *r.depth_background);
                entry["depth_background"] = "intermediates/depth_background/" + name;
            }
            if (r.depth_residual) {
                write_residual_png((out / "intermediates" / "depth_residual" / name).string(),
                                   *r.depth_residual);
                entry["depth_residual"] = "intermediates/depth_residual/" + name;
            }
        }
        frames.push_back(std::move(entry));
    }

    json manifest;
    manifest["sequence"] = seq.name;
    manifest["category"] = seq.category;
    manifest["dataset"] = rc.dataset;
    manifest["seed"] = rc.seed;
    manifest["modality"] = rc.modality;
    manifest["oracle"] = rc.oracle;
    manifest["image_size"] = rc.train.image_size;
    manifest["pipeline"] = {
        {"rule", rc.pipeline.rule.kind == ThresholdRule::Kind::fixed_tau ? "fixed"
                 : rc.pipeline.rule.kind == ThresholdRule::Kind::otsu    ? "otsu"
                                                                         : "mean_sigma"},
        {"tau", rc.pipeline.rule.tau},
        {"k", rc.pipeline.rule.k},
        {"reduce", rc.pipeline.reduce == ChannelReduce::max    ? "max"
                   : rc.pipeline.reduce == ChannelReduce::sum ? "sum"
                                                              : "mean"},
        {"morphology", rc.pipeline.morphology},
        {"warm_start", rc.pipeline.warm_start}};
    manifest["inversion"] = {{"steps", pipeline.inversion.steps},
                             {"step_size", pipeline.inversion.step_size},
                             {"eta", pipeline.inversion.eta},
                             {"restarts", pipeline.inversion.restarts}};
    json ckpts = json::object();
    if (rgb_ckpt)
        ckpts["rgb"] = {{"path", rc.rgb_checkpoint},
                        {"scene", rgb_ckpt->scene},
                        {"epoch", rgb_ckpt->epoch},
                        {"param_hash", hash_hex(rgb_ckpt->param_hash())}};
    if (depth_ckpt)
        ckpts["depth"] = {{"path", rc.depth_checkpoint},
                          {"scene", depth_ckpt->scene},
                          {"epoch", depth_ckpt->epoch},
                          {"param_hash", hash_hex(depth_ckpt->param_hash())}};
    manifest["checkpoints"] = std::move(ckpts);
    manifest["frames"] = std::move(frames);

    std::ofstream mf((out / "manifest.json").string());
    if (!mf) throw ConfigError("cannot write manifest under " + rc.output_dir);
    mf << manifest.dump(2) << "\n";

    std::cout << "segmented " << results.size() << " frames into " << rc.output_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

int run_eval(RunConfig rc, const std::string& pred_dir_flag, const std::string& stream) {
    const Sequence seq = load_configured_sequence(rc);
    const fs::path pred_root = pred_dir_flag.empty() ? fs::path(rc.output_dir)
                                                     : fs::path(pred_dir_flag);
    const fs::path mask_dir = pred_root / "masks" / stream;
    if (!fs::is_directory(mask_dir))
        throw ConfigError("eval: no mask directory at " + mask_dir.string());

    std::vector<SegmentationMask> preds(static_cast<std::size_t>(seq.frame_count()));
    std::vector<bool> have(static_cast<std::size_t>(seq.frame_count()), false);
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(mask_dir)) {
        if (entry.path().extension() != ".png") continue;
        const std::string stem = entry.path().stem().string();
        const std::size_t digits = stem.find_last_not_of("0123456789");
        if (digits == std::string::npos || digits + 1 >= stem.size()) continue;
        const int idx = std::stoi(stem.substr(digits + 1));
        if (idx < 0 || idx >= seq.frame_count()) continue;
        SegmentationMask m;
        m.mask = read_mask_png(entry.path().string(), m.height, m.width);
        m.modality = Modality::fused;
        preds[static_cast<std::size_t>(idx)] = std::move(m);
        have[static_cast<std::size_t>(idx)] = true;
        ++count;
    }
    if (count == 0) throw ConfigError("eval: no masks found in " + mask_dir.string());

    // align ground truth with the frames that actually have masks, keeping
    // original frame numbers
    std::vector<std::optional<GroundTruthFrame>> gts(preds.size());
    std::size_t overlap = 0;
    for (int i = 0; i < seq.frame_count(); ++i) {
        if (!have[static_cast<std::size_t>(i)] || !seq.has_gt(i)) continue;
        gts[static_cast<std::size_t>(i)] = seq.gt[static_cast<std::size_t>(i)];
        ++overlap;
    }
    if (overlap == 0) throw ConfigError("eval: no overlap between masks and ground truth");

    const SequenceEval seval =
        evaluate_sequence(seq.name, seq.category, preds, gts, rc.aggregation);
    const EvalReport report = build_report({seval}, rc.aggregation);

    std::map<std::string, std::map<std::string, double>> external;
    if (!rc.external_scores.empty()) {
        std::ifstream ein(rc.external_scores);
        if (!ein) throw ConfigError("eval: cannot open external scores " + rc.external_scores);
        json ej;
        ein >> ej;
        for (const auto& [method, scores] : ej.items())
            for (const auto& [category, value] : scores.items())
                external[method][category] = value.get<double>();
    }

    fs::create_directories(pred_root);
    std::ofstream jout((pred_root / ("report_" + stream + ".json")).string());
    jout << report_to_json(report);
    const std::string table = render_table(report, external);
    std::ofstream tout((pred_root / ("report_" + stream + ".txt")).string());
    tout << table;

    std::cout << table;
    std::cout << "overall " << stream << " F-measure: " << report.overall.f_measure << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// visualize

Frame mask_panel(const std::vector<std::uint8_t>& mask, int h, int w) {
    Tensor t({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = mask[static_cast<std::size_t>(y) * w + x] ? 1.0 : -1.0;
            for (int c = 0; c < 3; ++c) t.at(c, y, x) = v;
        }
    return Frame{t};
}

Frame gt_panel(const GroundTruthFrame& gt) {
    Tensor t({3, gt.height, gt.width});
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            double v = -1.0;
            if (gt.at(y, x) == PixelLabel::foreground) v = 1.0;
            else if (gt.at(y, x) == PixelLabel::ignore) v = 0.0;
            for (int c = 0; c < 3; ++c) t.at(c, y, x) = v;
        }
    return Frame{t};
}

Frame hstack(const std::vector<Frame>& panels) {
    const int h = panels.front().height();
    int total_w = 0;
    for (const Frame& p : panels) total_w += p.width();
    Tensor t({3, h, total_w});
    int off = 0;
    for (const Frame& p : panels) {
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < p.width(); ++x) t.at(c, y, off + x) = p.pixels.at(c, y, x);
        off += p.width();
    }
    return Frame{t};
}

int run_visualize(RunConfig rc, int max_frames) {
    const fs::path out(rc.output_dir);
    const fs::path manifest_path = out / "manifest.json";
    std::ifstream mf(manifest_path);
    if (!mf) throw ConfigError("visualize: no manifest at " + manifest_path.string());
    json manifest;
    mf >> manifest;

    if (rc.dataset.empty()) rc.dataset = manifest.value("dataset", std::string());
    if (rc.sequence.empty()) rc.sequence = manifest.value("sequence", std::string());
    rc.image_size_override = manifest.value("image_size", rc.train.image_size);
    const Sequence seq = load_configured_sequence(rc);

    const fs::path strip_dir = out / "strips";
    fs::create_directories(strip_dir);
    const int size = rc.train.image_size;

    int written = 0;
    for (const json& entry : manifest.at("frames")) {
        if (max_frames > 0 && written >= max_frames) break;
        const int idx = entry.at("index").get<int>();
        auto load_panel = [&](const char* key) {
            if (!entry.contains(key))
                throw ConfigError(std::string("visualize: manifest entry lacks '") + key +
                                  "' (rerun segment with intermediates enabled)");
            return load_rgb_png((out / entry.at(key).get<std::string>()).string(), size);
        };

        std::vector<Frame> panels;
        panels.push_back(seq.frames[static_cast<std::size_t>(idx)]); // input
        panels.push_back(load_panel("suppressed"));                  // masked input
        panels.push_back(load_panel("rgb_background"));              // generated background
        panels.push_back(load_panel("rgb_residual"));                // subtraction image
        const Frame fused = load_panel("fused");
        panels.push_back(fused); // binary output
        if (seq.has_gt(idx)) panels.push_back(gt_panel(*seq.gt[static_cast<std::size_t>(idx)]));
        else panels.push_back(Frame{Tensor({3, size, size}, -1.0)});
        if (seq.has_depth()) {
            panels.push_back(Frame{seq.depth_frames[static_cast<std::size_t>(idx)].pixels});
            if (entry.contains("depth_background"))
                panels.push_back(load_panel("depth_background"));
        }

        write_rgb_png((strip_dir / frame_name(idx)).string(), hstack(panels));
        ++written;
    }
    std::cout << "wrote " << written << " strips to " << strip_dir.string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"scene-specific background generation and RGB-D foreground segmentation"};
    app.require_subcommand(1);
    app.fallthrough(); // lets `foregan <cmd> --config ...` reach the global option

    std::string config_path;
    app.add_option("--config", config_path, "run configuration JSON")->capture_default_str();

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a deterministic synthetic dataset");
    SceneSpec scene;
    std::string synth_out = "data";
    std::string synth_name = "synthetic";
    std::uint64_t synth_seed = 1;
    synth_cmd->add_option("--out", synth_out, "dataset root directory");
    synth_cmd->add_option("--name", synth_name, "sequence name");
    synth_cmd->add_option("--seed", synth_seed, "scene seed");
    synth_cmd->add_option("--frames", scene.frame_count, "frame count");
    synth_cmd->add_option("--size", scene.width, "square frame size");
    synth_cmd->add_option("--object-size", scene.object_size, "object size in pixels");
    synth_cmd->add_option("--speed", scene.object_speed, "object speed (px/frame)");
    synth_cmd->add_option("--entry", scene.entry_frame, "first frame containing the object");
    synth_cmd->add_option("--noise", scene.noise_sigma, "sensor noise sigma");
    synth_cmd->add_option("--category", scene.category, "category tag");
    bool no_shadow = false, color_cam = false, depth_cam = false, out_of_range = false;
    synth_cmd->add_flag("--no-shadow", no_shadow, "disable the shadow overlay");
    synth_cmd->add_flag("--color-camouflage", color_cam, "object color close to background");
    synth_cmd->add_flag("--depth-camouflage", depth_cam, "object depth close to background");
    synth_cmd->add_flag("--out-of-range", out_of_range, "add an invalid-depth region");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a scene-specific model");
    std::string train_modality = "rgb";
    train_cmd->add_option("--modality", train_modality, "rgb | depth")->required();

    // segment
    auto* segment_cmd = app.add_subcommand("segment", "segment a sequence");
    bool oracle_flag = false;
    segment_cmd->add_flag("--oracle", oracle_flag, "use the true synthetic background generator");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score masks against ground truth");
    std::string pred_dir;
    std::string eval_stream = "fused";
    std::string eval_mode;
    eval_cmd->add_option("--pred", pred_dir, "directory with a masks/ tree");
    eval_cmd->add_option("--stream", eval_stream, "fused | rgb | depth");
    eval_cmd->add_option("--mode", eval_mode, "mean-of-frames | pooled-counts");

    // visualize
    auto* vis_cmd = app.add_subcommand("visualize", "render per-frame step panels");
    int vis_frames = 0;
    vis_cmd->add_option("--frames", vis_frames, "limit the number of strips");

    // shared overrides
    std::string dataset_flag, sequence_flag, output_flag;
    std::optional<std::uint64_t> seed_flag;
    std::optional<int> epochs_flag, steps_flag, workers_flag, size_flag;
    std::string modality_flag;
    for (CLI::App* cmd : {train_cmd, segment_cmd, eval_cmd, vis_cmd}) {
        cmd->add_option("--dataset", dataset_flag, "dataset spec JSON");
        cmd->add_option("--sequence", sequence_flag, "sequence name");
        cmd->add_option("--output", output_flag, "output directory");
        cmd->add_option("--seed", seed_flag, "seed override");
        cmd->add_option("--workers", workers_flag, "worker threads");
        cmd->add_option("--image-size", size_flag, "model input size");
    }
    train_cmd->add_option("--epochs", epochs_flag, "epoch override");
    segment_cmd->add_option("--steps", steps_flag, "inversion steps override");
    segment_cmd->add_option("--modality", modality_flag, "rgbd | rgb | depth");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        RunConfig rc = load_run_config(config_path);
        if (!dataset_flag.empty()) rc.dataset = dataset_flag;
        if (!sequence_flag.empty()) rc.sequence = sequence_flag;
        if (!output_flag.empty()) rc.output_dir = output_flag;
        if (seed_flag) rc.seed = *seed_flag;
        if (workers_flag) rc.workers = *workers_flag;
        if (size_flag) {
            rc.image_size_override = *size_flag;
            rc.train.image_size = *size_flag;
        }
        if (epochs_flag) rc.train.epochs = *epochs_flag;
        if (steps_flag) rc.inversion.steps = *steps_flag;
        if (!modality_flag.empty()) rc.modality = modality_flag;
        if (oracle_flag) rc.oracle = true;
        apply_seed_env(rc);

        if (synth_cmd->parsed()) {
            scene.height = scene.width;
            scene.shadow = !no_shadow;
            scene.color_camouflage = color_cam;
            scene.depth_camouflage = depth_cam;
            scene.out_of_range_region = out_of_range;
            if (const char* env = std::getenv("FOREGAN_SEED")) synth_seed = std::stoull(env);
            RunConfig sc = rc;
            sc.seed = synth_seed;
            return run_synth(sc, scene, synth_out, synth_name);
        }
        if (train_cmd->parsed()) return run_train(rc, train_modality);
        if (segment_cmd->parsed()) return run_segment(rc);
        if (eval_cmd->parsed()) {
            if (!eval_mode.empty()) rc.aggregation = parse_aggregation(eval_mode);
            return run_eval(rc, pred_dir, eval_stream);
        }
        if (vis_cmd->parsed()) return run_visualize(rc, vis_frames);
        throw ConfigError("no subcommand selected");
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const LoadError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const StructuralError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TrainingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const InversionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
