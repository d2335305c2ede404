// Command-line surface for the seizure-detection pipeline: synthetic data
// generation, clip segmentation, training, evaluation, single-clip
// inference, streaming onset detection, cost accounting and occlusion maps.

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "stvig/io.hpp"
#include "stvig/trainer.hpp"

namespace fs = std::filesystem;
using namespace stvig;

namespace {

struct ModelFlags {
    std::string variant = "light";
    int frames = 30;
    int patch = 32;
    double sigma = 0.3;
    std::string pos_embed = "stem";
    bool no_dynamic = false;
    bool stochastic = false;
    int stem_channels = 0;  // 0: variant default

    void attach(CLI::App* app) {
        app->add_option("--variant", variant, "model version: base or light")
            ->check(CLI::IsMember({"base", "light"}));
        app->add_option("--frames", frames, "frames per clip after sampling");
        app->add_option("--patch-size", patch, "patch height/width in pixels");
        app->add_option("--sigma", sigma, "Gaussian width relative to the patch size");
        app->add_option("--pos-embed", pos_embed, "positional mode: none, concat, learnable, stem")
            ->check(CLI::IsMember({"none", "concat", "learnable", "stem"}));
        app->add_flag("--no-dynamic-partition", no_dynamic, "disable the partition shuffle");
        app->add_flag("--stochastic-shuffle", stochastic, "random instead of rotating shuffles");
        app->add_option("--stem-channels", stem_channels, "override the stem width");
    }

    ModelConfig build() const {
        ModelConfig cfg = variant == "base" ? ModelConfig::base() : ModelConfig::light();
        cfg.frames = frames;
        cfg.patch.h = patch;
        cfg.patch.w = patch;
        cfg.patch.sigma_rel = sigma;
        cfg.pos_embed = pos_embed_from_name(pos_embed);
        cfg.dynamic_partition = !no_dynamic;
        cfg.stochastic_shuffle = stochastic;
        if (stem_channels > 0) cfg.stem_channels = stem_channels;
        cfg.validate();
        return cfg;
    }
};

struct DecisionFlags {
    double tau = 3.0;
    double rate = 0.5;
    double dt = 0.3;
    bool sum_mode = false;

    void attach(CLI::App* app) {
        app->add_option("--tau", tau, "accumulation period in seconds");
        app->add_option("--rate", rate, "detection interval in seconds");
        app->add_option("--dt", dt, "decision threshold");
        app->add_flag("--sum-mode", sum_mode, "accumulate raw sums instead of window means");
    }

    DecisionConfig build() const {
        DecisionConfig cfg;
        cfg.tau = tau;
        cfg.rate = rate;
        cfg.dt = dt;
        cfg.mode = sum_mode ? AccumulateMode::Sum : AccumulateMode::Mean;
        cfg.validate();
        return cfg;
    }
};

std::string default_config_path(const std::string& weights_path) { return weights_path + ".cfg"; }

ModelConfig resolve_model_config(const std::string& weights_path, const std::string& explicit_path) {
    const std::string path = explicit_path.empty() ? default_config_path(weights_path) : explicit_path;
    if (!fs::exists(path))
        throw std::runtime_error("model config not found at " + path +
                                 " (pass --model-config or keep the .cfg sidecar next to the weights)");
    return read_model_config(path);
}

void print_outcome(const std::string& tag, const DetectionOutcome& out) {
    std::cout << tag << ": ";
    if (!out.detected) {
        std::cout << "no detection\n";
        return;
    }
    std::cout << "ONSET t=" << *out.t_onset;
    if (out.l_eo) std::cout << "  L_EO=" << *out.l_eo << "s  L_CO=" << *out.l_co << "s";
    std::cout << "\n";
}

/// Frames plus matching trace records for a 5 s window of a recording.
std::pair<TensorPtr<float>, TensorPtr<float>> window_tensors(FrameProvider& provider,
                                                             const ModelConfig& cfg, double start,
                                                             double clip_seconds) {
    const double fps = provider.fps();
    const int first = static_cast<int>(std::llround(start * fps));
    const int count = static_cast<int>(std::llround(clip_seconds * fps));
    if (first < 0 || first + count > provider.frame_count())
        throw std::runtime_error("clip window outside the recording");
    std::vector<Image> frames;
    frames.reserve(static_cast<std::size_t>(count));
    SkeletonTrace trace;
    trace.frame_rate = fps;
    trace.width = provider.width();
    trace.height = provider.height();
    for (int f = first; f < first + count; ++f) {
        frames.push_back(provider.frame(f));
        trace.frames.push_back(provider.keypoints(f));
    }
    return {build_clip_patches<float>(frames, trace, cfg.patch, cfg.frames),
            normalized_coordinates<float>(trace, cfg.frames)};
}

int cmd_gen_data(const std::string& out_dir, const std::string& id, SyntheticScenario sc,
                 bool export_ppm) {
    const fs::path dir = fs::path(out_dir) / id;
    fs::create_directories(dir);
    SyntheticPatient patient(sc);

    RawVideoWriter writer((dir / "frames.svfr").string(), patient.width(), patient.height());
    for (int f = 0; f < patient.frame_count(); ++f) {
        const Image im = patient.render_frame(f);
        writer.append(im);
        if (export_ppm && f < 10) {
            std::ostringstream name;
            name << "frame" << std::setw(5) << std::setfill('0') << f << ".ppm";
            write_ppm((dir / name.str()).string(), im);
        }
    }
    writer.close();
    write_trace((dir / "trace.txt").string(), patient.full_trace());
    if (sc.has_seizure) write_annotation((dir / "annotation.txt").string(), sc.annotation);

    std::cout << "wrote " << patient.frame_count() << " frames (" << patient.width() << "x"
              << patient.height() << ") to " << dir.string() << "\n";
    if (sc.has_seizure)
        std::cout << "annotation: eeg_onset=" << sc.annotation.eeg_onset
                  << " clinical_onset=" << sc.annotation.clinical_onset
                  << " focus_partition=" << sc.focus_partition << "\n";
    return 0;
}

int cmd_segment(const std::string& data_dir, const std::string& annotation_path,
                const std::string& recording, const std::string& out_path,
                const SegmentOptions& opt) {
    std::vector<LabeledClip> clips;
    if (!annotation_path.empty()) {
        const auto ann = read_annotation(annotation_path);
        const auto rec = recording.empty()
                             ? fs::path(annotation_path).parent_path().filename().string()
                             : recording;
        clips = segment_clips(ann, rec, opt);
    } else {
        std::vector<fs::path> dirs;
        for (const auto& entry : fs::directory_iterator(data_dir))
            if (entry.is_directory() && fs::exists(entry.path() / "annotation.txt"))
                dirs.push_back(entry.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto& dir : dirs) {
            const auto ann = read_annotation((dir / "annotation.txt").string());
            for (auto c : segment_clips(ann, dir.filename().string(), opt))
                clips.push_back(std::move(c));
        }
        if (clips.empty())
            throw std::runtime_error("no annotated recordings found under " + data_dir);
    }
    write_manifest(out_path, clips);

    std::size_t counts[3] = {0, 0, 0};
    for (const auto& c : clips) ++counts[static_cast<int>(c.period)];
    std::cout << "wrote " << clips.size() << " clips to " << out_path << " (interictal "
              << counts[0] << ", transition " << counts[1] << ", ictal " << counts[2] << ")\n";
    return 0;
}

int cmd_train(const std::string& manifest, const std::string& data_dir, const std::string& out,
              const TrainConfig& cfg) {
    const auto clips = read_manifest(manifest);
    if (clips.empty()) throw std::runtime_error("empty manifest: " + manifest);
    FileClipSource source(data_dir, clips, cfg.model);

    const auto result = train(source, cfg);

    save_weights(out, result.weights);
    write_model_config(default_config_path(out), cfg.model);

    const std::string history_path = out + ".history.txt";
    {
        std::ofstream os(history_path);
        os << std::setprecision(10);
        for (const auto& e : result.history)
            os << e.epoch << " " << e.lr << " " << e.train_rmse << " " << e.val_rmse << "\n";
    }

    std::cout << "trained " << result.history.size() << " epochs; best epoch "
              << result.best_epoch << " with validation RMSE " << std::fixed
              << std::setprecision(2) << result.best_val_rmse << "%\n"
              << "weights: " << out << "\nconfig:  " << default_config_path(out)
              << "\nhistory: " << history_path << "\n";
    return 0;
}

int cmd_eval(const std::string& weights_path, const std::string& model_config,
             const std::string& manifest, const std::string& data_dir, int threads) {
    const auto cfg = resolve_model_config(weights_path, model_config);
    const auto weights = load_weights<float>(weights_path, cfg);
    const auto clips = read_manifest(manifest);
    FileClipSource source(data_dir, clips, cfg);

    const auto report = evaluate(weights, source, threads);
    std::cout << std::fixed << std::setprecision(3);
    std::cout << "clips       " << report.n_clips << "\n";
    std::cout << "rmse        " << report.rmse_percent << " %\n";
    for (int p = 0; p < 3; ++p)
        std::cout << std::left << std::setw(12) << period_name(static_cast<Period>(p))
                  << report.period_rmse_percent[p] << " %  (" << report.period_counts[p]
                  << " clips)\n";
    std::cout << "params      " << report.param_count << "\n";
    std::cout << "flops       " << report.flops << "\n";
    std::cout << "wall        " << report.wall_seconds << " s\n";
    return 0;
}

int cmd_infer(const std::string& weights_path, const std::string& model_config,
              const std::string& frames_path, const std::string& trace_path, double start) {
    const auto cfg = resolve_model_config(weights_path, model_config);
    const auto weights = load_weights<float>(weights_path, cfg);
    FileFrameProvider provider(frames_path, trace_path);
    const auto [clip, coords] = window_tensors(provider, cfg, start, 5.0);
    NoGradGuard ng;
    const auto p = forward(cfg, weights, clip, coords);
    std::cout << std::setprecision(6) << static_cast<double>(p->item()) << "\n";
    return 0;
}

int cmd_detect_stream(const DecisionConfig& dconf) {
    StreamingDetector detector(dconf);
    double t, p;
    while (std::cin >> t >> p) {
        if (auto alarm = detector.append(t, p)) {
            std::cout << "ONSET t=" << *alarm << std::endl;
        }
    }
    if (!detector.alarmed()) std::cout << "no detection\n";
    return 0;
}

int cmd_detect(const std::string& weights_path, const std::string& model_config,
               const std::string& frames_path, const std::string& trace_path,
               const std::string& annotation_path, const std::string& probs_path,
               const std::string& out_probs, const DecisionConfig& dconf, int threads) {
    if (!probs_path.empty()) {
        auto trace = read_probability_trace(probs_path);
        const auto out = decide(trace, dconf);
        DecisionConfig instant = dconf;
        instant.tau = 0.0;
        print_outcome("with accumulation   ", out);
        print_outcome("without accumulation", decide(trace, instant));
        return out.detected ? 0 : 1;
    }

    const auto cfg = resolve_model_config(weights_path, model_config);
    const auto weights = load_weights<float>(weights_path, cfg);
    FileFrameProvider provider(frames_path, trace_path);
    std::optional<SeizureAnnotation> ann;
    if (!annotation_path.empty()) ann = read_annotation(annotation_path);

    const auto run = run_detection(weights, provider, dconf, ann, 5.0, threads);
    if (!out_probs.empty()) {
        write_probability_trace(out_probs, run.trace);
        std::cout << "probability trace: " << out_probs << " (" << run.trace.samples.size()
                  << " samples)\n";
    }
    print_outcome("with accumulation   ", run.with_accumulation);
    print_outcome("without accumulation", run.without_accumulation);
    return run.with_accumulation.detected ? 0 : 1;
}

int cmd_flops(const ModelFlags& flags) {
    std::cout << std::left << std::setw(10) << "variant" << std::setw(14) << "params"
              << "flops\n";
    for (const auto* name : {"light", "base"}) {
        ModelFlags f = flags;
        f.variant = name;
        f.stem_channels = 0;
        const auto cfg = f.build();
        std::cout << std::left << std::setw(10) << name << std::setw(14) << count_params(cfg)
                  << count_flops(cfg) << "\n";
    }
    return 0;
}

int cmd_occlude(const std::string& weights_path, const std::string& model_config,
                const std::string& frames_path, const std::string& trace_path, double start) {
    const auto cfg = resolve_model_config(weights_path, model_config);
    const auto weights = load_weights<float>(weights_path, cfg);
    FileFrameProvider provider(frames_path, trace_path);
    const auto [clip, coords] = window_tensors(provider, cfg, start, 5.0);

    const auto spec = build_partition_spec();
    const auto scores = occlusion_saliency(cfg, weights, clip, coords);
    std::cout << std::setprecision(6);
    for (int p = 0; p < kPartitionCount; ++p)
        std::cout << std::left << std::setw(12) << spec.partition_names[p] << scores[p] << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skeleton-based spatiotemporal vision-graph seizure detection"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a key=value file");
    app.allow_config_extras(true);

    auto* gen = app.add_subcommand("gen-data", "render a procedural patient recording");
    std::string gen_out = "data", gen_id = "rec01";
    SyntheticScenario sc;
    bool no_seizure = false, export_ppm = false;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--id", gen_id, "recording identifier");
    gen->add_option("--seed", sc.seed, "generator seed");
    gen->add_option("--duration", sc.duration, "seconds");
    gen->add_option("--eeg-onset", sc.annotation.eeg_onset, "seconds");
    gen->add_option("--clinical-onset", sc.annotation.clinical_onset, "seconds");
    gen->add_flag("--no-seizure", no_seizure, "interictal-only recording");
    gen->add_option("--width", sc.width, "frame width");
    gen->add_option("--height", sc.height, "frame height");
    gen->add_option("--fps", sc.fps, "frame rate");
    gen->add_option("--focus", sc.focus_partition, "seizing partition index 1-4");
    gen->add_option("--secondary", sc.secondary_partition, "second scripted limb (0 = auto)");
    gen->add_flag("--export-ppm", export_ppm, "also write the first frames as PPM");

    auto* seg = app.add_subcommand("segment", "build a labeled clip manifest from annotations");
    std::string seg_data = "data", seg_ann, seg_rec, seg_out = "clips.txt";
    SegmentOptions seg_opt;
    std::string seg_kind = "exponential";
    seg->add_option("--data-dir", seg_data, "directory of recordings to scan");
    seg->add_option("--annotation", seg_ann, "segment a single annotation file instead");
    seg->add_option("--recording", seg_rec, "recording id for --annotation");
    seg->add_option("--out", seg_out, "manifest path");
    seg->add_option("--clip-len", seg_opt.clip_len, "clip length in seconds");
    seg->add_option("--interictal-stride", seg_opt.interictal_stride, "seconds");
    seg->add_option("--overlap", seg_opt.event_overlap, "event-period overlap in seconds");
    seg->add_option("--label-kind", seg_kind, "linear, sigmoid or exponential")
        ->check(CLI::IsMember({"linear", "sigmoid", "exponential"}));
    seg->add_option("--steepness", seg_opt.steepness, "ramp steepness k");

    auto* tr = app.add_subcommand("train", "train a model from a manifest");
    std::string tr_manifest = "clips.txt", tr_data = "data", tr_out = "model.svgw";
    TrainConfig tc;
    ModelFlags tr_model;
    std::string tr_kind = "exponential";
    tr->add_option("--manifest", tr_manifest, "labeled clip manifest");
    tr->add_option("--data-dir", tr_data, "recordings directory");
    tr->add_option("--out", tr_out, "output weights path");
    tr->add_option("--epochs", tc.epochs, "training epochs");
    tr->add_option("--batch-size", tc.batch_size, "clips per optimizer step");
    tr->add_option("--lr", tc.learning_rate, "learning rate");
    tr->add_option("--lr-decay-gamma", tc.lr_decay_gamma, "decay factor");
    tr->add_option("--lr-decay-every", tc.lr_decay_every, "epochs between decays");
    tr->add_option("--weight-decay", tc.weight_decay, "decoupled weight decay");
    tr->add_option("--seed", tc.seed, "run seed");
    tr->add_option("--split-ratio", tc.split_ratio, "train fraction per period");
    tr->add_option("--threads", tc.threads, "worker threads (0 = auto)");
    tr->add_option("--early-stop-val-rmse", tc.early_stop_val_rmse,
                   "stop once validation RMSE (%) drops below this");
    tr->add_option("--label-kind", tr_kind, "label family recorded in the manifest")
        ->check(CLI::IsMember({"linear", "sigmoid", "exponential"}));
    tr->add_option("--steepness", tc.label_steepness, "label steepness k");
    tr_model.attach(tr);

    auto* ev = app.add_subcommand("eval", "validation report for trained weights");
    std::string ev_weights, ev_cfg, ev_manifest, ev_data = "data";
    int ev_threads = 0;
    ev->add_option("--weights", ev_weights)->required();
    ev->add_option("--model-config", ev_cfg, "defaults to <weights>.cfg");
    ev->add_option("--manifest", ev_manifest)->required();
    ev->add_option("--data-dir", ev_data);
    ev->add_option("--threads", ev_threads);

    auto* in = app.add_subcommand("infer", "probability for one 5 s clip");
    std::string in_weights, in_cfg, in_frames, in_trace;
    double in_start = 0.0;
    in->add_option("--weights", in_weights)->required();
    in->add_option("--model-config", in_cfg);
    in->add_option("--frames", in_frames)->required();
    in->add_option("--trace", in_trace)->required();
    in->add_option("--start", in_start, "clip start time in seconds");

    auto* de = app.add_subcommand("detect", "streaming onset decision over a recording");
    std::string de_weights, de_cfg, de_frames, de_trace, de_ann, de_probs, de_out_probs;
    bool de_stdin = false;
    int de_threads = 0;
    DecisionFlags de_flags;
    de->add_option("--weights", de_weights);
    de->add_option("--model-config", de_cfg);
    de->add_option("--frames", de_frames);
    de->add_option("--trace", de_trace);
    de->add_option("--annotation", de_ann, "attach onset annotations for latency reporting");
    de->add_option("--probs", de_probs, "skip the model and decide over a probability trace file");
    de->add_flag("--stdin", de_stdin, "read 'time probability' lines from standard input");
    de->add_option("--out-probs", de_out_probs, "write the model's probability trace here");
    de->add_option("--threads", de_threads);
    de_flags.attach(de);

    auto* fl = app.add_subcommand("flops", "parameter and FLOP table");
    ModelFlags fl_model;
    fl_model.attach(fl);

    auto* oc = app.add_subcommand("occlude", "per-partition occlusion saliency for one clip");
    std::string oc_weights, oc_cfg, oc_frames, oc_trace;
    double oc_start = 0.0;
    oc->add_option("--weights", oc_weights)->required();
    oc->add_option("--model-config", oc_cfg);
    oc->add_option("--frames", oc_frames)->required();
    oc->add_option("--trace", oc_trace)->required();
    oc->add_option("--start", oc_start, "clip start time in seconds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            sc.has_seizure = !no_seizure;
            return cmd_gen_data(gen_out, gen_id, sc, export_ppm);
        }
        if (seg->parsed()) {
            seg_opt.kind = label_kind_from_name(seg_kind);
            return cmd_segment(seg_data, seg_ann, seg_rec, seg_out, seg_opt);
        }
        if (tr->parsed()) {
            tc.label_kind = label_kind_from_name(tr_kind);
            tc.model = tr_model.build();
            return cmd_train(tr_manifest, tr_data, tr_out, tc);
        }
        if (ev->parsed()) return cmd_eval(ev_weights, ev_cfg, ev_manifest, ev_data, ev_threads);
        if (in->parsed()) return cmd_infer(in_weights, in_cfg, in_frames, in_trace, in_start);
        if (de->parsed()) {
            const auto dconf = de_flags.build();
            if (de_stdin) return cmd_detect_stream(dconf);
            if (de_probs.empty() && (de_weights.empty() || de_frames.empty() || de_trace.empty()))
                throw std::runtime_error("detect needs --stdin, --probs, or --weights/--frames/--trace");
            return cmd_detect(de_weights, de_cfg, de_frames, de_trace, de_ann, de_probs,
                              de_out_probs, dconf, de_threads);
        }
        if (fl->parsed()) return cmd_flops(fl_model);
        if (oc->parsed()) return cmd_occlude(oc_weights, oc_cfg, oc_frames, oc_trace, oc_start);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
