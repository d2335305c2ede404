#include "stvig/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace stvig {

namespace {

int clamp_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
}

/// Runs fn(i) for i in [0, n) across the given number of threads, each
/// thread owning a contiguous chunk. The first worker exception is
/// rethrown on the caller.
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    const int nthreads = static_cast<int>(std::min<std::size_t>(threads, n));
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nthreads));
    const std::size_t chunk = (n + nthreads - 1) / nthreads;
    for (int w = 0; w < nthreads; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, w, &fn, &errors]() {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i, w);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double to_rmse_percent(double sum_sq, std::size_t n) {
    if (n == 0) return 0.0;
    return 100.0 * std::sqrt(sum_sq / static_cast<double>(n));
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw std::invalid_argument("TrainConfig: epochs and batch size must be positive");
    if (learning_rate <= 0.0 || lr_decay_gamma <= 0.0 || lr_decay_every < 1)
        throw std::invalid_argument("TrainConfig: learning-rate schedule values must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight decay must be >= 0");
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        throw std::invalid_argument("TrainConfig: split ratio must lie in (0, 1)");
    model.validate();
}

double TrainConfig::lr_at(int epoch) const {
    return learning_rate * std::pow(lr_decay_gamma, epoch / lr_decay_every);
}

int TrainConfig::worker_count() const { return clamp_threads(threads); }

// --- clip sources -----------------------------------------------------------

namespace {

ClipItem make_item(const std::vector<Image>& frames, const SkeletonTrace& trace,
                   const ModelConfig& model, float label) {
    ClipItem item;
    item.clip = build_clip_patches<float>(frames, trace, model.patch, model.frames);
    item.coords = normalized_coordinates<float>(trace, model.frames);
    item.label = label;
    return item;
}

}  // namespace

SyntheticClipSource::SyntheticClipSource(std::vector<std::shared_ptr<const SyntheticPatient>> patients,
                                         std::vector<std::string> recording_ids,
                                         std::vector<LabeledClip> clips, const ModelConfig& model)
    : patients_(std::move(patients)), ids_(std::move(recording_ids)), clips_(std::move(clips)),
      model_(model) {
    if (patients_.size() != ids_.size())
        throw std::invalid_argument("SyntheticClipSource: one recording id per patient required");
}

ClipItem SyntheticClipSource::load(std::size_t i) const {
    const auto& c = clips_.at(i);
    const auto it = std::find(ids_.begin(), ids_.end(), c.recording);
    if (it == ids_.end()) throw std::runtime_error("unknown recording in manifest: " + c.recording);
    const auto& patient = *patients_[static_cast<std::size_t>(it - ids_.begin())];
    const double fps = patient.fps();
    const int first = static_cast<int>(std::llround(c.start * fps));
    const int count = static_cast<int>(std::llround((c.end - c.start) * fps));
    return make_item(patient.render_range(first, count), patient.trace(first, count), model_,
                     static_cast<float>(c.label));
}

FileClipSource::FileClipSource(std::string data_dir, std::vector<LabeledClip> clips,
                               const ModelConfig& model)
    : dir_(std::move(data_dir)), clips_(std::move(clips)), model_(model) {
    for (const auto& c : clips_)
        if (std::find(recordings_.begin(), recordings_.end(), c.recording) == recordings_.end())
            recordings_.push_back(c.recording);
    traces_.reserve(recordings_.size());
    for (const auto& rec : recordings_) traces_.push_back(read_trace(dir_ + "/" + rec + "/trace.txt"));
}

int FileClipSource::recording_index(const std::string& id) const {
    const auto it = std::find(recordings_.begin(), recordings_.end(), id);
    if (it == recordings_.end()) throw std::runtime_error("unknown recording in manifest: " + id);
    return static_cast<int>(it - recordings_.begin());
}

ClipItem FileClipSource::load(std::size_t i) const {
    const auto& c = clips_.at(i);
    const int rec = recording_index(c.recording);
    const auto& full_trace = traces_[rec];
    const double fps = full_trace.frame_rate;
    const int first = static_cast<int>(std::llround(c.start * fps));
    const int count = static_cast<int>(std::llround((c.end - c.start) * fps));
    if (first < 0 || first + count > static_cast<int>(full_trace.frames.size()))
        throw std::runtime_error("clip range outside trace for recording " + c.recording);

    RawVideoReader reader(dir_ + "/" + c.recording + "/frames.svfr");
    std::vector<Image> frames;
    frames.reserve(static_cast<std::size_t>(count));
    for (int f = first; f < first + count; ++f) frames.push_back(reader.frame(f));

    SkeletonTrace trace;
    trace.frame_rate = fps;
    trace.width = full_trace.width;
    trace.height = full_trace.height;
    trace.frames.assign(full_trace.frames.begin() + first, full_trace.frames.begin() + first + count);
    return make_item(frames, trace, model_, static_cast<float>(c.label));
}

FileFrameProvider::FileFrameProvider(const std::string& video_path, const std::string& trace_path)
    : reader_(video_path), trace_(read_trace(trace_path)) {
    if (static_cast<int>(trace_.frames.size()) != reader_.frame_count())
        throw std::runtime_error("trace length " + std::to_string(trace_.frames.size()) +
                                 " does not match the video's " +
                                 std::to_string(reader_.frame_count()) + " frames");
}

int FileFrameProvider::frame_count() const { return reader_.frame_count(); }

// --- optimizer ----------------------------------------------------------------

AdamOptimizer::AdamOptimizer(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(ModelWeights<float>& weights, const std::vector<std::vector<float>>& grads,
                         double lr, double weight_decay) {
    if (grads.size() != weights.tensors.size())
        throw std::invalid_argument("AdamOptimizer: gradient buffer does not match weight set");
    if (m_.empty()) {
        m_.resize(grads.size());
        v_.resize(grads.size());
        for (std::size_t i = 0; i < grads.size(); ++i) {
            m_[i].assign(grads[i].size(), 0.0);
            v_[i].assign(grads[i].size(), 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        auto wdata = weights.tensors[i].second->data();
        const auto& g = grads[i];
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double gj = g[j];
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            double w = wdata[j];
            w -= lr * mhat / (std::sqrt(vhat) + eps_);
            w -= lr * weight_decay * w;  // decoupled decay
            wdata[j] = static_cast<float>(w);
        }
    }
}

// --- training loop -------------------------------------------------------------

namespace {

/// Mean validation squared error under frozen weights.
double validation_sum_sq(const ModelWeights<float>& weights, const ClipSource& source,
                         const std::vector<std::size_t>& indices, int threads) {
    std::vector<double> sq(indices.size(), 0.0);
    parallel_chunks(indices.size(), threads, [&](std::size_t k, int) {
        NoGradGuard ng;
        const auto item = source.load(indices[k]);
        const auto pred = forward(weights.config, weights, item.clip, item.coords);
        const double d = static_cast<double>(pred->item()) - static_cast<double>(item.label);
        sq[k] = d * d;
    });
    double sum = 0.0;
    for (double s : sq) sum += s;
    return sum;
}

}  // namespace

TrainResult train(const ClipSource& source, const TrainConfig& cfg) {
    cfg.validate();
    if (source.size() == 0) throw std::invalid_argument("train: empty clip source");

    std::vector<Period> periods;
    periods.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) periods.push_back(source.info(i).period);
    const auto split = split_indices(periods, cfg.split_ratio, cfg.seed);
    if (split.train.empty() || split.val.empty())
        throw std::invalid_argument("train: split produced an empty train or validation set");
    return train_with_split(source, cfg, split.train, split.val);
}

TrainResult train_with_split(const ClipSource& source, const TrainConfig& cfg,
                             const std::vector<std::size_t>& train_idx,
                             const std::vector<std::size_t>& val_idx) {
    cfg.validate();
    if (train_idx.empty() || val_idx.empty())
        throw std::invalid_argument("train: empty train or validation set");

    const int threads = cfg.worker_count();
    auto weights = ModelWeights<float>::initialize(cfg.model, cfg.seed);
    AdamOptimizer opt;

    TrainResult result{weights.clone(), {}, 0, std::numeric_limits<double>::infinity()};

    std::vector<std::size_t> order = train_idx;
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr_at(epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng() % i]);

        double train_sum_sq = 0.0;
        for (std::size_t batch_lo = 0; batch_lo < order.size();
             batch_lo += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t batch_hi =
                std::min(order.size(), batch_lo + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t batch_n = batch_hi - batch_lo;

            const int nworkers = static_cast<int>(std::min<std::size_t>(threads, batch_n));
            std::vector<ModelWeights<float>> clones;
            clones.reserve(static_cast<std::size_t>(nworkers));
            for (int w = 0; w < nworkers; ++w) clones.push_back(weights.clone());
            std::vector<double> worker_sq(static_cast<std::size_t>(nworkers), 0.0);

            const std::size_t chunk = (batch_n + nworkers - 1) / nworkers;
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nworkers));
            for (int w = 0; w < nworkers; ++w) {
                const std::size_t lo = batch_lo + w * chunk;
                const std::size_t hi = std::min(batch_hi, lo + chunk);
                if (lo >= hi) break;
                pool.emplace_back([&, w, lo, hi]() {
                    try {
                        auto& local = clones[static_cast<std::size_t>(w)];
                        for (std::size_t k = lo; k < hi; ++k) {
                            const auto item = source.load(order[k]);
                            auto pred = forward(local.config, local, item.clip, item.coords);
                            auto target = Tensor<float>::scalar(item.label);
                            auto loss = mse(pred, target);
                            const double l = static_cast<double>(loss->item());
                            if (!std::isfinite(l))
                                throw std::runtime_error("train: non-finite loss at epoch " +
                                                         std::to_string(epoch) + ", clip " +
                                                         std::to_string(order[k]));
                            worker_sq[static_cast<std::size_t>(w)] += l;
                            loss->backward();
                        }
                    } catch (...) {
                        errors[static_cast<std::size_t>(w)] = std::current_exception();
                    }
                });
            }
            for (auto& t : pool) t.join();
            for (const auto& e : errors)
                if (e) std::rethrow_exception(e);
            for (double s : worker_sq) train_sum_sq += s;

            // deterministic reduction: worker 0 first, then the rest
            std::vector<std::vector<float>> grads(weights.tensors.size());
            const float scale = 1.0f / static_cast<float>(batch_n);
            for (std::size_t ti = 0; ti < weights.tensors.size(); ++ti) {
                grads[ti].assign(static_cast<std::size_t>(weights.tensors[ti].second->size()), 0.0f);
                for (auto& clone : clones) {
                    auto g = clone.tensors[ti].second->grad();
                    for (std::size_t j = 0; j < grads[ti].size(); ++j) grads[ti][j] += g[j] * scale;
                }
            }
            opt.step(weights, grads, lr, cfg.weight_decay);
        }

        const double val_sum_sq = validation_sum_sq(weights, source, val_idx, threads);
        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_rmse = to_rmse_percent(train_sum_sq, order.size());
        stats.val_rmse = to_rmse_percent(val_sum_sq, val_idx.size());
        result.history.push_back(stats);

        if (stats.val_rmse < result.best_val_rmse) {
            result.best_val_rmse = stats.val_rmse;
            result.best_epoch = epoch;
            result.weights = weights.clone();
        }
        if (cfg.early_stop_val_rmse > 0.0 && stats.val_rmse < cfg.early_stop_val_rmse) break;
        if (cfg.early_stop_train_rmse > 0.0 && stats.train_rmse < cfg.early_stop_train_rmse) break;
    }
    return result;
}

EvalReport evaluate(const ModelWeights<float>& weights, const ClipSource& source, int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    const int nthreads = clamp_threads(threads);
    EvalReport report;
    report.n_clips = source.size();
    report.param_count = count_params(weights.config);
    report.flops = count_flops(weights.config);
    if (source.size() == 0) return report;

    std::vector<double> sq(source.size(), 0.0);
    parallel_chunks(source.size(), nthreads, [&](std::size_t i, int) {
        NoGradGuard ng;
        const auto item = source.load(i);
        const auto pred = forward(weights.config, weights, item.clip, item.coords);
        const double d = static_cast<double>(pred->item()) - static_cast<double>(item.label);
        sq[i] = d * d;
    });

    double total = 0.0;
    std::array<double, 3> per_period{};
    for (std::size_t i = 0; i < source.size(); ++i) {
        total += sq[i];
        const int p = static_cast<int>(source.info(i).period);
        per_period[p] += sq[i];
        ++report.period_counts[p];
    }
    report.rmse_percent = to_rmse_percent(total, source.size());
    for (int p = 0; p < 3; ++p)
        report.period_rmse_percent[p] = to_rmse_percent(per_period[p], report.period_counts[p]);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

DetectionRun run_detection(const ModelWeights<float>& weights, FrameProvider& provider,
                           const DecisionConfig& dconf,
                           const std::optional<SeizureAnnotation>& annotation, double clip_seconds,
                           int threads) {
    dconf.validate();
    const double fps = provider.fps();
    const int clip_frames = static_cast<int>(std::llround(clip_seconds * fps));
    const int hop = static_cast<int>(std::llround(dconf.rate * fps));
    if (hop < 1 || clip_frames < weights.config.frames)
        throw std::invalid_argument("run_detection: detection rate or clip length too small");
    if (provider.frame_count() < clip_frames)
        throw std::invalid_argument("run_detection: recording shorter than one clip");

    const int nthreads = clamp_threads(threads);
    const int n_windows = (provider.frame_count() - clip_frames) / hop + 1;

    DetectionRun run;
    run.trace.annotation = annotation;
    run.trace.samples.reserve(static_cast<std::size_t>(n_windows));

    SkeletonTrace window_trace;
    window_trace.frame_rate = fps;
    window_trace.width = provider.width();
    window_trace.height = provider.height();

    const int batch = std::max(2 * nthreads, 4);
    std::vector<Image> frames(static_cast<std::size_t>(clip_frames));
    for (int w0 = 0; w0 < n_windows; w0 += batch) {
        const int w1 = std::min(n_windows, w0 + batch);
        std::vector<ClipItem> items(static_cast<std::size_t>(w1 - w0));
        for (int wi = w0; wi < w1; ++wi) {
            const int first = wi * hop;
            window_trace.frames.clear();
            for (int f = 0; f < clip_frames; ++f) {
                frames[static_cast<std::size_t>(f)] = provider.frame(first + f);
                window_trace.frames.push_back(provider.keypoints(first + f));
            }
            auto& item = items[static_cast<std::size_t>(wi - w0)];
            item.clip = build_clip_patches<float>(frames, window_trace, weights.config.patch,
                                                  weights.config.frames);
            item.coords = normalized_coordinates<float>(window_trace, weights.config.frames);
        }
        std::vector<double> probs(items.size(), 0.0);
        parallel_chunks(items.size(), nthreads, [&](std::size_t k, int) {
            NoGradGuard ng;
            probs[k] = static_cast<double>(
                forward(weights.config, weights, items[k].clip, items[k].coords)->item());
        });
        for (std::size_t k = 0; k < items.size(); ++k) {
            const int wi = w0 + static_cast<int>(k);
            const double t_end = (wi * hop + clip_frames) / fps;
            run.trace.samples.push_back({t_end, std::clamp(probs[k], 0.0, 1.0)});
        }
    }

    run.with_accumulation = decide(run.trace, dconf);
    DecisionConfig instant = dconf;
    instant.tau = 0.0;
    run.without_accumulation = decide(run.trace, instant);
    return run;
}

}  // namespace stvig
