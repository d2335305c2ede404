#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stvig/decision.hpp"
#include "stvig/io.hpp"
#include "stvig/labeling.hpp"
#include "stvig/model.hpp"
#include "stvig/synthetic.hpp"

namespace stvig {

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-4;
    double lr_decay_gamma = 0.1;
    int lr_decay_every = 40;
    double weight_decay = 1e-6;
    std::uint64_t seed = 1;
    double split_ratio = 0.7;
    LabelKind label_kind = LabelKind::Exponential;
    double label_steepness = 5.0;
    int threads = 0;                    // 0: pick from hardware
    double early_stop_val_rmse = 0.0;    // percent; 0 disables
    double early_stop_train_rmse = 0.0;  // percent; 0 disables
    ModelConfig model;

    void validate() const;
    double lr_at(int epoch) const;
    int worker_count() const;
};

/// One loadable training example: the patch tensor, normalized coordinates
/// and the regression target.
struct ClipItem {
    TensorPtr<float> clip;
    TensorPtr<float> coords;
    float label = 0.0f;
};

/// Random-access clip store; load() must be safe to call from several
/// threads at once.
class ClipSource {
  public:
    virtual ~ClipSource() = default;
    virtual std::size_t size() const = 0;
    virtual const LabeledClip& info(std::size_t i) const = 0;
    virtual ClipItem load(std::size_t i) const = 0;
};

/// Clips materialized on demand from procedural recordings; nothing is
/// buffered, so arbitrarily many clips fit in memory.
class SyntheticClipSource : public ClipSource {
  public:
    SyntheticClipSource(std::vector<std::shared_ptr<const SyntheticPatient>> patients,
                        std::vector<std::string> recording_ids, std::vector<LabeledClip> clips,
                        const ModelConfig& model);

    std::size_t size() const override { return clips_.size(); }
    const LabeledClip& info(std::size_t i) const override { return clips_[i]; }
    ClipItem load(std::size_t i) const override;

  private:
    std::vector<std::shared_ptr<const SyntheticPatient>> patients_;
    std::vector<std::string> ids_;
    std::vector<LabeledClip> clips_;
    ModelConfig model_;
};

/// Clips resolved against on-disk recordings: <dir>/<recording>/frames.svfr
/// plus trace.txt, as produced by the gen-data tool.
class FileClipSource : public ClipSource {
  public:
    FileClipSource(std::string data_dir, std::vector<LabeledClip> clips, const ModelConfig& model);

    std::size_t size() const override { return clips_.size(); }
    const LabeledClip& info(std::size_t i) const override { return clips_[i]; }
    ClipItem load(std::size_t i) const override;

  private:
    std::string dir_;
    std::vector<LabeledClip> clips_;
    ModelConfig model_;
    std::vector<std::string> recordings_;
    std::vector<SkeletonTrace> traces_;  // per recording, loaded once
    int recording_index(const std::string& id) const;
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_rmse = 0.0;  // percent
    double val_rmse = 0.0;    // percent
};

struct TrainResult {
    ModelWeights<float> weights;  // best-on-validation
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_rmse = 0.0;
};

/// Adam with decoupled weight decay over a named weight set.
class AdamOptimizer {
  public:
    AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(ModelWeights<float>& weights, const std::vector<std::vector<float>>& grads,
              double lr, double weight_decay);
    int steps_taken() const { return t_; }

  private:
    double beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Splits the source per period (split_ratio), trains with MSE, and returns
/// the best-on-validation weights plus per-epoch history.
TrainResult train(const ClipSource& source, const TrainConfig& cfg);

/// Same loop over caller-chosen index sets; train and val may coincide,
/// which turns the run into a pure overfitting experiment.
TrainResult train_with_split(const ClipSource& source, const TrainConfig& cfg,
                             const std::vector<std::size_t>& train_idx,
                             const std::vector<std::size_t>& val_idx);

struct EvalReport {
    double rmse_percent = 0.0;
    std::array<double, 3> period_rmse_percent{};  // indexed by Period
    std::array<std::size_t, 3> period_counts{};
    std::size_t n_clips = 0;
    std::int64_t param_count = 0;
    std::int64_t flops = 0;
    double wall_seconds = 0.0;
};

EvalReport evaluate(const ModelWeights<float>& weights, const ClipSource& source, int threads = 0);

/// Random access to a frame stream for the detection loop.
class FrameProvider {
  public:
    virtual ~FrameProvider() = default;
    virtual int frame_count() const = 0;
    virtual double fps() const = 0;
    virtual int width() const = 0;
    virtual int height() const = 0;
    virtual Image frame(int i) = 0;
    virtual FrameKeypoints keypoints(int i) const = 0;
};

class SyntheticFrameProvider : public FrameProvider {
  public:
    explicit SyntheticFrameProvider(std::shared_ptr<const SyntheticPatient> patient)
        : patient_(std::move(patient)) {}
    int frame_count() const override { return patient_->frame_count(); }
    double fps() const override { return patient_->fps(); }
    int width() const override { return patient_->width(); }
    int height() const override { return patient_->height(); }
    Image frame(int i) override { return patient_->render_frame(i); }
    FrameKeypoints keypoints(int i) const override { return patient_->keypoints(i); }

  private:
    std::shared_ptr<const SyntheticPatient> patient_;
};

class FileFrameProvider : public FrameProvider {
  public:
    FileFrameProvider(const std::string& video_path, const std::string& trace_path);
    int frame_count() const override;
    double fps() const override { return trace_.frame_rate; }
    int width() const override { return reader_.width(); }
    int height() const override { return reader_.height(); }
    Image frame(int i) override { return reader_.frame(i); }
    FrameKeypoints keypoints(int i) const override { return trace_.frames.at(i); }

  private:
    RawVideoReader reader_;
    SkeletonTrace trace_;
};

struct DetectionRun {
    ProbabilityTrace trace;
    DetectionOutcome with_accumulation;
    DetectionOutcome without_accumulation;  // tau = 0, same threshold
};

/// Slides a 5 s clip window at the decision rate across the stream, runs
/// the model on every window, and feeds the probabilities to the decision
/// engine with and without accumulation.
DetectionRun run_detection(const ModelWeights<float>& weights, FrameProvider& provider,
                           const DecisionConfig& dconf,
                           const std::optional<SeizureAnnotation>& annotation = std::nullopt,
                           double clip_seconds = 5.0, int threads = 0);

}  // namespace stvig
