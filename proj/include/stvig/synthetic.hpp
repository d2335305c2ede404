#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "stvig/labeling.hpp"
#include "stvig/patch.hpp"
#include "stvig/skeleton.hpp"

namespace stvig {

/// Parameters of one procedural recording. Frames and keypoints are pure
/// functions of (scenario, frame index), so arbitrarily long recordings can
/// be streamed without buffering.
struct SyntheticScenario {
    std::uint64_t seed = 1;
    double duration = 60.0;  // seconds
    SeizureAnnotation annotation{20.0, 40.0, 60.0};
    bool has_seizure = true;  // false: interictal throughout, annotation ignored
    int width = 160;
    int height = 120;
    double fps = 30.0;
    int focus_partition = 1;   // the scripted seizing partition
    int secondary_partition = 0;  // second scripted limb; 0 picks the cross-body default
    bool benign_bouts = true;  // restless episodes of the secondary limb while interictal
    LabelKind ramp_kind = LabelKind::Exponential;
    double ramp_steepness = 5.0;
};

/// Per-partition motion script during the ictal period.
struct IctalScript {
    double amplitude_px = 0.0;
    double frequency_hz = 0.0;
};

/// One benign restless episode: the secondary limb oscillating on its own
/// during interictal time, labeled healthy. These are the seizure-lookalike
/// behaviors a detector must not alarm on.
struct BenignBout {
    double start = 0.0;
    double end = 0.0;
    double frequency_hz = 0.0;
    double phase = 0.0;
};

class SyntheticPatient {
  public:
    explicit SyntheticPatient(const SyntheticScenario& scenario);

    int frame_count() const { return frame_count_; }
    double fps() const { return scenario_.fps; }
    int width() const { return scenario_.width; }
    int height() const { return scenario_.height; }
    const SyntheticScenario& scenario() const { return scenario_; }
    const IctalScript& ictal_script(int partition) const { return script_[partition]; }
    int secondary_partition() const { return secondary_; }
    const std::vector<BenignBout>& benign_bouts() const { return bouts_; }

    /// Exact joint positions at a frame; the rendered figure uses these.
    FrameKeypoints keypoints(int frame) const;

    Image render_frame(int frame) const;

    /// Keypoint records for frames [first, first + count).
    SkeletonTrace trace(int first, int count) const;
    SkeletonTrace full_trace() const { return trace(0, frame_count_); }

    std::vector<Image> render_range(int first, int count) const;

  private:
    SyntheticScenario scenario_;
    int frame_count_ = 0;
    int secondary_ = 0;
    double scale_ = 0.0;
    double cx_ = 0.0, cy_ = 0.0;

    std::array<std::array<double, 2>, kJointCount> base_;  // relative units
    std::array<double, 2> drift_freq_{}, drift_phase_{};
    std::array<std::array<double, 2>, kJointCount> wobble_freq_{}, wobble_phase_{};
    std::array<IctalScript, kPartitionCount> script_{};
    std::array<std::array<double, 2>, kJointCount> shake_dir_{};
    std::array<double, kJointCount> shake_phase_{};
    std::vector<BenignBout> bouts_;
    std::vector<std::uint8_t> background_;  // static per-pixel texture
};

}  // namespace stvig
