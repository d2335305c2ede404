#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stvig {

/// Expert-annotated onset times for one recording, in seconds.
struct SeizureAnnotation {
    double eeg_onset = 0.0;
    double clinical_onset = 0.0;
    double recording_end = 0.0;

    void validate() const;
};

enum class Period { Interictal, Transition, Ictal };

std::string period_name(Period p);
Period period_from_name(const std::string& name);

enum class LabelKind { Linear, Sigmoid, Exponential };

std::string label_kind_name(LabelKind k);
LabelKind label_kind_from_name(const std::string& name);

/// Regression label at time t: 0 before EEG onset, 1 from clinical onset,
/// and a monotone ramp across the transition. The sigmoid family is
/// rescaled so it reaches 0 and 1 exactly at the endpoints.
double label_at(double t, const SeizureAnnotation& ann, LabelKind kind, double steepness = 5.0);

/// Period of the instant t. A boundary time t == eeg_onset carries label 0
/// and therefore counts as interictal; t == clinical_onset is ictal.
Period period_at(double t, const SeizureAnnotation& ann);

struct LabeledClip {
    std::string recording;
    double start = 0.0;
    double end = 0.0;       // labels and period are decided by this end time
    double label = 0.0;
    Period period = Period::Interictal;
};

struct SegmentOptions {
    double clip_len = 5.0;
    double interictal_stride = 5.0;
    double event_overlap = 4.0;         // transition/ictal stride = clip_len - overlap
    double interictal_window = 1800.0;  // at most 30 min before EEG onset
    double ictal_window = 120.0;        // at most 2 min after clinical onset
    LabelKind kind = LabelKind::Exponential;
    double steepness = 5.0;
};

/// Clip schedule for one annotated recording: non-overlapping interictal
/// clips plus densely overlapped clips across the transition and ictal
/// windows.
std::vector<LabeledClip> segment_clips(const SeizureAnnotation& ann, const std::string& recording,
                                       const SegmentOptions& opt = {});

struct TrainValSplit {
    std::vector<LabeledClip> train;
    std::vector<LabeledClip> val;
};

/// Stratified per-period split, deterministic under seed.
TrainValSplit split_train_val(const std::vector<LabeledClip>& clips, double ratio, std::uint64_t seed);

/// Index-level variant of the same split.
struct IndexSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

IndexSplit split_indices(const std::vector<Period>& periods, double ratio, std::uint64_t seed);

}  // namespace stvig
