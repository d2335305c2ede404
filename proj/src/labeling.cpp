#include "stvig/labeling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

namespace stvig {

void SeizureAnnotation::validate() const {
    if (!(eeg_onset >= 0.0 && eeg_onset < clinical_onset && clinical_onset <= recording_end))
        throw std::invalid_argument("SeizureAnnotation: need 0 <= eeg_onset < clinical_onset <= recording_end");
}

std::string period_name(Period p) {
    switch (p) {
        case Period::Interictal: return "interictal";
        case Period::Transition: return "transition";
        case Period::Ictal: return "ictal";
    }
    return "?";
}

Period period_from_name(const std::string& name) {
    if (name == "interictal") return Period::Interictal;
    if (name == "transition") return Period::Transition;
    if (name == "ictal") return Period::Ictal;
    throw std::invalid_argument("unknown period: " + name);
}

std::string label_kind_name(LabelKind k) {
    switch (k) {
        case LabelKind::Linear: return "linear";
        case LabelKind::Sigmoid: return "sigmoid";
        case LabelKind::Exponential: return "exponential";
    }
    return "?";
}

LabelKind label_kind_from_name(const std::string& name) {
    if (name == "linear") return LabelKind::Linear;
    if (name == "sigmoid") return LabelKind::Sigmoid;
    if (name == "exponential") return LabelKind::Exponential;
    throw std::invalid_argument("unknown label kind: " + name);
}

double label_at(double t, const SeizureAnnotation& ann, LabelKind kind, double steepness) {
    ann.validate();
    if (t > ann.recording_end)
        throw std::invalid_argument("label_at: time beyond recording end");
    if (t < ann.eeg_onset) return 0.0;
    if (t >= ann.clinical_onset) return 1.0;
    const double s = (t - ann.eeg_onset) / (ann.clinical_onset - ann.eeg_onset);
    switch (kind) {
        case LabelKind::Linear:
            return s;
        case LabelKind::Exponential: {
            const double k = steepness;
            return std::expm1(k * s) / std::expm1(k);
        }
        case LabelKind::Sigmoid: {
            const double k = steepness;
            auto g = [k](double u) { return 1.0 / (1.0 + std::exp(-k * (u - 0.5))); };
            return (g(s) - g(0.0)) / (g(1.0) - g(0.0));
        }
    }
    return s;
}

Period period_at(double t, const SeizureAnnotation& ann) {
    ann.validate();
    if (t <= ann.eeg_onset) return Period::Interictal;
    if (t < ann.clinical_onset) return Period::Transition;
    return Period::Ictal;
}

std::vector<LabeledClip> segment_clips(const SeizureAnnotation& ann, const std::string& recording,
                                       const SegmentOptions& opt) {
    ann.validate();
    if (ann.recording_end < opt.clip_len)
        throw std::invalid_argument("segment_clips: recording shorter than one clip");
    if (opt.event_overlap >= opt.clip_len)
        throw std::invalid_argument("segment_clips: overlap must be shorter than the clip");

    const double eps = 1e-9;
    std::vector<LabeledClip> clips;

    auto emit = [&](double start) {
        LabeledClip c;
        c.recording = recording;
        c.start = start;
        c.end = start + opt.clip_len;
        c.label = label_at(c.end, ann, opt.kind, opt.steepness);
        c.period = period_at(c.end, ann);
        clips.push_back(std::move(c));
    };

    const double inter_begin = std::max(0.0, ann.eeg_onset - opt.interictal_window);
    for (double s = inter_begin; s + opt.clip_len <= ann.eeg_onset + eps; s += opt.interictal_stride)
        emit(s);

    const double event_stride = opt.clip_len - opt.event_overlap;
    const double event_end = std::min(ann.clinical_onset + opt.ictal_window, ann.recording_end);
    for (double s = ann.eeg_onset; s + opt.clip_len <= event_end + eps; s += event_stride)
        emit(s);

    return clips;
}

IndexSplit split_indices(const std::vector<Period>& periods, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("split_train_val: ratio must lie strictly inside (0, 1)");

    std::array<std::vector<std::size_t>, 3> byPeriod;
    for (std::size_t i = 0; i < periods.size(); ++i)
        byPeriod[static_cast<int>(periods[i])].push_back(i);
    for (int p = 0; p < 3; ++p)
        if (byPeriod[p].empty())
            throw std::invalid_argument("split_train_val: empty period: " +
                                        period_name(static_cast<Period>(p)));

    // seeded Fisher-Yates keeps the split identical across standard libraries
    std::mt19937_64 rng(seed);
    IndexSplit out;
    for (int p = 0; p < 3; ++p) {
        auto idx = byPeriod[p];
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng() % i]);
        const std::size_t n_train =
            static_cast<std::size_t>(std::floor(ratio * static_cast<double>(idx.size()) + 1e-9));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_train ? out.train : out.val).push_back(idx[i]);
    }
    return out;
}

TrainValSplit split_train_val(const std::vector<LabeledClip>& clips, double ratio, std::uint64_t seed) {
    std::vector<Period> periods;
    periods.reserve(clips.size());
    for (const auto& c : clips) periods.push_back(c.period);
    const auto idx = split_indices(periods, ratio, seed);
    TrainValSplit out;
    out.train.reserve(idx.train.size());
    out.val.reserve(idx.val.size());
    for (auto i : idx.train) out.train.push_back(clips[i]);
    for (auto i : idx.val) out.val.push_back(clips[i]);
    return out;
}

}  // namespace stvig
