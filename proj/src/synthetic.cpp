#include "stvig/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace stvig {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// partition tints for joint dots and limb strokes
constexpr std::array<std::array<int, 3>, kPartitionCount> kPartitionColor = {{
    {232, 214, 180},  // head
    {242, 122, 118},  // right arm
    {126, 238, 142},  // right leg
    {132, 152, 244},  // left arm
    {236, 234, 120},  // left leg
}};

struct Bone {
    int a, b;
    int partition;  // -1: neutral torso stroke
};

constexpr std::array<Bone, 14> kBones = {{
    {0, 1, 0},   {0, 2, 0},                 // nose-eyes
    {3, 4, 1},   {4, 5, 1},                 // right arm
    {6, 7, 2},   {7, 8, 2},                 // right leg
    {9, 10, 3},  {10, 11, 3},               // left arm
    {12, 13, 4}, {13, 14, 4},               // left leg
    {5, 11, -1}, {6, 12, -1},               // shoulder / hip lines
    {5, 6, -1},  {11, 12, -1},              // torso sides
}};

void draw_soft_disk(Image& im, double x, double y, double radius,
                    const std::array<int, 3>& color) {
    const int r0 = static_cast<int>(std::floor(y - radius - 1));
    const int r1 = static_cast<int>(std::ceil(y + radius + 1));
    const int c0 = static_cast<int>(std::floor(x - radius - 1));
    const int c1 = static_cast<int>(std::ceil(x + radius + 1));
    for (int r = std::max(0, r0); r <= std::min(im.height - 1, r1); ++r)
        for (int c = std::max(0, c0); c <= std::min(im.width - 1, c1); ++c) {
            const double d = std::hypot(c - x, r - y);
            const double cov = std::clamp(radius + 0.5 - d, 0.0, 1.0);
            if (cov <= 0.0) continue;
            for (int ch = 0; ch < 3; ++ch) {
                const int v = im.at(r, c, ch);
                im.at(r, c, ch) = static_cast<std::uint8_t>(
                    std::clamp(v + cov * (color[ch] - v), 0.0, 255.0));
            }
        }
}

void draw_soft_segment(Image& im, double x0, double y0, double x1, double y1,
                       double half_width, const std::array<int, 3>& color) {
    const int r0 = static_cast<int>(std::floor(std::min(y0, y1) - half_width - 1));
    const int r1 = static_cast<int>(std::ceil(std::max(y0, y1) + half_width + 1));
    const int c0 = static_cast<int>(std::floor(std::min(x0, x1) - half_width - 1));
    const int c1 = static_cast<int>(std::ceil(std::max(x0, x1) + half_width + 1));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    for (int r = std::max(0, r0); r <= std::min(im.height - 1, r1); ++r)
        for (int c = std::max(0, c0); c <= std::min(im.width - 1, c1); ++c) {
            double t = 0.0;
            if (len2 > 0.0) t = std::clamp(((c - x0) * dx + (r - y0) * dy) / len2, 0.0, 1.0);
            const double d = std::hypot(c - (x0 + t * dx), r - (y0 + t * dy));
            const double cov = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
            if (cov <= 0.0) continue;
            for (int ch = 0; ch < 3; ++ch) {
                const int v = im.at(r, c, ch);
                im.at(r, c, ch) = static_cast<std::uint8_t>(
                    std::clamp(v + cov * (color[ch] - v), 0.0, 255.0));
            }
        }
}

}  // namespace

SyntheticPatient::SyntheticPatient(const SyntheticScenario& scenario) : scenario_(scenario) {
    if (scenario.width < 48 || scenario.height < 48)
        throw std::invalid_argument("SyntheticPatient: resolution too small");
    if (scenario.has_seizure) {
        scenario_.annotation.validate();
        if (scenario.annotation.recording_end > scenario.duration + 1e-9)
            throw std::invalid_argument("SyntheticPatient: annotation outside recording duration");
    }
    frame_count_ = static_cast<int>(std::llround(scenario.duration * scenario.fps));
    scale_ = scenario.height;
    cx_ = scenario.width / 2.0;
    cy_ = scenario.height / 2.0;

    base_ = {{{0.00, -0.40}, {0.045, -0.44}, {-0.045, -0.44},
              {-0.29, 0.05}, {-0.225, -0.12}, {-0.14, -0.28},
              {-0.08, 0.02}, {-0.09, 0.22},  {-0.10, 0.42},
              {0.29, 0.05},  {0.225, -0.12}, {0.14, -0.28},
              {0.08, 0.02},  {0.09, 0.22},   {0.10, 0.42}}};

    std::mt19937_64 rng(scenario.seed);
    auto unif = [&rng](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng() >> 11) / 9007199254740992.0);
    };

    for (int a = 0; a < 2; ++a) {
        drift_freq_[a] = unif(0.03, 0.08);
        drift_phase_[a] = unif(0.0, kTwoPi);
    }
    for (int j = 0; j < kJointCount; ++j)
        for (int a = 0; a < 2; ++a) {
            wobble_freq_[j][a] = unif(0.15, 0.45);
            wobble_phase_[j][a] = unif(0.0, kTwoPi);
        }

    // Ictal script: the focus partition oscillates hardest, a second limb
    // joins at lower amplitude, everything else keeps its idle wobble.
    int secondary = scenario.secondary_partition;
    if (secondary <= 0) {
        switch (scenario.focus_partition) {
            case 1: secondary = 4; break;
            case 2: secondary = 3; break;
            case 3: secondary = 2; break;
            default: secondary = 1; break;
        }
    }
    if (secondary == scenario.focus_partition || secondary <= 0 || secondary >= kPartitionCount)
        throw std::invalid_argument("SyntheticPatient: secondary limb must be a distinct non-head partition");
    secondary_ = secondary;
    for (int p = 0; p < kPartitionCount; ++p) {
        script_[p] = {0.0, 0.0};
        if (p == scenario.focus_partition)
            script_[p] = {22.0, unif(3.2, 4.8)};
        else if (p == secondary)
            script_[p] = {10.0, unif(3.2, 4.8)};
    }
    for (int j = 0; j < kJointCount; ++j) {
        const double ang = unif(0.0, kTwoPi);
        shake_dir_[j] = {std::cos(ang), std::sin(ang)};
        shake_phase_[j] = unif(0.0, kTwoPi);
    }

    if (scenario.benign_bouts) {
        const double interictal_end =
            scenario.has_seizure ? scenario_.annotation.eeg_onset : scenario.duration;
        double t = unif(12.0, 22.0);
        while (t + 3.0 < interictal_end) {
            BenignBout bout;
            bout.start = t;
            bout.end = std::min(t + unif(3.0, 5.0), interictal_end);
            bout.frequency_hz = unif(3.2, 4.8);
            bout.phase = unif(0.0, kTwoPi);
            bouts_.push_back(bout);
            t += unif(30.0, 45.0);
        }
    }

    background_.resize(static_cast<std::size_t>(scenario.width) * scenario.height * 3);
    for (std::size_t i = 0; i < background_.size(); i += 3) {
        const auto v = static_cast<std::uint8_t>(10 + (rng() % 7));
        background_[i] = v;
        background_[i + 1] = v;
        background_[i + 2] = static_cast<std::uint8_t>(v + 2);
    }
}

FrameKeypoints SyntheticPatient::keypoints(int frame) const {
    const double t = frame / scenario_.fps;
    const auto& ann = scenario_.annotation;

    const double dx = 3.0 * std::sin(kTwoPi * drift_freq_[0] * t + drift_phase_[0]);
    const double dy = 3.0 * std::sin(kTwoPi * drift_freq_[1] * t + drift_phase_[1]);

    // seizure envelope per partition
    std::array<double, kPartitionCount> envelope{};
    if (scenario_.has_seizure && t >= ann.eeg_onset) {
        if (t < ann.clinical_onset) {
            // transition: only the focus partition, amplitude ramping with
            // the label function up to a fraction of the ictal amplitude
            const double ramp = label_at(std::min(t, ann.recording_end), ann,
                                         scenario_.ramp_kind, scenario_.ramp_steepness);
            envelope[scenario_.focus_partition] = 0.35 * ramp;
        } else {
            const double rise = std::clamp((t - ann.clinical_onset) / 0.5, 0.0, 1.0);
            for (int p = 0; p < kPartitionCount; ++p) envelope[p] = rise;
            envelope[scenario_.focus_partition] = std::max(0.35, rise);
        }
    }

    // benign restless episode of the secondary limb, interictal time only
    double benign_env = 0.0, benign_freq = 0.0, benign_phase = 0.0;
    for (const auto& bout : bouts_) {
        if (t < bout.start || t > bout.end) continue;
        benign_env = std::clamp(std::min(t - bout.start, bout.end - t) / 0.5, 0.0, 1.0);
        benign_freq = bout.frequency_hz;
        benign_phase = bout.phase;
        break;
    }

    FrameKeypoints out;
    for (int j = 0; j < kJointCount; ++j) {
        double x = cx_ + base_[j][0] * scale_ + dx +
                   0.5 * std::sin(kTwoPi * wobble_freq_[j][0] * t + wobble_phase_[j][0]);
        double y = cy_ + base_[j][1] * scale_ + dy +
                   0.5 * std::sin(kTwoPi * wobble_freq_[j][1] * t + wobble_phase_[j][1]);
        const int p = j / kJointsPerPartition;
        const double env = envelope[p];
        if (env > 0.0 && script_[p].amplitude_px > 0.0) {
            const double osc = script_[p].amplitude_px * env *
                               std::sin(kTwoPi * script_[p].frequency_hz * t + shake_phase_[j]);
            x += osc * shake_dir_[j][0];
            y += osc * shake_dir_[j][1];
        }
        if (benign_env > 0.0 && p == secondary_) {
            const double osc =
                10.0 * benign_env * std::sin(kTwoPi * benign_freq * t + benign_phase + shake_phase_[j]);
            x += osc * shake_dir_[j][0];
            y += osc * shake_dir_[j][1];
        }
        out[j].x = x;
        out[j].y = y;
        out[j].confidence = 1.0;
    }
    return out;
}

Image SyntheticPatient::render_frame(int frame) const {
    if (frame < 0 || frame >= frame_count_)
        throw std::out_of_range("render_frame: frame index out of range");
    Image im;
    im.width = scenario_.width;
    im.height = scenario_.height;
    im.rgb = background_;

    const auto kp = keypoints(frame);
    const std::array<int, 3> torso = {150, 150, 152};
    for (const auto& bone : kBones) {
        const auto color = bone.partition < 0 ? torso : kPartitionColor[bone.partition];
        draw_soft_segment(im, kp[bone.a].x, kp[bone.a].y, kp[bone.b].x, kp[bone.b].y, 1.4, color);
    }
    // neck stroke from shoulder midpoint to nose
    draw_soft_segment(im, (kp[5].x + kp[11].x) / 2.0, (kp[5].y + kp[11].y) / 2.0,
                      kp[0].x, kp[0].y, 1.4, torso);
    for (int j = 0; j < kJointCount; ++j)
        draw_soft_disk(im, kp[j].x, kp[j].y, 2.4, kPartitionColor[j / kJointsPerPartition]);
    return im;
}

SkeletonTrace SyntheticPatient::trace(int first, int count) const {
    if (first < 0 || count < 0 || first + count > frame_count_)
        throw std::out_of_range("trace: frame range out of bounds");
    SkeletonTrace tr;
    tr.frame_rate = scenario_.fps;
    tr.width = scenario_.width;
    tr.height = scenario_.height;
    tr.frames.reserve(static_cast<std::size_t>(count));
    for (int f = first; f < first + count; ++f) tr.frames.push_back(keypoints(f));
    return tr;
}

std::vector<Image> SyntheticPatient::render_range(int first, int count) const {
    if (first < 0 || count < 0 || first + count > frame_count_)
        throw std::out_of_range("render_range: frame range out of bounds");
    std::vector<Image> frames;
    frames.reserve(static_cast<std::size_t>(count));
    for (int f = first; f < first + count; ++f) frames.push_back(render_frame(f));
    return frames;
}

}  // namespace stvig
