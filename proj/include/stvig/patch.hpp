#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "stvig/skeleton.hpp"
#include "stvig/tensor.hpp"

namespace stvig {

/// Row-major RGB8 frame.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // height * width * 3

    static Image solid(int w, int h, std::uint8_t value) {
        Image im;
        im.width = w;
        im.height = h;
        im.rgb.assign(static_cast<std::size_t>(w) * h * 3, value);
        return im;
    }
    std::uint8_t& at(int row, int col, int ch) {
        return rgb[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
    }
    std::uint8_t at(int row, int col, int ch) const {
        return rgb[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
    }
};

struct JointSample {
    double x = 0.0;  // pixels, column axis
    double y = 0.0;  // pixels, row axis
    double confidence = 1.0;
};

using FrameKeypoints = std::array<JointSample, kJointCount>;

/// Per-frame 2-D joint coordinates for one subject, in canonical joint order.
struct SkeletonTrace {
    std::vector<FrameKeypoints> frames;
    double frame_rate = 30.0;
    int width = 0;
    int height = 0;
};

struct PatchSpec {
    int h = 32;
    int w = 32;
    double sigma_rel = 0.3;  // fraction of patch height

    double sigma_abs() const { return sigma_rel * h; }

    void validate() const {
        if (h <= 0 || w <= 0 || h % 2 != 0 || w % 2 != 0)
            throw std::invalid_argument("PatchSpec: h and w must be positive and even");
        if (!(sigma_rel > 0.0 && sigma_rel <= 1.0))
            throw std::invalid_argument("PatchSpec: sigma_rel must be in (0, 1]");
    }
};

/// exp(-((m-x)^2 + (n-y)^2) / (2 sigma^2))
inline double gaussian_weight(double m, double n, double x, double y, double sigma_abs) {
    if (!(sigma_abs > 0.0)) throw std::invalid_argument("gaussian_weight: sigma must be positive");
    const double dm = m - x;
    const double dn = n - y;
    return std::exp(-(dm * dm + dn * dn) / (2.0 * sigma_abs * sigma_abs));
}

/// The shared H x W weight patch about the (rounded) joint position at
/// offset (h/2, w/2). Window placement uses nearest-pixel rounding, so the
/// weights depend only on the in-patch offset.
std::vector<double> gaussian_patch_weights(const PatchSpec& spec);

/// Frame indices of fixed-stride subsampling from raw_count down to target
/// frames; raw_count must be an integral multiple of target.
std::vector<int> sample_clip_indices(int raw_count, int target);

namespace detail {

/// Gaussian-fused crop around one joint; writes h*w*3 values in [0,1] at
/// dst. Out-of-frame pixels contribute zero.
template <typename S>
void extract_patch_into(const Image& frame, double jx, double jy, const PatchSpec& spec,
                        const std::vector<double>& weights, S* dst) {
    const int cx = static_cast<int>(std::lround(jx));
    const int cy = static_cast<int>(std::lround(jy));
    const int col0 = cx - spec.w / 2;
    const int row0 = cy - spec.h / 2;
    for (int r = 0; r < spec.h; ++r) {
        const int row = row0 + r;
        for (int c = 0; c < spec.w; ++c) {
            const int col = col0 + c;
            S* px = dst + (static_cast<std::size_t>(r) * spec.w + c) * 3;
            if (row < 0 || row >= frame.height || col < 0 || col >= frame.width) {
                px[0] = px[1] = px[2] = S(0);
            } else {
                const double wgt = weights[static_cast<std::size_t>(r) * spec.w + c];
                for (int ch = 0; ch < 3; ++ch)
                    px[ch] = static_cast<S>(wgt * frame.at(row, col, ch) / 255.0);
            }
        }
    }
}

}  // namespace detail

template <typename S>
TensorPtr<S> extract_patch(const Image& frame, double jx, double jy, const PatchSpec& spec) {
    spec.validate();
    if (frame.width <= 0 || frame.height <= 0)
        throw std::invalid_argument("extract_patch: empty frame");
    if (!std::isfinite(jx) || !std::isfinite(jy))
        throw std::invalid_argument("extract_patch: joint coordinates must be finite");
    const auto weights = gaussian_patch_weights(spec);
    auto t = Tensor<S>::make(Shape{spec.h, spec.w, 3});
    detail::extract_patch_into<S>(frame, jx, jy, spec, weights, t->data().data());
    return t;
}

/// The (15, T, H, W, 3) clip tensor: raw frames and the matching trace
/// records are stride-sampled down to target_frames, then each joint gets a
/// Gaussian-fused patch per sampled frame.
template <typename S>
TensorPtr<S> build_clip_patches(const std::vector<Image>& frames, const SkeletonTrace& trace,
                                const PatchSpec& spec, int target_frames = 30) {
    spec.validate();
    if (frames.size() != trace.frames.size())
        throw std::invalid_argument("build_clip_patches: frame count " + std::to_string(frames.size()) +
                                    " does not match trace length " + std::to_string(trace.frames.size()));
    const auto idx = sample_clip_indices(static_cast<int>(frames.size()), target_frames);
    const auto weights = gaussian_patch_weights(spec);
    const std::int64_t patch_sz = static_cast<std::int64_t>(spec.h) * spec.w * 3;
    auto clip = Tensor<S>::make(Shape{kJointCount, target_frames, spec.h, spec.w, 3});
    S* base = clip->data().data();
    for (int n = 0; n < kJointCount; ++n) {
        for (int t = 0; t < target_frames; ++t) {
            const int f = idx[t];
            const auto& j = trace.frames[f][n];
            detail::extract_patch_into<S>(frames[f], j.x, j.y, spec, weights,
                                          base + (static_cast<std::int64_t>(n) * target_frames + t) * patch_sz);
        }
    }
    return clip;
}

/// Sampled (x, y) coordinates normalized by the frame resolution, shaped
/// (15, T, 2); feeds the coordinate positional embeddings.
template <typename S>
TensorPtr<S> normalized_coordinates(const SkeletonTrace& trace, int target_frames) {
    const auto idx = sample_clip_indices(static_cast<int>(trace.frames.size()), target_frames);
    if (trace.width <= 0 || trace.height <= 0)
        throw std::invalid_argument("normalized_coordinates: trace carries no resolution");
    auto coords = Tensor<S>::make(Shape{kJointCount, target_frames, 2});
    S* d = coords->data().data();
    for (int n = 0; n < kJointCount; ++n)
        for (int t = 0; t < target_frames; ++t) {
            const auto& j = trace.frames[idx[t]][n];
            *d++ = static_cast<S>(j.x / trace.width);
            *d++ = static_cast<S>(j.y / trace.height);
        }
    return coords;
}

}  // namespace stvig
