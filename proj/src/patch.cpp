#include "stvig/patch.hpp"

namespace stvig {

std::vector<double> gaussian_patch_weights(const PatchSpec& spec) {
    spec.validate();
    const double sigma = spec.sigma_abs();
    std::vector<double> w(static_cast<std::size_t>(spec.h) * spec.w);
    const int cr = spec.h / 2;
    const int cc = spec.w / 2;
    for (int r = 0; r < spec.h; ++r)
        for (int c = 0; c < spec.w; ++c)
            w[static_cast<std::size_t>(r) * spec.w + c] =
                gaussian_weight(c, r, cc, cr, sigma);
    return w;
}

std::vector<int> sample_clip_indices(int raw_count, int target) {
    if (target <= 0) throw std::invalid_argument("sample_clip_indices: target must be positive");
    if (raw_count <= 0 || raw_count % target != 0)
        throw std::invalid_argument("sample_clip_indices: " + std::to_string(raw_count) +
                                    " frames cannot be sampled to " + std::to_string(target) +
                                    " with an integral stride");
    const int stride = raw_count / target;
    std::vector<int> idx(static_cast<std::size_t>(target));
    for (int t = 0; t < target; ++t) idx[t] = t * stride;
    return idx;
}

}  // namespace stvig
