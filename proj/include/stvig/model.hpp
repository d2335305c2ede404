#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stvig/ops.hpp"
#include "stvig/patch.hpp"
#include "stvig/skeleton.hpp"
#include "stvig/tensor.hpp"

namespace stvig {

enum class Variant { Base, Light };
enum class PosEmbed { None, Concat, Learnable, Stem };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);
std::string pos_embed_name(PosEmbed p);
PosEmbed pos_embed_from_name(const std::string& name);

/// Architecture hyperparameters of the two model versions. Feature width
/// doubles exactly once per stage (in its final block) and the temporal
/// length follows frames -> frames, /2, /2, /2 across the four stages.
struct ModelConfig {
    Variant variant = Variant::Light;
    int stem_channels = 12;
    std::array<int, 4> stage_depths{2, 2, 6, 2};
    int frames = 30;
    int e_inter = 12;
    int e_intra = 2;
    int ks = 3;
    int kt = 3;
    PosEmbed pos_embed = PosEmbed::Stem;
    bool dynamic_partition = true;
    bool stochastic_shuffle = false;
    PatchSpec patch;

    static ModelConfig base();
    static ModelConfig light();
    /// Down-scaled configuration for fast experiments and gradient checks.
    static ModelConfig tiny();

    void validate() const;

    /// Channel width while stage s (0-based) runs; the Concat positional
    /// mode widens the pipeline by 2 from the first stage on.
    int stage_width(int s) const;
    std::array<int, 4> stage_temporal_out() const;
    int head_channels() const;

    std::string canonical_string() const;
    std::uint64_t fingerprint() const;
};

struct LayerDef {
    std::string name;
    Shape shape;
    std::int64_t fan_in;  // 0: initialized to zeros (biases, tables)
};

/// Every learnable tensor implied by the configuration, in canonical order.
std::vector<LayerDef> enumerate_layers(const ModelConfig& cfg);

std::int64_t count_params(const ModelConfig& cfg);

/// Forward-pass cost for one clip, counting 2 scalar ops per
/// multiply-accumulate.
std::int64_t count_flops(const ModelConfig& cfg);

template <typename S>
struct ModelWeights {
    ModelConfig config;
    std::vector<std::pair<std::string, TensorPtr<S>>> tensors;
    std::unordered_map<std::string, std::size_t> index;

    static ModelWeights initialize(const ModelConfig& cfg, std::uint64_t seed) {
        ModelWeights w;
        w.config = cfg;
        std::mt19937_64 rng(seed);
        for (const auto& layer : enumerate_layers(cfg)) {
            TensorPtr<S> t;
            if (layer.fan_in > 0) {
                const S bound = static_cast<S>(std::sqrt(1.0 / static_cast<double>(layer.fan_in)));
                t = Tensor<S>::uniform(layer.shape, -bound, bound, rng, true);
            } else {
                t = Tensor<S>::make(layer.shape, true);
            }
            w.index.emplace(layer.name, w.tensors.size());
            w.tensors.emplace_back(layer.name, std::move(t));
        }
        return w;
    }

    const TensorPtr<S>& at(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw std::out_of_range("no weight tensor named " + name);
        return tensors[it->second].second;
    }

    TensorPtr<S>& at(const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw std::out_of_range("no weight tensor named " + name);
        return tensors[it->second].second;
    }

    void set_requires_grad(bool on) {
        for (auto& [name, t] : tensors) {
            auto fresh = Tensor<S>::make(t->shape(), std::vector<S>(t->data().begin(), t->data().end()), on);
            t = fresh;
        }
    }

    ModelWeights clone() const {
        ModelWeights w;
        w.config = config;
        w.index = index;
        w.tensors.reserve(tensors.size());
        for (const auto& [name, t] : tensors)
            w.tensors.emplace_back(
                name, Tensor<S>::make(t->shape(), std::vector<S>(t->data().begin(), t->data().end()),
                                      t->requires_grad()));
        return w;
    }

    std::int64_t total_params() const {
        std::int64_t n = 0;
        for (const auto& [name, t] : tensors) n += t->size();
        return n;
    }
};

/// Shapes observed during one forward pass.
struct ForwardProbe {
    Shape features;
    std::array<Shape, 4> stage_out;
};

namespace detail {

template <typename S>
TensorPtr<S> linear_named(const ModelWeights<S>& w, const TensorPtr<S>& x, const std::string& prefix) {
    return linear(x, w.at(prefix + ".weight"), w.at(prefix + ".bias"));
}

/// One graph-convolution unit: projection, max-relative aggregation over the
/// given edge set, concat update, back-projection, residual with activation,
/// then a residual feed-forward refinement.
template <typename S>
TensorPtr<S> grapher_unit(const ModelWeights<S>& w, const TensorPtr<S>& x,
                          const std::vector<std::vector<int>>& nbrs, const std::string& prefix,
                          const TensorPtr<S>& residual) {
    auto y = linear_named(w, x, prefix + ".fc_in");
    auto d = max_relative(y, nbrs);
    auto u = relu(linear_named(w, concat_last(y, d), prefix + ".update"));
    auto z = linear_named(w, u, prefix + ".fc_out");
    auto a = relu(add(z, residual));
    auto f = linear_named(w, relu(linear_named(w, a, prefix + ".ffn.fc1")), prefix + ".ffn.fc2");
    return add(a, f);
}

}  // namespace detail

/// Single-frame max-relative graph convolution on an (N, C) slice.
template <typename S>
TensorPtr<S> mrgc(const TensorPtr<S>& x_t, const std::vector<std::vector<int>>& nbrs,
                  const TensorPtr<S>& w_in, const TensorPtr<S>& b_in,
                  const TensorPtr<S>& w_update, const TensorPtr<S>& b_update,
                  const TensorPtr<S>& w_out, const TensorPtr<S>& b_out) {
    if (x_t->rank() != 2) throw std::invalid_argument("mrgc: expected (N, C) input, got " + shape_str(x_t->shape()));
    auto x3 = reshape(x_t, Shape{x_t->dim(0), 1, x_t->dim(1)});
    auto y = linear(x3, w_in, b_in);
    auto d = max_relative(y, nbrs);
    auto u = relu(linear(concat_last(y, d), w_update, b_update));
    auto z = linear(u, w_out, b_out);
    return reshape(z, x_t->shape());
}

/// Inter-partition then intra-partition graph convolution, both with the
/// block input as residual; frames are processed independently.
template <typename S>
TensorPtr<S> spatial_block(const ModelWeights<S>& w, const TensorPtr<S>& x,
                           const PartitionGraph& graph, const std::string& prefix) {
    auto a = detail::grapher_unit(w, x, graph.inter, prefix + ".inter", x);
    return detail::grapher_unit(w, a, graph.intra, prefix + ".intra", x);
}

/// Residual 3-D convolution over the (1, N, T) volume: 1x1x1 -> (1,ks,kt)
/// -> 1x1x1. The expanding variant doubles channels on the last conv and
/// projects the residual; temporal downsampling uses stride 2 on the middle
/// conv.
template <typename S>
TensorPtr<S> temporal_block(const ModelWeights<S>& w, const TensorPtr<S>& x, int ks, int kt,
                            const std::string& prefix, bool expand, int tstride) {
    const std::int64_t n = x->dim(0), t = x->dim(1), c = x->dim(2);
    auto vol = reshape(permute_axes(x, {2, 0, 1}), Shape{c, 1, n, t});
    auto v = relu(conv3d(vol, w.at(prefix + ".conv_in.kernel"), {1, 1, 1}, {0, 0, 0},
                         w.at(prefix + ".conv_in.bias")));
    v = relu(conv3d(v, w.at(prefix + ".conv_mid.kernel"), {1, 1, tstride},
                    {0, ks / 2, kt / 2}, w.at(prefix + ".conv_mid.bias")));
    v = conv3d(v, w.at(prefix + ".conv_out.kernel"), {1, 1, 1}, {0, 0, 0},
               w.at(prefix + ".conv_out.bias"));
    TensorPtr<S> res;
    if (expand) {
        res = conv3d(vol, w.at(prefix + ".proj.kernel"), {1, 1, tstride}, {0, 0, 0},
                     w.at(prefix + ".proj.bias"));
    } else {
        if (tstride != 1)
            throw std::logic_error("temporal_block: strided variant requires the expanding form");
        res = vol;
    }
    auto out = add(v, res);
    const std::int64_t c_out = out->dim(0);
    const std::int64_t t_out = out->dim(3);
    return permute_axes(reshape(out, Shape{c_out, n, t_out}), {1, 2, 0});
}

/// Adds (or appends) positional information to the embedded patch features.
template <typename S>
TensorPtr<S> positional_embed(const ModelWeights<S>& w, const TensorPtr<S>& features,
                              const TensorPtr<S>& coords, PosEmbed mode) {
    switch (mode) {
        case PosEmbed::None:
            return features;
        case PosEmbed::Concat:
            if (!coords) throw std::invalid_argument("positional_embed: Concat mode needs joint coordinates");
            return concat_last(features, coords);
        case PosEmbed::Learnable:
            return add(features, w.at("pos.table"));
        case PosEmbed::Stem: {
            if (!coords) throw std::invalid_argument("positional_embed: Stem mode needs joint coordinates");
            auto e = detail::linear_named(w, relu(detail::linear_named(w, coords, "pos.fc1")), "pos.fc2");
            return add(features, e);
        }
    }
    throw std::invalid_argument("positional_embed: unknown mode");
}

/// Patch embedding: one full-patch affine map shared across joints and
/// frames, (15, T, H, W, 3) -> (15, T, C0).
template <typename S>
TensorPtr<S> patch_embed(const ModelWeights<S>& w, const ModelConfig& cfg, const TensorPtr<S>& clip) {
    const Shape expect{kJointCount, cfg.frames, cfg.patch.h, cfg.patch.w, 3};
    if (clip->shape() != expect)
        throw_shape_error("patch_embed: clip shape mismatch", clip->shape(), expect);
    auto flat = reshape(clip, Shape{kJointCount, cfg.frames,
                                    static_cast<std::int64_t>(cfg.patch.h) * cfg.patch.w * 3});
    return detail::linear_named(w, flat, "stem");
}

/// Full network: stem, positional embedding, four spatiotemporal stages,
/// global average pooling and the sigmoid head. Returns a (1,) tensor in
/// [0, 1]. coords may be null for the None/Learnable positional modes.
template <typename S>
TensorPtr<S> forward(const ModelConfig& cfg, const ModelWeights<S>& w, const TensorPtr<S>& clip,
                     const TensorPtr<S>& coords = nullptr, ForwardProbe* probe = nullptr,
                     std::mt19937_64* shuffle_rng = nullptr) {
    cfg.validate();
    auto x = patch_embed(w, cfg, clip);
    if (coords) {
        const Shape expect{kJointCount, cfg.frames, 2};
        if (coords->shape() != expect)
            throw_shape_error("forward: coords shape mismatch", coords->shape(), expect);
    }
    x = positional_embed(w, x, coords, cfg.pos_embed);
    if (probe) probe->features = x->shape();

    const PartitionGraph graph = build_partition_graph(cfg.ks, cfg.kt);
    const auto rotation = rotation_shuffle();
    const auto t_out = cfg.stage_temporal_out();
    int t_cur = cfg.frames;
    for (int s = 0; s < 4; ++s) {
        const std::string sp = "stage" + std::to_string(s);
        for (int b = 0; b < cfg.stage_depths[s]; ++b) {
            const std::string bp = sp + ".block" + std::to_string(b);
            x = spatial_block(w, x, graph, bp);
            if (cfg.dynamic_partition) {
                if (cfg.stochastic_shuffle && shuffle_rng) {
                    std::array<int, kPartitionCount> perm{0, 1, 2, 3, 4};
                    for (int i = kPartitionCount - 1; i > 0; --i)
                        std::swap(perm[i], perm[(*shuffle_rng)() % (i + 1)]);
                    x = permute_rows(x, shuffle_partitions(perm));
                } else {
                    x = permute_rows(x, rotation);
                }
            }
            const bool last = b == cfg.stage_depths[s] - 1;
            const int stride = last && t_out[s] != t_cur ? 2 : 1;
            x = temporal_block(w, x, cfg.ks, cfg.kt, bp + ".temporal", last, stride);
            if (last) t_cur = t_out[s];
        }
        if (probe) probe->stage_out[s] = x->shape();
    }
    auto pooled = global_avg_pool(x);
    return sigmoid(detail::linear_named(w, pooled, "head"));
}

/// Per-partition saliency: probability drop when a partition's patches are
/// zeroed out. Higher means the partition mattered more.
template <typename S>
std::array<double, kPartitionCount> occlusion_saliency(const ModelConfig& cfg, const ModelWeights<S>& w,
                                                       const TensorPtr<S>& clip,
                                                       const TensorPtr<S>& coords = nullptr) {
    NoGradGuard ng;
    const double base = static_cast<double>(forward(cfg, w, clip, coords)->item());
    const std::int64_t block = clip->size() / kJointCount;
    std::array<double, kPartitionCount> scores{};
    for (int p = 0; p < kPartitionCount; ++p) {
        std::vector<S> data(clip->data().begin(), clip->data().end());
        std::fill(data.begin() + p * kJointsPerPartition * block,
                  data.begin() + (p + 1) * kJointsPerPartition * block, S(0));
        auto occluded = Tensor<S>::make(clip->shape(), std::move(data));
        scores[p] = base - static_cast<double>(forward(cfg, w, occluded, coords)->item());
    }
    return scores;
}

}  // namespace stvig
