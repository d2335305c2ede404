#include "stvig/model.hpp"

#include <sstream>
#include <stdexcept>

namespace stvig {

std::string variant_name(Variant v) { return v == Variant::Base ? "base" : "light"; }

Variant variant_from_name(const std::string& name) {
    if (name == "base") return Variant::Base;
    if (name == "light") return Variant::Light;
    throw std::invalid_argument("unknown variant: " + name);
}

std::string pos_embed_name(PosEmbed p) {
    switch (p) {
        case PosEmbed::None: return "none";
        case PosEmbed::Concat: return "concat";
        case PosEmbed::Learnable: return "learnable";
        case PosEmbed::Stem: return "stem";
    }
    return "?";
}

PosEmbed pos_embed_from_name(const std::string& name) {
    if (name == "none") return PosEmbed::None;
    if (name == "concat") return PosEmbed::Concat;
    if (name == "learnable") return PosEmbed::Learnable;
    if (name == "stem") return PosEmbed::Stem;
    throw std::invalid_argument("unknown positional embedding mode: " + name);
}

ModelConfig ModelConfig::base() {
    ModelConfig cfg;
    cfg.variant = Variant::Base;
    cfg.stem_channels = 24;
    return cfg;
}

ModelConfig ModelConfig::light() {
    ModelConfig cfg;
    cfg.variant = Variant::Light;
    cfg.stem_channels = 12;
    return cfg;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig cfg;
    cfg.variant = Variant::Light;
    cfg.stem_channels = 8;
    cfg.stage_depths = {1, 1, 1, 1};
    cfg.frames = 16;
    cfg.patch.h = 16;
    cfg.patch.w = 16;
    return cfg;
}

void ModelConfig::validate() const {
    if (stem_channels <= 0) throw std::invalid_argument("ModelConfig: stem_channels must be positive");
    for (int d : stage_depths)
        if (d < 1) throw std::invalid_argument("ModelConfig: stage depths must be >= 1");
    if (frames < 2) throw std::invalid_argument("ModelConfig: needs at least 2 frames");
    if (e_inter != kJointCount - kJointsPerPartition || e_intra != kJointsPerPartition - 1)
        throw std::invalid_argument("ModelConfig: edge counts must match the partition template (12/2)");
    if (ks % 2 == 0 || kt % 2 == 0 || ks < 1 || kt < 1)
        throw std::invalid_argument("ModelConfig: ks and kt must be odd and positive");
    patch.validate();
}

int ModelConfig::stage_width(int s) const {
    const int w0 = stem_channels + (pos_embed == PosEmbed::Concat ? 2 : 0);
    return w0 << s;
}

std::array<int, 4> ModelConfig::stage_temporal_out() const {
    std::array<int, 4> t;
    t[0] = frames;
    for (int s = 1; s < 4; ++s) t[s] = (t[s - 1] + 1) / 2;
    return t;
}

int ModelConfig::head_channels() const { return stage_width(3) * 2; }

std::string ModelConfig::canonical_string() const {
    std::ostringstream os;
    os << "variant=" << variant_name(variant) << ";c0=" << stem_channels << ";depths=";
    for (int i = 0; i < 4; ++i) os << (i ? "," : "") << stage_depths[i];
    os << ";frames=" << frames << ";einter=" << e_inter << ";eintra=" << e_intra
       << ";ks=" << ks << ";kt=" << kt << ";pos=" << pos_embed_name(pos_embed)
       << ";dyn=" << (dynamic_partition ? 1 : 0) << ";stoch=" << (stochastic_shuffle ? 1 : 0)
       << ";patch=" << patch.h << "x" << patch.w << ";sigma=";
    os.precision(10);
    os << patch.sigma_rel;
    return os.str();
}

std::uint64_t ModelConfig::fingerprint() const {
    // FNV-1a over the canonical serialization
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canonical_string()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<LayerDef> enumerate_layers(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<LayerDef> layers;
    auto push = [&layers](std::string name, Shape shape, std::int64_t fan_in) {
        layers.push_back({std::move(name), std::move(shape), fan_in});
    };
    auto push_linear = [&push](const std::string& prefix, std::int64_t cin, std::int64_t cout) {
        push(prefix + ".weight", {cin, cout}, cin);
        push(prefix + ".bias", {cout}, 0);
    };
    auto push_conv = [&push](const std::string& prefix, std::int64_t cout, std::int64_t cin,
                             std::int64_t k1, std::int64_t k2, std::int64_t k3) {
        push(prefix + ".kernel", {cout, cin, k1, k2, k3}, cin * k1 * k2 * k3);
        push(prefix + ".bias", {cout}, 0);
    };

    const std::int64_t c0 = cfg.stem_channels;
    push_linear("stem", static_cast<std::int64_t>(cfg.patch.h) * cfg.patch.w * 3, c0);
    if (cfg.pos_embed == PosEmbed::Learnable)
        push("pos.table", {kJointCount, cfg.frames, c0}, 0);
    if (cfg.pos_embed == PosEmbed::Stem) {
        push_linear("pos.fc1", 2, c0);
        push_linear("pos.fc2", c0, c0);
    }

    for (int s = 0; s < 4; ++s) {
        const std::int64_t c = cfg.stage_width(s);
        for (int b = 0; b < cfg.stage_depths[s]; ++b) {
            const std::string bp = "stage" + std::to_string(s) + ".block" + std::to_string(b);
            for (const char* unit : {".inter", ".intra"}) {
                const std::string up = bp + unit;
                push_linear(up + ".fc_in", c, c);
                push_linear(up + ".update", 2 * c, 2 * c);
                push_linear(up + ".fc_out", 2 * c, c);
                push_linear(up + ".ffn.fc1", c, 4 * c);
                push_linear(up + ".ffn.fc2", 4 * c, c);
            }
            const bool last = b == cfg.stage_depths[s] - 1;
            const std::int64_t cout = last ? 2 * c : c;
            push_conv(bp + ".temporal.conv_in", c, c, 1, 1, 1);
            push_conv(bp + ".temporal.conv_mid", c, c, 1, cfg.ks, cfg.kt);
            push_conv(bp + ".temporal.conv_out", cout, c, 1, 1, 1);
            if (last) push_conv(bp + ".temporal.proj", 2 * c, c, 1, 1, 1);
        }
    }
    push_linear("head", cfg.head_channels(), 1);
    return layers;
}

std::int64_t count_params(const ModelConfig& cfg) {
    std::int64_t n = 0;
    for (const auto& layer : enumerate_layers(cfg)) n += numel(layer.shape);
    return n;
}

std::int64_t count_flops(const ModelConfig& cfg) {
    cfg.validate();
    const std::int64_t n = kJointCount;
    const std::int64_t t0 = cfg.frames;
    std::int64_t macs = 0;

    macs += n * t0 * (static_cast<std::int64_t>(cfg.patch.h) * cfg.patch.w * 3) * cfg.stem_channels;
    if (cfg.pos_embed == PosEmbed::Stem) {
        const std::int64_t c0 = cfg.stem_channels;
        macs += n * t0 * (2 * c0 + c0 * c0);
    }

    const auto t_out = cfg.stage_temporal_out();
    std::int64_t t_in = t0;
    for (int s = 0; s < 4; ++s) {
        const std::int64_t c = cfg.stage_width(s);
        for (int b = 0; b < cfg.stage_depths[s]; ++b) {
            const bool last = b == cfg.stage_depths[s] - 1;
            // two grapher units (7 c^2) with feed-forward refinements (8 c^2)
            macs += n * t_in * 30 * c * c;
            const std::int64_t t_mid = last ? t_out[s] : t_in;
            macs += n * t_in * c * c;                              // conv_in
            macs += n * t_mid * c * c * cfg.ks * cfg.kt;           // conv_mid
            macs += n * t_mid * c * (last ? 2 * c : c);            // conv_out
            if (last) macs += n * t_mid * c * 2 * c;               // residual projection
        }
        t_in = t_out[s];
    }
    macs += cfg.head_channels();
    return 2 * macs;
}

}  // namespace stvig
