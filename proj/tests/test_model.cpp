#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stvig/model.hpp"

using namespace stvig;

namespace {

std::mt19937_64 rng(2024);

TensorPtr<double> randu(Shape shape, bool grad = false) {
    return Tensor<double>::uniform(std::move(shape), -1.0, 1.0, rng, grad);
}

ModelConfig micro_config(int c0 = 6, int frames = 4, PosEmbed pos = PosEmbed::None) {
    ModelConfig cfg;
    cfg.variant = Variant::Light;
    cfg.stem_channels = c0;
    cfg.stage_depths = {1, 1, 1, 1};
    cfg.frames = frames;
    cfg.patch.h = 8;
    cfg.patch.w = 8;
    cfg.pos_embed = pos;
    cfg.dynamic_partition = false;
    return cfg;
}

void fill_zero(ModelWeights<double>& w, const std::string& prefix) {
    for (auto& [name, t] : w.tensors)
        if (name.rfind(prefix, 0) == 0)
            std::fill(t->data().begin(), t->data().end(), 0.0);
}

// plain-loop y = x W + b for the oracle
std::vector<std::vector<double>> mat_apply(const std::vector<std::vector<double>>& x,
                                           const TensorPtr<double>& w, const TensorPtr<double>& b) {
    const auto cin = w->dim(0), cout = w->dim(1);
    std::vector<std::vector<double>> y(x.size(), std::vector<double>(cout, 0.0));
    for (std::size_t n = 0; n < x.size(); ++n)
        for (std::int64_t j = 0; j < cout; ++j) {
            double acc = b->at(j);
            for (std::int64_t i = 0; i < cin; ++i) acc += x[n][i] * w->at(i * cout + j);
            y[n][j] = acc;
        }
    return y;
}

}  // namespace

TEST_CASE("max-relative term vanishes when all nodes are identical") {
    auto row = randu({1, 1, 5});
    std::vector<double> data;
    for (int n = 0; n < 15; ++n)
        data.insert(data.end(), row->data().begin(), row->data().end());
    auto x = Tensor<double>::make({15, 1, 5}, std::move(data));
    const auto graph = build_partition_graph();
    auto d = max_relative(x, graph.inter);
    for (std::int64_t i = 0; i < d->size(); ++i) CHECK(d->at(i) == 0.0);
}

TEST_CASE("mrgc equals a brute-force per-node enumeration to 1e-12") {
    const auto graph = build_partition_graph();
    const int c = 5;
    auto x = randu({15, c});
    auto w_in = randu({c, c});
    auto b_in = randu({c});
    auto w_upd = randu({2 * c, 2 * c});
    auto b_upd = randu({2 * c});
    auto w_out = randu({2 * c, c});
    auto b_out = randu({c});

    for (const auto* nbrs : {&graph.inter, &graph.intra}) {
        auto out = mrgc(x, *nbrs, w_in, b_in, w_upd, b_upd, w_out, b_out);
        REQUIRE(out->shape() == Shape{15, c});

        // independent route: plain loops throughout
        std::vector<std::vector<double>> xi(15, std::vector<double>(c));
        for (int n = 0; n < 15; ++n)
            for (int j = 0; j < c; ++j) xi[n][j] = x->at(n * c + j);
        const auto y = mat_apply(xi, w_in, b_in);
        std::vector<std::vector<double>> h(15, std::vector<double>(2 * c));
        for (int n = 0; n < 15; ++n) {
            for (int j = 0; j < c; ++j) {
                double best = -1e300;
                for (int nb : (*nbrs)[n]) best = std::max(best, y[nb][j]);
                h[n][j] = y[n][j];
                h[n][c + j] = best - y[n][j];
            }
        }
        auto u = mat_apply(h, w_upd, b_upd);
        for (auto& rowv : u)
            for (auto& v : rowv) v = std::max(v, 0.0);
        const auto z = mat_apply(u, w_out, b_out);
        for (int n = 0; n < 15; ++n)
            for (int j = 0; j < c; ++j) CHECK(std::abs(out->at(n * c + j) - z[n][j]) <= 1e-12);
    }
}

TEST_CASE("mrgc is invariant to the listed neighbor order") {
    const auto graph = build_partition_graph();
    auto nbrs = graph.inter;
    for (auto& list : nbrs) std::reverse(list.begin(), list.end());

    const int c = 4;
    auto x = randu({15, c});
    auto w_in = randu({c, c});
    auto b_in = randu({c});
    auto w_upd = randu({2 * c, 2 * c});
    auto b_upd = randu({2 * c});
    auto w_out = randu({2 * c, c});
    auto b_out = randu({c});

    auto a = mrgc(x, graph.inter, w_in, b_in, w_upd, b_upd, w_out, b_out);
    auto b = mrgc(x, nbrs, w_in, b_in, w_upd, b_upd, w_out, b_out);
    for (std::int64_t i = 0; i < a->size(); ++i) CHECK(a->at(i) == b->at(i));
}

TEST_CASE("spatial block with all-zero weights reduces to ReLU of its input") {
    auto cfg = micro_config();
    auto w = ModelWeights<double>::initialize(cfg, 1);
    fill_zero(w, "stage0.block0");
    const auto graph = build_partition_graph();
    auto x = randu({15, cfg.frames, cfg.stem_channels});
    auto y = spatial_block(w, x, graph, "stage0.block0");
    REQUIRE(y->shape() == x->shape());
    for (std::int64_t i = 0; i < x->size(); ++i) CHECK(y->at(i) == std::max(x->at(i), 0.0));
}

TEST_CASE("spatial block preserves shape and processes frames independently") {
    auto cfg = micro_config();
    auto w = ModelWeights<double>::initialize(cfg, 3);
    const auto graph = build_partition_graph();
    const int c = cfg.stem_channels;

    auto frameA = randu({15, 1, c});
    auto frameB = randu({15, 1, c});
    auto pack = [&](const TensorPtr<double>& first, const TensorPtr<double>& second) {
        std::vector<double> data(static_cast<std::size_t>(15 * 2 * c));
        for (int n = 0; n < 15; ++n)
            for (int j = 0; j < c; ++j) {
                data[(n * 2 + 0) * c + j] = first->at(n * c + j);
                data[(n * 2 + 1) * c + j] = second->at(n * c + j);
            }
        return Tensor<double>::make({15, 2, c}, std::move(data));
    };

    auto y_ab = spatial_block(w, pack(frameA, frameB), graph, "stage0.block0");
    auto y_ba = spatial_block(w, pack(frameB, frameA), graph, "stage0.block0");
    REQUIRE(y_ab->shape() == Shape{15, 2, c});
    for (int n = 0; n < 15; ++n)
        for (int j = 0; j < c; ++j) {
            CHECK(y_ab->at((n * 2 + 0) * c + j) == y_ba->at((n * 2 + 1) * c + j));
            CHECK(y_ab->at((n * 2 + 1) * c + j) == y_ba->at((n * 2 + 0) * c + j));
        }
}

TEST_CASE("spatial path is equivariant under partition-respecting relabelings") {
    auto cfg = micro_config();
    auto w = ModelWeights<double>::initialize(cfg, 11);
    const auto graph = build_partition_graph();
    auto x = randu({15, 3, cfg.stem_channels});

    // swap the two arm partitions wholesale
    const auto map = shuffle_partitions({0, 3, 2, 1, 4});
    auto y = spatial_block(w, x, graph, "stage0.block0");
    auto y_perm = spatial_block(w, permute_rows(x, map), graph, "stage0.block0");
    auto expected = permute_rows(y, map);
    for (std::int64_t i = 0; i < y->size(); ++i) CHECK(y_perm->at(i) == expected->at(i));
}

TEST_CASE("temporal block shape contract") {
    SUBCASE("non-expanding block preserves (15, T, C)") {
        auto cfg = micro_config(8, 6);
        cfg.stage_depths = {2, 1, 1, 1};  // block0 of stage0 is non-final
        auto w = ModelWeights<double>::initialize(cfg, 5);
        auto x = randu({15, 6, 8});
        auto y = temporal_block(w, x, cfg.ks, cfg.kt, "stage0.block0.temporal", false, 1);
        CHECK(y->shape() == Shape{15, 6, 8});
    }
    SUBCASE("expanding strided block: (15,30,24) -> (15,15,48)") {
        ModelConfig cfg = ModelConfig::base();  // stage0 width 24
        cfg.pos_embed = PosEmbed::None;
        auto w = ModelWeights<double>::initialize(cfg, 6);
        auto x = randu({15, 30, 24});
        auto y = temporal_block(w, x, cfg.ks, cfg.kt, "stage0.block1.temporal", true, 2);
        CHECK(y->shape() == Shape{15, 15, 48});
    }
    SUBCASE("T = 8 downsamples to 4 under stride 2, padding 1") {
        ModelConfig cfg = ModelConfig::base();
        cfg.pos_embed = PosEmbed::None;
        auto w = ModelWeights<double>::initialize(cfg, 7);
        auto x = randu({15, 8, 192});  // stage3 width
        auto y = temporal_block(w, x, cfg.ks, cfg.kt, "stage3.block1.temporal", true, 2);
        CHECK(y->shape() == Shape{15, 4, 384});
    }
    SUBCASE("strided non-expanding blocks are rejected") {
        auto cfg = micro_config(8, 6);
        cfg.stage_depths = {2, 1, 1, 1};
        auto w = ModelWeights<double>::initialize(cfg, 5);
        auto x = randu({15, 6, 8});
        CHECK_THROWS_AS(temporal_block(w, x, cfg.ks, cfg.kt, "stage0.block0.temporal", false, 2),
                        std::logic_error);
    }
}

TEST_CASE("patch embedding") {
    ModelConfig cfg = ModelConfig::base();
    auto w = ModelWeights<double>::initialize(cfg, 2);
    SUBCASE("shape lands at (15, 30, 24) for the base stem") {
        auto clip = randu({15, 30, 32, 32, 3});
        auto f = patch_embed(w, cfg, clip);
        CHECK(f->shape() == Shape{15, 30, 24});
    }
    SUBCASE("zero clip with zero bias embeds to zero") {
        std::fill(w.at("stem.bias")->data().begin(), w.at("stem.bias")->data().end(), 0.0);
        auto clip = Tensor<double>::make(Shape{15, 30, 32, 32, 3});
        auto f = patch_embed(w, cfg, clip);
        for (std::int64_t i = 0; i < f->size(); ++i) CHECK(f->at(i) == 0.0);
    }
    SUBCASE("one patch equals the flattened dot product") {
        auto cfg2 = micro_config(5, 2);
        auto w2 = ModelWeights<double>::initialize(cfg2, 9);
        auto clip = randu({15, 2, 8, 8, 3});
        auto f = patch_embed(w2, cfg2, clip);
        const auto& stem = w2.at("stem.weight");
        const auto& bias = w2.at("stem.bias");
        const int d = 8 * 8 * 3;
        for (int j = 0; j < 5; ++j) {
            double acc = bias->at(j);
            for (int i = 0; i < d; ++i) acc += clip->at(i) * stem->at(i * 5 + j);
            CHECK(f->at(j) == doctest::Approx(acc).epsilon(1e-12));
        }
    }
    SUBCASE("wrong clip shape is rejected") {
        auto clip = randu({15, 30, 16, 16, 3});
        CHECK_THROWS_AS(patch_embed(w, cfg, clip), std::invalid_argument);
    }
}

TEST_CASE("positional embedding modes") {
    auto cfg = micro_config(6, 4);
    auto w = ModelWeights<double>::initialize(cfg, 4);
    auto features = randu({15, 4, 6});
    auto coords = randu({15, 4, 2});

    SUBCASE("None returns the features untouched") {
        auto out = positional_embed(w, features, coords, PosEmbed::None);
        CHECK(out.get() == features.get());
    }
    SUBCASE("Concat grows the channel dimension by 2") {
        auto out = positional_embed(w, features, coords, PosEmbed::Concat);
        CHECK(out->shape() == Shape{15, 4, 8});
    }
    SUBCASE("Learnable adds a trainable table") {
        auto cfgL = micro_config(6, 4, PosEmbed::Learnable);
        auto wl = ModelWeights<double>::initialize(cfgL, 4);
        auto& table = wl.at("pos.table");
        CHECK(table->shape() == Shape{15, 4, 6});
        for (std::int64_t i = 0; i < table->size(); ++i) table->at(i) = 0.5;
        auto out = positional_embed(wl, features, TensorPtr<double>{}, PosEmbed::Learnable);
        for (std::int64_t i = 0; i < out->size(); ++i)
            CHECK(out->at(i) == doctest::Approx(features->at(i) + 0.5));
    }
    SUBCASE("Stem with zero MLP weights is the identity") {
        auto cfgS = micro_config(6, 4, PosEmbed::Stem);
        auto ws = ModelWeights<double>::initialize(cfgS, 4);
        fill_zero(ws, "pos.");
        auto out = positional_embed(ws, features, coords, PosEmbed::Stem);
        for (std::int64_t i = 0; i < out->size(); ++i) CHECK(out->at(i) == features->at(i));
    }
    SUBCASE("coordinate-hungry modes demand coordinates") {
        CHECK_THROWS_AS(positional_embed(w, features, TensorPtr<double>{}, PosEmbed::Concat),
                        std::invalid_argument);
        CHECK_THROWS_AS(positional_embed(w, features, TensorPtr<double>{}, PosEmbed::Stem),
                        std::invalid_argument);
    }
}

TEST_CASE("full forward pass") {
    SUBCASE("base variant walks the published shape trajectory") {
        ModelConfig cfg = ModelConfig::base();
        auto w = ModelWeights<float>::initialize(cfg, 1);
        std::mt19937_64 frng(55);
        auto clip = Tensor<float>::uniform({15, 30, 32, 32, 3}, 0.0f, 1.0f, frng);
        auto coords = Tensor<float>::uniform({15, 30, 2}, 0.0f, 1.0f, frng);
        ForwardProbe probe;
        NoGradGuard ng;
        auto p = forward(cfg, w, clip, coords, &probe);
        CHECK(probe.stage_out[0] == Shape{15, 30, 48});
        CHECK(probe.stage_out[1] == Shape{15, 15, 96});
        CHECK(probe.stage_out[2] == Shape{15, 8, 192});
        CHECK(probe.stage_out[3] == Shape{15, 4, 384});
        CHECK(p->item() >= 0.0f);
        CHECK(p->item() <= 1.0f);
    }
    SUBCASE("zero head gives exactly one half") {
        auto cfg = micro_config(4, 4);
        auto w = ModelWeights<double>::initialize(cfg, 8);
        fill_zero(w, "head");
        auto clip = randu({15, 4, 8, 8, 3});
        auto p = forward(cfg, w, clip);
        CHECK(p->item() == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("forward is deterministic") {
        auto cfg = micro_config(4, 4);
        cfg.dynamic_partition = true;
        auto w = ModelWeights<double>::initialize(cfg, 8);
        auto clip = randu({15, 4, 8, 8, 3});
        auto a = forward(cfg, w, clip);
        auto b = forward(cfg, w, clip);
        CHECK(a->item() == b->item());
    }
    SUBCASE("light temporal trajectory from a 30-frame clip") {
        ModelConfig cfg = ModelConfig::light();
        cfg.pos_embed = PosEmbed::None;
        auto w = ModelWeights<float>::initialize(cfg, 2);
        std::mt19937_64 frng(77);
        auto clip = Tensor<float>::uniform({15, 30, 32, 32, 3}, 0.0f, 1.0f, frng);
        ForwardProbe probe;
        NoGradGuard ng;
        forward(cfg, w, clip, TensorPtr<float>{}, &probe);
        CHECK(probe.stage_out[0] == Shape{15, 30, 24});
        CHECK(probe.stage_out[3] == Shape{15, 4, 192});
    }
}

TEST_CASE("end-to-end gradient check on the tiny configuration") {
    ModelConfig cfg;
    cfg.stem_channels = 4;
    cfg.stage_depths = {1, 1, 1, 1};
    cfg.frames = 4;
    cfg.patch.h = 4;
    cfg.patch.w = 4;
    cfg.pos_embed = PosEmbed::Stem;
    cfg.dynamic_partition = true;

    auto w = ModelWeights<double>::initialize(cfg, 21);
    std::mt19937_64 lrng(31);
    auto clip = Tensor<double>::uniform({15, 4, 4, 4, 3}, 0.0, 1.0, lrng, true);
    auto coords = Tensor<double>::uniform({15, 4, 2}, 0.0, 1.0, lrng);
    auto target = Tensor<double>::scalar(0.7);

    auto loss_fn = [&] { return mse(forward(cfg, w, clip, coords), target); };

    for (auto& [name, t] : w.tensors) t->zero_grad();
    clip->zero_grad();
    auto loss = loss_fn();
    loss->backward();

    // spot-check a spread of parameters and a few input pixels
    const double h = 1e-5;
    int checked = 0;
    std::mt19937_64 pick(99);
    for (std::size_t ti = 0; ti < w.tensors.size(); ti += 5) {
        auto& t = w.tensors[ti].second;
        const std::int64_t j = static_cast<std::int64_t>(pick() % static_cast<std::uint64_t>(t->size()));
        const double saved = t->at(j);
        const double analytic = t->grad()[j];
        t->at(j) = saved + h;
        const double up = loss_fn()->item();
        t->at(j) = saved - h;
        const double down = loss_fn()->item();
        t->at(j) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
        INFO("tensor ", w.tensors[ti].first, " elem ", j);
        CHECK(std::abs(analytic - numeric) <= 1e-3 * scale);
        ++checked;
    }
    CHECK(checked >= 20);

    for (int k = 0; k < 8; ++k) {
        const std::int64_t j = static_cast<std::int64_t>(pick() % static_cast<std::uint64_t>(clip->size()));
        const double saved = clip->at(j);
        const double analytic = clip->grad()[j];
        clip->at(j) = saved + h;
        const double up = loss_fn()->item();
        clip->at(j) = saved - h;
        const double down = loss_fn()->item();
        clip->at(j) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
        CHECK(std::abs(analytic - numeric) <= 1e-3 * scale);
    }
}

TEST_CASE("parameter and FLOP accounting") {
    const ModelConfig base = ModelConfig::base();
    const ModelConfig light = ModelConfig::light();

    const auto base_params = count_params(base);
    const auto light_params = count_params(light);
    CHECK(light_params >= 1050000);
    CHECK(light_params <= 1750000);
    CHECK(base_params >= 4050000);
    CHECK(base_params <= 6750000);

    const double ratio = static_cast<double>(count_flops(base)) / static_cast<double>(count_flops(light));
    CHECK(ratio >= 3.2);
    CHECK(ratio <= 4.8);

    SUBCASE("catalog matches the instantiated weights") {
        auto w = ModelWeights<float>::initialize(light, 3);
        CHECK(w.total_params() == light_params);
        for (const auto& def : enumerate_layers(light)) {
            const auto& t = w.at(def.name);
            CHECK(t->shape() == def.shape);
        }
    }

    SUBCASE("biases and tables start at zero, weights within the fan-in bound") {
        auto w = ModelWeights<double>::initialize(light, 5);
        for (const auto& def : enumerate_layers(light)) {
            const auto& t = w.at(def.name);
            if (def.fan_in == 0) {
                for (std::int64_t i = 0; i < t->size(); ++i) CHECK(t->at(i) == 0.0);
            } else {
                const double bound = std::sqrt(1.0 / static_cast<double>(def.fan_in));
                for (std::int64_t i = 0; i < t->size(); ++i) {
                    CHECK(t->at(i) <= bound);
                    CHECK(t->at(i) >= -bound);
                }
            }
        }
    }
}

TEST_CASE("config fingerprints and serialization") {
    const auto a = ModelConfig::base();
    auto b = ModelConfig::base();
    CHECK(a.fingerprint() == b.fingerprint());
    b.stem_channels = 23;
    CHECK(a.fingerprint() != b.fingerprint());
    b = ModelConfig::base();
    b.pos_embed = PosEmbed::None;
    CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("occlusion saliency") {
    SUBCASE("a constant model scores zero everywhere") {
        auto cfg = micro_config(4, 4);
        auto w = ModelWeights<double>::initialize(cfg, 13);
        fill_zero(w, "head");
        auto clip = randu({15, 4, 8, 8, 3});
        const auto scores = occlusion_saliency(cfg, w, clip);
        for (double s : scores) CHECK(s == 0.0);
    }
    SUBCASE("occluding nothing changes nothing") {
        auto cfg = micro_config(4, 4);
        auto w = ModelWeights<double>::initialize(cfg, 14);
        auto clip = randu({15, 4, 8, 8, 3});
        NoGradGuard ng;
        const double base = forward(cfg, w, clip)->item();
        const double again = forward(cfg, w, clip)->item();
        CHECK(base == again);
    }
}

TEST_CASE("model config validation") {
    auto cfg = ModelConfig::light();
    cfg.e_inter = 11;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ModelConfig::light();
    cfg.ks = 2;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ModelConfig::light();
    cfg.stage_depths = {0, 1, 1, 1};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    SUBCASE("temporal trajectory covers 30 and 16 frame variants") {
        auto c30 = ModelConfig::base();
        CHECK(c30.stage_temporal_out() == std::array<int, 4>{30, 15, 8, 4});
        auto c16 = ModelConfig::tiny();
        CHECK(c16.stage_temporal_out() == std::array<int, 4>{16, 8, 4, 2});
    }
}
