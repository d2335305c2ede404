#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stvig/ops.hpp"
#include "stvig/tensor.hpp"

using namespace stvig;

namespace {

using T = TensorPtr<double>;

std::mt19937_64 rng(12345);

T randu(Shape shape, bool grad = false, double lo = -1.0, double hi = 1.0) {
    return Tensor<double>::uniform(std::move(shape), lo, hi, rng, grad);
}

// ---------------------------------------------------------------------------
// independent oracles
// ---------------------------------------------------------------------------

// y[m, j] = sum_i x[m, i] w[i, j] + b[j], plain triple loop
std::vector<double> matmul_oracle(const T& x, const T& w, const T& b) {
    const auto m = x->size() / x->shape().back();
    const auto cin = w->dim(0), cout = w->dim(1);
    std::vector<double> y(static_cast<std::size_t>(m * cout), 0.0);
    for (std::int64_t r = 0; r < m; ++r)
        for (std::int64_t j = 0; j < cout; ++j) {
            double acc = b ? b->at(j) : 0.0;
            for (std::int64_t i = 0; i < cin; ++i) acc += x->at(r * cin + i) * w->at(i * cout + j);
            y[r * cout + j] = acc;
        }
    return y;
}

// direct 6-nested-loop convolution over the padded volume
std::vector<double> conv3d_oracle(const T& x, const T& k, std::array<std::int64_t, 3> s,
                                  std::array<std::int64_t, 3> p, const T& bias) {
    const std::int64_t cin = x->dim(0), d1 = x->dim(1), d2 = x->dim(2), d3 = x->dim(3);
    const std::int64_t cout = k->dim(0), k1 = k->dim(2), k2 = k->dim(3), k3 = k->dim(4);
    const std::int64_t o1 = (d1 + 2 * p[0] - k1) / s[0] + 1;
    const std::int64_t o2 = (d2 + 2 * p[1] - k2) / s[1] + 1;
    const std::int64_t o3 = (d3 + 2 * p[2] - k3) / s[2] + 1;
    std::vector<double> y(static_cast<std::size_t>(cout * o1 * o2 * o3), 0.0);
    auto xat = [&](std::int64_t c, std::int64_t a, std::int64_t b2, std::int64_t c2) {
        if (a < 0 || a >= d1 || b2 < 0 || b2 >= d2 || c2 < 0 || c2 >= d3) return 0.0;
        return x->at(((c * d1 + a) * d2 + b2) * d3 + c2);
    };
    for (std::int64_t co = 0; co < cout; ++co)
        for (std::int64_t i1 = 0; i1 < o1; ++i1)
            for (std::int64_t i2 = 0; i2 < o2; ++i2)
                for (std::int64_t i3 = 0; i3 < o3; ++i3) {
                    double acc = bias ? bias->at(co) : 0.0;
                    for (std::int64_t ci = 0; ci < cin; ++ci)
                        for (std::int64_t a = 0; a < k1; ++a)
                            for (std::int64_t b2 = 0; b2 < k2; ++b2)
                                for (std::int64_t c2 = 0; c2 < k3; ++c2)
                                    acc += xat(ci, i1 * s[0] - p[0] + a, i2 * s[1] - p[1] + b2,
                                               i3 * s[2] - p[2] + c2) *
                                           k->at(((((co * cin) + ci) * k1 + a) * k2 + b2) * k3 + c2);
                    y[((co * o1 + i1) * o2 + i2) * o3 + i3] = acc;
                }
    return y;
}

/// Central finite differences against the recorded gradients; loss_fn must
/// rebuild the graph from the current leaf values on every call.
template <typename LossFn>
void check_gradients(const std::vector<T>& leaves, LossFn loss_fn, double tol = 1e-4,
                     double h = 1e-5) {
    for (const auto& leaf : leaves) leaf->zero_grad();
    auto loss = loss_fn();
    loss->backward();
    std::vector<std::vector<double>> analytic;
    for (const auto& leaf : leaves)
        analytic.emplace_back(leaf->grad().begin(), leaf->grad().end());

    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = *leaves[li];
        for (std::int64_t j = 0; j < leaf.size(); ++j) {
            const double saved = leaf.at(j);
            leaf.at(j) = saved + h;
            const double up = loss_fn()->item();
            leaf.at(j) = saved - h;
            const double down = loss_fn()->item();
            leaf.at(j) = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[li][j];
            const double scale = std::max({1.0, std::abs(a), std::abs(numeric)});
            INFO("leaf ", li, " elem ", j, " analytic ", a, " numeric ", numeric);
            CHECK(std::abs(a - numeric) <= tol * scale);
        }
    }
}

}  // namespace

TEST_CASE("linear identity map and sum-plus-bias") {
    auto x = Tensor<double>::make({2}, {1.0, 0.0});
    auto w = Tensor<double>::make({2, 2}, {1.0, 0.0, 0.0, 1.0});
    auto b = Tensor<double>::make({2}, {0.0, 0.0});
    auto y = linear(x, w, b);
    CHECK(y->at(0) == 1.0);
    CHECK(y->at(1) == 0.0);

    auto x2 = Tensor<double>::make({2}, {1.0, 2.0});
    auto w2 = Tensor<double>::make({2, 1}, {1.0, 1.0});
    auto b2 = Tensor<double>::make({1}, {3.0});
    CHECK(linear(x2, w2, b2)->at(0) == 6.0);
}

TEST_CASE("linear matches the triple-loop oracle to 1e-12") {
    auto x = randu({4, 3});
    auto w = randu({3, 2});
    auto b = randu({2});
    auto y = linear(x, w, b);
    const auto expect = matmul_oracle(x, w, b);
    REQUIRE(y->shape() == Shape{4, 2});
    for (std::int64_t i = 0; i < y->size(); ++i) CHECK(std::abs(y->at(i) - expect[i]) <= 1e-12);

    auto x3 = randu({2, 3, 5});
    auto w3 = randu({5, 4});
    auto y3 = linear(x3, w3);
    const auto expect3 = matmul_oracle(x3, w3, nullptr);
    REQUIRE(y3->shape() == Shape{2, 3, 4});
    for (std::int64_t i = 0; i < y3->size(); ++i) CHECK(std::abs(y3->at(i) - expect3[i]) <= 1e-12);
}

TEST_CASE("linear rejects a shape mismatch naming both shapes") {
    auto x = randu({4, 3});
    auto w = randu({5, 2});
    CHECK_THROWS_WITH_AS(linear(x, w),
                         doctest::Contains("(4, 3)"), std::invalid_argument);
    try {
        linear(x, w);
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("(5, 2)") != std::string::npos);
    }
}

TEST_CASE("relu and sigmoid forward values") {
    auto x = Tensor<double>::make({3}, {-1.0, 0.0, 2.0});
    auto r = relu(x);
    CHECK(r->at(0) == 0.0);
    CHECK(r->at(1) == 0.0);
    CHECK(r->at(2) == 2.0);
    auto s = sigmoid(Tensor<double>::scalar(0.0));
    CHECK(s->at(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sigmoid gradient at zero is 0.25, against central differences") {
    auto x = Tensor<double>::scalar(0.0, true);
    auto loss = sigmoid(x);
    loss->backward();
    CHECK(x->grad()[0] == doctest::Approx(0.25).epsilon(1e-9));

    const double h = 1e-5;
    const double fd = (1.0 / (1.0 + std::exp(-h)) - 1.0 / (1.0 + std::exp(h))) / (2.0 * h);
    CHECK(std::abs(x->grad()[0] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
}

TEST_CASE("conv3d with a unit 1x1x1 kernel is the identity") {
    auto x = randu({1, 2, 3, 4});
    auto k = Tensor<double>::make({1, 1, 1, 1, 1}, {1.0});
    auto y = conv3d(x, k);
    REQUIRE(y->shape() == x->shape());
    for (std::int64_t i = 0; i < x->size(); ++i) CHECK(y->at(i) == x->at(i));
}

TEST_CASE("conv3d reproduces the stage-internal shape of the architecture table") {
    // 24-channel feature volume (1, 15, 30) under a (1,3,3) window, stride 1,
    // padding (0,1,1): spatial and temporal extents survive unchanged.
    auto x = randu({24, 1, 15, 30});
    auto k = randu({24, 24, 1, 3, 3});
    auto y = conv3d(x, k, {1, 1, 1}, {0, 1, 1});
    CHECK(y->shape() == Shape{24, 1, 15, 30});
}

TEST_CASE("conv3d matches the six-loop oracle to 1e-12 on small instances") {
    struct Case {
        Shape x, k;
        std::array<std::int64_t, 3> s, p;
    };
    const Case cases[] = {
        {{2, 5, 4, 6}, {3, 2, 2, 3, 3}, {2, 1, 2}, {1, 0, 1}},
        {{1, 3, 3, 3}, {2, 1, 3, 3, 3}, {1, 1, 1}, {1, 1, 1}},
        {{3, 1, 6, 5}, {2, 3, 1, 3, 3}, {1, 1, 2}, {0, 1, 1}},
        {{2, 2, 2, 2}, {2, 2, 1, 1, 1}, {1, 1, 1}, {0, 0, 0}},
    };
    for (const auto& c : cases) {
        auto x = randu(c.x);
        auto k = randu(c.k);
        auto b = randu({c.k[0]});
        auto y = conv3d(x, k, c.s, c.p, b);
        const auto expect = conv3d_oracle(x, k, c.s, c.p, b);
        REQUIRE(static_cast<std::size_t>(y->size()) == expect.size());
        for (std::int64_t i = 0; i < y->size(); ++i) CHECK(std::abs(y->at(i) - expect[i]) <= 1e-12);
    }
}

TEST_CASE("conv3d rejects kernels larger than the padded input") {
    auto x = randu({1, 2, 2, 2});
    auto k = randu({1, 1, 3, 1, 1});
    CHECK_THROWS_AS(conv3d(x, k), std::invalid_argument);
    CHECK_NOTHROW(conv3d(x, k, {1, 1, 1}, {1, 0, 0}));
}

TEST_CASE("max_over_neighbors basics") {
    auto x = Tensor<double>::make({2, 2}, {1.0, 5.0, 3.0, 2.0});
    auto y = max_over_neighbors(x);
    CHECK(y->at(0) == 3.0);
    CHECK(y->at(1) == 5.0);

    auto single = Tensor<double>::make({1, 3}, {7.0, -2.0, 0.5});
    auto ysingle = max_over_neighbors(single);
    for (int i = 0; i < 3; ++i) CHECK(ysingle->at(i) == single->at(i));

    auto empty = Tensor<double>::make({0, 3});
    CHECK_THROWS_AS(max_over_neighbors(empty), std::invalid_argument);
}

TEST_CASE("max_over_neighbors matches a per-column scan on a random 12x8") {
    auto x = randu({12, 8});
    auto y = max_over_neighbors(x);
    for (std::int64_t c = 0; c < 8; ++c) {
        double best = x->at(c);
        for (std::int64_t r = 1; r < 12; ++r) best = std::max(best, x->at(r * 8 + c));
        CHECK(y->at(c) == best);
    }
}

TEST_CASE("max gradient routes to the lowest index on ties") {
    auto x = Tensor<double>::make({3, 1}, {2.0, 2.0, 1.0}, true);
    auto y = max_over_neighbors(x);
    y->backward();
    CHECK(x->grad()[0] == 1.0);
    CHECK(x->grad()[1] == 0.0);
    CHECK(x->grad()[2] == 0.0);
}

TEST_CASE("concat, global average pool and mse hand values") {
    CHECK(mse(Tensor<double>::make({1}, {1.0}), Tensor<double>::make({1}, {1.0}))->item() == 0.0);
    CHECK(mse(Tensor<double>::make({2}, {0.0, 1.0}), Tensor<double>::make({2}, {1.0, 1.0}))->item() ==
          doctest::Approx(0.5).epsilon(1e-15));

    auto c7 = Tensor<double>::full({4, 3, 2}, 7.0);
    auto pooled = global_avg_pool(c7);
    REQUIRE(pooled->shape() == Shape{2});
    CHECK(pooled->at(0) == 7.0);
    CHECK(pooled->at(1) == 7.0);

    auto a = Tensor<double>::make({2, 2}, {1, 2, 3, 4});
    auto b = Tensor<double>::make({2, 3}, {5, 6, 7, 8, 9, 10});
    auto cat = concat_last(a, b);
    REQUIRE(cat->shape() == Shape{2, 5});
    const std::vector<double> expect = {1, 2, 5, 6, 7, 3, 4, 8, 9, 10};
    for (std::int64_t i = 0; i < cat->size(); ++i) CHECK(cat->at(i) == expect[i]);
}

TEST_CASE("backward fundamentals") {
    SUBCASE("loss = w * x routes x to dw") {
        auto w = Tensor<double>::scalar(2.0, true);
        auto x = Tensor<double>::make({1, 1}, {3.0});
        auto y = linear(x, reshape(w, Shape{1, 1}));
        y->backward();
        CHECK(w->grad()[0] == 3.0);
    }
    SUBCASE("a tensor feeding two consumers sums both contributions") {
        auto x = Tensor<double>::scalar(5.0, true);
        auto y = add(x, x);
        y->backward();
        CHECK(x->grad()[0] == 2.0);
    }
    SUBCASE("leaves off the loss path get zero gradient") {
        auto x = Tensor<double>::scalar(1.0, true);
        auto unused = Tensor<double>::scalar(4.0, true);
        auto y = relu(x);
        y->backward();
        CHECK(x->grad()[0] == 1.0);
        CHECK(unused->grad()[0] == 0.0);
    }
    SUBCASE("non-scalar loss is rejected") {
        auto x = randu({2, 2}, true);
        auto y = relu(x);
        CHECK_THROWS_AS(y->backward(), std::invalid_argument);
    }
    SUBCASE("repeated backward without reset accumulates") {
        auto x = Tensor<double>::scalar(5.0, true);
        auto y = add(x, x);
        y->backward();
        y->backward();
        CHECK(x->grad()[0] == 4.0);
    }
}

TEST_CASE("finite-difference gradient checks across every differentiable op") {
    SUBCASE("linear") {
        auto x = randu({3, 4}, true);
        auto w = randu({4, 2}, true);
        auto b = randu({2}, true);
        auto target = randu({3, 2});
        check_gradients({x, w, b}, [&] { return mse(linear(x, w, b), target); });
    }
    SUBCASE("relu away from the kink") {
        auto x = randu({3, 3}, true, 0.2, 1.0);
        auto sign = randu({3, 3}, false, -1.0, 1.0);
        for (std::int64_t i = 0; i < x->size(); ++i)
            if (sign->at(i) < 0) x->at(i) = -x->at(i);
        auto target = randu({3, 3});
        check_gradients({x}, [&] { return mse(relu(x), target); });
    }
    SUBCASE("sigmoid") {
        auto x = randu({2, 3}, true, -2.0, 2.0);
        auto target = randu({2, 3});
        check_gradients({x}, [&] { return mse(sigmoid(x), target); });
    }
    SUBCASE("conv3d") {
        auto x = randu({2, 3, 4, 3}, true);
        auto k = randu({2, 2, 1, 3, 3}, true);
        auto b = randu({2}, true);
        Shape out{2, 3, 2, 3};
        auto target = randu({numel(out)});
        check_gradients({x, k, b}, [&] {
            auto y = conv3d(x, k, {1, 2, 1}, {0, 1, 1}, b);
            return mse(reshape(y, {y->size()}), target);
        });
    }
    SUBCASE("max_over_neighbors") {
        auto x = randu({5, 4}, true);
        auto target = randu({4});
        check_gradients({x}, [&] { return mse(max_over_neighbors(x), target); });
    }
    SUBCASE("max_relative") {
        auto x = randu({4, 2, 3}, true);
        const std::vector<std::vector<int>> nbrs = {{1, 2}, {0, 3}, {0, 1, 3}, {2}};
        auto target = randu({4 * 2 * 3});
        check_gradients({x}, [&] {
            auto y = max_relative(x, nbrs);
            return mse(reshape(y, {y->size()}), target);
        });
    }
    SUBCASE("concat_last and add") {
        auto a = randu({2, 3}, true);
        auto b = randu({2, 2}, true);
        auto target = randu({2, 5});
        check_gradients({a, b}, [&] { return mse(concat_last(add(a, a), b), target); });
    }
    SUBCASE("global_avg_pool") {
        auto x = randu({4, 3}, true);
        auto target = randu({3});
        check_gradients({x}, [&] { return mse(global_avg_pool(x), target); });
    }
    SUBCASE("permutations and reshape") {
        auto x = randu({3, 2, 4}, true);
        auto target = randu({24});
        check_gradients({x}, [&] {
            auto y = permute_axes(x, {2, 0, 1});
            auto z = permute_rows(y, {3, 1, 0, 2});
            return mse(reshape(z, {24}), target);
        });
    }
    SUBCASE("mse wrt both arguments") {
        auto p = randu({3}, true);
        auto t = randu({3}, true);
        check_gradients({p, t}, [&] { return mse(p, t); });
    }
}

TEST_CASE("no-grad mode records no graph") {
    auto x = randu({2, 2}, true);
    NoGradGuard guard;
    auto y = relu(x);
    CHECK(y->is_leaf());
    CHECK_FALSE(y->requires_grad());
}

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor<double>::make({2, 2}, {1.0, 2.0}), std::invalid_argument);
    auto t = Tensor<double>::make({2, 3});
    CHECK(t->size() == 6);
    CHECK(numel(t->shape()) == 6);
}
