#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "certwatch/losses.hpp"
#include "support/finite_diff.hpp"

using namespace certwatch;
using Catch::Matchers::WithinAbs;

namespace {

// double-precision references computed from the definitions directly
double ref_ce(double p, int y) {
    p = std::min(1.0 - 1e-7, std::max(1e-7, p));
    return -(y ? std::log(p) : std::log(1.0 - p));
}

Tensor const_map(std::vector<int> shape, float v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data) x = v;
    return t;
}

} // namespace

TEST_CASE("global cross entropy on hand-worked batches") {
    // p = 0.5 on a correct label: ln 2
    CHECK_THAT(ce_global({0.5}, {1}), WithinAbs(std::log(2.0), 1e-12));
    // the batch mean of two frames
    double want = 0.5 * (ref_ce(0.9, 1) + ref_ce(0.2, 0));
    CHECK_THAT(ce_global({0.9, 0.2}, {1, 0}), WithinAbs(want, 1e-12));
    CHECK_THAT(want, WithinAbs(0.5 * (0.105360516 + 0.223143551), 1e-8));
    // the clamp keeps a confidently wrong prediction finite
    CHECK(std::isfinite(ce_global({1.0}, {0})));
    CHECK_THAT(ce_global({1.0}, {0}), WithinAbs(-std::log(1e-7), 1e-6));
    CHECK_THROWS(ce_global({}, {}));
    CHECK_THROWS(ce_global({0.5}, {1, 0}));
}

TEST_CASE("local cross entropy uses smoothed frame labels") {
    // every cell 0.9 on a cheat frame: -(0.9 ln 0.9 + 0.1 ln 0.1)
    Tensor m = const_map({2, 3}, 0.9f);
    double want = -(0.9 * std::log(0.9) + 0.1 * std::log(0.1));
    CHECK_THAT(ce_local({m}, {1}), WithinAbs(want, 1e-6));
    CHECK_THAT(want, WithinAbs(0.325083, 1e-6));
    // a clean frame with every cell 0.1 has the same value by symmetry
    CHECK_THAT(ce_local({const_map({2, 3}, 0.1f)}, {0}), WithinAbs(want, 1e-6));
    // uniform 0.5 map: -(0.9+0.1) ln 0.5 = ln 2 regardless of the label
    CHECK_THAT(ce_local({const_map({3, 6}, 0.5f)}, {0}), WithinAbs(std::log(2.0), 1e-6));
    CHECK_THROWS(ce_local({}, {}));
}

TEST_CASE("combined cross entropy is the plain average of the heads") {
    CHECK(ce_combined(0.4, 0.6) == 0.5);
    CHECK(ce_combined(0.0, 0.0) == 0.0);
}

TEST_CASE("squared-error losses on hand-worked batches") {
    // p = (0.5, 0.5) vs one-hot: mean((0.5)^2, (0.5)^2) = 0.25
    auto r = mse_losses({{0.5, 0.5}}, {const_map({1, 2}, 0.1f)}, {0});
    CHECK_THAT(r.global, WithinAbs(0.25, 1e-9));
    CHECK_THAT(r.local, WithinAbs(0.0, 1e-9)); // cells already at the smoothed target
    CHECK_THAT(r.combined, WithinAbs(0.25, 1e-9));

    // a perfect global prediction with an off-target map
    auto r2 = mse_losses({{0.0, 1.0}}, {const_map({1, 2}, 0.4f)}, {1});
    CHECK_THAT(r2.global, WithinAbs(0.0, 1e-9));
    CHECK_THAT(r2.local, WithinAbs(0.25, 1e-6)); // (0.4 - 0.9)^2
    CHECK_THROWS(mse_losses({}, {}, {}));
}

TEST_CASE("uncertainty loss at the neutral point") {
    // l = (0, 0): alpha = (2, 2), p^ = (0.5, 0.5)
    // mse = 0.5, variance = 2 * 0.25/5 = 0.1, total 0.6 before the KL ramp
    auto r = evidential_loss({{0.0, 0.0}}, {1}, 0.0);
    CHECK_THAT(r.ul_global, WithinAbs(0.6, 1e-6));
    // alpha~ = (2, 1) for y = 1
    double kl = dirichlet_kl_to_uniform(2.0, 1.0);
    double kl_ref = std::lgamma(3.0) - std::lgamma(2.0) - std::lgamma(1.0) +
                    1.0 * (/*digamma(2)-digamma(3)*/ (1.0 - 0.57721566490153286) -
                           (1.5 - 0.57721566490153286));
    CHECK_THAT(kl, WithinAbs(kl_ref, 1e-9));
    auto r2 = evidential_loss({{0.0, 0.0}}, {1}, 1.0);
    CHECK_THAT(r2.kl_term, WithinAbs(kl, 1e-9));
    CHECK_THAT(r2.ul_global, WithinAbs(0.6 + kl, 1e-6));
}

TEST_CASE("uncertainty loss falls as correct evidence grows") {
    double prev = evidential_loss({{0.0, 0.0}}, {1}, 0.0).ul_global;
    for (double l1 : {1.0, 2.0, 4.0, 8.0}) {
        double cur = evidential_loss({{0.0, l1}}, {1}, 0.0).ul_global;
        CHECK(cur < prev);
        prev = cur;
    }
    // and the KL against the pruned prior rises with wrong-class evidence
    double k_prev = evidential_loss({{0.0, 0.0}}, {1}, 1.0).kl_term;
    for (double l0 : {1.0, 2.0, 4.0}) {
        double k = evidential_loss({{l0, 0.0}}, {1}, 1.0).kl_term;
        CHECK(k > k_prev);
        k_prev = k;
    }
    CHECK_THROWS(evidential_loss({{std::nan(""), 0.0}}, {1}, 0.0));
}

TEST_CASE("KL to the flat Dirichlet is zero at the prior and positive elsewhere") {
    CHECK_THAT(dirichlet_kl_to_uniform(1.0, 1.0), WithinAbs(0.0, 1e-12));
    CHECK(dirichlet_kl_to_uniform(3.0, 1.5) > 0.0);
    CHECK(dirichlet_kl_to_uniform(0.5, 0.5) > 0.0);
}

TEST_CASE("graph losses agree with the scalar definitions") {
    CounterRng rng = CounterRng::derive(31, 0xAB);
    for (int trial = 0; trial < 20; ++trial) {
        float l0 = rng.uniform(-4.0f, 4.0f), l1 = rng.uniform(-4.0f, 4.0f);
        int y = trial % 2;
        Tensor logits({2}, {l0, l1});
        Tensor map({2, 3});
        for (auto& v : map.data) v = rng.uniform(0.05f, 0.95f);

        double z0 = std::exp(static_cast<double>(l0)), z1 = std::exp(static_cast<double>(l1));
        double p = z1 / (z0 + z1);

        CHECK_THAT(ce_global_term(constant(logits), y)->value[0],
                   WithinAbs(ce_global({p}, {y}), 1e-4));
        CHECK_THAT(ce_local_term(constant(map), y)->value[0],
                   WithinAbs(ce_local({map}, {y}), 1e-5));
        auto ms = mse_losses({{1.0 - p, p}}, {map}, {y});
        CHECK_THAT(mse_global_term(constant(logits), y)->value[0],
                   WithinAbs(ms.global, 1e-5));
        CHECK_THAT(mse_local_term(constant(map), y)->value[0],
                   WithinAbs(ms.local, 1e-5));
        float lambda = rng.uniform(0.0f, 1.0f);
        auto ev = evidential_loss({{l0, l1}}, {y}, lambda);
        CHECK_THAT(ul_global_term(constant(logits), y, lambda)->value[0],
                   WithinAbs(ev.ul_global, 2e-4));
    }
}

TEST_CASE("graph loss gradients match finite differences") {
    CounterRng rng = CounterRng::derive(77, 0xCD);
    auto check_logit_loss = [&](auto build, auto eval_d) {
        for (int trial = 0; trial < 10; ++trial) {
            float l0 = rng.uniform(-3.0f, 3.0f), l1 = rng.uniform(-3.0f, 3.0f);
            int y = trial % 2;
            Var x = leaf(Tensor({2}, {l0, l1}), true);
            Var loss = build(x, y);
            backward(loss);
            auto res = testing::finite_diff_check(
                {&x->value}, {&x->grad},
                [&]() {
                    return eval_d(static_cast<double>(x->value[0]),
                                  static_cast<double>(x->value[1]), y);
                },
                1e-3);
            CHECK(res.max_rel_err < 2e-2);
        }
    };

    SECTION("global cross entropy") {
        check_logit_loss(
            [](const Var& x, int y) { return ce_global_term(x, y); },
            [](double a, double b, int y) {
                double p = std::exp(b) / (std::exp(a) + std::exp(b));
                return ref_ce(p, y);
            });
    }
    SECTION("global squared error") {
        check_logit_loss(
            [](const Var& x, int y) { return mse_global_term(x, y); },
            [](double a, double b, int y) {
                double p = std::exp(b) / (std::exp(a) + std::exp(b));
                double t1 = y, t0 = 1.0 - t1;
                return (((1.0 - p) - t0) * ((1.0 - p) - t0) + (p - t1) * (p - t1)) / 2.0;
            });
    }
    SECTION("uncertainty loss with the KL term") {
        check_logit_loss(
            [](const Var& x, int y) { return ul_global_term(x, y, 0.7f); },
            [](double a, double b, int y) {
                return evidential_loss({{a, b}}, {y}, 0.7).ul_global;
            });
    }
    SECTION("local heads") {
        for (int y : {0, 1}) {
            Tensor map({2, 2});
            for (auto& v : map.data) v = rng.uniform(0.1f, 0.9f);
            Var x = leaf(map, true);
            Var loss = ce_local_term(x, y);
            backward(loss);
            auto res = testing::finite_diff_check(
                {&x->value}, {&x->grad},
                [&]() { return ce_local({x->value}, {y}); }, 1e-3);
            CHECK(res.max_rel_err < 1e-2);

            Var x2 = leaf(map, true);
            Var loss2 = mse_local_term(x2, y);
            backward(loss2);
            auto res2 = testing::finite_diff_check(
                {&x2->value}, {&x2->grad},
                [&]() { return mse_losses({{0.5, 0.5}}, {x2->value}, {y}).local; },
                1e-3);
            CHECK(res2.max_rel_err < 1e-2);
        }
    }
}

TEST_CASE("combined losses compose as documented") {
    CHECK(ul_combined(0.6, 0.2) == 0.8);
    auto ms = mse_losses({{0.3, 0.7}}, {const_map({1, 2}, 0.5f)}, {1});
    CHECK_THAT(ms.combined, WithinAbs(ms.global + ms.local, 1e-12));
}
