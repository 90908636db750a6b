#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "certwatch/datagen.hpp"
#include "certwatch/haarpsi.hpp"
#include "certwatch/metrics.hpp"
#include "certwatch/rng.hpp"

using namespace certwatch;
using Catch::Matchers::WithinAbs;

TEST_CASE("confusion tabulation routes by the gate flag") {
    SECTION("a perfect confident run") {
        std::vector<Prediction> preds{{true, true}, {false, true}, {true, true}, {false, true}};
        std::vector<int> labels{1, 0, 1, 0};
        ConfusionTable t = tabulate(preds, labels);
        CHECK(t.confident.tp == 2);
        CHECK(t.confident.tn == 2);
        CHECK(t.confident.fn == 0);
        CHECK(t.confident.fp == 0);
        CHECK(t.non_confident.total() == 0);
    }
    SECTION("a correct but unsure detection lands in the other block") {
        ConfusionTable t = tabulate({{true, false}}, {1});
        CHECK(t.non_confident.tp == 1);
        CHECK(t.confident.total() == 0);
    }
    SECTION("cells always partition the evaluation set") {
        CounterRng rng = CounterRng::derive(5, 0x7AB);
        std::vector<Prediction> preds;
        std::vector<int> labels;
        for (int i = 0; i < 200; ++i) {
            preds.push_back({rng.next_u64() & 1ull ? true : false,
                             rng.next_u64() & 1ull ? true : false});
            labels.push_back(static_cast<int>(rng.next_u64() & 1ull));
        }
        ConfusionTable t = tabulate(preds, labels);
        CHECK(t.total() == 200);
    }
    SECTION("length mismatch is rejected") {
        CHECK_THROWS(tabulate({{true, true}}, {1, 0}));
    }
}

TEST_CASE("derived metrics reproduce published arithmetic") {
    SECTION("counts 434/1056/96/1394") {
        ConfusionTable t;
        t.confident = {434, 1056, 96, 1394};
        MetricSet m = derive_metrics(t);
        REQUIRE(m.sensitivity.has_value());
        REQUIRE(m.precision.has_value());
        REQUIRE(m.accuracy.has_value());
        CHECK_THAT(*m.sensitivity, WithinAbs(0.2913, 5e-5));
        CHECK_THAT(*m.precision, WithinAbs(0.8189, 5e-5));
        CHECK_THAT(*m.accuracy, WithinAbs(0.6134, 5e-5));
    }
    SECTION("a zero-false-positive regime has perfect precision") {
        ConfusionTable t;
        t.confident = {519, 752, 0, 1457};
        MetricSet m = derive_metrics(t);
        CHECK(*m.precision == 1.0);
        CHECK(is_deployable(t));
    }
    SECTION("empty denominators yield absent values") {
        ConfusionTable t;
        t.confident = {0, 0, 0, 10};
        MetricSet m = derive_metrics(t);
        CHECK_FALSE(m.sensitivity.has_value());
        CHECK_FALSE(m.precision.has_value());
        CHECK(m.accuracy.has_value());
    }
    SECTION("deployable needs zero FP or precision at the bar") {
        ConfusionTable ok;
        ok.confident = {96, 4, 4, 96}; // precision 0.96
        CHECK(is_deployable(ok));
        ConfusionTable bad;
        bad.confident = {90, 10, 10, 90}; // precision 0.9
        CHECK_FALSE(is_deployable(bad));
    }
}

namespace {

Tensor test_image(std::uint64_t seed) {
    SceneSpec spec;
    spec.width = 64;
    spec.height = 36;
    spec.rng_seed = seed;
    return render_scene(spec).image;
}

Tensor add_noise(const Tensor& img, float amplitude, std::uint64_t seed) {
    CounterRng rng = CounterRng::derive(seed, 0x401);
    Tensor out = img;
    for (auto& v : out.data)
        v = std::min(1.0f, std::max(0.0f, v + rng.uniform(-amplitude, amplitude)));
    return out;
}

} // namespace

TEST_CASE("perceptual similarity") {
    SECTION("identity scores one") {
        for (std::uint64_t s = 0; s < 3; ++s) {
            Tensor img = test_image(s);
            CHECK_THAT(haarpsi(img, img), WithinAbs(1.0, 1e-6));
        }
    }
    SECTION("noise degrades the score monotonically") {
        for (std::uint64_t s = 0; s < 10; ++s) {
            Tensor img = test_image(100 + s);
            double clean = haarpsi(img, img);
            double light = haarpsi(img, add_noise(img, 0.0125f, s));
            double mid = haarpsi(img, add_noise(img, 0.05f, s));
            double heavy = haarpsi(img, add_noise(img, 0.125f, s));
            CHECK(clean > light);
            CHECK(light > mid);
            CHECK(mid > heavy);
            for (double v : {light, mid, heavy}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
    SECTION("approximately symmetric under argument swap") {
        for (std::uint64_t s = 0; s < 5; ++s) {
            Tensor img = test_image(200 + s);
            Tensor noisy = add_noise(img, 0.05f, s);
            CHECK(std::fabs(haarpsi(img, noisy) - haarpsi(noisy, img)) < 1e-3);
        }
    }
    SECTION("dimension mismatch is rejected") {
        CHECK_THROWS(haarpsi(test_image(1), Tensor({3, 36, 63})));
        CHECK_THROWS(haarpsi(Tensor({1, 36, 64}), Tensor({1, 36, 64})));
    }
}
