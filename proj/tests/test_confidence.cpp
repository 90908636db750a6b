#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "certwatch/confidence.hpp"

using namespace certwatch;
using Catch::Matchers::WithinAbs;

namespace {

Tensor random_frame(std::uint64_t seed) {
    CounterRng rng = CounterRng::derive(seed, 0xF4A3E);
    Tensor t({3, 36, 64});
    for (auto& v : t.data) v = rng.next_float();
    return t;
}

DetectorConfig small_config() {
    DetectorConfig cfg;
    cfg.input_height = 36;
    cfg.input_width = 64;
    return cfg;
}

LRBaselines baselines_with(double total, double pos, double neg,
                           const std::string& source) {
    LRBaselines b;
    b.lr_total = total;
    b.lr_pos = pos;
    b.lr_neg = neg;
    b.n_total = 10;
    b.n_pos = 5;
    b.n_neg = 5;
    b.source = source;
    return b;
}

} // namespace

TEST_CASE("variation ratio arithmetic") {
    CHECK(vr_from_counts(64, 64) == 0.0f);
    CHECK(vr_from_counts(40, 64) == 0.375f);
    CHECK(vr_from_counts(32, 64) == 0.5f);
    CHECK_THROWS(vr_from_counts(1, 0));
    CHECK_THROWS(vr_from_counts(-1, 64));
}

TEST_CASE("variation ratio over stochastic passes") {
    DetectorModel m(small_config(), 19);
    Tensor frame = random_frame(4);

    SECTION("zero dropout means a deterministic vote") {
        auto r = variation_ratio(m, frame, 64, 0.0f, 1);
        CHECK(r.vr == 0.0f);
        CHECK(r.f_x == 64);
    }
    SECTION("bounded, deterministic in the seed, modal class dominates") {
        auto a = variation_ratio(m, frame, 64, 0.5f, 7);
        auto b = variation_ratio(m, frame, 64, 0.5f, 7);
        CHECK(a.vr == b.vr);
        CHECK(a.f_x == b.f_x);
        CHECK(a.c_star == b.c_star);
        CHECK(a.vr >= 0.0f);
        CHECK(a.vr <= 0.5f);
        CHECK(a.f_x * 2 >= a.T);
    }
    SECTION("T must be positive") {
        CHECK_THROWS(variation_ratio(m, frame, 0, 0.15f, 1));
    }
}

TEST_CASE("evidence, belief and uncertainty from logits") {
    Evidential e = evidence_belief_uncertainty(0.0f, 0.0f);
    CHECK(e.e0 == 1.0f);
    CHECK(e.e1 == 1.0f);
    CHECK(e.a0 == 2.0f);
    CHECK(e.a1 == 2.0f);
    CHECK(e.b0 == 0.25f);
    CHECK(e.b1 == 0.25f);
    CHECK(e.u == 0.5f);

    Evidential big = evidence_belief_uncertainty(-3.0f, 1e9f);
    CHECK_THAT(big.u, WithinAbs(2.0 / (2.0 + std::exp(15.0) + std::exp(-3.0)), 1e-9));
    CHECK(big.u < 1e-6);
    CHECK(big.b1 > 0.999f);

    CounterRng rng = CounterRng::derive(3, 0x77);
    for (int i = 0; i < 30; ++i) {
        Evidential ev = evidence_belief_uncertainty(rng.uniform(-10.0f, 10.0f),
                                                    rng.uniform(-10.0f, 10.0f));
        CHECK_THAT(ev.b0 + ev.b1 + ev.u, WithinAbs(1.0, 1e-6));
        CHECK(ev.u > 0.0f);
        CHECK(ev.u < 1.0f);
    }
    CHECK_THROWS(evidence_belief_uncertainty(std::nanf(""), 0.0f));
}

TEST_CASE("likelihood ratio") {
    CHECK(likelihood_ratio(2.0, 2.0) == 1.0);
    double a = 1.0 + std::exp(2.0);
    CHECK_THAT(likelihood_ratio(a, 2.0), WithinAbs(4.1945, 5e-4));
    CHECK(likelihood_ratio(a, 2.0) == likelihood_ratio(2.0, a));
    for (double x : {1.0, 1.7, 42.0})
        CHECK(likelihood_ratio(x, 3.3) >= 1.0);
    CHECK_THROWS(likelihood_ratio(0.0, 1.0));
}

TEST_CASE("confident gate") {
    ConfidenceReport r;
    r.vr = 0.0f;
    r.u = 0.1f;
    CHECK(confident_gate(r, 0.5f));
    r.vr = 0.375f;
    r.u = 0.0f;
    CHECK_FALSE(confident_gate(r, 0.5f));
    r.vr = 0.0f;
    r.u = 0.5f;
    CHECK_FALSE(confident_gate(r, 0.5f)); // strict inequality at the threshold
}

TEST_CASE("confidence report combines both signals") {
    DetectorModel m(small_config(), 8);
    Tensor frame = random_frame(9);
    ConfidenceReport r = assess_confidence(m, frame, 16, 0.15f, 3);
    CHECK(r.T == 16);
    CHECK_THAT(r.b0 + r.b1 + r.u, WithinAbs(1.0, 1e-6));
    CHECK(r.vr >= 0.0f);
    CHECK(r.vr <= 0.5f);
}

TEST_CASE("likelihood-ratio baselines") {
    SECTION("hand-worked means") {
        auto b = accumulate_lr_baselines({{1.0, true}, {3.0, false}}, "train");
        CHECK(b.lr_total == 2.0);
        CHECK(b.lr_pos == 1.0);
        CHECK(b.lr_neg == 3.0);
        CHECK(b.n_pos == 1);
        CHECK(b.n_neg == 1);
    }
    SECTION("one-sided prediction leaves a subset absent") {
        auto b = accumulate_lr_baselines({{1.5, true}, {2.5, true}}, "field");
        CHECK(b.n_neg == 0);
        CHECK(b.lr_neg == 0.0);
        CHECK(b.lr_pos == 2.0);
    }
    SECTION("rejects an empty window") {
        CHECK_THROWS(accumulate_lr_baselines({}, "field"));
        DetectorModel m(small_config(), 2);
        CHECK_THROWS(compute_lr_baselines(m, {}, "field"));
    }
    SECTION("model-driven baselines are deterministic and >= 1") {
        DetectorModel m(small_config(), 2);
        std::vector<Tensor> frames{random_frame(1), random_frame(2), random_frame(3)};
        auto a = compute_lr_baselines(m, frames, "train");
        auto b = compute_lr_baselines(m, frames, "train");
        CHECK(a.lr_total == b.lr_total);
        CHECK(a.lr_total >= 1.0);
        CHECK(a.n_total == 3);
        CHECK(a.n_pos + a.n_neg == 3);
    }
}

TEST_CASE("drift verdict follows the minimum train/field ratio") {
    auto train = baselines_with(1.0, 1.0, 1.0, "train");

    SECTION("stable field keeps the model") {
        auto v = drift_check(train, baselines_with(1.0 / 1.04, 1.0 / 1.04, 1.0 / 1.16, "field"));
        CHECK_THAT(v.ratio_total, WithinAbs(1.04, 1e-9));
        CHECK_THAT(v.ratio_pos, WithinAbs(1.04, 1e-9));
        CHECK_THAT(v.ratio_neg, WithinAbs(1.16, 1e-9));
        CHECK_FALSE(v.retrain);
    }
    SECTION("a collapsed ratio forces retraining") {
        auto v = drift_check(train, baselines_with(1.0 / 0.14, 1.0 / 0.74, 1.0 / 1.15, "field"));
        CHECK_THAT(v.ratio_total, WithinAbs(0.14, 1e-9));
        CHECK(v.retrain);
    }
    SECTION("exactly at the threshold stays in service") {
        auto v = drift_check(train, baselines_with(1.0 / 0.52, 1.0 / 0.76, 1.0 / 1.01, "field"));
        CHECK_THAT(v.ratio_total, WithinAbs(0.52, 1e-9));
        CHECK_FALSE(v.retrain);
    }
    SECTION("growing field LR can only push toward retraining") {
        // raising one field LR lowers its ratio and leaves the others alone
        for (double bump : {1.1, 2.0, 4.0, 8.0}) {
            auto before = drift_check(train, baselines_with(1.0, 1.0, 1.0, "field"));
            auto after = drift_check(train, baselines_with(bump, 1.0, 1.0, "field"));
            CHECK(after.ratio_total <= before.ratio_total);
            if (before.retrain) CHECK(after.retrain);
        }
    }
    SECTION("absent subsets are excluded from the minimum") {
        auto field = baselines_with(1.0, 1.0, 0.0, "field");
        field.n_neg = 0;
        auto v = drift_check(train, field);
        CHECK(std::isnan(v.ratio_neg));
        CHECK_FALSE(v.retrain);
    }
    SECTION("empty baselines are rejected") {
        LRBaselines empty;
        CHECK_THROWS(drift_check(train, empty));
    }
}
