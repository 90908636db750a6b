#pragma once

// Prediction confidence: dropout variation ratio, evidential uncertainty,
// the confident gate, likelihood-ratio baselines and the drift verdict.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "certwatch/detector.hpp"

namespace certwatch {

struct VariationRatio {
    float vr = 0.0f;
    int T = 0;
    int f_x = 0;
    int c_star = 0;
};

inline float vr_from_counts(int f_x, int T) {
    if (T < 1) throw std::invalid_argument("variation ratio: T must be >= 1");
    if (f_x < 0 || f_x > T) throw std::invalid_argument("variation ratio: bad modal count");
    return 1.0f - static_cast<float>(f_x) / static_cast<float>(T);
}

// T stochastic dropout passes over the same frame. Dropout sits after the
// reduction, so the trunk runs once and only the small head is resampled.
inline VariationRatio variation_ratio(const DetectorModel& model, const Tensor& frame,
                                      int T, float dropout_p, std::uint64_t rng_seed) {
    if (T < 1) throw std::invalid_argument("variation ratio: T must be >= 1");
    Var reduced = constant(model.reduce(model.trunk(constant(frame)))->value);
    int votes1 = 0;
    for (int t = 0; t < T; ++t) {
        CounterRng rng = CounterRng::derive(rng_seed, 0x56720000u + static_cast<std::uint64_t>(t));
        Var logits = model.global_logits(reduced, dropout_p, true, rng);
        if (logits->value[1] > logits->value[0]) ++votes1;
    }
    VariationRatio out;
    out.T = T;
    out.c_star = votes1 * 2 > T ? 1 : 0;
    out.f_x = out.c_star ? votes1 : T - votes1;
    out.vr = vr_from_counts(out.f_x, T);
    return out;
}

// Eq. aliases: evidence e, Dirichlet alpha, belief masses and uncertainty
// all come from the same logit transform as the evidential head.
inline Evidential evidence_belief_uncertainty(float l0, float l1) {
    if (!std::isfinite(l0) || !std::isfinite(l1))
        throw std::invalid_argument("evidence: non-finite logits");
    return evidential_from_logits(l0, l1);
}

inline double likelihood_ratio(double a0, double a1) {
    if (a0 <= 0.0 || a1 <= 0.0)
        throw std::invalid_argument("likelihood ratio: alphas must be positive");
    return a0 > a1 ? a0 / a1 : a1 / a0;
}

struct ConfidenceReport {
    float vr = 0.0f;
    int T = 0;
    int f_x = 0;
    int c_star = 0;
    float u = 0.0f;
    float b0 = 0.0f, b1 = 0.0f;
};

inline ConfidenceReport assess_confidence(const DetectorModel& model, const Tensor& frame,
                                          int T, float dropout_p, std::uint64_t rng_seed) {
    VariationRatio vr = variation_ratio(model, frame, T, dropout_p, rng_seed);
    DetectorOutput det = model.forward(frame, false, rng_seed);
    Evidential ev = evidence_belief_uncertainty(det.l0, det.l1);
    ConfidenceReport r;
    r.vr = vr.vr;
    r.T = vr.T;
    r.f_x = vr.f_x;
    r.c_star = vr.c_star;
    r.u = ev.u;
    r.b0 = ev.b0;
    r.b1 = ev.b1;
    return r;
}

// A detection only counts when every stochastic pass agrees and the
// evidential uncertainty stays strictly under the threshold.
inline bool confident_gate(const ConfidenceReport& r, float u_max) {
    return r.vr == 0.0f && r.u < u_max;
}

inline constexpr float kDefaultUMax = 0.5f;
inline constexpr int kDefaultVrPasses = 64;

// ---- likelihood-ratio baselines and the retrain verdict -------------------

struct LRBaselines {
    double lr_total = 0.0;
    double lr_pos = 0.0; // over frames the model itself flags as cheats
    double lr_neg = 0.0;
    int n_total = 0, n_pos = 0, n_neg = 0;
    std::string source; // "train" or "field"
};

// Fold per-frame (LR, predicted-positive) pairs into subset means.
inline LRBaselines accumulate_lr_baselines(const std::vector<std::pair<double, bool>>& frames,
                                           const std::string& source) {
    if (frames.empty())
        throw std::invalid_argument("lr baselines: empty frame set");
    LRBaselines b;
    b.source = source;
    double st = 0, sp = 0, sn = 0;
    for (auto& [lr, positive] : frames) {
        st += lr;
        ++b.n_total;
        if (positive) {
            sp += lr;
            ++b.n_pos;
        } else {
            sn += lr;
            ++b.n_neg;
        }
    }
    b.lr_total = st / b.n_total;
    if (b.n_pos) b.lr_pos = sp / b.n_pos;
    if (b.n_neg) b.lr_neg = sn / b.n_neg;
    return b;
}

// Label-free: uses the model's own predictions to split positives/negatives.
inline LRBaselines compute_lr_baselines(const DetectorModel& model,
                                        const std::vector<Tensor>& frames,
                                        const std::string& source) {
    if (frames.empty())
        throw std::invalid_argument("lr baselines: empty frame set");
    std::vector<std::pair<double, bool>> per_frame;
    per_frame.reserve(frames.size());
    for (const Tensor& f : frames) {
        DetectorOutput out = model.forward(f, false, 0);
        Evidential ev = evidence_belief_uncertainty(out.l0, out.l1);
        per_frame.emplace_back(likelihood_ratio(ev.a0, ev.a1), out.l1 > out.l0);
    }
    return accumulate_lr_baselines(per_frame, source);
}

struct DriftVerdict {
    double ratio_total = std::numeric_limits<double>::quiet_NaN();
    double ratio_pos = std::numeric_limits<double>::quiet_NaN();
    double ratio_neg = std::numeric_limits<double>::quiet_NaN();
    double threshold = 0.5;
    bool retrain = false;
};

// A subset ratio is train-LR over field-LR; the model needs retraining when
// any available ratio drops under the threshold (field LR blew up by 2x).
inline DriftVerdict drift_check(const LRBaselines& train, const LRBaselines& field,
                                double threshold = 0.5) {
    if (field.n_total == 0 || train.n_total == 0)
        throw std::invalid_argument("drift check: baselines computed over zero frames");
    DriftVerdict v;
    v.threshold = threshold;
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](double t, double f, int nt, int nf, double& slot) {
        if (nt == 0 || nf == 0) return;
        slot = t / f;
        best = std::min(best, slot);
    };
    consider(train.lr_total, field.lr_total, train.n_total, field.n_total, v.ratio_total);
    consider(train.lr_pos, field.lr_pos, train.n_pos, field.n_pos, v.ratio_pos);
    consider(train.lr_neg, field.lr_neg, train.n_neg, field.n_neg, v.ratio_neg);
    v.retrain = best < threshold;
    return v;
}

} // namespace certwatch
