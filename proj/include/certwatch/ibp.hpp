#pragma once

// Certified robustness: interval propagation wrappers, worst-case losses,
// the certified fraction, and the training curriculum.

#include <stdexcept>
#include <vector>

#include "certwatch/detector.hpp"

namespace certwatch {

enum class IBPMode { TwoSided, OneSided };

inline const char* to_string(IBPMode m) {
    return m == IBPMode::TwoSided ? "ibp_two_sided" : "ibp_one_sided";
}

struct IntervalForward {
    Tensor logit_lo, logit_hi; // [2]
    Tensor local_lo, local_hi; // [H', W']
};

// [x.W + b] over the box [lo, hi], center-radius form. Exposed separately so
// the arithmetic is testable on hand-sized cases.
inline std::pair<Tensor, Tensor> interval_affine(const Tensor& lo, const Tensor& hi,
                                                 const Tensor& W, const Tensor& b) {
    if (lo.shape != hi.shape)
        throw std::invalid_argument("interval_affine: bound shapes differ");
    if (W.rank() != 2 || lo.numel() != W.shape[0] || b.numel() != W.shape[1])
        throw std::invalid_argument("interval_affine: dimension mismatch");
    const int n = W.shape[0], m = W.shape[1];
    Tensor out_lo({m}), out_hi({m});
    for (int j = 0; j < m; ++j) {
        float c = b[j], r = 0.0f;
        for (int i = 0; i < n; ++i) {
            float w = W.data[static_cast<std::size_t>(i) * m + j];
            float mu = 0.5f * (lo[i] + hi[i]);
            float rad = 0.5f * (hi[i] - lo[i]);
            c += w * mu;
            r += std::fabs(w) * rad;
        }
        out_lo[j] = c - r;
        out_hi[j] = c + r;
    }
    return {out_lo, out_hi};
}

inline IntervalForward interval_forward(const DetectorModel& model,
                                        const Tensor& frame, float eps) {
    auto g = model.interval_graph(frame, eps);
    return {g.logit_lo->value, g.logit_hi->value, g.local_lo->value, g.local_hi->value};
}

// The true class takes its lower bound, the other class its upper bound.
// One-sided mode applies this only to cheat frames and otherwise returns the
// interval centers.
inline std::pair<float, float> worst_case_logits(float l0_lo, float l0_hi,
                                                 float l1_lo, float l1_hi,
                                                 int true_class, IBPMode mode) {
    if (l0_lo > l0_hi || l1_lo > l1_hi)
        throw std::invalid_argument("worst_case_logits: inverted interval");
    if (mode == IBPMode::OneSided && true_class == 0)
        return {0.5f * (l0_lo + l0_hi), 0.5f * (l1_lo + l1_hi)};
    return true_class == 1 ? std::pair{l0_hi, l1_lo} : std::pair{l0_lo, l1_hi};
}

inline std::pair<float, float> worst_case_logits(const IntervalForward& iv,
                                                 int true_class, IBPMode mode) {
    return worst_case_logits(iv.logit_lo[0], iv.logit_hi[0],
                             iv.logit_lo[1], iv.logit_hi[1], true_class, mode);
}

// Differentiable version for training.
inline Var worst_case_logits_graph(const DetectorModel::IntervalGraph& g,
                                   int true_class, IBPMode mode) {
    if (mode == IBPMode::OneSided && true_class == 0)
        return cmul(add(g.logit_lo, g.logit_hi), 0.5f);
    if (true_class == 1)
        return stack_scalars({select(g.logit_hi, 0), select(g.logit_lo, 1)});
    return stack_scalars({select(g.logit_lo, 0), select(g.logit_hi, 1)});
}

// Worst-case local map: cheat cells are pushed to their lower bound, clean
// cells to their upper bound.
inline Var worst_case_local_graph(const DetectorModel::IntervalGraph& g, int true_class) {
    return true_class == 1 ? g.local_lo : g.local_hi;
}

inline double ibp_training_loss(double clean_loss, double worst_loss, double ibp_weight) {
    if (ibp_weight < 0.0 || ibp_weight > 1.0)
        throw std::invalid_argument("ibp_training_loss: weight outside [0,1]");
    return (1.0 - ibp_weight) * clean_loss + ibp_weight * worst_loss;
}

inline Var ibp_training_loss(const Var& clean_loss, const Var& worst_loss, float ibp_weight) {
    if (ibp_weight < 0.0f || ibp_weight > 1.0f)
        throw std::invalid_argument("ibp_training_loss: weight outside [0,1]");
    return add(cmul(clean_loss, 1.0f - ibp_weight), cmul(worst_loss, ibp_weight));
}

// Fraction of ground-truth cheat frames whose worst-case logits still say
// cheat. A guaranteed lower bound on TP_attack/TP for any attack of L-inf
// radius <= eps.
inline double certified_fraction(const DetectorModel& model,
                                 const std::vector<Tensor>& cheat_frames, float eps) {
    if (cheat_frames.empty())
        throw std::invalid_argument("certified_fraction: empty frame set");
    int certified = 0;
    for (const Tensor& f : cheat_frames) {
        auto iv = interval_forward(model, f, eps);
        auto [l0, l1] = worst_case_logits(iv, 1, IBPMode::TwoSided);
        if (l1 > l0) ++certified;
    }
    return static_cast<double>(certified) / static_cast<double>(cheat_frames.size());
}

struct CurriculumState {
    int epoch = 0;
    double kl_weight = 0.0;
    double ibp_weight = 0.0;
    double eps = 1e-8;
    double lr = 1e-4;
};

// Piecewise-linear curriculum. The reference run is 1000 epochs: KL weight
// 0->1 over [0,150], IBP weight 0->0.5 over [200,300], eps 1e-8->0.025 over
// [250,500]. Shorter runs compress every breakpoint proportionally.
inline CurriculumState schedule(int epoch, int total_epochs = 1000) {
    if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs)
        throw std::invalid_argument("schedule: epoch outside [0, total_epochs)");
    const double s = static_cast<double>(total_epochs) / 1000.0;
    const double e = static_cast<double>(epoch);
    auto ramp = [&](double from, double to, double lo_val, double hi_val) {
        double a = from * s, b = to * s;
        if (e <= a) return lo_val;
        if (e >= b) return hi_val;
        return lo_val + (hi_val - lo_val) * (e - a) / (b - a);
    };
    CurriculumState st;
    st.epoch = epoch;
    st.kl_weight = ramp(0, 150, 0.0, 1.0);
    st.ibp_weight = ramp(200, 300, 0.0, 0.5);
    st.eps = ramp(250, 500, 1e-8, 0.025);
    st.lr = 1e-4;
    return st;
}

} // namespace certwatch
