#pragma once

// Training objectives. Each loss exists twice: a graph builder used by the
// trainer (autodiff, float) and a plain double-precision function used for
// evaluation and as a cross-check in tests.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "certwatch/autodiff.hpp"
#include "certwatch/detector.hpp"
#include "certwatch/gamma.hpp"

namespace certwatch {

inline constexpr double kProbClamp = 1e-7;
inline constexpr float kSmoothCheat = 0.9f;
inline constexpr float kSmoothClean = 0.1f;

struct LossBreakdown {
    double global = 0.0;
    double local = 0.0;
    double combined = 0.0;
    double kl_term = 0.0;
};

namespace detail {
inline double clamp_p(double p) {
    return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}
} // namespace detail

// ---- scalar (double) forms ---------------------------------------------

// -(1/N) sum y log p + (1-y) log(1-p)
inline double ce_global(const std::vector<double>& p, const std::vector<int>& y) {
    if (p.empty() || p.size() != y.size())
        throw std::invalid_argument("ce_global: empty or mismatched batch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double pc = detail::clamp_p(p[i]);
        s += y[i] ? std::log(pc) : std::log(1.0 - pc);
    }
    return -s / static_cast<double>(p.size());
}

// Per-cell cross entropy against the smoothed frame label, averaged over
// cells then frames.
inline double ce_local(const std::vector<Tensor>& maps, const std::vector<int>& y) {
    if (maps.empty() || maps.size() != y.size())
        throw std::invalid_argument("ce_local: empty or mismatched batch");
    double total = 0.0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (maps[i].numel() == 0) throw std::invalid_argument("ce_local: empty map");
        double ys = y[i] ? kSmoothCheat : kSmoothClean;
        double s = 0.0;
        for (float xf : maps[i].data) {
            double x = detail::clamp_p(xf);
            s += ys * std::log(x) + (1.0 - ys) * std::log(1.0 - x);
        }
        total += -s / maps[i].numel();
    }
    return total / static_cast<double>(maps.size());
}

inline double ce_combined(double global, double local) {
    return 0.5 * (global + local);
}

struct MseLosses {
    double global, local, combined;
};

// Global: softmax probabilities against the one-hot label. Local: per-cell
// map against the smoothed label.
inline MseLosses mse_losses(const std::vector<std::pair<double, double>>& probs,
                            const std::vector<Tensor>& maps,
                            const std::vector<int>& y) {
    if (probs.empty() || probs.size() != y.size() || maps.size() != y.size())
        throw std::invalid_argument("mse_losses: empty or mismatched batch");
    double g = 0.0, l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double t1 = y[i] ? 1.0 : 0.0;
        double d0 = probs[i].first - (1.0 - t1);
        double d1 = probs[i].second - t1;
        g += (d0 * d0 + d1 * d1) / 2.0;
        double ys = y[i] ? kSmoothCheat : kSmoothClean;
        double s = 0.0;
        for (float xf : maps[i].data) {
            double d = xf - ys;
            s += d * d;
        }
        l += s / maps[i].numel();
    }
    g /= static_cast<double>(y.size());
    l /= static_cast<double>(y.size());
    return {g, l, g + l};
}

// KL( Dirichlet(alpha) || Dirichlet(1,1) ) for two classes.
inline double dirichlet_kl_to_uniform(double a0, double a1) {
    double s = a0 + a1;
    return lgamma_lanczos(s) - lgamma_lanczos(a0) - lgamma_lanczos(a1) +
           (a0 - 1.0) * (digamma(a0) - digamma(s)) +
           (a1 - 1.0) * (digamma(a1) - digamma(s));
}

struct EvidentialLoss {
    double ul_global; // includes the ramped KL contribution
    double kl_term;
};

// Evidence-MSE uncertainty loss: sum_j (y_j - p^_j)^2 + p^_j(1-p^_j)/(S+1),
// plus lambda * KL(Dirichlet(y + (1-y) alpha) || Dirichlet(1)); batch mean.
inline EvidentialLoss evidential_loss(const std::vector<std::pair<double, double>>& logits,
                                      const std::vector<int>& y, double lambda) {
    if (logits.empty() || logits.size() != y.size())
        throw std::invalid_argument("evidential_loss: empty or mismatched batch");
    double total = 0.0, total_kl = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double l0 = logits[i].first, l1 = logits[i].second;
        if (!std::isfinite(l0) || !std::isfinite(l1))
            throw std::invalid_argument("evidential_loss: non-finite logits");
        auto cl = [](double v) { return std::min<double>(kLogitClamp, std::max<double>(-kLogitClamp, v)); };
        double a0 = 1.0 + std::exp(cl(l0));
        double a1 = 1.0 + std::exp(cl(l1));
        double S = a0 + a1;
        double p0 = a0 / S, p1 = a1 / S;
        double y1 = y[i] ? 1.0 : 0.0, y0 = 1.0 - y1;
        double mse = (y0 - p0) * (y0 - p0) + (y1 - p1) * (y1 - p1);
        double var = p0 * (1.0 - p0) / (S + 1.0) + p1 * (1.0 - p1) / (S + 1.0);
        double at0 = y0 + (1.0 - y0) * a0;
        double at1 = y1 + (1.0 - y1) * a1;
        double kl = dirichlet_kl_to_uniform(at0, at1);
        total += mse + var + lambda * kl;
        total_kl += kl;
    }
    double n = static_cast<double>(y.size());
    return {total / n, total_kl / n};
}

inline double ul_combined(double ul_global, double mse_local) {
    return ul_global + mse_local;
}

// ---- graph (training) forms ----------------------------------------------

// Cross entropy of the cheat probability from the softmax head; logits [2].
inline Var ce_global_term(const Var& logits, int y) {
    Var p = clamp_v(softmax(logits), static_cast<float>(kProbClamp),
                    1.0f - static_cast<float>(kProbClamp));
    Var pc = select(p, 1);
    return y ? neg(log_v(pc)) : neg(log_v(cadd(neg(pc), 1.0f)));
}

inline Var ce_local_term(const Var& local_map, int y) {
    float ys = y ? kSmoothCheat : kSmoothClean;
    Var x = clamp_v(local_map, static_cast<float>(kProbClamp),
                    1.0f - static_cast<float>(kProbClamp));
    Var term = add(cmul(log_v(x), ys), cmul(log_v(cadd(neg(x), 1.0f)), 1.0f - ys));
    return neg(mean(term));
}

inline Var mse_global_term(const Var& logits, int y) {
    Var p = softmax(logits);
    Tensor target({2});
    target[y ? 1 : 0] = 1.0f;
    Var d = sub(p, constant(target));
    return mean(mul(d, d));
}

inline Var mse_local_term(const Var& local_map, int y) {
    float ys = y ? kSmoothCheat : kSmoothClean;
    Var d = cadd(local_map, -ys);
    return mean(mul(d, d));
}

// Evidence-MSE uncertainty loss on the raw logits of one frame.
inline Var ul_global_term(const Var& logits, int y, float lambda) {
    Var e = exp_v(clamp_v(logits, -kLogitClamp, kLogitClamp));
    Var alpha = cadd(e, 1.0f);
    Var S = sum(alpha);
    Var phat = scale(alpha, reciprocal(S));
    Tensor target({2});
    target[y ? 1 : 0] = 1.0f;
    Var d = sub(constant(target), phat);
    Var mse = sum(mul(d, d));
    Var var = scale(sum(mul(phat, cadd(neg(phat), 1.0f))), reciprocal(cadd(S, 1.0f)));
    Var loss = add(mse, var);
    if (lambda > 0.0f) {
        // alpha~ = y + (1-y) . alpha : the true class contributes no evidence
        Var a_true = constant(1.0f);
        Var a_other = select(alpha, y ? 0 : 1);
        Var at = y ? stack_scalars({a_other, a_true}) : stack_scalars({a_true, a_other});
        Var St = sum(at);
        Var dS = digamma_v(St);
        Var dterm = sum(mul(cadd(at, -1.0f), sub(digamma_v(at), stack_scalars({dS, dS}))));
        Var kl = add(sub(lgamma_v(St), sum(lgamma_v(at))), dterm);
        loss = add(loss, cmul(kl, lambda));
    }
    return loss;
}

} // namespace certwatch
