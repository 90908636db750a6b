#pragma once

// White-box evasion attacks against the global head: FGSM, PGD with random
// start, and an offline universal perturbation, plus the TP_attack/TP
// effectiveness measurement under the confident gate.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "certwatch/confidence.hpp"
#include "certwatch/detector.hpp"
#include "certwatch/serialize.hpp"

namespace certwatch {

enum class AttackKind { Fgsm, Pgd, Universal };

inline const char* to_string(AttackKind k) {
    switch (k) {
        case AttackKind::Fgsm: return "fgsm";
        case AttackKind::Pgd: return "pgd";
        default: return "universal";
    }
}
inline AttackKind attack_kind_from_string(const std::string& s) {
    if (s == "fgsm") return AttackKind::Fgsm;
    if (s == "pgd") return AttackKind::Pgd;
    if (s == "universal") return AttackKind::Universal;
    throw std::invalid_argument("unknown attack kind: " + s);
}

struct AttackSpec {
    AttackKind kind = AttackKind::Fgsm;
    float eps = 0.0f;
    int steps = 10;           // pgd
    float step_size = 0.0f;   // pgd; <= 0 means eps/4
    std::uint64_t rng_seed = 0;
};

namespace detail {

// Cheat margin f = l1 - l0 and its gradient w.r.t. the input pixels.
// Evasion means driving f down.
struct MarginGrad {
    float margin;
    Tensor grad;
};

inline MarginGrad margin_input_grad(const DetectorModel& model, const Tensor& frame) {
    Var x = leaf(frame, true);
    CounterRng rng = CounterRng::derive(0, 0);
    auto g = model.forward_graph(x, false, rng);
    Var f = sub(select(g.logits, 1), select(g.logits, 0));
    backward(f);
    return {f->value[0], x->grad};
}

inline float cheat_margin(const DetectorModel& model, const Tensor& frame) {
    auto out = model.forward(frame, false, 0);
    return out.l1 - out.l0;
}

inline void enforce_budget(const Tensor& original, const Tensor& adv, float eps) {
    for (std::size_t i = 0; i < adv.data.size(); ++i) {
        float d = std::fabs(adv.data[i] - original.data[i]);
        if (d > eps + 1e-6f || adv.data[i] < 0.0f || adv.data[i] > 1.0f)
            throw std::logic_error("attack exceeded its budget or pixel range");
    }
}

} // namespace detail

// x' = clip(x - eps * sign(df/dx), 0, 1): one signed step down the cheat
// margin.
inline Tensor fgsm(const DetectorModel& model, const Tensor& frame, float eps) {
    if (eps < 0.0f) throw std::invalid_argument("fgsm: eps must be >= 0");
    auto mg = detail::margin_input_grad(model, frame);
    Tensor adv = frame;
    for (std::size_t i = 0; i < adv.data.size(); ++i) {
        float g = mg.grad.data[i];
        float s = g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f);
        adv.data[i] = std::min(1.0f, std::max(0.0f, adv.data[i] - eps * s));
    }
    detail::enforce_budget(frame, adv, eps);
    return adv;
}

inline Tensor pgd_madry(const DetectorModel& model, const Tensor& frame, float eps,
                        int steps, float step_size, std::uint64_t rng_seed,
                        bool random_start = true) {
    if (eps < 0.0f) throw std::invalid_argument("pgd: eps must be >= 0");
    if (steps < 1) throw std::invalid_argument("pgd: steps must be >= 1");
    if (step_size <= 0.0f) throw std::invalid_argument("pgd: step size must be positive");
    Tensor adv = frame;
    if (random_start && eps > 0.0f) {
        CounterRng rng = CounterRng::derive(rng_seed, 0xA77ACu);
        for (auto& v : adv.data)
            v = std::min(1.0f, std::max(0.0f, v + rng.uniform(-eps, eps)));
    }
    for (int s = 0; s < steps; ++s) {
        auto mg = detail::margin_input_grad(model, adv);
        for (std::size_t i = 0; i < adv.data.size(); ++i) {
            float g = mg.grad.data[i];
            float sg = g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f);
            float v = adv.data[i] - step_size * sg;
            // project onto the L-inf ball around the original, then [0,1]
            v = std::min(frame.data[i] + eps, std::max(frame.data[i] - eps, v));
            adv.data[i] = std::min(1.0f, std::max(0.0f, v));
        }
    }
    detail::enforce_budget(frame, adv, eps);
    return adv;
}

struct UniversalPerturbation {
    Tensor delta;
    float eps = 0.0f;
    double construction_flip_rate = 0.0;
};

inline Tensor apply_universal(const Tensor& frame, const Tensor& delta) {
    require_same_shape(frame, delta, "apply_universal");
    Tensor out = frame;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::min(1.0f, std::max(0.0f, out.data[i] + delta.data[i]));
    return out;
}

// Fraction of frames no longer classified as cheat once delta is applied.
inline double measure_flip_rate(const DetectorModel& model,
                                const std::vector<Tensor>& frames, const Tensor& delta) {
    if (frames.empty()) throw std::invalid_argument("flip rate: empty frame set");
    int flipped = 0;
    for (const Tensor& f : frames)
        if (detail::cheat_margin(model, apply_universal(f, delta)) <= 0.0f) ++flipped;
    return static_cast<double>(flipped) / static_cast<double>(frames.size());
}

// Offline frame-agnostic perturbation: shuffled passes of minimal flipping
// steps (binary margin variant with a small overshoot), with the running
// delta projected back onto the L-inf budget after every update.
inline UniversalPerturbation build_universal(const DetectorModel& model,
                                             const std::vector<Tensor>& cheat_frames,
                                             float eps, int passes,
                                             std::uint64_t rng_seed) {
    if (cheat_frames.empty()) throw std::invalid_argument("universal: empty frame set");
    if (eps < 0.0f) throw std::invalid_argument("universal: eps must be >= 0");
    if (passes < 1) throw std::invalid_argument("universal: passes must be >= 1");
    constexpr float kOvershoot = 1.02f;
    UniversalPerturbation up;
    up.eps = eps;
    up.delta = Tensor(cheat_frames.front().shape);
    if (eps > 0.0f) {
        CounterRng rng = CounterRng::derive(rng_seed, 0x0417Fu);
        std::vector<std::size_t> order(cheat_frames.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (int pass = 0; pass < passes; ++pass) {
            // Fisher-Yates with the counter stream
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[static_cast<std::size_t>(
                                            rng.next_below(static_cast<std::uint64_t>(i)))]);
            for (std::size_t idx : order) {
                Tensor adv = apply_universal(cheat_frames[idx], up.delta);
                auto mg = detail::margin_input_grad(model, adv);
                if (mg.margin <= 0.0f) continue; // already evades
                double nrm2 = 0.0;
                for (float g : mg.grad.data) nrm2 += static_cast<double>(g) * g;
                if (nrm2 < 1e-20) continue;
                float scale = -kOvershoot * mg.margin / static_cast<float>(nrm2);
                for (std::size_t i = 0; i < up.delta.data.size(); ++i) {
                    float v = up.delta.data[i] + scale * mg.grad.data[i];
                    up.delta.data[i] = std::min(eps, std::max(-eps, v));
                }
            }
        }
    }
    up.construction_flip_rate = measure_flip_rate(model, cheat_frames, up.delta);
    return up;
}

inline void save_universal(const UniversalPerturbation& up, const std::string& path) {
    Tensor meta({2}, {up.eps, static_cast<float>(up.construction_flip_rate)});
    write_tensor_container(path, {}, {{"delta", up.delta}, {"meta", meta}});
}

inline UniversalPerturbation load_universal(const std::string& path) {
    TensorContainer c = read_tensor_container(path);
    if (c.tensors.size() != 2 || c.tensors[0].first != "delta" || c.tensors[1].first != "meta")
        throw std::runtime_error("perturbation file: unexpected layout in " + path);
    UniversalPerturbation up;
    up.delta = c.tensors[0].second;
    up.eps = c.tensors[1].second[0];
    up.construction_flip_rate = static_cast<double>(c.tensors[1].second[1]);
    return up;
}

struct AttackResult {
    int tp_clean = 0;
    int tp_attack = 0;
    int frames = 0;
    bool defined = false; // false when the clean pass yields no true positives
    double ratio = 0.0;   // TP_attack / TP when defined
};

struct GateParams {
    int T = kDefaultVrPasses;
    float dropout_p = 0.15f;
    float u_max = kDefaultUMax;
    std::uint64_t rng_seed = 0;
};

namespace detail {

inline bool confident_cheat(const DetectorModel& model, const Tensor& frame,
                            const GateParams& gate) {
    ConfidenceReport r = assess_confidence(model, frame, gate.T, gate.dropout_p,
                                           gate.rng_seed);
    if (!confident_gate(r, gate.u_max)) return false;
    return cheat_margin(model, frame) > 0.0f;
}

} // namespace detail

// TP counts confident detections on clean cheat frames; TP_attack counts how
// many of those same frames are still classified as cheating after the attack.
// The gate selects the frames at stake, so the ratio measures classification
// robustness of the confident set and a certified frame can never leave the
// numerator.
inline AttackResult evaluate_attack(const DetectorModel& model,
                                    const std::vector<Tensor>& cheat_frames,
                                    const AttackSpec& spec, const GateParams& gate,
                                    const UniversalPerturbation* universal = nullptr) {
    if (cheat_frames.empty()) throw std::invalid_argument("evaluate_attack: empty frame set");
    if (spec.kind == AttackKind::Universal && universal == nullptr)
        throw std::invalid_argument("evaluate_attack: universal attack needs a perturbation");
    AttackResult res;
    res.frames = static_cast<int>(cheat_frames.size());
    float step = spec.step_size > 0.0f ? spec.step_size : spec.eps / 4.0f;
    for (std::size_t i = 0; i < cheat_frames.size(); ++i) {
        const Tensor& f = cheat_frames[i];
        const bool clean_tp = detail::confident_cheat(model, f, gate);
        if (clean_tp) ++res.tp_clean;
        if (!clean_tp) continue;
        Tensor adv;
        switch (spec.kind) {
            case AttackKind::Fgsm: adv = fgsm(model, f, spec.eps); break;
            case AttackKind::Pgd:
                adv = spec.eps > 0.0f
                          ? pgd_madry(model, f, spec.eps, spec.steps, step,
                                      spec.rng_seed + i)
                          : f;
                break;
            case AttackKind::Universal: adv = apply_universal(f, universal->delta); break;
        }
        if (detail::cheat_margin(model, adv) > 0.0f) ++res.tp_attack;
    }
    if (res.tp_clean > 0) {
        res.defined = true;
        res.ratio = static_cast<double>(res.tp_attack) / static_cast<double>(res.tp_clean);
    }
    return res;
}

} // namespace certwatch
