#pragma once

// Training loop for the detector: the three loss families (combined CE,
// combined MSE, evidence-MSE) with an optional interval-bound defense
// driven by the curriculum schedule.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "certwatch/detector.hpp"
#include "certwatch/ibp.hpp"
#include "certwatch/losses.hpp"

namespace certwatch {

enum class LossKind { CeCombined, MseCombined, UlCombined };
enum class DefenseKind { None, IbpOneSided, IbpTwoSided };

inline const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::CeCombined: return "ce_combined";
        case LossKind::MseCombined: return "mse_combined";
        default: return "ul_combined";
    }
}
inline const char* to_string(DefenseKind d) {
    switch (d) {
        case DefenseKind::None: return "none";
        case DefenseKind::IbpOneSided: return "one_sided";
        default: return "two_sided";
    }
}
inline LossKind loss_kind_from_string(const std::string& s) {
    if (s == "ce_combined") return LossKind::CeCombined;
    if (s == "mse_combined") return LossKind::MseCombined;
    if (s == "ul_combined") return LossKind::UlCombined;
    throw std::invalid_argument("unknown loss: " + s);
}
inline DefenseKind defense_kind_from_string(const std::string& s) {
    if (s == "none") return DefenseKind::None;
    if (s == "one_sided") return DefenseKind::IbpOneSided;
    if (s == "two_sided") return DefenseKind::IbpTwoSided;
    throw std::invalid_argument("unknown defense: " + s);
}

struct TrainConfig {
    LossKind loss = LossKind::CeCombined;
    DefenseKind defense = DefenseKind::None;
    int epochs = 60;
    int batch_size = 6;
    float lr = 1e-4f;
    // One-shot step decay for runs without the interval curriculum; the
    // curriculum holds the rate constant instead.
    float lr_decay = 0.1f;
    float lr_decay_frac = 0.6f;
    std::uint64_t seed = 0;
};

// The CE losses never train alongside the interval defense; that pairing
// is outside the evaluated grid.
inline void validate_train_config(const TrainConfig& cfg) {
    if (cfg.loss == LossKind::CeCombined && cfg.defense != DefenseKind::None)
        throw std::invalid_argument(
            "unsupported pairing: ce_combined cannot be trained with an interval defense");
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(cfg.lr > 0.0f)) throw std::invalid_argument("train: lr must be > 0");
    if (cfg.lr_decay <= 0.0f || cfg.lr_decay > 1.0f)
        throw std::invalid_argument("train: lr_decay must be in (0,1]");
    if (cfg.lr_decay_frac < 0.0f || cfg.lr_decay_frac > 1.0f)
        throw std::invalid_argument("train: lr_decay_frac must be in [0,1]");
}

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
    double kl_weight = 0.0;
    double ibp_weight = 0.0;
    double eps = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> curve;
};

namespace detail {

inline Var combined_loss_term(LossKind kind, const Var& logits, const Var& local_map,
                              int y, float lambda) {
    switch (kind) {
        case LossKind::CeCombined:
            return cmul(add(ce_global_term(logits, y), ce_local_term(local_map, y)), 0.5f);
        case LossKind::MseCombined:
            return add(mse_global_term(logits, y), mse_local_term(local_map, y));
        case LossKind::UlCombined:
            return add(ul_global_term(logits, y, lambda), mse_local_term(local_map, y));
    }
    throw std::logic_error("unreachable");
}

} // namespace detail

inline TrainResult train(DetectorModel& model, const std::vector<Tensor>& frames,
                         const std::vector<int>& labels, const TrainConfig& cfg) {
    validate_train_config(cfg);
    if (frames.empty()) throw std::invalid_argument("train: empty training set");
    if (frames.size() != labels.size())
        throw std::invalid_argument("train: frames/labels size mismatch");

    auto params = model.parameters();
    AdamConfig adam;
    TrainResult result;
    const int n = static_cast<int>(frames.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    const bool curriculum = cfg.defense != DefenseKind::None;
    const IBPMode mode = cfg.defense == DefenseKind::IbpOneSided ? IBPMode::OneSided
                                                                 : IBPMode::TwoSided;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        CurriculumState cur = schedule(epoch, cfg.epochs);
        const float lambda =
            cfg.loss == LossKind::UlCombined ? static_cast<float>(cur.kl_weight) : 0.0f;
        const float ibp_w = curriculum ? static_cast<float>(cur.ibp_weight) : 0.0f;
        const float eps = static_cast<float>(cur.eps);
        adam.lr = cfg.lr;
        if (!curriculum &&
            epoch >= static_cast<int>(cfg.lr_decay_frac * static_cast<float>(cfg.epochs)))
            adam.lr = cfg.lr * cfg.lr_decay;

        CounterRng shuffle_rng = CounterRng::derive(cfg.seed, 0x5A0F0000u + static_cast<unsigned>(epoch));
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(shuffle_rng.next_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        CounterRng drop_rng = CounterRng::derive(cfg.seed, 0xD0D00000u + static_cast<unsigned>(epoch));

        double epoch_loss = 0.0;
        int batch_index = 0;
        for (int start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const int end = std::min(n, start + cfg.batch_size);
            zero_grads(params);
            const float inv = 1.0f / static_cast<float>(end - start);
            for (int i = start; i < end; ++i) {
                const Tensor& frame = frames[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
                const int y = labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
                auto fg = model.forward_graph(constant(frame), true, drop_rng);
                Var loss = detail::combined_loss_term(cfg.loss, fg.logits, fg.local_map, y, lambda);
                // The one-sided variant leaves clean frames untouched: only
                // attacks that fake a cheat matter, so only cheat frames pay
                // the worst-case term.
                const bool apply_ibp =
                    curriculum && ibp_w > 0.0f &&
                    !(cfg.defense == DefenseKind::IbpOneSided && y == 0);
                if (apply_ibp) {
                    auto iv = model.interval_graph(frame, eps);
                    Var wl = worst_case_logits_graph(iv, y, mode);
                    Var wmap = worst_case_local_graph(iv, y);
                    Var worst = detail::combined_loss_term(cfg.loss, wl, wmap, y, lambda);
                    loss = ibp_training_loss(loss, worst, ibp_w);
                }
                const float lv = loss->value[0];
                if (!std::isfinite(lv))
                    throw std::runtime_error("train: non-finite loss at epoch " +
                                             std::to_string(epoch) + ", batch " +
                                             std::to_string(batch_index));
                epoch_loss += static_cast<double>(lv);
                backward(cmul(loss, inv));
            }
            adam_step(params, adam);
        }

        EpochStats st;
        st.epoch = epoch;
        st.mean_loss = epoch_loss / static_cast<double>(n);
        st.lr = adam.lr;
        st.kl_weight = static_cast<double>(lambda);
        st.ibp_weight = static_cast<double>(ibp_w);
        st.eps = curriculum ? static_cast<double>(eps) : 0.0;
        result.curve.push_back(st);
    }
    return result;
}

} // namespace certwatch
