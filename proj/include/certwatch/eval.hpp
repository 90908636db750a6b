#pragma once

// Confidence-gated evaluation: run the detector over a labeled frame set,
// split predictions into confident / non-confident blocks and derive the
// headline metrics plus likelihood-ratio baselines.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "certwatch/confidence.hpp"
#include "certwatch/detector.hpp"
#include "certwatch/metrics.hpp"

namespace certwatch {

struct EvalConfig {
    int vr_passes = kDefaultVrPasses;
    float u_max = kDefaultUMax;
    std::uint64_t seed = 0;
    bool gated = true; // false: every prediction counts as confident
};

struct FrameEval {
    bool predicted_cheat = false;
    bool confident = false;
    ConfidenceReport report;
    double lr = 0.0;
};

struct EvalResult {
    ConfusionTable table;
    MetricSet metrics;
    LRBaselines baselines;
    bool deployable = false;
    std::vector<FrameEval> per_frame;
};

inline EvalResult evaluate(const DetectorModel& model, const std::vector<Tensor>& frames,
                           const std::vector<int>& labels, const EvalConfig& cfg) {
    if (frames.empty()) throw std::invalid_argument("evaluate: empty frame set");
    if (frames.size() != labels.size())
        throw std::invalid_argument("evaluate: frames/labels size mismatch");
    if (cfg.vr_passes < 1) throw std::invalid_argument("evaluate: vr_passes must be >= 1");

    EvalResult res;
    std::vector<Prediction> preds;
    std::vector<std::pair<double, bool>> lr_rows;
    preds.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Tensor& frame = frames[i];
        const std::uint64_t frame_seed = cfg.seed + i;
        DetectorOutput out = model.forward(frame, false, frame_seed);

        FrameEval fe;
        fe.predicted_cheat = out.l1 > out.l0;
        if (cfg.gated) {
            fe.report = assess_confidence(model, frame, cfg.vr_passes,
                                          model.config().dropout_p, frame_seed);
            fe.confident = confident_gate(fe.report, cfg.u_max);
        } else {
            fe.confident = true;
        }
        Evidential ev = evidence_belief_uncertainty(out.l0, out.l1);
        fe.lr = likelihood_ratio(ev.a0, ev.a1);
        lr_rows.emplace_back(fe.lr, fe.predicted_cheat);

        preds.push_back({fe.predicted_cheat, fe.confident});
        res.per_frame.push_back(fe);
    }
    res.table = tabulate(preds, labels);
    res.metrics = derive_metrics(res.table);
    res.baselines = accumulate_lr_baselines(lr_rows, "field");
    res.deployable = is_deployable(res.table);
    return res;
}

} // namespace certwatch
