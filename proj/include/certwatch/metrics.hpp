#pragma once

// Confusion accounting split by the confident gate, plus the derived
// sensitivity / precision / accuracy triple.

#include <optional>
#include <stdexcept>
#include <vector>

namespace certwatch {

struct ConfusionCounts {
    int tp = 0, fn = 0, fp = 0, tn = 0;
    int total() const { return tp + fn + fp + tn; }
};

struct ConfusionTable {
    ConfusionCounts confident;
    ConfusionCounts non_confident;
    int total() const { return confident.total() + non_confident.total(); }
};

struct Prediction {
    bool predicted_cheat = false;
    bool confident = false;
};

inline ConfusionTable tabulate(const std::vector<Prediction>& predictions,
                               const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("tabulate: prediction/label count mismatch");
    ConfusionTable t;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        ConfusionCounts& block = predictions[i].confident ? t.confident : t.non_confident;
        if (labels[i]) {
            if (predictions[i].predicted_cheat)
                ++block.tp;
            else
                ++block.fn;
        } else {
            if (predictions[i].predicted_cheat)
                ++block.fp;
            else
                ++block.tn;
        }
    }
    return t;
}

struct MetricSet {
    std::optional<double> sensitivity; // TP / (TP + FN)
    std::optional<double> precision;   // TP / (TP + FP)
    std::optional<double> accuracy;    // (TP + TN) / all
};

// Metrics are reported over the confident block only.
inline MetricSet derive_metrics(const ConfusionTable& t) {
    const ConfusionCounts& c = t.confident;
    MetricSet m;
    if (c.tp + c.fn > 0)
        m.sensitivity = static_cast<double>(c.tp) / (c.tp + c.fn);
    if (c.tp + c.fp > 0)
        m.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
    if (c.total() > 0)
        m.accuracy = static_cast<double>(c.tp + c.tn) / c.total();
    return m;
}

// A run may only be labeled deployable with a clean confident false-positive
// record or a precision at the whole-dataset bar.
inline bool is_deployable(const ConfusionTable& t) {
    MetricSet m = derive_metrics(t);
    return t.confident.fp == 0 || (m.precision && *m.precision >= 0.96);
}

} // namespace certwatch
