#pragma once

// The dual-head overlay detector: a shared 4-layer conv trunk, a global
// head (reduction -> dropout -> 16x2 linear -> softmax or evidential
// readout) and a local head (1x1 conv -> logsig probability map).

#include <array>
#include <cmath>
#include <cstring>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "certwatch/layers.hpp"
#include "certwatch/optim.hpp"
#include "certwatch/rng.hpp"
#include "certwatch/serialize.hpp"

namespace certwatch {

enum class Reduction { Fc, Max, Avg };
enum class HeadMode { Softmax, Evidential };

inline const char* to_string(Reduction r) {
    switch (r) {
        case Reduction::Fc: return "fc";
        case Reduction::Max: return "max";
        default: return "avg";
    }
}
inline const char* to_string(HeadMode m) {
    return m == HeadMode::Softmax ? "softmax" : "evidential";
}

inline Reduction reduction_from_string(const std::string& s) {
    if (s == "fc") return Reduction::Fc;
    if (s == "max") return Reduction::Max;
    if (s == "avg") return Reduction::Avg;
    throw std::invalid_argument("unknown reduction: " + s);
}
inline HeadMode head_mode_from_string(const std::string& s) {
    if (s == "softmax") return HeadMode::Softmax;
    if (s == "evidential") return HeadMode::Evidential;
    throw std::invalid_argument("unknown head mode: " + s);
}

struct DetectorConfig {
    int input_height = 108;
    int input_width = 192;
    Reduction reduction = Reduction::Avg;
    HeadMode head_mode = HeadMode::Softmax;
    float dropout_p = 0.15f;
    float leaky_slope = 0.01f;
};

// Logits are clamped to +/-15 before exponentiation in the evidential
// readout; exp(15) keeps every alpha finite in float.
inline constexpr float kLogitClamp = 15.0f;

struct Evidential {
    float e0, e1, a0, a1, b0, b1, u;
};

inline Evidential evidential_from_logits(float l0, float l1) {
    auto cl = [](float v) { return std::min(kLogitClamp, std::max(-kLogitClamp, v)); };
    Evidential ev{};
    ev.e0 = std::exp(cl(l0));
    ev.e1 = std::exp(cl(l1));
    ev.a0 = 1.0f + ev.e0;
    ev.a1 = 1.0f + ev.e1;
    float s = ev.a0 + ev.a1;
    ev.b0 = ev.e0 / s;
    ev.b1 = ev.e1 / s;
    ev.u = 2.0f / s;
    return ev;
}

struct DetectorOutput {
    float l0 = 0.0f, l1 = 0.0f;
    float p_cheat = 0.5f;
    Tensor local_map; // [H', W'], per-cell probabilities
    bool evidential = false;
    Evidential ev{};
};

struct ConvSpec {
    int c_out, k, stride, pad;
};

// 48x5x5/3, 48x5x5/3, 32x3x3/2, 16x3x3/2; pad keeps spatial size at
// ceil(dim/stride).
inline constexpr std::array<ConvSpec, 4> kConvSpecs{{
    {48, 5, 3, 2}, {48, 5, 3, 2}, {32, 3, 2, 1}, {16, 3, 2, 1}}};

inline std::pair<int, int> detector_map_dims(int h, int w) {
    for (const auto& s : kConvSpecs) {
        h = (h + 2 * s.pad - s.k) / s.stride + 1;
        w = (w + 2 * s.pad - s.k) / s.stride + 1;
    }
    return {h, w};
}

class DetectorModel {
public:
    DetectorModel(const DetectorConfig& cfg, std::uint64_t rng_seed)
        : cfg_(cfg) {
        validate_config(cfg);
        auto [mh, mw] = detector_map_dims(cfg.input_height, cfg.input_width);
        map_h_ = mh;
        map_w_ = mw;
        CounterRng rng = CounterRng::derive(rng_seed, 0x11171);
        int c_in = 3;
        for (int i = 0; i < 4; ++i) {
            const auto& s = kConvSpecs[static_cast<std::size_t>(i)];
            conv_w_.push_back(std::make_unique<Parameter>(
                he_uniform({s.c_out, c_in, s.k, s.k}, c_in * s.k * s.k, rng)));
            conv_b_.push_back(std::make_unique<Parameter>(Tensor({s.c_out})));
            c_in = s.c_out;
        }
        if (cfg.reduction == Reduction::Fc) {
            int flat = 16 * map_h_ * map_w_;
            red_w_ = std::make_unique<Parameter>(he_uniform({flat, 16}, flat, rng));
            red_b_ = std::make_unique<Parameter>(Tensor({16}));
        }
        fc_w_ = std::make_unique<Parameter>(he_uniform({16, 2}, 16, rng));
        fc_b_ = std::make_unique<Parameter>(Tensor({2}));
        loc_w_ = std::make_unique<Parameter>(he_uniform({1, 16, 1, 1}, 16, rng));
        loc_b_ = std::make_unique<Parameter>(Tensor({1}));
    }

    DetectorModel(const DetectorModel&) = delete;
    DetectorModel& operator=(const DetectorModel&) = delete;
    DetectorModel(DetectorModel&&) = default;

    const DetectorConfig& config() const { return cfg_; }
    int map_height() const { return map_h_; }
    int map_width() const { return map_w_; }

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> out;
        for (auto& [name, p] : named_parameters()) out.push_back(p);
        return out;
    }

    std::vector<std::pair<std::string, Parameter*>> named_parameters() {
        std::vector<std::pair<std::string, Parameter*>> out;
        for (int i = 0; i < 4; ++i) {
            out.emplace_back("conv" + std::to_string(i) + ".w", conv_w_[static_cast<std::size_t>(i)].get());
            out.emplace_back("conv" + std::to_string(i) + ".b", conv_b_[static_cast<std::size_t>(i)].get());
        }
        if (red_w_) {
            out.emplace_back("reduction.w", red_w_.get());
            out.emplace_back("reduction.b", red_b_.get());
        }
        out.emplace_back("global.w", fc_w_.get());
        out.emplace_back("global.b", fc_b_.get());
        out.emplace_back("local.w", loc_w_.get());
        out.emplace_back("local.b", loc_b_.get());
        return out;
    }

    struct ForwardGraph {
        Var logits;    // [2]
        Var local_map; // [H', W'], post-logsig
        Var feat;      // [16], post-reduction pre-dropout
    };

    // The trunk up to the 16-channel feature map (shared by both heads).
    Var trunk(const Var& frame) const {
        check_frame_shape_raw(frame->value);
        Var h = frame;
        for (int i = 0; i < 4; ++i) {
            const auto& s = kConvSpecs[static_cast<std::size_t>(i)];
            h = conv2d(h, conv_w_[static_cast<std::size_t>(i)]->node,
                       conv_b_[static_cast<std::size_t>(i)]->node, s.stride, s.pad);
            h = leaky_relu(h, cfg_.leaky_slope);
        }
        return h;
    }

    Var reduce(const Var& feat_map) const {
        switch (cfg_.reduction) {
            case Reduction::Max: return global_pool(feat_map, PoolKind::Max);
            case Reduction::Avg: return global_pool(feat_map, PoolKind::Avg);
            case Reduction::Fc:
                return linear(reshape(feat_map, {feat_map->value.numel()}),
                              red_w_->node, red_b_->node);
        }
        throw std::logic_error("unreachable");
    }

    Var global_logits(const Var& reduced, bool training, CounterRng& rng) const {
        return global_logits(reduced, cfg_.dropout_p, training, rng);
    }

    Var global_logits(const Var& reduced, float dropout_p, bool training,
                      CounterRng& rng) const {
        Var d = dropout(reduced, dropout_p, rng, training);
        return linear(d, fc_w_->node, fc_b_->node);
    }

    Var local_map_graph(const Var& feat_map) const {
        Var m = conv2d(feat_map, loc_w_->node, loc_b_->node, 1, 0);
        return logsig(reshape(m, {m->value.shape[1], m->value.shape[2]}));
    }

    ForwardGraph forward_graph(const Var& frame, bool training, CounterRng& rng) const {
        Var feat_map = trunk(frame);
        Var reduced = reduce(feat_map);
        ForwardGraph g;
        g.feat = reduced;
        g.logits = global_logits(reduced, training, rng);
        g.local_map = local_map_graph(feat_map);
        return g;
    }

    DetectorOutput forward(const Tensor& frame, bool training, std::uint64_t rng_seed) const {
        check_frame_range(frame);
        CounterRng rng = CounterRng::derive(rng_seed, 0xD20);
        auto g = forward_graph(constant(frame), training, rng);
        return output_from(g);
    }

    DetectorOutput output_from(const ForwardGraph& g) const {
        DetectorOutput out;
        out.l0 = g.logits->value[0];
        out.l1 = g.logits->value[1];
        out.local_map = g.local_map->value;
        if (cfg_.head_mode == HeadMode::Evidential) {
            out.evidential = true;
            out.ev = evidential_from_logits(out.l0, out.l1);
            out.p_cheat = out.ev.e1 / (out.ev.e0 + out.ev.e1);
        } else {
            float m = std::max(out.l0, out.l1);
            float z0 = std::exp(out.l0 - m), z1 = std::exp(out.l1 - m);
            out.p_cheat = z1 / (z0 + z1);
        }
        return out;
    }

    // ---- interval bound propagation -----------------------------------

    struct IntervalGraph {
        Var logit_lo, logit_hi;     // [2]
        Var local_lo, local_hi;     // [H', W'], post-logsig
    };

    // Propagates [clip(x-eps,0,1), clip(x+eps,0,1)] through the network.
    // Linear layers use center/radius form; monotone activations map
    // endpoints; dropout is ignored (certification is deterministic).
    IntervalGraph interval_graph(const Tensor& frame, float eps) const {
        if (eps < 0.0f) throw std::invalid_argument("interval_graph: eps must be >= 0");
        check_frame_shape_raw(frame);
        Tensor lo_t = frame, hi_t = frame;
        for (auto& v : lo_t.data) v = std::max(0.0f, v - eps);
        for (auto& v : hi_t.data) v = std::min(1.0f, v + eps);
        Var lo = constant(std::move(lo_t));
        Var hi = constant(std::move(hi_t));
        for (int i = 0; i < 4; ++i) {
            const auto& s = kConvSpecs[static_cast<std::size_t>(i)];
            auto [nlo, nhi] = interval_conv(lo, hi, conv_w_[static_cast<std::size_t>(i)]->node,
                                            conv_b_[static_cast<std::size_t>(i)]->node,
                                            s.stride, s.pad);
            lo = leaky_relu(nlo, cfg_.leaky_slope);
            hi = leaky_relu(nhi, cfg_.leaky_slope);
        }
        IntervalGraph g;
        // local head: 1x1 conv interval, then logsig endpoints
        {
            auto [mlo, mhi] = interval_conv(lo, hi, loc_w_->node, loc_b_->node, 1, 0);
            g.local_lo = logsig(reshape(mlo, {mlo->value.shape[1], mlo->value.shape[2]}));
            g.local_hi = logsig(reshape(mhi, {mhi->value.shape[1], mhi->value.shape[2]}));
        }
        Var rlo, rhi;
        switch (cfg_.reduction) {
            case Reduction::Max:
                rlo = global_pool(lo, PoolKind::Max);
                rhi = global_pool(hi, PoolKind::Max);
                break;
            case Reduction::Avg:
                rlo = global_pool(lo, PoolKind::Avg);
                rhi = global_pool(hi, PoolKind::Avg);
                break;
            case Reduction::Fc: {
                auto [a, b] = interval_linear(reshape(lo, {lo->value.numel()}),
                                              reshape(hi, {hi->value.numel()}),
                                              red_w_->node, red_b_->node);
                rlo = a;
                rhi = b;
                break;
            }
        }
        auto [llo, lhi] = interval_linear(rlo, rhi, fc_w_->node, fc_b_->node);
        g.logit_lo = llo;
        g.logit_hi = lhi;
        return g;
    }

    void save(const std::string& path) {
        NamedTensors tensors;
        for (auto& [name, p] : named_parameters())
            tensors.emplace_back(name, p->value());
        write_tensor_container(path, config_blob(cfg_), tensors);
    }

    static DetectorModel load(const std::string& path) {
        TensorContainer c = read_tensor_container(path);
        DetectorConfig cfg = config_from_blob(c.config_blob, path);
        DetectorModel model(cfg, 0);
        auto named = model.named_parameters();
        if (named.size() != c.tensors.size())
            throw std::runtime_error("weights file: layer count mismatch in " + path);
        for (std::size_t i = 0; i < named.size(); ++i) {
            auto& [name, p] = named[i];
            auto& [fname, ft] = c.tensors[i];
            if (fname != name)
                throw std::runtime_error("weights file: unexpected layer '" + fname +
                                         "', wanted '" + name + "' in " + path);
            if (ft.shape != p->value().shape)
                throw std::runtime_error("weights file: shape mismatch for '" + name +
                                         "': " + ft.shape_str() + " vs expected " +
                                         p->value().shape_str());
            p->value() = ft;
        }
        return model;
    }

private:
    static void validate_config(const DetectorConfig& cfg) {
        if (cfg.input_height < 36 || cfg.input_width < 36)
            throw std::invalid_argument(
                "detector: input dims must be >= 36, got " +
                std::to_string(cfg.input_height) + "x" + std::to_string(cfg.input_width));
        if (cfg.dropout_p < 0.0f || cfg.dropout_p >= 1.0f)
            throw std::invalid_argument("detector: dropout_p must be in [0,1)");
    }

    static Tensor he_uniform(std::vector<int> shape, int fan_in, CounterRng& rng) {
        float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
        Tensor t(std::move(shape));
        for (auto& v : t.data) v = rng.uniform(-limit, limit);
        return t;
    }

    void check_frame_shape_raw(const Tensor& frame) const {
        if (frame.rank() != 3 || frame.shape[0] != 3 ||
            frame.shape[1] != cfg_.input_height || frame.shape[2] != cfg_.input_width)
            throw std::invalid_argument("detector: frame shape " + frame.shape_str() +
                                        " does not match configured 3x" +
                                        std::to_string(cfg_.input_height) + "x" +
                                        std::to_string(cfg_.input_width));
    }

    void check_frame_range(const Tensor& frame) const {
        check_frame_shape_raw(frame);
        for (float v : frame.data)
            if (!(v >= 0.0f && v <= 1.0f))
                throw std::invalid_argument("detector: frame pixels must be in [0,1]");
    }

    static std::pair<Var, Var> interval_conv(const Var& lo, const Var& hi,
                                             const Var& w, const Var& b,
                                             int stride, int pad) {
        Var center = cmul(add(lo, hi), 0.5f);
        Var radius = cmul(sub(hi, lo), 0.5f);
        Var zero_b = constant(Tensor(b->value.shape));
        Var oc = conv2d(center, w, b, stride, pad);
        Var orad = conv2d(radius, abs_v(w), zero_b, stride, pad);
        return {sub(oc, orad), add(oc, orad)};
    }

    static std::pair<Var, Var> interval_linear(const Var& lo, const Var& hi,
                                               const Var& W, const Var& b) {
        Var center = cmul(add(lo, hi), 0.5f);
        Var radius = cmul(sub(hi, lo), 0.5f);
        Var zero_b = constant(Tensor(b->value.shape));
        Var oc = linear(center, W, b);
        Var orad = linear(radius, abs_v(W), zero_b);
        return {sub(oc, orad), add(oc, orad)};
    }

    static std::vector<unsigned char> config_blob(const DetectorConfig& cfg) {
        std::vector<unsigned char> blob;
        auto put_u32 = [&](std::uint32_t v) {
            blob.push_back(static_cast<unsigned char>(v));
            blob.push_back(static_cast<unsigned char>(v >> 8));
            blob.push_back(static_cast<unsigned char>(v >> 16));
            blob.push_back(static_cast<unsigned char>(v >> 24));
        };
        auto put_f32 = [&](float f) {
            std::uint32_t v;
            __builtin_memcpy(&v, &f, 4);
            put_u32(v);
        };
        put_u32(static_cast<std::uint32_t>(cfg.input_height));
        put_u32(static_cast<std::uint32_t>(cfg.input_width));
        put_u32(static_cast<std::uint32_t>(cfg.reduction));
        put_u32(static_cast<std::uint32_t>(cfg.head_mode));
        put_f32(cfg.dropout_p);
        put_f32(cfg.leaky_slope);
        return blob;
    }

    static DetectorConfig config_from_blob(const std::vector<unsigned char>& blob,
                                           const std::string& path) {
        if (blob.size() != 24)
            throw std::runtime_error("weights file: malformed config block in " + path);
        auto get_u32 = [&](std::size_t off) {
            return static_cast<std::uint32_t>(blob[off]) |
                   (static_cast<std::uint32_t>(blob[off + 1]) << 8) |
                   (static_cast<std::uint32_t>(blob[off + 2]) << 16) |
                   (static_cast<std::uint32_t>(blob[off + 3]) << 24);
        };
        auto get_f32 = [&](std::size_t off) {
            std::uint32_t v = get_u32(off);
            float f;
            __builtin_memcpy(&f, &v, 4);
            return f;
        };
        DetectorConfig cfg;
        cfg.input_height = static_cast<int>(get_u32(0));
        cfg.input_width = static_cast<int>(get_u32(4));
        cfg.reduction = static_cast<Reduction>(get_u32(8));
        cfg.head_mode = static_cast<HeadMode>(get_u32(12));
        cfg.dropout_p = get_f32(16);
        cfg.leaky_slope = get_f32(20);
        return cfg;
    }

    DetectorConfig cfg_;
    int map_h_ = 0, map_w_ = 0;
    std::vector<std::unique_ptr<Parameter>> conv_w_, conv_b_;
    std::unique_ptr<Parameter> red_w_, red_b_;
    std::unique_ptr<Parameter> fc_w_, fc_b_;
    std::unique_ptr<Parameter> loc_w_, loc_b_;
};

inline DetectorModel build_detector(const DetectorConfig& cfg, std::uint64_t rng_seed) {
    return DetectorModel(cfg, rng_seed);
}

} // namespace certwatch
