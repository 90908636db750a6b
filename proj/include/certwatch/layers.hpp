#pragma once

// Network layers on top of the autodiff core. conv2d is the hot path and
// goes through im2col + a saxpy-style GEMM; everything trains on a single
// core at desk scale, so these loops have to vectorize well.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "certwatch/autodiff.hpp"

namespace certwatch {
namespace detail {

// C[M,N] += A[M,K] * B[K,N]
inline void gemm_axpy(const float* A, const float* B, float* C,
                      int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        float* c = C + static_cast<std::size_t>(m) * N;
        const float* a = A + static_cast<std::size_t>(m) * K;
        for (int k = 0; k < K; ++k) {
            const float av = a[k];
            if (av == 0.0f) continue;
            const float* b = B + static_cast<std::size_t>(k) * N;
            for (int n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

// C[K,N] += A^T[K,M] * B[M,N]  (A given as [M,K])
inline void gemm_at_b(const float* A, const float* B, float* C,
                      int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        const float* a = A + static_cast<std::size_t>(m) * K;
        const float* b = B + static_cast<std::size_t>(m) * N;
        for (int k = 0; k < K; ++k) {
            const float av = a[k];
            if (av == 0.0f) continue;
            float* c = C + static_cast<std::size_t>(k) * N;
            for (int n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

// Dot product with eight independent accumulators so the reduction
// vectorizes without reassociation flags.
inline float dot_f(const float* a, const float* b, int n) {
    float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    float s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
              ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

// C[M,K] += A[M,N] * B^T[N,K]  (B given as [K,N])
inline void gemm_a_bt(const float* A, const float* B, float* C,
                      int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        const float* a = A + static_cast<std::size_t>(m) * N;
        for (int k = 0; k < K; ++k)
            C[static_cast<std::size_t>(m) * K + k] +=
                dot_f(a, B + static_cast<std::size_t>(k) * N, N);
    }
}

// Zero-padded patch extraction: cols is [C_in*k*k, P] with P = H_out*W_out.
inline void im2col(const Tensor& x, int k, int stride, int pad,
                   int h_out, int w_out, std::vector<float>& cols) {
    const int c_in = x.shape[0], h = x.shape[1], w = x.shape[2];
    const int P = h_out * w_out;
    cols.assign(static_cast<std::size_t>(c_in) * k * k * P, 0.0f);
    for (int ci = 0; ci < c_in; ++ci)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                float* dst = cols.data() +
                             (static_cast<std::size_t>(ci) * k * k + ki * k + kj) * P;
                for (int oi = 0; oi < h_out; ++oi) {
                    int ii = oi * stride - pad + ki;
                    if (ii < 0 || ii >= h) continue;
                    const float* src = x.data.data() +
                                       (static_cast<std::size_t>(ci) * h + ii) * w;
                    float* drow = dst + static_cast<std::size_t>(oi) * w_out;
                    for (int oj = 0; oj < w_out; ++oj) {
                        int jj = oj * stride - pad + kj;
                        if (jj >= 0 && jj < w) drow[oj] = src[jj];
                    }
                }
            }
}

inline void col2im_accum(const std::vector<float>& cols, int c_in, int h, int w,
                         int k, int stride, int pad, int h_out, int w_out,
                         Tensor& dx) {
    const int P = h_out * w_out;
    for (int ci = 0; ci < c_in; ++ci)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                const float* src = cols.data() +
                                   (static_cast<std::size_t>(ci) * k * k + ki * k + kj) * P;
                for (int oi = 0; oi < h_out; ++oi) {
                    int ii = oi * stride - pad + ki;
                    if (ii < 0 || ii >= h) continue;
                    float* drow = dx.data.data() +
                                  (static_cast<std::size_t>(ci) * h + ii) * w;
                    const float* srow = src + static_cast<std::size_t>(oi) * w_out;
                    for (int oj = 0; oj < w_out; ++oj) {
                        int jj = oj * stride - pad + kj;
                        if (jj >= 0 && jj < w) drow[jj] += srow[oj];
                    }
                }
            }
}

} // namespace detail

// input [C_in,H,W], kernels [C_out,C_in,k,k], bias [C_out], zero padding.
inline Var conv2d(const Var& input, const Var& kernels, const Var& bias,
                  int stride, int padding) {
    const Tensor& x = input->value;
    const Tensor& w = kernels->value;
    if (x.rank() != 3 || w.rank() != 4)
        throw std::invalid_argument("conv2d: expected input rank 3 and kernels rank 4");
    if (x.shape[0] != w.shape[1])
        throw std::invalid_argument("conv2d: input channels " + x.shape_str() +
                                    " do not match kernel channels " + w.shape_str());
    if (w.shape[2] != w.shape[3])
        throw std::invalid_argument("conv2d: square kernels expected");
    const int c_out = w.shape[0], c_in = w.shape[1], k = w.shape[2];
    const int h = x.shape[1], ww = x.shape[2];
    if (stride <= 0) throw std::invalid_argument("conv2d: stride must be positive");
    if (padding < 0) throw std::invalid_argument("conv2d: padding must be non-negative");
    if (k > h + 2 * padding || k > ww + 2 * padding)
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    if (bias->value.numel() != c_out)
        throw std::invalid_argument("conv2d: bias size mismatch");
    const int h_out = (h + 2 * padding - k) / stride + 1;
    const int w_out = (ww + 2 * padding - k) / stride + 1;
    const int P = h_out * w_out;
    const int K = c_in * k * k;

    auto cols = std::make_shared<std::vector<float>>();
    detail::im2col(x, k, stride, padding, h_out, w_out, *cols);

    Tensor out({c_out, h_out, w_out});
    for (int co = 0; co < c_out; ++co) {
        float b = bias->value[co];
        float* o = out.data.data() + static_cast<std::size_t>(co) * P;
        for (int p = 0; p < P; ++p) o[p] = b;
    }
    detail::gemm_axpy(w.data.data(), cols->data(), out.data.data(), c_out, K, P);

    int pad = padding;
    return detail::make_op(std::move(out), {input, kernels, bias},
                           [cols, k, stride, pad, h_out, w_out](Node& n) {
        auto& input = *n.parents[0];
        auto& kernels = *n.parents[1];
        auto& bias = *n.parents[2];
        const int c_out = n.value.shape[0];
        const int P = h_out * w_out;
        const int c_in = kernels.value.shape[1];
        const int K = c_in * k * k;
        if (bias.requires_grad) {
            for (int co = 0; co < c_out; ++co) {
                const float* g = n.grad.data.data() + static_cast<std::size_t>(co) * P;
                float s = 0.0f;
                for (int p = 0; p < P; ++p) s += g[p];
                bias.grad[co] += s;
            }
        }
        if (kernels.requires_grad)
            detail::gemm_a_bt(n.grad.data.data(), cols->data(),
                              kernels.grad.data.data(), c_out, K, P);
        if (input.requires_grad) {
            std::vector<float> dcols(static_cast<std::size_t>(K) * P, 0.0f);
            detail::gemm_at_b(kernels.value.data.data(), n.grad.data.data(),
                              dcols.data(), c_out, K, P);
            detail::col2im_accum(dcols, c_in, input.value.shape[1],
                                 input.value.shape[2], k, stride, pad,
                                 h_out, w_out, input.grad);
        }
    });
}

// x [n], W [n,m], b [m] -> x.W + b
inline Var linear(const Var& x, const Var& W, const Var& b) {
    const Tensor& xv = x->value;
    const Tensor& wv = W->value;
    if (wv.rank() != 2 || xv.numel() != wv.shape[0])
        throw std::invalid_argument("linear: dimension mismatch, x " + xv.shape_str() +
                                    " vs W " + wv.shape_str());
    const int n = wv.shape[0], m = wv.shape[1];
    if (b->value.numel() != m)
        throw std::invalid_argument("linear: bias size mismatch");
    Tensor out({m});
    for (int j = 0; j < m; ++j) out[j] = b->value[j];
    for (int i = 0; i < n; ++i) {
        const float xi = xv[i];
        if (xi == 0.0f) continue;
        const float* wrow = wv.data.data() + static_cast<std::size_t>(i) * m;
        for (int j = 0; j < m; ++j) out[j] += xi * wrow[j];
    }
    return detail::make_op(std::move(out), {x, W, b}, [n, m](Node& nd) {
        auto& x = *nd.parents[0];
        auto& W = *nd.parents[1];
        auto& b = *nd.parents[2];
        const float* g = nd.grad.data.data();
        if (b.requires_grad)
            for (int j = 0; j < m; ++j) b.grad[j] += g[j];
        for (int i = 0; i < n; ++i) {
            const float* wrow = W.value.data.data() + static_cast<std::size_t>(i) * m;
            if (x.requires_grad) {
                float s = 0.0f;
                for (int j = 0; j < m; ++j) s += g[j] * wrow[j];
                x.grad[i] += s;
            }
            if (W.requires_grad) {
                float* dwrow = W.grad.data.data() + static_cast<std::size_t>(i) * m;
                const float xi = x.value[i];
                for (int j = 0; j < m; ++j) dwrow[j] += xi * g[j];
            }
        }
    });
}

enum class PoolKind { Max, Avg };

// Global pooling [C,H,W] -> [C].
inline Var global_pool(const Var& input, PoolKind kind) {
    const Tensor& x = input->value;
    if (x.rank() != 3) throw std::invalid_argument("global_pool: rank-3 input expected");
    const int c = x.shape[0], hw = x.shape[1] * x.shape[2];
    Tensor out({c});
    auto argmax = std::make_shared<std::vector<int>>();
    if (kind == PoolKind::Max) argmax->resize(static_cast<std::size_t>(c));
    for (int ci = 0; ci < c; ++ci) {
        const float* p = x.data.data() + static_cast<std::size_t>(ci) * hw;
        if (kind == PoolKind::Avg) {
            float s = 0.0f;
            for (int i = 0; i < hw; ++i) s += p[i];
            out[ci] = s / static_cast<float>(hw);
        } else {
            int best = 0;
            for (int i = 1; i < hw; ++i)
                if (p[i] > p[best]) best = i;
            (*argmax)[static_cast<std::size_t>(ci)] = best;
            out[ci] = p[best];
        }
    }
    return detail::make_op(std::move(out), {input}, [kind, hw, argmax](Node& n) {
        auto& input = *n.parents[0];
        const int c = n.value.numel();
        for (int ci = 0; ci < c; ++ci) {
            float* gp = input.grad.data.data() + static_cast<std::size_t>(ci) * hw;
            if (kind == PoolKind::Avg) {
                float g = n.grad[ci] / static_cast<float>(hw);
                for (int i = 0; i < hw; ++i) gp[i] += g;
            } else {
                gp[(*argmax)[static_cast<std::size_t>(ci)]] += n.grad[ci];
            }
        }
    });
}

// Windowed 2x2 stride-2 pooling; kept for completeness, the detector itself
// only uses the global variants.
inline Var pool2d(const Var& input, PoolKind kind, bool global) {
    if (global) return global_pool(input, kind);
    const Tensor& x = input->value;
    if (x.rank() != 3) throw std::invalid_argument("pool2d: rank-3 input expected");
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    if (h < 2 || w < 2) throw std::invalid_argument("pool2d: input too small for 2x2 window");
    const int ho = h / 2, wo = w / 2;
    Tensor out({c, ho, wo});
    auto argmax = std::make_shared<std::vector<int>>();
    if (kind == PoolKind::Max) argmax->resize(static_cast<std::size_t>(c) * ho * wo);
    for (int ci = 0; ci < c; ++ci)
        for (int oi = 0; oi < ho; ++oi)
            for (int oj = 0; oj < wo; ++oj) {
                float best = -1e30f, s = 0.0f;
                int besti = 0;
                for (int di = 0; di < 2; ++di)
                    for (int dj = 0; dj < 2; ++dj) {
                        int idx = (ci * h + oi * 2 + di) * w + oj * 2 + dj;
                        float v = x.data[static_cast<std::size_t>(idx)];
                        s += v;
                        if (v > best) { best = v; besti = idx; }
                    }
                if (kind == PoolKind::Avg) {
                    out.at(ci, oi, oj) = s * 0.25f;
                } else {
                    out.at(ci, oi, oj) = best;
                    (*argmax)[static_cast<std::size_t>((ci * ho + oi) * wo + oj)] = besti;
                }
            }
    return detail::make_op(std::move(out), {input}, [kind, h, w, ho, wo, argmax](Node& n) {
        auto& input = *n.parents[0];
        const int c = n.value.shape[0];
        for (int ci = 0; ci < c; ++ci)
            for (int oi = 0; oi < ho; ++oi)
                for (int oj = 0; oj < wo; ++oj) {
                    float g = n.grad.at(ci, oi, oj);
                    if (kind == PoolKind::Avg) {
                        for (int di = 0; di < 2; ++di)
                            for (int dj = 0; dj < 2; ++dj)
                                input.grad.data[static_cast<std::size_t>(
                                    (ci * h + oi * 2 + di) * w + oj * 2 + dj)] += g * 0.25f;
                    } else {
                        input.grad.data[static_cast<std::size_t>(
                            (*argmax)[static_cast<std::size_t>((ci * ho + oi) * wo + oj)])] += g;
                    }
                }
    });
}

} // namespace certwatch
