#pragma once

// Haar-wavelet perceptual similarity for RGB images in [0,1]. Two-scale
// local similarity maps on luminance plus a chroma term, weighted by
// third-scale wavelet magnitude, logistic-squashed and inverse-squashed
// after the weighted average. Constants C = 30 and alpha = 4.2 are the
// published reference values on the [0,255] intensity scale.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "certwatch/tensor.hpp"

namespace certwatch {
namespace detail {

inline constexpr double kHaarC = 30.0;
inline constexpr double kHaarAlpha = 4.2;

struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
};

// BT.601 luma plus the two NTSC chroma axes, on the [0,255] scale.
inline void to_yiq(const Tensor& img, Plane& Y, Plane& I, Plane& Q) {
    const int h = img.shape[1], w = img.shape[2];
    Y = {h, w, std::vector<double>(static_cast<std::size_t>(h) * w)};
    I = {h, w, std::vector<double>(static_cast<std::size_t>(h) * w)};
    Q = {h, w, std::vector<double>(static_cast<std::size_t>(h) * w)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double r = img.at(0, y, x) * 255.0;
            double g = img.at(1, y, x) * 255.0;
            double b = img.at(2, y, x) * 255.0;
            Y.at(y, x) = 0.299 * r + 0.587 * g + 0.114 * b;
            I.at(y, x) = 0.596 * r - 0.274 * g - 0.322 * b;
            Q.at(y, x) = 0.211 * r - 0.523 * g + 0.312 * b;
        }
}

// Zero-padded "same" convolution with a square kernel.
inline Plane conv_same(const Plane& p, const std::vector<double>& k, int n) {
    Plane out{p.h, p.w, std::vector<double>(p.v.size(), 0.0)};
    const int off = n / 2;
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < p.w; ++x) {
            double s = 0.0;
            for (int ky = 0; ky < n; ++ky) {
                int sy = y + ky - off;
                if (sy < 0 || sy >= p.h) continue;
                for (int kx = 0; kx < n; ++kx) {
                    int sx = x + kx - off;
                    if (sx < 0 || sx >= p.w) continue;
                    s += p.at(sy, sx) * k[static_cast<std::size_t>(ky) * n + kx];
                }
            }
            out.at(y, x) = s;
        }
    return out;
}

// Haar high-pass at the given scale: a 2^j square, negative top half,
// normalized by the area. orientation 0 detects horizontal edges; the
// transpose detects vertical ones.
inline std::vector<double> haar_kernel(int scale, int orientation, int& n_out) {
    const int n = 1 << scale;
    std::vector<double> k(static_cast<std::size_t>(n) * n);
    const double mag = std::pow(2.0, -scale);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            bool neg = orientation == 0 ? (y < n / 2) : (x < n / 2);
            k[static_cast<std::size_t>(y) * n + x] = (neg ? -mag : mag);
        }
    n_out = n;
    return k;
}

inline double sim(double a, double b) {
    return (2.0 * a * b + kHaarC) / (a * a + b * b + kHaarC);
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-kHaarAlpha * x)); }
inline double logistic_inv(double y) { return std::log(y / (1.0 - y)) / kHaarAlpha; }

} // namespace detail

// Similarity score in [0,1]; 1.0 for identical inputs.
inline double haarpsi(const Tensor& reference, const Tensor& distorted) {
    if (reference.rank() != 3 || reference.shape[0] != 3)
        throw std::invalid_argument("haarpsi: expected [3,H,W] images");
    if (reference.shape != distorted.shape)
        throw std::invalid_argument("haarpsi: image dimensions differ: " +
                                    reference.shape_str() + " vs " + distorted.shape_str());
    using detail::Plane;
    Plane y1, i1, q1, y2, i2, q2;
    detail::to_yiq(reference, y1, i1, q1);
    detail::to_yiq(distorted, y2, i2, q2);
    const int H = y1.h, W = y1.w;

    // wavelet magnitude maps for luminance, scales 1..3, both orientations
    Plane mag1[2][3], mag2[2][3];
    for (int ori = 0; ori < 2; ++ori)
        for (int scale = 1; scale <= 3; ++scale) {
            int n = 0;
            auto k = detail::haar_kernel(scale, ori, n);
            Plane c1 = detail::conv_same(y1, k, n);
            Plane c2 = detail::conv_same(y2, k, n);
            for (auto& v : c1.v) v = std::fabs(v);
            for (auto& v : c2.v) v = std::fabs(v);
            mag1[ori][scale - 1] = std::move(c1);
            mag2[ori][scale - 1] = std::move(c2);
        }
    // chroma: 2x2 mean magnitude
    std::vector<double> mean_k(4, 0.25);
    Plane ci1 = detail::conv_same(i1, mean_k, 2);
    Plane ci2 = detail::conv_same(i2, mean_k, 2);
    Plane cq1 = detail::conv_same(q1, mean_k, 2);
    Plane cq2 = detail::conv_same(q2, mean_k, 2);

    double num = 0.0, den = 0.0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double hs[3], wgt[3];
            for (int ori = 0; ori < 2; ++ori) {
                double s = 0.0;
                for (int scale = 0; scale < 2; ++scale)
                    s += detail::sim(mag1[ori][scale].at(y, x), mag2[ori][scale].at(y, x));
                hs[ori] = 0.5 * s;
                wgt[ori] = std::max(mag1[ori][2].at(y, x), mag2[ori][2].at(y, x));
            }
            hs[2] = 0.5 * (detail::sim(std::fabs(ci1.at(y, x)), std::fabs(ci2.at(y, x))) +
                           detail::sim(std::fabs(cq1.at(y, x)), std::fabs(cq2.at(y, x))));
            wgt[2] = 0.5 * (wgt[0] + wgt[1]);
            for (int k = 0; k < 3; ++k) {
                num += detail::logistic(hs[k]) * wgt[k];
                den += wgt[k];
            }
        }
    if (den <= 1e-12) {
        // structure-free images (e.g. constants): fall back to uniform weights
        num = den = 0.0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double s = detail::sim(std::fabs(ci1.at(y, x)), std::fabs(ci2.at(y, x)));
                num += detail::logistic(s);
                den += 1.0;
            }
    }
    double v = detail::logistic_inv(num / den);
    return v * v;
}

} // namespace certwatch
