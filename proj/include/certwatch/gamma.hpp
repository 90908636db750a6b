#pragma once

// log-gamma / digamma / trigamma for the Dirichlet KL term of the
// uncertainty loss. Arguments here are alpha values, always >= 1, but the
// implementations are valid for any x > 0.

#include <cmath>
#include <stdexcept>

namespace certwatch {

// Lanczos approximation (g = 7, 9 coefficients).
inline double lgamma_lanczos(double x) {
    if (!(x > 0.0)) throw std::domain_error("lgamma_lanczos: requires x > 0");
    static const double g = 7.0;
    static const double c[9] = {
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    };
    if (x < 0.5) {
        // Reflection; not hit by Dirichlet alphas but kept for completeness.
        const double pi = 3.14159265358979323846;
        return std::log(pi / std::sin(pi * x)) - lgamma_lanczos(1.0 - x);
    }
    double z = x - 1.0;
    double a = c[0];
    for (int i = 1; i < 9; ++i) a += c[i] / (z + i);
    double t = z + g + 0.5;
    return 0.5 * std::log(2.0 * 3.14159265358979323846) +
           (z + 0.5) * std::log(t) - t + std::log(a);
}

// Recurrence down to x >= 6, then the asymptotic series.
inline double digamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("digamma: requires x > 0");
    double r = 0.0;
    while (x < 6.0) {
        r -= 1.0 / x;
        x += 1.0;
    }
    double inv = 1.0 / x, inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - 1/(12x^2) + 1/(120x^4) - 1/(252x^6) + ...
    double s = std::log(x) - 0.5 * inv -
               inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
    return r + s;
}

inline double trigamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("trigamma: requires x > 0");
    double r = 0.0;
    while (x < 6.0) {
        r += 1.0 / (x * x);
        x += 1.0;
    }
    double inv = 1.0 / x, inv2 = inv * inv;
    // psi'(x) ~ 1/x + 1/(2x^2) + 1/(6x^3) - 1/(30x^5) + 1/(42x^7) - ...
    double s = inv + 0.5 * inv2 +
               inv2 * inv * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)));
    return r + s;
}

} // namespace certwatch
