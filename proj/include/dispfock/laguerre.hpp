#pragma once

// Generalized Laguerre polynomials by upward three-term recurrence, and the
// Debye-Waller style matrix-element factors built from them.

#include <cmath>
#include <stdexcept>

#include "dispfock/errors.hpp"

namespace dispfock {

/// L_n^(alpha)(x).  Upward recurrence, stable for the n <= ~50 range used here.
inline double laguerre(int n, double alpha, double x) {
    if (n < 0) return 0.0;
    double prev = 1.0;
    if (n == 0) return prev;
    double cur = 1.0 + alpha - x;
    for (int k = 1; k < n; ++k) {
        const double next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    return cur;
}

inline void check_eta(double eta) {
    if (!(eta >= 0.0 && eta < 1.0)) throw BoundsError("Lamb-Dicke parameter must lie in [0, 1)");
}

/// f(n) = e^{-eta^2/2} L_n^(1)(eta^2) / (n+1): the sideband matrix element <n+1|..|n> relative to eta*sqrt(n+1).
inline double laguerre_f(int n, double eta) {
    check_eta(eta);
    if (n < 0) throw BoundsError("occupation must be non-negative");
    const double x = eta * eta;
    return std::exp(-0.5 * x) * laguerre(n, 1.0, x) / (n + 1.0);
}

/// B(n) = e^{-eta^2/2} L_n(eta^2): carrier-like factor a spectator mode contributes.
inline double spectator_b(int n, double eta) {
    check_eta(eta);
    if (n < 0) throw BoundsError("occupation must be non-negative");
    const double x = eta * eta;
    return std::exp(-0.5 * x) * laguerre(n, 0.0, x);
}

} // namespace dispfock
