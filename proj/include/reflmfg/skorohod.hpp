#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"

namespace reflmfg {

/// A discrete-time real path psi_0, psi_1, ... (no grid structure assumed).
struct GridPath {
    std::vector<double> values;
};

/**
 * Output of the two-sided reflection map on [0,L]:
 *   phi[n] == psi[n] + zeta1[n] - zeta2[n],  phi in [0,L],
 * with zeta1, zeta2 nondecreasing from 0 and each pushing only while phi
 * sits on its barrier (zeta1 at 0, zeta2 at L).
 */
struct SkorohodTriple {
    std::vector<double> phi;   ///< reflected path, in [0,L]
    std::vector<double> zeta1; ///< cumulative push at the lower barrier 0
    std::vector<double> zeta2; ///< cumulative push at the upper barrier L
};

/**
 * Two-sided Skorohod map by one-step projection:
 *
 *   z        = phi[n] + (psi[n+1] - psi[n])
 *   phi[n+1] = min(L, max(0, z))
 *
 * with the clipped amount credited to zeta1 (z < 0) or zeta2 (z > L).  The
 * projection recursion agrees with the exact two-sided map as long as no
 * single increment exceeds L in magnitude, which is why increments larger
 * than L are rejected rather than processed.
 */
inline SkorohodTriple solve_skorohod(const GridPath& psi, double L) {
    if (!(L > 0)) throw ParameterError("solve_skorohod: L must be positive");
    const auto& w = psi.values;
    if (w.empty()) throw RangeError("solve_skorohod: empty path");
    if (!(w[0] >= 0.0 && w[0] <= L))
        throw RangeError("solve_skorohod: psi[0] = " + std::to_string(w[0]) +
                         " outside [0, " + std::to_string(L) + "]");

    SkorohodTriple out;
    out.phi.resize(w.size());
    out.zeta1.assign(w.size(), 0.0);
    out.zeta2.assign(w.size(), 0.0);
    out.phi[0] = w[0];

    for (size_t n = 0; n + 1 < w.size(); ++n) {
        const double inc = w[n + 1] - w[n];
        if (std::abs(inc) > L * (1.0 + 1e-12))
            throw IncrementError("solve_skorohod: increment " + std::to_string(inc) +
                                 " at step " + std::to_string(n) + " exceeds L");
        const double z = out.phi[n] + inc;
        double lower = 0.0, upper = 0.0;
        double p = z;
        if (p < 0.0) {
            lower = -p;
            p = 0.0;
        } else if (p > L) {
            upper = p - L;
            p = L;
        }
        out.phi[n + 1] = p;
        out.zeta1[n + 1] = out.zeta1[n] + lower;
        out.zeta2[n + 1] = out.zeta2[n] + upper;
    }
    return out;
}

} // namespace reflmfg
