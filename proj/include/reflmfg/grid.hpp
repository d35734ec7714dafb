#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace reflmfg {

/**
 * Space-time discretization of [0,L] x [0,T] for a chain with spatial step h
 * and diffusion coefficient sigma.
 *
 * The time step is tied to the spatial step by delta = h^2 / sigma^2, so the
 * chain's one-step variance matches sigma^2 * delta.  Interior states are
 * {0, h, ..., L}; the two ghost states -h and L+h exist only transiently
 * (the chain is projected back to 0 or L within the same time instant).
 */
struct Discretization {
    double h = 0;
    double L = 0;
    double T = 0;
    double sigma = 0;
    double delta = 0; ///< time step, exactly h*h/(sigma*sigma)
    int n_time = 0;   ///< number of time steps; nodes are 0..n_time

    /// Interior states in increasing order; front() == 0, back() == L.
    std::vector<double> interior_states;

    /// Set when a drift bound c_B was supplied: true iff h < sigma^2 / c_B,
    /// i.e. iff every kernel probability is positive without clamping.
    std::optional<bool> positivity_ok;

    int n_states() const { return static_cast<int>(interior_states.size()); }
    double state(int i) const { return interior_states[static_cast<size_t>(i)]; }
    double time(int j) const { return delta * j; }
    double ghost_low() const { return -h; }
    double ghost_high() const { return L + h; }

    /// Index k such that state(k) = floor_to_grid(x).  RangeError outside [0,L].
    int floor_index(double x) const {
        if (!(x >= -1e-9 * L) || !(x <= L * (1.0 + 1e-9)))
            throw RangeError("floor_index: x = " + std::to_string(x) +
                             " outside [0, " + std::to_string(L) + "]");
        // The nudge keeps exact grid points on their own cell: x = k*h can
        // land an ulp below k after the division.
        int k = static_cast<int>(std::floor(x / h + 1e-9));
        if (k < 0) k = 0;
        if (k >= n_states()) k = n_states() - 1;
        return k;
    }
};

/// Largest grid point <= x (up to rounding slack); idempotent on interior_states.
inline double floor_to_grid(double x, const Discretization& d) {
    return d.state(d.floor_index(x));
}

/**
 * Validates (h, L, T, sigma) and assembles the discretization.
 *
 * L/h and T/delta must be integers to a relative tolerance of 1e-9 and are
 * snapped to the nearest integer; a larger mismatch raises DivisibilityError.
 * If a drift bound c_B is supplied, positivity_ok records whether h is small
 * enough that no kernel probability needs clamping.
 */
inline Discretization build_discretization(double h, double L, double T, double sigma,
                                           std::optional<double> c_B = std::nullopt) {
    if (!(h > 0) || !(L > 0) || !(T > 0) || !(sigma > 0))
        throw ParameterError("build_discretization: h, L, T, sigma must all be positive");
    if (!(h <= L))
        throw ParameterError("build_discretization: h must not exceed L");

    const double ratio_space = L / h;
    const double snapped_space = std::round(ratio_space);
    if (std::abs(ratio_space - snapped_space) > 1e-9 * std::max(1.0, std::abs(ratio_space)))
        throw DivisibilityError("build_discretization: L/h = " + std::to_string(ratio_space) +
                                " is not an integer");

    Discretization d;
    d.h = h;
    d.L = L;
    d.T = T;
    d.sigma = sigma;
    d.delta = h * h / (sigma * sigma);

    const double ratio_time = T / d.delta;
    const double snapped_time = std::round(ratio_time);
    if (std::abs(ratio_time - snapped_time) > 1e-9 * std::max(1.0, std::abs(ratio_time)))
        throw DivisibilityError("build_discretization: T/delta = " + std::to_string(ratio_time) +
                                " is not an integer");
    d.n_time = static_cast<int>(snapped_time);

    const int n = static_cast<int>(snapped_space);
    d.interior_states.resize(static_cast<size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) d.interior_states[static_cast<size_t>(i)] = i * h;
    d.interior_states.back() = L; // snap the top node onto the barrier

    if (c_B) {
        if (!(*c_B >= 0)) throw ParameterError("build_discretization: c_B must be >= 0");
        d.positivity_ok = (*c_B == 0.0) || (h < sigma * sigma / *c_B);
    }
    return d;
}

} // namespace reflmfg
