#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "forward.hpp"
#include "grid.hpp"
#include "mdp.hpp"
#include "model.hpp"

namespace reflmfg {

/// Joint one-step law of two chains driven by one noise source.
struct CoupledProbs {
    double both_up = 0.0;
    double up_down = 0.0; ///< first chain up, second down
    double down_up = 0.0;
    double both_down = 0.0;
    bool clamped = false;
};

/**
 * Monotone coupling of two drift rates b1, b2 at one interior step:
 *
 *   P(+h, +h) = (h min(b1,b2) + sigma^2) / (2 sigma^2)
 *   P(+h, -h) = h (b1 - b2)^+ / (2 sigma^2)
 *   P(-h, +h) = h (b1 - b2)^- / (2 sigma^2)
 *   P(-h, -h) = (-h max(b1,b2) + sigma^2) / (2 sigma^2)
 *
 * Each margin reproduces the single-chain kernel for its own drift, and the
 * chains disagree only with probability h |b1 - b2| / (2 sigma^2), which is
 * what makes the coupled distance a usable contraction witness.  Negative
 * entries (possible only when a margin itself would clamp) are clipped to 0
 * and the table renormalized, with the event counted.
 */
inline CoupledProbs coupled_transition(double b1, double b2, const Discretization& d,
                                       ClampStats* stats = nullptr) {
    const double s2 = d.sigma * d.sigma;
    const double diff = b1 - b2;
    CoupledProbs p;
    p.both_up = (d.h * std::min(b1, b2) + s2) / (2.0 * s2);
    p.up_down = d.h * std::max(diff, 0.0) / (2.0 * s2);
    p.down_up = d.h * std::max(-diff, 0.0) / (2.0 * s2);
    p.both_down = (-d.h * std::max(b1, b2) + s2) / (2.0 * s2);
    if (p.both_up < 0.0 || p.both_up > 1.0 || p.both_down < 0.0 || p.both_down > 1.0 ||
        p.up_down > 1.0 || p.down_up > 1.0) {
        p.both_up = std::min(1.0, std::max(0.0, p.both_up));
        p.up_down = std::min(1.0, std::max(0.0, p.up_down));
        p.down_up = std::min(1.0, std::max(0.0, p.down_up));
        p.both_down = std::min(1.0, std::max(0.0, p.both_down));
        const double total = p.both_up + p.up_down + p.down_up + p.both_down;
        p.both_up /= total;
        p.up_down /= total;
        p.down_up /= total;
        p.both_down /= total;
        p.clamped = true;
        if (stats) ++stats->count;
    }
    return p;
}

/**
 * Two optimally controlled chains, one per frozen flow, driven jointly.  Three
 * step kinds: both interior (one coupled rate step, time advances, both step
 * counters advance), exactly one at a ghost (that chain is projected, time
 * frozen, only its counter advances, the other chain does not move), both at
 * ghosts (both projected, time frozen, both counters advance).  Extracting
 * chain k's records at the indices where its own counter increments recovers
 * an ordinary single-chain path.
 */
struct CoupledPathPair {
    // one entry per joint record
    std::vector<double> t;
    std::vector<double> z1, z2;
    std::vector<long> n1, n2; ///< per-chain step counters

    // sampled at time nodes j = 0..n_time, after projections
    std::vector<double> x1, x2, y1, y2, r1, r2;

    double sup_abs_dx = 0.0; ///< max over nodes of |x1 - x2|
    long clamp_count = 0;
};

inline CoupledPathPair simulate_coupled(std::uint64_t seed, const MfgModel& model,
                                        const Discretization& d, const MeasureFlow& nu,
                                        const MeasureFlow& nu2, const Policy& policy1,
                                        const Policy& policy2, double x0) {
    model.validate();
    const auto mom1 = flow_moments(model, d, nu);
    const auto mom2 = flow_moments(model, d, nu2);
    const int n = d.n_states();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ClampStats clamps;

    CoupledPathPair out;
    const size_t nodes = static_cast<size_t>(d.n_time) + 1;
    out.x1.resize(nodes);
    out.x2.resize(nodes);
    out.y1.resize(nodes);
    out.y2.resize(nodes);
    out.r1.resize(nodes);
    out.r2.resize(nodes);

    int i1 = d.floor_index(x0), i2 = i1;
    int j = 0;
    long c1 = 0, c2 = 0;
    double Y1 = 0, Y2 = 0, R1 = 0, R2 = 0;

    auto state_of = [&](int k) {
        if (k < 0) return d.ghost_low();
        if (k >= n) return d.ghost_high();
        return d.state(k);
    };
    auto push = [&] {
        out.t.push_back(d.time(j));
        out.z1.push_back(state_of(i1));
        out.z2.push_back(state_of(i2));
        out.n1.push_back(c1);
        out.n2.push_back(c2);
    };
    auto record_node = [&] {
        out.x1[static_cast<size_t>(j)] = state_of(i1);
        out.x2[static_cast<size_t>(j)] = state_of(i2);
        out.y1[static_cast<size_t>(j)] = Y1;
        out.y2[static_cast<size_t>(j)] = Y2;
        out.r1[static_cast<size_t>(j)] = R1;
        out.r2[static_cast<size_t>(j)] = R2;
    };

    push();
    record_node();

    while (true) {
        const bool g1 = (i1 < 0 || i1 >= n), g2 = (i2 < 0 || i2 >= n);
        if (g1 || g2) {
            if (g1) {
                if (i1 < 0) {
                    i1 = 0;
                    Y1 += d.h;
                } else {
                    i1 = n - 1;
                    R1 += d.h;
                }
                ++c1;
            }
            if (g2) {
                if (i2 < 0) {
                    i2 = 0;
                    Y2 += d.h;
                } else {
                    i2 = n - 1;
                    R2 += d.h;
                }
                ++c2;
            }
            push();
            record_node();
            if (j == d.n_time) break;
            continue;
        }
        if (j == d.n_time) break;

        const double t = d.time(j);
        const double b1 = model.drift(t, mom1[static_cast<size_t>(j)], d.state(i1),
                                      policy1.u[static_cast<size_t>(j)][i1]);
        const double b2 = model.drift(t, mom2[static_cast<size_t>(j)], d.state(i2),
                                      policy2.u[static_cast<size_t>(j)][i2]);
        const auto p = coupled_transition(b1, b2, d, &clamps);
        const double draw = unit(rng);
        int s1, s2;
        if (draw < p.both_up) {
            s1 = 1;
            s2 = 1;
        } else if (draw < p.both_up + p.up_down) {
            s1 = 1;
            s2 = -1;
        } else if (draw < p.both_up + p.up_down + p.down_up) {
            s1 = -1;
            s2 = 1;
        } else {
            s1 = -1;
            s2 = -1;
        }
        i1 += s1;
        i2 += s2;
        ++c1;
        ++c2;
        ++j;
        push();
        if (!(i1 < 0 || i1 >= n || i2 < 0 || i2 >= n)) record_node();
    }

    out.clamp_count = clamps.count;
    for (size_t k = 0; k < nodes; ++k)
        out.sup_abs_dx = std::max(out.sup_abs_dx, std::abs(out.x1[k] - out.x2[k]));
    return out;
}

/// Monte Carlo estimate of E sup_t |X1 - X2|^2 with a normal-approximation
/// confidence interval, and the implied contraction ratio.
struct ContractionEstimate {
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    /// estimate / (h^2 + flow_dist^2).  An upper-bound witness produced by
    /// this particular coupling, not an infimum over couplings.
    double q_hat = 0.0;
    double flow_dist = 0.0;
    long n_samples = 0;
    long clamp_count = 0;
};

inline ContractionEstimate estimate_contraction(std::uint64_t seed, long n_samples,
                                                const MfgModel& model, const Discretization& d,
                                                const MeasureFlow& nu, const MeasureFlow& nu2,
                                                double x0) {
    if (n_samples < 1) throw ParameterError("estimate_contraction: need n_samples >= 1");
    const auto sol1 = backward_solve(model, d, nu);
    const auto sol2 = backward_solve(model, d, nu2);

    ContractionEstimate est;
    est.n_samples = n_samples;
    est.flow_dist = flow_distance(nu, nu2, d);
    est.clamp_count = sol1.clamp_count + sol2.clamp_count;

    double sum = 0.0, sum_sq = 0.0;
    for (long k = 0; k < n_samples; ++k) {
        auto pair = simulate_coupled(seed + static_cast<std::uint64_t>(k), model, d, nu, nu2,
                                     sol1.policy, sol2.policy, x0);
        const double v = pair.sup_abs_dx * pair.sup_abs_dx;
        sum += v;
        sum_sq += v * v;
        est.clamp_count += pair.clamp_count;
    }
    const double nn = static_cast<double>(n_samples);
    est.estimate = sum / nn;
    const double var = std::max(0.0, sum_sq / nn - est.estimate * est.estimate);
    const double half = 1.96 * std::sqrt(var / nn);
    est.ci_low = est.estimate - half;
    est.ci_high = est.estimate + half;
    est.q_hat = est.estimate / (d.h * d.h + est.flow_dist * est.flow_dist);
    return est;
}

} // namespace reflmfg
