#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "mdp.hpp"
#include "model.hpp"

namespace reflmfg {

/// Marginal law of the controlled chain per time node, with the cumulative
/// expected barrier pushes accumulated alongside.
struct ForwardResult {
    MeasureFlow flow;
    std::vector<double> expected_Y; ///< cumulative expected push at 0, per node
    std::vector<double> expected_R; ///< cumulative expected push at L, per node
    std::vector<double> mean_flow;  ///< mean state per node
    long clamp_count = 0;
};

/**
 * Exact push-forward of the initial law under the feedback policy: each node's
 * weight vector is multiplied by the two-point kernel.  Mass that steps past a
 * barrier is returned to it within the same node (the ghost states carry no
 * mass at node times); the returned mass, times h, is what the expected push
 * accumulators collect.
 */
inline ForwardResult propagate_marginals(const MfgModel& model, const Discretization& d,
                                         const MeasureFlow& nu, const Policy& policy,
                                         const Marginal& initial) {
    model.validate();
    validate_marginal(initial, d);
    const auto mom = flow_moments(model, d, nu);
    if (policy.u.size() != static_cast<size_t>(d.n_time))
        throw GridMismatchError("propagate_marginals: policy does not match grid");
    const int n = d.n_states();

    ForwardResult out;
    out.flow.marginals.resize(static_cast<size_t>(d.n_time) + 1);
    out.expected_Y.assign(static_cast<size_t>(d.n_time) + 1, 0.0);
    out.expected_R.assign(static_cast<size_t>(d.n_time) + 1, 0.0);
    out.flow.marginals[0] = initial;

    ClampStats clamps;
    for (int j = 0; j < d.n_time; ++j) {
        const auto& cur = out.flow.marginals[static_cast<size_t>(j)].weights;
        const auto& m = mom[static_cast<size_t>(j)];
        const double t = d.time(j);
        std::vector<double> next(static_cast<size_t>(n), 0.0);
        double push_low = 0.0, push_high = 0.0;
        for (int i = 0; i < n; ++i) {
            const double w = cur[static_cast<size_t>(i)];
            if (w == 0.0) continue;
            const double u = policy.u[static_cast<size_t>(j)][i];
            const auto p =
                kernel_probs_from_drift(model.drift(t, m, d.state(i), u), d, &clamps);
            if (i + 1 < n) {
                next[static_cast<size_t>(i) + 1] += w * p.up;
            } else {
                next[static_cast<size_t>(i)] += w * p.up; // reflected off L+h
                push_high += w * p.up;
            }
            if (i > 0) {
                next[static_cast<size_t>(i) - 1] += w * p.down;
            } else {
                next[0] += w * p.down; // reflected off -h
                push_low += w * p.down;
            }
        }
        out.flow.marginals[static_cast<size_t>(j) + 1].weights = std::move(next);
        out.expected_Y[static_cast<size_t>(j) + 1] =
            out.expected_Y[static_cast<size_t>(j)] + d.h * push_low;
        out.expected_R[static_cast<size_t>(j) + 1] =
            out.expected_R[static_cast<size_t>(j)] + d.h * push_high;
    }
    out.clamp_count = clamps.count;

    out.mean_flow.resize(static_cast<size_t>(d.n_time) + 1);
    for (int j = 0; j <= d.n_time; ++j)
        out.mean_flow[static_cast<size_t>(j)] =
            marginal_mean(out.flow.marginals[static_cast<size_t>(j)], d);
    return out;
}

/**
 * Expected total cost of the policy for a chain started in `initial`, under
 * the frozen flow nu:
 *
 *   sum_t delta E f(t, nu(t), X(t), u(t, X(t)))
 *   + sum_t [ y(t+delta) E dY + r(t+delta) E dR ]  + E g(nu(T), X(T)).
 *
 * Barrier increments are priced at the node they land on, matching
 * ghost_values; with the minimizing policy this reproduces V(0, X(0)) of
 * backward_solve exactly, which the tests pin down.
 */
inline double evaluate_cost(const MfgModel& model, const Discretization& d,
                            const MeasureFlow& nu, const Policy& policy,
                            const Marginal& initial) {
    const auto fw = propagate_marginals(model, d, nu, policy, initial);
    const auto mom = flow_moments(model, d, nu);
    double cost = 0.0;
    for (int j = 0; j < d.n_time; ++j) {
        const auto& cur = fw.flow.marginals[static_cast<size_t>(j)].weights;
        const auto& m = mom[static_cast<size_t>(j)];
        const double t = d.time(j), t_next = d.time(j + 1);
        double ef = 0.0;
        for (int i = 0; i < d.n_states(); ++i) {
            const double w = cur[static_cast<size_t>(i)];
            if (w == 0.0) continue;
            ef += w * model.running_cost(t, m, d.state(i),
                                         policy.u[static_cast<size_t>(j)][i]);
        }
        cost += d.delta * ef;
        cost += model.idleness_cost(t_next) * (fw.expected_Y[static_cast<size_t>(j) + 1] -
                                               fw.expected_Y[static_cast<size_t>(j)]);
        cost += model.rejection_cost(t_next) * (fw.expected_R[static_cast<size_t>(j) + 1] -
                                                fw.expected_R[static_cast<size_t>(j)]);
    }
    const auto& last = fw.flow.marginals[static_cast<size_t>(d.n_time)].weights;
    const auto& mT = mom[static_cast<size_t>(d.n_time)];
    for (int i = 0; i < d.n_states(); ++i) {
        const double w = last[static_cast<size_t>(i)];
        if (w == 0.0) continue;
        cost += w * model.terminal_cost(mT, d.state(i));
    }
    return cost;
}

/**
 * One trajectory of the controlled chain, recorded step by step.  Two step
 * kinds exist: a rate step from an interior state, which advances time by
 * delta and may land on a ghost state, and a projection step from a ghost
 * state, which freezes time, moves to the barrier, and charges h to Y or R.
 *
 * F accumulates the one-step conditional means of the rate steps and B the
 * normalized residuals, so x0 + F + sigma B is the unconstrained walk whose
 * two-sided reflection reproduces (X, Y, R); projection steps contribute to
 * neither.
 */
struct SimulatedPath {
    std::vector<double> t; ///< time instant per record
    std::vector<double> x; ///< state per record, ghosts included
    /// control used by the transition leaving record n (projection steps
    /// repeat the previous control; it does not influence them).
    std::vector<double> control;
    std::vector<double> F, B, Y, R; ///< running processes, aligned with t
    /// record index realizing time node j (after any projection), j = 0..n_time.
    std::vector<int> node_index;
    long clamp_count = 0;

    double at_node(const std::vector<double>& series, int j) const {
        return series[static_cast<size_t>(node_index[static_cast<size_t>(j)])];
    }
};

inline SimulatedPath simulate_path(std::uint64_t seed, const MfgModel& model,
                                   const Discretization& d, const MeasureFlow& nu,
                                   const Policy& policy, double x0) {
    model.validate();
    const auto mom = flow_moments(model, d, nu);
    if (policy.u.size() != static_cast<size_t>(d.n_time))
        throw GridMismatchError("simulate_path: policy does not match grid");
    const int n = d.n_states();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ClampStats clamps;

    SimulatedPath path;
    path.node_index.assign(static_cast<size_t>(d.n_time) + 1, 0);

    int i = d.floor_index(x0); // -1 and n encode the ghost states
    int j = 0;
    double F = 0.0, B = 0.0, Y = 0.0, R = 0.0, u_last = model.controls.front();

    auto push = [&](double t_now, double x_now) {
        path.t.push_back(t_now);
        path.x.push_back(x_now);
        path.control.push_back(u_last);
        path.F.push_back(F);
        path.B.push_back(B);
        path.Y.push_back(Y);
        path.R.push_back(R);
    };
    auto state_of = [&](int k) {
        if (k < 0) return d.ghost_low();
        if (k >= n) return d.ghost_high();
        return d.state(k);
    };

    push(0.0, state_of(i));
    path.node_index[0] = 0;

    while (true) {
        if (i < 0 || i >= n) {
            // projection step: time frozen, push charged to the barrier
            if (i < 0) {
                i = 0;
                Y += d.h;
            } else {
                i = n - 1;
                R += d.h;
            }
            push(d.time(j), state_of(i));
            path.node_index[static_cast<size_t>(j)] = static_cast<int>(path.t.size()) - 1;
            if (j == d.n_time) break;
            continue;
        }
        if (j == d.n_time) break;

        const double t = d.time(j);
        const double u = policy.u[static_cast<size_t>(j)][i];
        const auto p = kernel_probs_from_drift(
            model.drift(t, mom[static_cast<size_t>(j)], d.state(i), u), d, &clamps);
        const bool up = unit(rng) < p.up;
        const double step = up ? d.h : -d.h;
        const double mean = (p.up - p.down) * d.h;
        F += mean;
        B += (step - mean) / d.sigma;
        u_last = u;
        i += up ? 1 : -1;
        ++j;
        path.control[path.control.size() - 1] = u; // control leaving the previous record
        push(d.time(j), state_of(i));
        if (i >= 0 && i < n)
            path.node_index[static_cast<size_t>(j)] = static_cast<int>(path.t.size()) - 1;
    }
    path.clamp_count = clamps.count;
    return path;
}

} // namespace reflmfg
