#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace reflmfg {

/// One-step probabilities of the controlled chain at an interior state.
struct KernelProbs {
    double up = 0.0;
    double down = 0.0;
    bool clamped = false;
};

/// Running total of kernel clampings; one instance per solve so that
/// concurrent solves never share mutable state.
struct ClampStats {
    long count = 0;
};

/**
 * The two-point kernel matching drift and variance of the diffusion over one
 * time step delta = h^2/sigma^2:
 *
 *   p(up) = (h b + sigma^2) / (2 sigma^2),  p(down) = 1 - p(up).
 *
 * For |b| < sigma^2/h both probabilities are positive and the step mean and
 * variance are b delta and sigma^2 delta - (b delta)^2.  Outside that range
 * the raw value is clipped into [0,1]; the clip is counted, never fatal, so
 * that deliberately coarse runs still produce output together with an honest
 * diagnostic.
 */
inline KernelProbs kernel_probs_from_drift(double b, const Discretization& d,
                                           ClampStats* stats = nullptr) {
    const double s2 = d.sigma * d.sigma;
    KernelProbs p;
    p.up = (d.h * b + s2) / (2.0 * s2);
    if (p.up < 0.0 || p.up > 1.0) {
        p.up = std::min(1.0, std::max(0.0, p.up));
        p.clamped = true;
        if (stats) ++stats->count;
    }
    p.down = 1.0 - p.up;
    return p;
}

/// Kernel probabilities with the drift evaluated through the model.
inline KernelProbs transition_probs(double t, const Marginal& eta, double u, double x,
                                    const MfgModel& model, const Discretization& d,
                                    ClampStats* stats = nullptr) {
    const auto m = model.moments(eta, d);
    return kernel_probs_from_drift(model.drift(t, m, x, u), d, stats);
}

/**
 * Extends a value row over the interior states by the two ghost values at
 * -h and L+h for lookups at time t_next:
 *
 *   V(t_next, -h)  = y(t_next) h + V(t_next, 0)
 *   V(t_next, L+h) = r(t_next) h + V(t_next, L)
 *
 * A step into a ghost state is instantly projected back to the barrier, so
 * its value is the barrier value plus the barrier cost rate times the push
 * h that the projection generates.  Index layout of the result: [0] is -h,
 * [1..n] the interior states, [n+1] is L+h.
 */
inline std::vector<double> ghost_values(const std::vector<double>& v_row, double t_next,
                                        const MfgModel& model, const Discretization& d) {
    if (static_cast<int>(v_row.size()) != d.n_states())
        throw GridMismatchError("ghost_values: row size does not match grid");
    std::vector<double> ext(v_row.size() + 2);
    ext[0] = model.idleness_cost(t_next) * d.h + v_row.front();
    for (size_t i = 0; i < v_row.size(); ++i) ext[i + 1] = v_row[i];
    ext.back() = model.rejection_cost(t_next) * d.h + v_row.back();
    return ext;
}

/// Value surface of one backward solve, with its central-difference gradient.
struct ValueTable {
    /// v[j][i] = V(t_j, x_i), j = 0..n_time (terminal row included).
    std::vector<std::vector<double>> v;
    /// grad[j][i] = (V(t_{j+1}, x_i + h) - V(t_{j+1}, x_i - h)) / 2h with
    /// ghost extension at the barriers; j = 0..n_time-1.
    std::vector<std::vector<double>> grad;
    /// clamp_mask[j][i] != 0 iff some control's kernel was clipped at (j, i).
    std::vector<std::vector<char>> clamp_mask;
    /// sup |grad|; the empirical counterpart of the gradient bound constant.
    double max_abs_grad = 0.0;
};

/// Feedback control per (time node, state); entries are elements of U.
struct Policy {
    std::vector<std::vector<double>> u;
};

struct BackwardResult {
    ValueTable values;
    Policy policy;
    long clamp_count = 0;
};

/**
 * Dynamic programming for the chain under a frozen measure flow nu:
 *
 *   V(T, x) = g(nu(T), x)
 *   V(t, x) = min_u [ delta f(t, nu(t), x, u)
 *                     + p_up(u) V(t+delta, x+h) + p_down(u) V(t+delta, x-h) ]
 *
 * with ghost values substituted at the barriers and ties resolved to the
 * smallest control.  The minimizer here coincides with the minimizer of
 * f + b * grad because p_up V_up + p_down V_down rearranges to
 * (V_up + V_down)/2 + delta b grad; the recursion and the Hamiltonian form
 * pick the same control, ties included.
 */
inline BackwardResult backward_solve(const MfgModel& model, const Discretization& d,
                                     const MeasureFlow& nu) {
    model.validate();
    const auto mom = flow_moments(model, d, nu);
    const int n = d.n_states();

    BackwardResult out;
    auto& vt = out.values;
    vt.v.assign(static_cast<size_t>(d.n_time) + 1, std::vector<double>(n, 0.0));
    vt.grad.assign(static_cast<size_t>(d.n_time), std::vector<double>(n, 0.0));
    vt.clamp_mask.assign(static_cast<size_t>(d.n_time), std::vector<char>(n, 0));
    out.policy.u.assign(static_cast<size_t>(d.n_time), std::vector<double>(n, 0.0));

    for (int i = 0; i < n; ++i)
        vt.v[static_cast<size_t>(d.n_time)][i] =
            model.terminal_cost(mom[static_cast<size_t>(d.n_time)], d.state(i));

    ClampStats clamps;
    for (int j = d.n_time - 1; j >= 0; --j) {
        const double t = d.time(j), t_next = d.time(j + 1);
        const auto ext = ghost_values(vt.v[static_cast<size_t>(j) + 1], t_next, model, d);
        const auto& m = mom[static_cast<size_t>(j)];
        for (int i = 0; i < n; ++i) {
            const double x = d.state(i);
            const double v_up = ext[static_cast<size_t>(i) + 2];
            const double v_dn = ext[static_cast<size_t>(i)];
            double best = std::numeric_limits<double>::infinity();
            double best_u = model.controls.front();
            bool any_clamp = false;
            for (double u : model.controls) {
                const long before = clamps.count;
                const auto p = kernel_probs_from_drift(model.drift(t, m, x, u), d, &clamps);
                any_clamp |= (clamps.count > before);
                const double cand =
                    d.delta * model.running_cost(t, m, x, u) + p.up * v_up + p.down * v_dn;
                if (cand < best) {
                    best = cand;
                    best_u = u;
                }
            }
            if (!std::isfinite(best))
                throw NumericsError("backward_solve: non-finite value at t index " +
                                    std::to_string(j) + ", state index " + std::to_string(i));
            vt.v[static_cast<size_t>(j)][i] = best;
            out.policy.u[static_cast<size_t>(j)][i] = best_u;
            vt.clamp_mask[static_cast<size_t>(j)][i] = any_clamp ? 1 : 0;
            const double g = (v_up - v_dn) / (2.0 * d.h);
            vt.grad[static_cast<size_t>(j)][i] = g;
            vt.max_abs_grad = std::max(vt.max_abs_grad, std::abs(g));
        }
    }
    out.clamp_count = clamps.count;
    if (!(vt.max_abs_grad <= 1e6))
        throw NumericsError("backward_solve: gradient bound exploded, sup |grad| = " +
                            std::to_string(vt.max_abs_grad));
    return out;
}

/**
 * Max norm of the discrete HJB residual
 *
 *   [V(t+delta,x) - V(t,x)]/delta + min_u [f + b grad] + sigma^2/2 * D_xx V
 *
 * over all (t, x), with the second difference read from the ghost-extended
 * next row.  Algebraically zero whenever no kernel was clipped; with
 * skip_clamped set, cells whose kernel was clipped are left out, so the
 * residual isolates genuine solver defects even on deliberately coarse runs.
 */
inline double hjb_residual(const ValueTable& vt, const MfgModel& model, const Discretization& d,
                           const MeasureFlow& nu, bool skip_clamped = false) {
    const auto mom = flow_moments(model, d, nu);
    const int n = d.n_states();
    if (vt.v.size() != static_cast<size_t>(d.n_time) + 1 ||
        vt.v.front().size() != static_cast<size_t>(n))
        throw GridMismatchError("hjb_residual: value table does not match grid");

    double worst = 0.0;
    for (int j = 0; j < d.n_time; ++j) {
        const double t = d.time(j), t_next = d.time(j + 1);
        const auto ext = ghost_values(vt.v[static_cast<size_t>(j) + 1], t_next, model, d);
        const auto& m = mom[static_cast<size_t>(j)];
        for (int i = 0; i < n; ++i) {
            if (skip_clamped && vt.clamp_mask[static_cast<size_t>(j)][i]) continue;
            const double x = d.state(i);
            const double v_up = ext[static_cast<size_t>(i) + 2];
            const double v_mid = ext[static_cast<size_t>(i) + 1];
            const double v_dn = ext[static_cast<size_t>(i)];
            const double dt = (v_mid - vt.v[static_cast<size_t>(j)][i]) / d.delta;
            const double dxx = (v_up - 2.0 * v_mid + v_dn) / (d.h * d.h);
            const double dx = (v_up - v_dn) / (2.0 * d.h);
            double ham = std::numeric_limits<double>::infinity();
            for (double u : model.controls)
                ham = std::min(ham, model.running_cost(t, m, x, u) +
                                        model.drift(t, m, x, u) * dx);
            worst = std::max(worst,
                             std::abs(dt + ham + 0.5 * d.sigma * d.sigma * dxx));
        }
    }
    return worst;
}

} // namespace reflmfg
