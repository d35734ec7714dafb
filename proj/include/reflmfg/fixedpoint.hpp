#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "forward.hpp"
#include "grid.hpp"
#include "mdp.hpp"
#include "model.hpp"

namespace reflmfg {

/// One application of the induced-measure map: solve the control problem
/// against nu, then push the point mass at floor_to_grid(x0) through the
/// optimal feedback.
struct PhiResult {
    MeasureFlow flow;
    BackwardResult backward;
    ForwardResult forward;
};

inline PhiResult phi_map(const MfgModel& model, const Discretization& d, const MeasureFlow& nu,
                         double x0) {
    PhiResult out;
    out.backward = backward_solve(model, d, nu);
    out.forward = propagate_marginals(model, d, nu, out.backward.policy,
                                      dirac_marginal(d, x0));
    out.flow = out.forward.flow;
    return out;
}

struct PicardOptions {
    int max_iters = 15;
    /// Threshold factor: stop once d_m^2 <= stop_factor * h^2.  Stands in for
    /// the contraction-dependent constant of the convergence analysis, which
    /// is not observable a priori; 4 matches that constant for modulus 2/3.
    double stop_factor = 4.0;
};

/**
 * Record of one Picard run.  Iteration m maps nu^m to nu^{m+1} and measures
 * d_m = flow_distance(nu^{m+1}, nu^m), the surrogate W1 distance (sup over
 * time nodes of the nodewise W1).  Contraction ratios are estimated as
 * q_hat_m = d_{m+1}^2 / (h^2 + d_m^2); values >= 1 are flagged by callers,
 * never fatal, since the ratio is a noisy witness, not a proof.
 */
struct IterationReport {
    /// nu^1, nu^2, ..., one more entry than iterations run.
    std::vector<MeasureFlow> flows;
    std::vector<double> distances;   ///< d_m, m = 1..M
    std::vector<double> ratios;      ///< q_hat_m, m = 1..M-1
    std::vector<double> value_trace; ///< V(0, x0 grid point) per iteration
    /// mean state per time node of nu^{m+1}, one row per iteration.
    std::vector<std::vector<double>> mean_traces;
    std::string stop_reason; ///< "threshold" or "max_iters"
    /// Iteration index that met the threshold; empty when the budget ran out.
    std::optional<int> k_h;
    /// The stopped flow: nu^{k_h} on a threshold stop, else the last flow.
    MeasureFlow solution;
    long clamp_count = 0;    ///< kernel clips summed over all solves
    double max_abs_grad = 0; ///< sup |grad| over all solves
};

/**
 * Picard iteration of the induced-measure map from the initial flow nu1.
 * Stops at the first iteration m >= 2 with d_m^2 <= stop_factor * h^2, or
 * after max_iters iterations.  The threshold is only armed from the second
 * iteration on: the self-distance rule compares a flow with its own image,
 * which is meaningful once the iteration has left the arbitrary initial
 * flow behind, and it guarantees d_1 exists in every report.
 */
inline IterationReport iterate(const MfgModel& model, const Discretization& d,
                               const MeasureFlow& nu1, double x0,
                               const PicardOptions& opt = {}) {
    if (opt.max_iters < 1) throw ParameterError("iterate: max_iters must be >= 1");
    if (!(opt.stop_factor > 0)) throw ParameterError("iterate: stop_factor must be positive");
    validate_flow(nu1, d);

    const int i0 = d.floor_index(x0);
    const double threshold = opt.stop_factor * d.h * d.h;

    IterationReport rep;
    rep.flows.push_back(nu1);
    rep.stop_reason = "max_iters";

    for (int m = 1; m <= opt.max_iters; ++m) {
        auto step = phi_map(model, d, rep.flows.back(), x0);
        rep.clamp_count += step.backward.clamp_count + step.forward.clamp_count;
        rep.max_abs_grad = std::max(rep.max_abs_grad, step.backward.values.max_abs_grad);
        rep.value_trace.push_back(step.backward.values.v[0][static_cast<size_t>(i0)]);
        rep.mean_traces.push_back(step.forward.mean_flow);

        const double dist = flow_distance(step.flow, rep.flows.back(), d);
        rep.flows.push_back(std::move(step.flow));
        rep.distances.push_back(dist);
        if (rep.distances.size() >= 2) {
            const double prev = rep.distances[rep.distances.size() - 2];
            rep.ratios.push_back(dist * dist / (d.h * d.h + prev * prev));
        }
        if (m >= 2 && dist * dist <= threshold) {
            rep.stop_reason = "threshold";
            rep.k_h = m;
            rep.solution = rep.flows[static_cast<size_t>(m - 1)]; // nu^m
            break;
        }
    }
    if (!rep.k_h) rep.solution = rep.flows.back();
    return rep;
}

} // namespace reflmfg
