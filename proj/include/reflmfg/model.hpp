#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace reflmfg {

/// Probability weights over the interior states of a Discretization.
struct Marginal {
    std::vector<double> weights;
};

/// One Marginal per time node 0..n_time.
struct MeasureFlow {
    std::vector<Marginal> marginals;

    int n_nodes() const { return static_cast<int>(marginals.size()); }
    const Marginal& at(int j) const { return marginals[static_cast<size_t>(j)]; }
};

inline void validate_marginal(const Marginal& m, const Discretization& d, double tol = 1e-12) {
    if (static_cast<int>(m.weights.size()) != d.n_states())
        throw GridMismatchError("marginal has " + std::to_string(m.weights.size()) +
                                " weights, grid has " + std::to_string(d.n_states()) + " states");
    double sum = 0.0;
    for (double w : m.weights) {
        if (!(w >= 0.0)) throw RangeError("marginal weight " + std::to_string(w) + " is negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > tol)
        throw RangeError("marginal mass " + std::to_string(sum) + " differs from 1");
}

inline void validate_flow(const MeasureFlow& nu, const Discretization& d, double tol = 1e-12) {
    if (nu.n_nodes() != d.n_time + 1)
        throw GridMismatchError("flow has " + std::to_string(nu.n_nodes()) +
                                " marginals, grid has " + std::to_string(d.n_time + 1) +
                                " time nodes");
    for (const auto& m : nu.marginals) validate_marginal(m, d, tol);
}

/// Point mass at the grid point floor_to_grid(x).
inline Marginal dirac_marginal(const Discretization& d, double x) {
    Marginal m;
    m.weights.assign(static_cast<size_t>(d.n_states()), 0.0);
    m.weights[static_cast<size_t>(d.floor_index(x))] = 1.0;
    return m;
}

/// The same marginal at every time node.
inline MeasureFlow constant_flow(const Discretization& d, const Marginal& m) {
    MeasureFlow nu;
    nu.marginals.assign(static_cast<size_t>(d.n_time) + 1, m);
    return nu;
}

inline double marginal_mean(const Marginal& m, const Discretization& d) {
    double s = 0.0;
    for (int i = 0; i < d.n_states(); ++i) s += d.state(i) * m.weights[static_cast<size_t>(i)];
    return s;
}

/**
 * Wasserstein-1 distance between two marginals on the same grid.  On the
 * line this is exact: the integral of |CDF_a - CDF_b|, which over a uniform
 * grid collapses to h times the sum of CDF gaps at the interior nodes.
 */
inline double w1_marginal(const Marginal& a, const Marginal& b, const Discretization& d) {
    if (static_cast<int>(a.weights.size()) != d.n_states() ||
        static_cast<int>(b.weights.size()) != d.n_states())
        throw GridMismatchError("w1_marginal: marginal size does not match grid");
    double cdf_gap = 0.0, total = 0.0;
    for (int i = 0; i + 1 < d.n_states(); ++i) {
        cdf_gap += a.weights[static_cast<size_t>(i)] - b.weights[static_cast<size_t>(i)];
        total += std::abs(cdf_gap);
    }
    return d.h * total;
}

/// Surrogate W1 distance between flows: sup over time nodes of marginal W1.
inline double flow_distance(const MeasureFlow& a, const MeasureFlow& b, const Discretization& d) {
    if (a.n_nodes() != b.n_nodes())
        throw GridMismatchError("flow_distance: flows have different node counts");
    double sup = 0.0;
    for (int j = 0; j < a.n_nodes(); ++j) sup = std::max(sup, w1_marginal(a.at(j), b.at(j), d));
    return sup;
}

/**
 * Mean field game data on [0,L]: controlled drift b, running cost f, terminal
 * cost g, and the two barrier cost rates y (idleness, at 0) and r (rejection,
 * at L).  The population marginal eta enters b, f, g only through the moment
 * functionals in moment_basis; solvers evaluate those once per time node and
 * pass the resulting vector down, so a basis entry sees the whole weight
 * vector and may be any functional of it, not just an integral of a(x).
 */
struct MfgModel {
    /// Functional of a marginal, given as (states, weights) -> value.
    using MarginalFunctional =
        std::function<double(std::span<const double>, std::span<const double>)>;

    std::vector<MarginalFunctional> moment_basis;

    /// b(t, m, x, u) with m the evaluated moment vector.
    std::function<double(double, std::span<const double>, double, double)> drift;
    /// f(t, m, x, u).
    std::function<double(double, std::span<const double>, double, double)> running_cost;
    /// g(m, x).
    std::function<double(std::span<const double>, double)> terminal_cost;
    /// y(t), cost rate per unit of idleness pushed at the barrier 0.
    std::function<double(double)> idleness_cost;
    /// r(t), cost rate per unit of rejection pushed at the barrier L.
    std::function<double(double)> rejection_cost;

    /// Admissible controls, ascending; ties in any argmin go to the smallest.
    std::vector<double> controls;
    double sigma = 1.0;

    void validate() const {
        if (controls.empty()) throw ParameterError("model: control set is empty");
        if (!std::is_sorted(controls.begin(), controls.end()))
            throw ParameterError("model: controls must be ascending");
        if (!(sigma > 0)) throw ParameterError("model: sigma must be positive");
        if (!drift || !running_cost || !terminal_cost || !idleness_cost || !rejection_cost)
            throw ParameterError("model: all coefficient functions must be set");
    }

    /// Moment vector of eta, in basis order.
    std::vector<double> moments(const Marginal& eta, const Discretization& d) const {
        if (static_cast<int>(eta.weights.size()) != d.n_states())
            throw GridMismatchError("moments: marginal size does not match grid");
        std::vector<double> m(moment_basis.size());
        std::span<const double> xs(d.interior_states);
        std::span<const double> ws(eta.weights);
        for (size_t j = 0; j < moment_basis.size(); ++j) m[j] = moment_basis[j](xs, ws);
        return m;
    }

    /**
     * Drift bound c_B = sup |b| taken over the time nodes, interior states and
     * controls of d.  The moment argument is sampled over a small family of
     * probe marginals (uniform plus a point mass at each end); for moment-free
     * drifts, which covers the parametric family below, the probes change
     * nothing and the sup over the grid is exact.
     */
    double drift_bound(const Discretization& d) const {
        std::vector<Marginal> probes;
        Marginal uniform;
        uniform.weights.assign(static_cast<size_t>(d.n_states()),
                               1.0 / static_cast<double>(d.n_states()));
        probes.push_back(uniform);
        probes.push_back(dirac_marginal(d, 0.0));
        probes.push_back(dirac_marginal(d, d.L));

        double bound = 0.0;
        for (const auto& eta : probes) {
            const auto m = moments(eta, d);
            for (int j = 0; j <= d.n_time; ++j)
                for (int i = 0; i < d.n_states(); ++i)
                    for (double u : controls)
                        bound = std::max(bound, std::abs(drift(d.time(j), m, d.state(i), u)));
        }
        return bound;
    }
};

/// Moment vectors of every node of a flow, evaluated once for a whole solve.
inline std::vector<std::vector<double>> flow_moments(const MfgModel& model,
                                                     const Discretization& d,
                                                     const MeasureFlow& nu) {
    validate_flow(nu, d);
    std::vector<std::vector<double>> out(static_cast<size_t>(nu.n_nodes()));
    for (int j = 0; j < nu.n_nodes(); ++j)
        out[static_cast<size_t>(j)] = model.moments(nu.at(j), d);
    return out;
}

/// Wraps a pointwise integrand a(x) as the moment functional eta -> sum a(x) eta(x).
inline MfgModel::MarginalFunctional moment_of(std::function<double(double)> a) {
    return [a = std::move(a)](std::span<const double> xs, std::span<const double> ws) {
        double s = 0.0;
        for (size_t i = 0; i < xs.size(); ++i) s += a(xs[i]) * ws[i];
        return s;
    };
}

/**
 * The benchmark instance used throughout the tests and as the default
 * preset of the command line tool: on [0,1] with horizon 0.4,
 *
 *   b = 2x + 7u,  f = (4x - 5 mean)^2 + u^2,  g = (4x - 5 mean)^2,
 *   y = 0,  r = 15,  U = {-0.75, 0.25},  sigma = 1.
 *
 * The crowd pushes the state up while the cost tracks 1.25 times the mean,
 * so the optimal crowd drifts toward the rejecting barrier.
 */
inline MfgModel preset_section5() {
    MfgModel m;
    m.sigma = 1.0;
    m.controls = {-0.75, 0.25};
    m.moment_basis = {moment_of([](double x) { return x; })};
    m.drift = [](double, std::span<const double>, double x, double u) { return 2.0 * x + 7.0 * u; };
    m.running_cost = [](double, std::span<const double> mom, double x, double u) {
        const double dev = 4.0 * x - 5.0 * mom[0];
        return dev * dev + u * u;
    };
    m.terminal_cost = [](std::span<const double> mom, double x) {
        const double dev = 4.0 * x - 5.0 * mom[0];
        return dev * dev;
    };
    m.idleness_cost = [](double) { return 0.0; };
    m.rejection_cost = [](double) { return 15.0; };
    return m;
}

/// Domain constants that go with preset_section5().
struct Section5Domain {
    double L = 1.0;
    double T = 0.4;
    double sigma = 1.0;
    double x0 = 0.5;
};

inline Section5Domain section5_domain() { return {}; }

} // namespace reflmfg
