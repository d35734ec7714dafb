#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "coupling.hpp"
#include "forward.hpp"
#include "mdp.hpp"
#include "skorohod.hpp"

namespace reflmfg {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

/// Two-pointer transport cost between sorted atom lists; exact on the line.
inline double transport_cost(std::vector<std::pair<double, double>> a,
                             std::vector<std::pair<double, double>> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double cost = 0.0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double moved = std::min(a[i].second, b[j].second);
        cost += moved * std::abs(a[i].first - b[j].first);
        a[i].second -= moved;
        b[j].second -= moved;
        if (a[i].second <= 1e-15) ++i;
        if (b[j].second <= 1e-15) ++j;
    }
    return cost;
}

} // namespace detail

/**
 * Structural diagnostics for one model on one grid, run against the constant
 * point-mass flow at the snapped start state and the policy solved for it.
 * Each entry reports the worst observed error; failures never throw.  The
 * "no clamping" entry fails exactly when some kernel evaluation left [0,1],
 * which is the runtime face of the h < sigma^2 / sup|b| step-size bound.
 */
inline std::vector<CheckResult> run_invariant_suite(const MfgModel& model,
                                                    const Discretization& d, double x0,
                                                    std::uint64_t seed, long n_paths = 200) {
    std::vector<CheckResult> out;
    auto push = [&](const std::string& name, bool pass, const std::string& detail) {
        out.push_back({name, pass, detail});
    };

    const auto nu = constant_flow(d, dirac_marginal(d, floor_to_grid(x0, d)));
    const auto mom = flow_moments(model, d, nu);
    const int n = d.n_states();
    std::mt19937_64 rng(seed);

    // kernel normalization and clamp census over the whole (t, x, u) range
    {
        ClampStats clamps;
        double worst_mass = 0.0;
        bool in_range = true;
        for (int j = 0; j < d.n_time; ++j)
            for (int i = 0; i < n; ++i)
                for (double u : model.controls) {
                    const auto p =
                        transition_probs(d.time(j), nu.marginals[static_cast<size_t>(j)], u,
                                         d.state(i), model, d, &clamps);
                    worst_mass = std::max(worst_mass, std::abs(p.up + p.down - 1.0));
                    in_range &= p.up >= 0.0 && p.up <= 1.0 && p.down >= 0.0 && p.down <= 1.0;
                }
        push("kernel normalization", in_range && worst_mass <= 1e-15,
             "max |p_up + p_down - 1| = " + detail::fmt_short(worst_mass));

        const double bound = model.drift_bound(d);
        const double safe_h = model.sigma * model.sigma / bound;
        push("no clamping", clamps.count == 0,
             std::to_string(clamps.count) + " clamped kernels; step bound sigma^2/sup|b| = " +
                 detail::fmt_short(safe_h) + " vs h = " + detail::fmt_short(d.h));
    }

    // one-step mean and variance against drift * delta on unclamped draws
    {
        double worst_mean = 0.0, worst_var = 0.0;
        long used = 0;
        std::uniform_int_distribution<int> pick_j(0, d.n_time - 1), pick_i(0, n - 1),
            pick_u(0, static_cast<int>(model.controls.size()) - 1);
        for (int rep = 0; rep < 1000; ++rep) {
            const int j = pick_j(rng), i = pick_i(rng);
            const double u = model.controls[static_cast<size_t>(pick_u(rng))];
            ClampStats st;
            const auto p = transition_probs(d.time(j), nu.marginals[static_cast<size_t>(j)], u,
                                            d.state(i), model, d, &st);
            if (st.count > 0) continue; // a clipped kernel forfeits the identity
            ++used;
            const double b = model.drift(d.time(j), mom[static_cast<size_t>(j)], d.state(i), u);
            const double mean = (p.up - p.down) * d.h;
            const double var = d.h * d.h - mean * mean;
            worst_mean = std::max(worst_mean, std::abs(mean - b * d.delta));
            worst_var = std::max(
                worst_var,
                std::abs(var - (model.sigma * model.sigma * d.delta - b * d.delta * b * d.delta)));
        }
        push("local consistency", worst_mean <= 1e-12 && worst_var <= 1e-12,
             "max mean error " + detail::fmt_short(worst_mean) + ", max variance error " +
                 detail::fmt_short(worst_var) + " on " + std::to_string(used) + " draws");
    }

    BackwardResult sol;
    bool solved = false;
    try {
        sol = backward_solve(model, d, nu);
        solved = true;
    } catch (const Error& e) {
        push("backward solve", false, e.what());
    }

    if (solved) {
        const double res = hjb_residual(sol.values, model, d, nu, /*skip_clamped=*/true);
        push("finite difference equation residual (unclamped cells)", res <= 1e-10,
             "max residual " + detail::fmt_short(res));

        double worst_sk = 0.0, worst_val = 0.0;
        for (long k = 0; k < n_paths; ++k) {
            const auto p = simulate_path(seed + 1000 + static_cast<std::uint64_t>(k), model, d,
                                         nu, sol.policy, x0);
            GridPath psi;
            psi.values.resize(static_cast<size_t>(d.n_time) + 1);
            for (int j = 0; j <= d.n_time; ++j)
                psi.values[static_cast<size_t>(j)] =
                    p.x[0] + p.at_node(p.F, j) + d.sigma * p.at_node(p.B, j);
            const auto ref = solve_skorohod(psi, d.L);
            for (int j = 0; j <= d.n_time; ++j) {
                worst_sk = std::max(worst_sk, std::abs(ref.phi[j] - p.at_node(p.x, j)));
                worst_sk = std::max(worst_sk, std::abs(ref.zeta1[j] - p.at_node(p.Y, j)));
                worst_sk = std::max(worst_sk, std::abs(ref.zeta2[j] - p.at_node(p.R, j)));
            }

            double lhs = sol.values.v[0][d.floor_index(p.x[0])];
            double rhs = 0.0;
            for (int j = 0; j < d.n_time; ++j) {
                const int i = d.floor_index(p.at_node(p.x, j));
                const double u = sol.policy.u[static_cast<size_t>(j)][static_cast<size_t>(i)];
                lhs += d.sigma * sol.values.grad[static_cast<size_t>(j)][static_cast<size_t>(i)] *
                       (p.at_node(p.B, j + 1) - p.at_node(p.B, j));
                rhs += d.delta *
                       model.running_cost(d.time(j), mom[static_cast<size_t>(j)], d.state(i), u);
                rhs += model.idleness_cost(d.time(j + 1)) *
                       (p.at_node(p.Y, j + 1) - p.at_node(p.Y, j));
                rhs += model.rejection_cost(d.time(j + 1)) *
                       (p.at_node(p.R, j + 1) - p.at_node(p.R, j));
            }
            rhs += model.terminal_cost(mom[static_cast<size_t>(d.n_time)],
                                       p.at_node(p.x, d.n_time));
            worst_val = std::max(worst_val, std::abs(lhs - rhs));
        }
        push("barrier decomposition on sampled paths", worst_sk <= 1e-10,
             "max node error " + detail::fmt_short(worst_sk) + " over " +
                 std::to_string(n_paths) + " paths");
        push("pathwise value identity", worst_val <= 1e-9,
             "max defect " + detail::fmt_short(worst_val) + " over " + std::to_string(n_paths) +
                 " paths");
    }

    // joint-step tables must project onto the single-chain kernels
    {
        const double bmax = 0.999 * model.sigma * model.sigma / d.h;
        std::uniform_real_distribution<double> db(-bmax, bmax);
        double worst = 0.0;
        for (int rep = 0; rep < 2000; ++rep) {
            const double b1 = db(rng), b2 = db(rng);
            const auto joint = coupled_transition(b1, b2, d);
            const auto k1 = kernel_probs_from_drift(b1, d);
            const auto k2 = kernel_probs_from_drift(b2, d);
            worst = std::max({worst, std::abs(joint.both_up + joint.up_down - k1.up),
                              std::abs(joint.down_up + joint.both_down - k1.down),
                              std::abs(joint.both_up + joint.down_up - k2.up),
                              std::abs(joint.up_down + joint.both_down - k2.down)});
        }
        push("coupling marginal laws", worst <= 1e-14,
             "max margin error " + detail::fmt_short(worst));
    }

    // grid transport distance against an independent sorted-atom oracle
    {
        double worst = 0.0;
        std::uniform_int_distribution<int> n_atoms(1, 5), pick_i(0, n - 1);
        std::uniform_real_distribution<double> w01(0.01, 1.0);
        for (int rep = 0; rep < 200; ++rep) {
            auto draw = [&]() {
                Marginal m;
                m.weights.assign(static_cast<size_t>(n), 0.0);
                std::vector<std::pair<double, double>> atoms;
                const int cnt = n_atoms(rng);
                double total = 0.0;
                for (int a = 0; a < cnt; ++a) {
                    const int i = pick_i(rng);
                    const double w = w01(rng);
                    m.weights[static_cast<size_t>(i)] += w;
                    total += w;
                }
                for (auto& w : m.weights) w /= total;
                for (int i = 0; i < n; ++i)
                    if (m.weights[static_cast<size_t>(i)] > 0.0)
                        atoms.emplace_back(d.state(i), m.weights[static_cast<size_t>(i)]);
                return std::make_pair(m, atoms);
            };
            auto [ma, aa] = draw();
            auto [mb, ab] = draw();
            const double lib = w1_marginal(ma, mb, d);
            const double ora = detail::transport_cost(aa, ab);
            worst = std::max(worst, std::abs(lib - ora));
        }
        push("transport distance oracle agreement", worst <= 1e-12,
             "max disagreement " + detail::fmt_short(worst));
    }

    return out;
}

inline bool all_passed(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return true;
}

} // namespace reflmfg
