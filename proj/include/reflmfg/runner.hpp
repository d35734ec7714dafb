#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "checks.hpp"
#include "config.hpp"
#include "coupling.hpp"
#include "fixedpoint.hpp"
#include "io.hpp"

namespace reflmfg {

inline std::filesystem::path h_subdir(const std::filesystem::path& root, double h) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "h%.6g", h);
    return root / buf;
}

struct SolveRun {
    double h = 0.0;
    std::filesystem::path dir;
    IterationReport report;
    double seconds = 0.0;
};

namespace detail {

inline SolveRun solve_one(const RunConfig& cfg, double h) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = build_discretization(h, cfg.L, cfg.T, cfg.sigma);
    const auto model = cfg.make_model();
    const auto nu1 = constant_flow(d, dirac_marginal(d, floor_to_grid(cfg.x0, d)));

    PicardOptions opt;
    opt.max_iters = cfg.max_iters;
    opt.stop_factor = cfg.stop_factor;
    auto rep = iterate(model, d, nu1, cfg.x0, opt);

    SolveRun run;
    run.h = h;
    run.dir = h_subdir(cfg.output_dir, h);
    std::filesystem::create_directories(run.dir);

    // tables for the stopped flow; on a threshold stop this repeats the final
    // in-loop solve, which keeps every file consistent with one measure
    const auto sol = backward_solve(model, d, rep.solution);
    const int n = d.n_states();

    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<size_t>(d.n_time + 1) * static_cast<size_t>(n));
    for (int j = 0; j <= d.n_time; ++j)
        for (int i = 0; i < n; ++i)
            rows.push_back({d.time(j), d.state(i),
                            sol.values.v[static_cast<size_t>(j)][static_cast<size_t>(i)]});
    write_csv(run.dir / "value.csv", "t,x,V", rows);

    rows.clear();
    for (int j = 0; j < d.n_time; ++j)
        for (int i = 0; i < n; ++i)
            rows.push_back({d.time(j), d.state(i),
                            sol.policy.u[static_cast<size_t>(j)][static_cast<size_t>(i)]});
    write_csv(run.dir / "policy.csv", "t,x,u", rows);

    rows.clear();
    for (int j = 0; j < d.n_time; ++j)
        for (int i = 0; i < n; ++i)
            rows.push_back({d.time(j), d.state(i),
                            sol.values.grad[static_cast<size_t>(j)][static_cast<size_t>(i)]});
    write_csv(run.dir / "gradient.csv", "t,x,grad", rows);

    rows.clear();
    for (int j = 0; j <= d.n_time; ++j)
        for (int i = 0; i < n; ++i)
            rows.push_back(
                {d.time(j), d.state(i),
                 rep.solution.marginals[static_cast<size_t>(j)].weights[static_cast<size_t>(i)]});
    write_csv(run.dir / "marginals.csv", "t,x,weight", rows);

    rows.clear();
    for (int j = 0; j <= d.n_time; ++j)
        rows.push_back({d.time(j),
                        marginal_mean(rep.solution.marginals[static_cast<size_t>(j)], d)});
    write_csv(run.dir / "means.csv", "t,mean", rows);

    rows.clear();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (size_t m = 1; m <= rep.distances.size(); ++m)
        rows.push_back({static_cast<double>(m), rep.distances[m - 1],
                        m - 1 < rep.ratios.size() ? rep.ratios[m - 1] : nan,
                        rep.value_trace[m - 1]});
    write_csv(run.dir / "iterations.csv", "m,d_m,q_hat_m,V_at_origin", rows);

    const auto t1 = std::chrono::steady_clock::now();
    run.seconds = std::chrono::duration<double>(t1 - t0).count();

    const double bound = model.drift_bound(d);
    nlohmann::json js;
    js["h"] = h;
    js["delta"] = d.delta;
    js["n_time"] = d.n_time;
    js["k_h"] = rep.k_h ? nlohmann::json(*rep.k_h) : nlohmann::json(nullptr);
    js["stop_reason"] = rep.stop_reason;
    js["stop_factor"] = cfg.stop_factor;
    js["max_iters"] = cfg.max_iters;
    js["n_iterations"] = rep.distances.size();
    js["final_distance"] = rep.distances.back();
    js["threshold_distance_sq"] = cfg.stop_factor * h * h;
    js["value_at_origin"] = rep.value_trace.back();
    js["clamp_count"] = rep.clamp_count;
    js["gradient_bound_empirical"] = rep.max_abs_grad;
    js["drift_bound"] = bound;
    js["positivity_ok"] = h < cfg.sigma * cfg.sigma / bound;
    js["distance_metric"] = "sup over time nodes of the grid W1 distance";
    js["runtime_seconds"] = run.seconds;
    std::ofstream out(run.dir / "summary.json");
    if (!out) throw ConfigError("cannot write " + (run.dir / "summary.json").string());
    out << js.dump(2) << '\n';

    run.report = std::move(rep);
    return run;
}

} // namespace detail

/**
 * Full per-grid pipeline: iterate to the stopped flow, then dump value,
 * policy, gradient, marginal, mean, and iteration tables plus a summary,
 * one subdirectory per grid step.  With parallel set, grids run in their
 * own threads; nothing is shared beyond the read-only config.
 */
inline std::vector<SolveRun> run_solve(const RunConfig& cfg, bool parallel = false) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    {
        std::ofstream out(std::filesystem::path(cfg.output_dir) / "config.ini");
        if (!out)
            throw ConfigError("cannot write " + cfg.output_dir + "/config.ini");
        out << serialize_config(cfg);
    }
    std::vector<SolveRun> runs;
    if (parallel && cfg.h_list.size() > 1) {
        std::vector<std::future<SolveRun>> futs;
        futs.reserve(cfg.h_list.size());
        for (double h : cfg.h_list)
            futs.push_back(
                std::async(std::launch::async, [&cfg, h] { return detail::solve_one(cfg, h); }));
        for (auto& f : futs) runs.push_back(f.get());
    } else {
        for (double h : cfg.h_list) runs.push_back(detail::solve_one(cfg, h));
    }
    return runs;
}

/// "dirac", or "picard:k" for k applications of the induced-measure map.
inline MeasureFlow resolve_flow_spec(const std::string& spec, const MfgModel& model,
                                     const Discretization& d, double x0) {
    const auto base = constant_flow(d, dirac_marginal(d, floor_to_grid(x0, d)));
    if (spec == "dirac") return base;
    if (spec.rfind("picard:", 0) == 0) {
        const std::string tail = spec.substr(7);
        char* end = nullptr;
        const long k = std::strtol(tail.c_str(), &end, 10);
        if (end == tail.c_str() || *end != '\0' || k < 0)
            throw ConfigError("bad flow spec '" + spec + "': picard:k needs an integer k >= 0");
        MeasureFlow nu = base;
        for (long i = 0; i < k; ++i) nu = phi_map(model, d, nu, x0).flow;
        return nu;
    }
    throw ConfigError("unknown flow spec '" + spec + "' (try dirac or picard:k)");
}

/**
 * Couples two flows' optimal chains on the first grid step in the config and
 * writes contraction.json.  The reported ratio is an upper-bound witness:
 * the coupling in use need not be the best one, so values below one certify
 * contraction while values near one prove nothing.
 */
inline ContractionEstimate run_couple(const RunConfig& cfg, const std::string& nu_spec,
                                      const std::string& nu2_spec) {
    cfg.validate();
    const double h = cfg.h_list.front();
    const auto d = build_discretization(h, cfg.L, cfg.T, cfg.sigma);
    const auto model = cfg.make_model();
    const auto nu = resolve_flow_spec(nu_spec, model, d, cfg.x0);
    const auto nu2 = resolve_flow_spec(nu2_spec, model, d, cfg.x0);

    const auto t0 = std::chrono::steady_clock::now();
    auto est = estimate_contraction(cfg.seed, cfg.mc_samples, model, d, nu, nu2, cfg.x0);
    const auto t1 = std::chrono::steady_clock::now();

    std::filesystem::create_directories(cfg.output_dir);
    const double denom = d.h * d.h + est.flow_dist * est.flow_dist;
    nlohmann::json js;
    js["h"] = h;
    js["nu"] = nu_spec;
    js["nu2"] = nu2_spec;
    js["n_samples"] = est.n_samples;
    js["seed"] = cfg.seed;
    js["estimate_sup_dx_sq"] = est.estimate;
    js["ci_low"] = est.ci_low;
    js["ci_high"] = est.ci_high;
    js["flow_distance"] = est.flow_dist;
    js["q_hat"] = est.q_hat;
    js["q_hat_ci_high"] = est.ci_high / denom;
    js["clamp_count"] = est.clamp_count;
    js["runtime_seconds"] = std::chrono::duration<double>(t1 - t0).count();
    js["note"] = "q_hat witnesses an upper bound over couplings; values below one "
                 "certify contraction, values near one refute nothing";
    const auto path = std::filesystem::path(cfg.output_dir) / "contraction.json";
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << js.dump(2) << '\n';
    return est;
}

/// Runs the invariant suite per grid step, printing one line per check.
inline bool run_check(const RunConfig& cfg, std::ostream& report) {
    cfg.validate();
    const auto model = cfg.make_model();
    bool ok = true;
    for (double h : cfg.h_list) {
        const auto d = build_discretization(h, cfg.L, cfg.T, cfg.sigma);
        char hb[40];
        std::snprintf(hb, sizeof hb, "%.6g", h);
        report << "checks at h = " << hb << "\n";
        for (const auto& r : run_invariant_suite(model, d, cfg.x0, cfg.seed)) {
            report << (r.pass ? "  [PASS] " : "  [FAIL] ") << r.name << ": " << r.detail
                   << "\n";
            ok &= r.pass;
        }
    }
    return ok;
}

} // namespace reflmfg
