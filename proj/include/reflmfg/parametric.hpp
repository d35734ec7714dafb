#pragma once

#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "polynomial.hpp"

namespace reflmfg {

/**
 * Coefficient tables for the structured model family
 *
 *   b(t, eta, x, u) = b1(t,x) + b2(t) * u
 *   f(t, eta, x, u) = a1(t,x,m) + a2(t,x) * k(u) + a3(t) * (c1 + a4(x)) * I4
 *   g(eta, x)       = g0(x,m)  + (c2 + a5(x)) * I5
 *   y(t) = a6(t),  r(t) = a7(t)
 *
 * where I4 = integral of a4 d(eta), I5 = integral of a5 d(eta), and m is the
 * vector of user-declared moments (moment_bases[j] integrated against eta,
 * referenced as m1, m2, ... inside a1 and g0).  a1 and g0 accepting moment
 * symbols is what lets polynomial functions of the mean, such as a squared
 * tracking error, live in this family without leaving the moment-functional
 * interaction form.
 */
struct ParametricSpec {
    std::vector<Polynomial> moment_bases; ///< each in x only

    Polynomial b1; ///< in t, x
    Polynomial b2; ///< in t
    Polynomial a1; ///< in t, x, m
    Polynomial a2; ///< in t, x
    Polynomial a3; ///< in t
    Polynomial a4; ///< in x
    Polynomial a5; ///< in x
    Polynomial a6; ///< in t
    Polynomial a7; ///< in t
    Polynomial g0; ///< in x, m
    Polynomial k;  ///< in u
    double c1 = 0.0;
    double c2 = 0.0;

    std::vector<double> controls;
    double sigma = 1.0;
};

namespace detail {

inline void require_vars(const Polynomial& p, const std::string& name, bool allow_t,
                         bool allow_x, bool allow_u, int n_moments) {
    if (p.uses_t() && !allow_t) throw SpecError(name + " must not depend on t");
    if (p.uses_x() && !allow_x) throw SpecError(name + " must not depend on x");
    if (p.uses_u() && !allow_u) throw SpecError(name + " must not depend on u");
    const int mm = p.max_moment();
    if (mm > 0 && n_moments < 0)
        throw SpecError(name + " must not reference moment symbols");
    if (mm > n_moments && n_moments >= 0)
        throw SpecError(name + " references m" + std::to_string(mm) + " but only " +
                        std::to_string(n_moments) + " moments are declared");
}

} // namespace detail

/// Assembles an MfgModel from the tables; SpecError on ill-formed input.
inline MfgModel build_parametric_model(const ParametricSpec& spec) {
    const int K = static_cast<int>(spec.moment_bases.size());
    for (int j = 0; j < K; ++j)
        detail::require_vars(spec.moment_bases[static_cast<size_t>(j)],
                             "moment basis " + std::to_string(j + 1), false, true, false, -1);
    detail::require_vars(spec.b1, "b1", true, true, false, -1);
    detail::require_vars(spec.b2, "b2", true, false, false, -1);
    detail::require_vars(spec.a1, "a1", true, true, false, K);
    detail::require_vars(spec.a2, "a2", true, true, false, -1);
    detail::require_vars(spec.a3, "a3", true, false, false, -1);
    detail::require_vars(spec.a4, "a4", false, true, false, -1);
    detail::require_vars(spec.a5, "a5", false, true, false, -1);
    detail::require_vars(spec.a6, "a6", true, false, false, -1);
    detail::require_vars(spec.a7, "a7", true, false, false, -1);
    detail::require_vars(spec.g0, "g0", false, true, false, K);
    detail::require_vars(spec.k, "k", false, false, true, -1);

    // Moment layout handed to the closures: user moments m1..mK, then the
    // integrals of a4 and a5 at fixed slots K and K+1.
    auto s = std::make_shared<const ParametricSpec>(spec);

    MfgModel model;
    model.sigma = spec.sigma;
    model.controls = spec.controls;

    for (const auto& basis : s->moment_bases)
        model.moment_basis.push_back(
            moment_of([basis](double x) { return basis.eval(0.0, x, 0.0); }));
    model.moment_basis.push_back(
        moment_of([s](double x) { return s->a4.eval(0.0, x, 0.0); }));
    model.moment_basis.push_back(
        moment_of([s](double x) { return s->a5.eval(0.0, x, 0.0); }));

    model.drift = [s](double t, std::span<const double>, double x, double u) {
        return s->b1.eval(t, x, 0.0) + s->b2.eval(t, 0.0, 0.0) * u;
    };
    const size_t K4 = static_cast<size_t>(K), K5 = static_cast<size_t>(K) + 1;
    model.running_cost = [s, K4](double t, std::span<const double> m, double x, double u) {
        const auto user = m.first(K4);
        return s->a1.eval(t, x, 0.0, user) + s->a2.eval(t, x, 0.0) * s->k.eval(0.0, 0.0, u) +
               s->a3.eval(t, 0.0, 0.0) * (s->c1 + s->a4.eval(0.0, x, 0.0)) * m[K4];
    };
    model.terminal_cost = [s, K4, K5](std::span<const double> m, double x) {
        const auto user = m.first(K4);
        return s->g0.eval(0.0, x, 0.0, user) + (s->c2 + s->a5.eval(0.0, x, 0.0)) * m[K5];
    };
    model.idleness_cost = [s](double t) { return s->a6.eval(t, 0.0, 0.0); };
    model.rejection_cost = [s](double t) { return s->a7.eval(t, 0.0, 0.0); };

    model.validate();
    return model;
}

/// The benchmark instance written as coefficient tables; equal, function by
/// function, to preset_section5() on any grid and marginal.
inline ParametricSpec section5_parametric() {
    ParametricSpec s;
    s.moment_bases = {Polynomial::parse("x")};
    s.b1 = Polynomial::parse("2*x");
    s.b2 = Polynomial::parse("7");
    s.a1 = Polynomial::parse("16*x^2 + 25*m1^2");
    s.a2 = Polynomial::parse("1");
    s.a3 = Polynomial::parse("-40"); // the tracking cross term enters negatively
    s.c1 = 0.0;
    s.a4 = Polynomial::parse("x");
    s.a5 = Polynomial::constant(0.0);
    s.c2 = 0.0;
    s.a6 = Polynomial::constant(0.0);
    s.a7 = Polynomial::parse("15");
    s.g0 = Polynomial::parse("16*x^2 - 40*x*m1 + 25*m1^2");
    s.k = Polynomial::parse("u^2");
    s.controls = {-0.75, 0.25};
    s.sigma = 1.0;
    return s;
}

} // namespace reflmfg
