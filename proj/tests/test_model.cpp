#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "reflmfg/model.hpp"

using namespace reflmfg;

namespace {

Marginal random_marginal(std::mt19937_64& rng, const Discretization& d, int max_atoms = -1) {
    std::uniform_real_distribution<double> uw(0.0, 1.0);
    std::uniform_int_distribution<int> ui(0, d.n_states() - 1);
    Marginal m;
    m.weights.assign(static_cast<size_t>(d.n_states()), 0.0);
    const int atoms = (max_atoms > 0) ? std::uniform_int_distribution<int>(1, max_atoms)(rng)
                                      : d.n_states();
    double sum = 0.0;
    for (int a = 0; a < atoms; ++a) {
        const int i = (max_atoms > 0) ? ui(rng) : a;
        const double w = uw(rng) + 1e-3;
        m.weights[static_cast<size_t>(i)] += w;
        sum += w;
    }
    for (auto& w : m.weights) w /= sum;
    return m;
}

} // namespace

TEST_CASE("marginal and flow validation") {
    auto d = build_discretization(0.2, 1.0, 0.4, 1.0);
    Marginal ok = dirac_marginal(d, 0.4);
    CHECK_NOTHROW(validate_marginal(ok, d));

    Marginal short_one{{0.5, 0.5}};
    CHECK_THROWS_AS(validate_marginal(short_one, d), GridMismatchError);

    Marginal negative{{1.2, -0.2, 0.0, 0.0, 0.0, 0.0}};
    CHECK_THROWS_AS(validate_marginal(negative, d), RangeError);

    Marginal deficient{{0.5, 0.4, 0.0, 0.0, 0.0, 0.0}};
    CHECK_THROWS_AS(validate_marginal(deficient, d), RangeError);

    auto flow = constant_flow(d, ok);
    CHECK(flow.n_nodes() == d.n_time + 1);
    CHECK_NOTHROW(validate_flow(flow, d));
    flow.marginals.pop_back();
    CHECK_THROWS_AS(validate_flow(flow, d), GridMismatchError);
}

TEST_CASE("distance between point masses and simple mixtures") {
    auto d = build_discretization(0.2, 1.0, 0.4, 1.0);
    auto da = dirac_marginal(d, 0.4);
    auto db = dirac_marginal(d, 0.6);
    CHECK_THAT(w1_marginal(da, db, d), Catch::Matchers::WithinAbs(0.2, 1e-15));
    CHECK(w1_marginal(da, da, d) == 0.0);

    Marginal half{{0.5, 0.5, 0.0, 0.0, 0.0, 0.0}};
    auto at0 = dirac_marginal(d, 0.0);
    CHECK_THAT(w1_marginal(half, at0, d), Catch::Matchers::WithinAbs(0.1, 1e-15));
}

TEST_CASE("distance is a metric") {
    std::mt19937_64 rng(11);
    auto d = build_discretization(0.1, 1.0, 0.4, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        auto a = random_marginal(rng, d);
        auto b = random_marginal(rng, d);
        auto c = random_marginal(rng, d);
        const double ab = w1_marginal(a, b, d), ba = w1_marginal(b, a, d);
        const double bc = w1_marginal(b, c, d), ac = w1_marginal(a, c, d);
        CHECK(ab >= 0.0);
        CHECK(ab == ba);
        CHECK(w1_marginal(a, a, d) == 0.0);
        CHECK(ac <= ab + bc + 1e-10);
    }
}

TEST_CASE("distance agrees with explicit transport") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 200; ++rep) {
        const int ns = std::uniform_int_distribution<int>(4, 12)(rng);
        const double h = std::uniform_real_distribution<double>(0.05, 0.4)(rng);
        auto d = build_discretization(h, ns * h, h * h, 1.0);
        auto a = random_marginal(rng, d, 5);
        auto b = random_marginal(rng, d, 5);
        const double oracle =
            oracles::w1_transport(d.interior_states, a.weights, d.interior_states, b.weights);
        CHECK_THAT(w1_marginal(a, b, d), Catch::Matchers::WithinAbs(oracle, 1e-12));
    }
}

TEST_CASE("flow distance is the sup over nodes") {
    auto d = build_discretization(0.2, 1.0, 0.4, 1.0);
    auto flow_a = constant_flow(d, dirac_marginal(d, 0.4));
    auto flow_b = flow_a;
    CHECK(flow_distance(flow_a, flow_b, d) == 0.0);
    flow_b.marginals[3] = dirac_marginal(d, 0.6);
    flow_b.marginals[7] = dirac_marginal(d, 1.0);
    CHECK_THAT(flow_distance(flow_a, flow_b, d), Catch::Matchers::WithinAbs(0.6, 1e-15));
    flow_b.marginals.pop_back();
    CHECK_THROWS_AS(flow_distance(flow_a, flow_b, d), GridMismatchError);
}

TEST_CASE("benchmark preset evaluates as written") {
    auto d = build_discretization(0.2, 1.0, 0.4, 1.0);
    auto model = preset_section5();
    model.validate();
    auto eta = dirac_marginal(d, 0.4);
    auto mom = model.moments(eta, d);
    REQUIRE(mom.size() == 1);
    CHECK_THAT(mom[0], Catch::Matchers::WithinAbs(0.4, 1e-15));

    CHECK_THAT(model.drift(0.0, mom, 0.4, 0.25), Catch::Matchers::WithinAbs(2.55, 1e-15));
    CHECK_THAT(model.drift(0.0, mom, 0.0, -0.75), Catch::Matchers::WithinAbs(-5.25, 1e-15));
    // f(x=0.5, mean=0.4, u=0.25): the tracking term vanishes, u^2 remains
    CHECK_THAT(model.running_cost(0.0, mom, 0.5, 0.25),
               Catch::Matchers::WithinAbs(0.0625, 1e-15));
    CHECK_THAT(model.terminal_cost(mom, 0.5), Catch::Matchers::WithinAbs(0.0, 1e-15));
    CHECK(model.idleness_cost(0.13) == 0.0);
    CHECK(model.rejection_cost(0.13) == 15.0);

    CHECK(model.drift_bound(d) == 5.25);
}

TEST_CASE("custom marginal functionals plug into the moment basis") {
    auto d = build_discretization(0.25, 1.0, 0.25 * 0.25 * 4, 1.0);
    MfgModel m = preset_section5();
    // second moment via the pointwise helper, plus a genuinely nonlinear
    // functional of the weight vector through the raw hook
    m.moment_basis.push_back(moment_of([](double x) { return x * x; }));
    m.moment_basis.push_back([](std::span<const double>, std::span<const double> w) {
        double peak = 0.0;
        for (double v : w) peak = std::max(peak, v);
        return peak;
    });
    Marginal eta{{0.5, 0.25, 0.25, 0.0, 0.0}};
    auto mom = m.moments(eta, d);
    REQUIRE(mom.size() == 3);
    CHECK_THAT(mom[0], Catch::Matchers::WithinAbs(0.1875, 1e-15));
    CHECK_THAT(mom[1], Catch::Matchers::WithinAbs(0.25 * 0.25 * 0.25 + 0.25 * 0.25, 1e-15));
    CHECK(mom[2] == 0.5);
}

TEST_CASE("model validation rejects incomplete data") {
    MfgModel m = preset_section5();
    m.controls.clear();
    CHECK_THROWS_AS(m.validate(), ParameterError);
    m = preset_section5();
    m.controls = {0.25, -0.75};
    CHECK_THROWS_AS(m.validate(), ParameterError);
    m = preset_section5();
    m.sigma = 0.0;
    CHECK_THROWS_AS(m.validate(), ParameterError);
    m = preset_section5();
    m.drift = nullptr;
    CHECK_THROWS_AS(m.validate(), ParameterError);
}
