#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "lsc/error.hpp"
#include "lsc/montecarlo.hpp"
#include "lsc/presets.hpp"

using namespace lsc;
using lsc::test::vec;

namespace {

PathStart gbm_start(double p = 1.2) { return PathStart{0.0, vec({1.0}), vec({p}), 1.0}; }

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

} // namespace

TEST_CASE("closed form values") {
    const ProblemSpec one = make_preset("gbm1").spec;
    const ProblemSpec two = make_preset("gbm2").spec;
    CHECK(closed_form_uncontrolled(one, 0.0, vec({1.0}), vec({1.2}), 1.0) == doctest::Approx(0.105170918).epsilon(1e-9));
    CHECK(closed_form_uncontrolled(two, 0.0, vec({1.0}), vec({1.0, 1.2}), 1.0) ==
          doctest::Approx(0.156442014).epsilon(1e-9));
    CHECK(closed_form_uncontrolled(one, 0.0, vec({1.0}), vec({1.2}), 1.2) == 0.0);
    CHECK(closed_form_uncontrolled(two, 0.6, vec({1.0}), vec({1.2}), 1.0) ==
          doctest::Approx(std::exp(0.04) - 1.0).epsilon(1e-12));
    CHECK_THROWS_AS(closed_form_uncontrolled(make_preset("drift2").spec, 0.0, vec({1.0}), vec({1.0, 1.0}), 1.0),
                    InvalidArgument);
}

TEST_CASE("same seed reproduces the batch") {
    const ProblemSpec s = make_preset("gbm1").spec;
    const PolicyFn pol = zero_policy(s);
    const PathBatch a = simulate_paths(s, pol, gbm_start(), 200, 20, 42);
    const PathBatch b = simulate_paths(s, pol, gbm_start(), 200, 20, 42);
    const PathBatch c = simulate_paths(s, pol, gbm_start(), 200, 20, 43);
    CHECK(a.z_T == b.z_T);
    CHECK(a.m_T == b.m_T);
    CHECK(a.z_T != c.z_T);
    const Estimate e = estimate_J(a, s.loss);
    CHECK(e.seed == 42);
    CHECK(e.n_paths == 200);
}

TEST_CASE("frozen dynamics") {
    const ProblemSpec s = lsc::test::constant_spec(0.0, 0.0, {0.0, 0.5, 1.0});
    const PathStart st{0.0, vec({0.7}), vec({0.2, 0.9}), 0.3};
    const PathBatch b = simulate_paths(s, zero_policy(s), st, 10, 5, 1);
    for (int k = 0; k < 10; ++k) {
        CHECK(b.z_T[static_cast<std::size_t>(k)] == 0.7);
        CHECK(b.m_T[static_cast<std::size_t>(k)] == 0.3);
        CHECK(b.p_dates[static_cast<std::size_t>(2 * k)] == 0.2);
        CHECK(b.p_dates[static_cast<std::size_t>(2 * k + 1)] == 0.9);
    }
    const Estimate e = estimate_J(b, s.loss);
    CHECK(e.mean == doctest::Approx((0.7 - 0.3) + (0.7 - 0.2) + 0.0));
    CHECK(e.std_error < 1e-15);
}

TEST_CASE("budget martingales share the state noise") {
    const ProblemSpec s = lsc::test::constant_spec(0.0, 0.0, {0.0, 1.0});
    const double a = 0.6;
    PolicyFn pol{[a](double, const Vector&, const Vector& p, double) {
        return PolicyAction{vec({0.0}), Vector::Constant(p.size(), a), vec({0.0})};
    }};
    const int n = 20000, steps = 10;
    const PathBatch b = simulate_paths(s, pol, PathStart{0.0, vec({1.0}), vec({1.0}), 0.0}, n, steps, 9);
    const double mean = mean_of(b.p_dates);
    double var = 0.0;
    for (double p : b.p_dates) var += (p - mean) * (p - mean);
    var /= n - 1;
    const double expected = a * a * 1.0;  // a^2 * dt * steps over a unit horizon
    CHECK(std::abs(var - expected) < 4.0 * expected * std::sqrt(2.0 / n));
}

TEST_CASE("GBM mean") {
    const ProblemSpec s = make_preset("gbm1").spec;
    const PathBatch b = simulate_paths(s, zero_policy(s), gbm_start(), 100000, 50, 7);
    const double mean = mean_of(b.z_T);
    double var = 0.0;
    for (double z : b.z_T) var += (z - mean) * (z - mean);
    const double se = std::sqrt(var / (b.z_T.size() - 1) / b.z_T.size());
    CHECK(std::abs(mean - std::exp(0.1)) <= 3.0 * se);
}

TEST_CASE("antithetic pairing") {
    const ProblemSpec s = make_preset("gbm1").spec;
    const Estimate plain = estimate_J(simulate_paths(s, zero_policy(s), gbm_start(), 20000, 50, 11), s.loss);
    const Estimate anti = estimate_J(simulate_paths(s, zero_policy(s), gbm_start(), 20000, 50, 11, true), s.loss);
    CHECK(std::abs(plain.mean - anti.mean) <= 3.0 * std::hypot(plain.std_error, anti.std_error));
    CHECK(anti.std_error < plain.std_error);
    CHECK_THROWS_AS(simulate_paths(s, zero_policy(s), gbm_start(), 11, 5, 1, true), InvalidArgument);
}

TEST_CASE("zero policy pays a Jensen gap and the hedge removes it") {
    const ProblemSpec s = make_preset("gbm1").spec;
    const double w = 0.105170918;
    const Estimate zero = estimate_J(simulate_paths(s, zero_policy(s), gbm_start(), 20000, 100, 5), s.loss);
    CHECK(zero.mean - 3.0 * zero.std_error > w);
    const Estimate rep = estimate_J(simulate_paths(s, replicating_policy(s), gbm_start(), 20000, 100, 5), s.loss);
    CHECK(std::abs(rep.mean - w) < 1e-3);
    CHECK(rep.std_error < 0.01 * zero.std_error);
}

TEST_CASE("replicating policy needs a single control and analytic means") {
    CHECK_THROWS_AS(replicating_policy(make_preset("drift2").spec), InvalidArgument);
}

TEST_CASE("start validation") {
    const ProblemSpec s = make_preset("gbm2").spec;
    CHECK_THROWS_AS(simulate_paths(s, zero_policy(s), PathStart{0.0, vec({1.0}), vec({1.0}), 1.0}, 10, 5, 1),
                    InvalidArgument);
    CHECK_NOTHROW(simulate_paths(s, zero_policy(s), PathStart{0.7, vec({1.0}), vec({1.0}), 1.0}, 10, 5, 1));
    CHECK_THROWS_AS(simulate_paths(s, zero_policy(s), PathStart{1.0, vec({1.0}), vec({}), 1.0}, 10, 5, 1),
                    InvalidArgument);
}

TEST_CASE("solver policy is no worse than the zero policy") {
    const Preset p = make_preset("gbm1");
    GridSpec g = lsc::test::grid_1d(0.2, 3.0, 57, 2.0, 21, 2.0, 21, 0.02, 2.0);
    g.record_policy = true;
    g.keep_all_levels = true;
    const SolveResult res = solve_problem(p.spec, g, 0);
    const Estimate zero = estimate_J(simulate_paths(p.spec, zero_policy(p.spec), gbm_start(), 20000, 50, 3), p.spec.loss);
    const Estimate sol = estimate_J(simulate_paths(p.spec, solver_policy(res), gbm_start(), 20000, 50, 3), p.spec.loss);
    CHECK(sol.mean <= zero.mean + 3.0 * std::hypot(zero.std_error, sol.std_error));
}
