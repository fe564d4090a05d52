#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "helpers.hpp"
#include "lsc/error.hpp"
#include "lsc/montecarlo.hpp"
#include "lsc/presets.hpp"

using namespace lsc;
using lsc::test::vec;

namespace {

bool has_field(const std::vector<Violation>& v, const std::string& field, const std::string& fragment = "") {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) {
        return x.field == field && x.message.find(fragment) != std::string::npos;
    });
}

} // namespace

TEST_CASE("every preset validates") {
    for (const auto& name : preset_names()) {
        CAPTURE(name);
        const Preset p = make_preset(name);
        CHECK(validate_spec(p.spec).empty());
        CHECK_NOTHROW(p.grid.validate(p.spec.state_dim));
    }
    CHECK_THROWS_AS(make_preset("nope"), InvalidArgument);
}

TEST_CASE("gbm spec is admissible") {
    ProblemSpec s = gbm_spec(0.1, 0.2, {0.0, 1.0}, "gbm");
    CHECK(validate_spec(s).empty());
}

TEST_CASE("terminal cost negative somewhere in the domain is rejected") {
    ProblemSpec s = gbm_spec(0.1, 0.2, {0.0, 1.0}, "bad");
    s.loss.terminal_cost = [](const Vector& z) { return z[0]; };
    s.domain = StateBox{vec({-1.0}), vec({2.0})};
    const auto v = validate_spec(s);
    CHECK_FALSE(v.empty());
    CHECK(std::any_of(v.begin(), v.end(), [](const Violation& x) { return x.message.find("negative") != std::string::npos || x.message.find("nonneg") != std::string::npos; }));
}

TEST_CASE("unsorted dates are rejected") {
    ProblemSpec s = gbm_spec(0.1, 0.2, {0.0, 1.0, 0.5}, "bad");
    CHECK(has_field(validate_spec(s), "grid.dates", "unsorted"));
}

TEST_CASE("threshold count must match the dates") {
    ProblemSpec s = gbm_spec(0.1, 0.2, {0.0, 0.5, 1.0}, "bad");
    s.grid.thresholds = {1.0};
    CHECK(has_field(validate_spec(s), "grid.thresholds"));
}

TEST_CASE("running cost augmentation") {
    SUBCASE("state dimension and diffusion row") {
        ProblemSpec s = lsc::test::constant_spec(0.0, 0.3, {0.0, 1.0});
        const ProblemSpec a = augment_running_cost(
            s, [](double, const Vector& z, const Vector&) { return std::abs(z[0]); }, 1.0);
        CHECK(a.state_dim == 2);
        const Matrix sig = a.sde.diffusion(0.0, vec({0.7, 0.2}), vec({0.0}));
        REQUIRE(sig.rows() == 2);
        CHECK(sig.row(1).norm() == 0.0);
        CHECK(sig(0, 0) == doctest::Approx(0.3));
    }
    SUBCASE("unit rate on a frozen state adds one to the terminal cost") {
        ProblemSpec s = lsc::test::constant_spec(0.0, 0.0, {0.0, 1.0});
        const ProblemSpec a = augment_running_cost(s, [](double, const Vector&, const Vector&) { return 1.0; });
        PathStart st{0.0, vec({0.4, 0.0}), vec({5.0}), 0.0};
        const PathBatch b = simulate_paths(a, zero_policy(a), st, 4, 10, 3);
        for (int k = 0; k < 4; ++k) {
            const Vector zT = vec({b.z_T[static_cast<std::size_t>(2 * k)], b.z_T[static_cast<std::size_t>(2 * k + 1)]});
            CHECK(zT[1] == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(a.loss.terminal_cost(zT) == doctest::Approx(0.4 + 1.0).epsilon(1e-12));
        }
    }
    SUBCASE("zero integrand leaves the cost unchanged on the zero slice") {
        ProblemSpec s = lsc::test::constant_spec(0.1, 0.2, {0.0, 1.0});
        const ProblemSpec a = augment_running_cost(s, [](double, const Vector&, const Vector&) { return 0.0; });
        CHECK(a.loss.terminal_cost(vec({1.3, 0.0})) == doctest::Approx(s.loss.terminal_cost(vec({1.3}))));
    }
    SUBCASE("negative integrand is refused") {
        ProblemSpec s = lsc::test::constant_spec(0.1, 0.2, {0.0, 1.0});
        CHECK_THROWS_AS(augment_running_cost(s, [](double, const Vector&, const Vector&) { return -1.0; }),
                        InvalidArgument);
    }
}

TEST_CASE("variant lattice sizes") {
    const ProblemSpec one = gbm_spec(0.1, 0.2, {0.0, 1.0}, "one");
    const ProblemSpec two = gbm_spec(0.1, 0.2, {0.0, 0.5, 1.0}, "two");
    CHECK(build_variant_lattice(one, 0).size() == 4);
    CHECK(build_variant_lattice(two, 0).size() == 8);
    CHECK(build_variant_lattice(two, 1).size() == 4);
}

TEST_CASE("lattice is closed under boundary moves and ordered") {
    const ProblemSpec two = gbm_spec(0.1, 0.2, {0.0, 0.5, 1.0}, "two");
    const auto lattice = build_variant_lattice(two, 0);
    const std::set<VariantKey> keys(lattice.begin(), lattice.end());
    CHECK(keys.size() == lattice.size());
    auto position = [&](const VariantKey& k) {
        return std::find(lattice.begin(), lattice.end(), k) - lattice.begin();
    };
    for (const auto& k : lattice) {
        if (k.has_m) {
            CHECK(keys.count(k.without_m()) == 1);
            CHECK(position(k.without_m()) < position(k));
        }
        for (int date : k.active_p) {
            CHECK(keys.count(k.with_plain(date)) == 1);
            CHECK(position(k.with_plain(date)) < position(k));
        }
    }
    const VariantKey root = root_variant(0, 2);
    CHECK(root.is_root());
    CHECK(position(root.without_m()) < position(root));
    CHECK(root.active_p == std::vector<int>{1, 2});
    CHECK(root.on_next_interval().active_p == std::vector<int>{2});
}

TEST_CASE("convexity certificate") {
    ProblemSpec s = gbm_spec(0.1, 0.2, {0.0, 1.0}, "affine");
    s.sde.drift = [](double, const Vector& z, const Vector& u) { return Vector(0.1 * z + u); };
    s.controls = ControlSet::box(vec({-1.0}), vec({1.0}));
    SUBCASE("affine coefficients with a box") {
        const auto c = check_convexity_preconditions(s);
        CHECK(c.verdict == ConvexityCertificate::Verdict::sufficient_conditions_hold);
        CHECK(c.is_affine_in_state_and_control());
        CHECK(c.costs_convex());
        CHECK(c.controls_convex);
    }
    SUBCASE("two-point control set") {
        s.controls = ControlSet::finite({vec({-1.0}), vec({1.0})});
        const auto c = check_convexity_preconditions(s);
        CHECK(c.verdict == ConvexityCertificate::Verdict::unknown);
        CHECK_FALSE(c.controls_convex);
    }
    SUBCASE("non-affine diffusion") {
        s.sde.diffusion = [](double, const Vector& z, const Vector&) {
            return Matrix(Matrix::Constant(1, 1, std::sin(z[0])));
        };
        s.domain = StateBox{vec({0.0}), vec({3.2})};
        const auto c = check_convexity_preconditions(s);
        CHECK(c.verdict == ConvexityCertificate::Verdict::unknown);
        CHECK_FALSE(c.diffusion_affine);
    }
    SUBCASE("affine1 preset holds") {
        const auto c = check_convexity_preconditions(make_preset("affine1").spec);
        CHECK(c.verdict == ConvexityCertificate::Verdict::sufficient_conditions_hold);
    }
}

TEST_CASE("certificate soundness on fresh samples") {
    const ProblemSpec s = make_preset("affine1").spec;
    REQUIRE(check_convexity_preconditions(s).verdict == ConvexityCertificate::Verdict::sufficient_conditions_hold);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> z(s.domain.lower[0], s.domain.upper[0]), u(-0.2, 0.2), lam(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const double a = z(rng), b = z(rng), l = lam(rng);
        const double mid = l * a + (1 - l) * b;
        CHECK(s.loss.terminal_cost(vec({mid})) <=
              l * s.loss.terminal_cost(vec({a})) + (1 - l) * s.loss.terminal_cost(vec({b})) + 1e-12);
        CHECK(s.loss.loss(vec({mid})) <= l * s.loss.loss(vec({a})) + (1 - l) * s.loss.loss(vec({b})) + 1e-12);
        const double ua = u(rng), ub = u(rng);
        const Vector dm = s.sde.drift(0.0, vec({mid}), vec({l * ua + (1 - l) * ub}));
        const Vector dl = l * s.sde.drift(0.0, vec({a}), vec({ua})) + (1 - l) * s.sde.drift(0.0, vec({b}), vec({ub}));
        CHECK(std::abs(dm[0] - dl[0]) <= 1e-12);
    }
}

TEST_CASE("growth constant is positive and bounds the terminal data") {
    const ProblemSpec s = gbm_spec(0.1, 0.2, {0.0, 1.0}, "gbm");
    const double C = growth_constant(s);
    CHECK(C > 0.0);
    for (double z : {0.0, 0.5, 1.0, 3.0}) CHECK(s.loss.terminal_cost(vec({z})) + s.loss.loss(vec({z})) <= C * (1.0 + z));
}
