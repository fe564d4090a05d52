#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "lsc/error.hpp"
#include "lsc/grid.hpp"

using namespace lsc;

TEST_CASE("budget lookup") {
    const UniformAxis ax{0.0, 2.0, 5};
    SUBCASE("interior point") {
        const auto l = ax.locate_budget(0.75);
        CHECK(l.k == 1);
        CHECK(l.t == doctest::Approx(0.5));
        CHECK(l.penalty == 0.0);
    }
    SUBCASE("snaps to a node within 1e-9 cells") {
        const auto l = ax.locate_budget(1.0 - 1e-12);
        CHECK(l.k == 2);
        CHECK(l.t == 0.0);
    }
    SUBCASE("clamps above the top") {
        const auto l = ax.locate_budget(2.7);
        CHECK(l.k == 4);
        CHECK(l.t == 0.0);
        CHECK(l.penalty == 0.0);
    }
    SUBCASE("reports the shortfall below zero") {
        const auto l = ax.locate_budget(-0.3);
        CHECK(l.k == 0);
        CHECK(l.t == 0.0);
        CHECK(l.penalty == doctest::Approx(0.3));
    }
}

TEST_CASE("state lookup extrapolates linearly") {
    const UniformAxis ax{0.0, 1.0, 11};
    const auto below = ax.locate_extrapolate(-0.25);
    CHECK(below.k == 0);
    CHECK(below.t == doctest::Approx(-2.5));
    const auto above = ax.locate_extrapolate(1.05);
    CHECK(above.k == 9);
    CHECK(above.t == doctest::Approx(1.5));
    CHECK(lerp(2.0, 4.0, 1.5) == doctest::Approx(5.0));
}

TEST_CASE("quadrature rules match Brownian moments") {
    const double dt = 0.04;
    for (auto kind : {QuadratureKind::two_point, QuadratureKind::gauss_hermite}) {
        for (int d : {1, 2}) {
            const QuadratureRule r = make_quadrature(kind, 5, d, dt);
            CHECK(std::accumulate(r.weights.begin(), r.weights.end(), 0.0) == doctest::Approx(1.0));
            Vector mean = Vector::Zero(d);
            Matrix cov = Matrix::Zero(d, d);
            for (std::size_t q = 0; q < r.nodes.size(); ++q) {
                mean += r.weights[q] * r.nodes[q];
                cov += r.weights[q] * r.nodes[q] * r.nodes[q].transpose();
            }
            CHECK(mean.norm() < 1e-14);
            CHECK((cov - dt * Matrix::Identity(d, d)).norm() < 1e-14);
        }
    }
    const QuadratureRule two = make_quadrature(QuadratureKind::two_point, 1, 2, 0.01);
    REQUIRE(two.nodes.size() == 4);
    CHECK(two.nodes[1][0] < 0.0);
    CHECK(two.nodes[1][1] > 0.0);
}

TEST_CASE("Gauss-Hermite rule integrates polynomials exactly") {
    std::vector<double> x, w;
    gauss_hermite(4, x, w);
    double m4 = 0.0, m6 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        m4 += w[k] * std::pow(x[k], 4);
        m6 += w[k] * std::pow(x[k], 6);
    }
    CHECK(m4 == doctest::Approx(3.0));
    CHECK(m6 == doctest::Approx(15.0));
}

TEST_CASE("aligned budget controls land on nodes") {
    GridSpec g = lsc::test::grid_1d(0.0, 1.0, 11, 2.0, 41, 2.0, 21, 0.01, 1.0);
    const auto t = make_budget_controls(g, 1, g.dt);
    CHECK(t.p_values.size() == 5);  // multiples of 0.05 / 0.1 = 0.5 up to a_max = 1
    CHECK(t.m_values.size() == 3);
    for (const auto& a : t.p_values) {
        const double move = a[0] * std::sqrt(g.dt) / g.p_axis.step();
        CHECK(move == doctest::Approx(std::round(move)).epsilon(1e-12));
    }
    g.budget_controls = BudgetControlKind::uniform;
    g.budget_points = 3;
    const auto u = make_budget_controls(g, 2, g.dt);
    CHECK(u.p_values.size() == 9);
}

TEST_CASE("schedule") {
    TimeGrid tg{{0.0, 0.5, 1.0}, {}};
    const auto s = make_schedule(tg, 0.2);
    REQUIRE(s.size() == 2);
    CHECK(s[0].steps == 3);
    CHECK(s[0].dt == doctest::Approx(0.5 / 3));
    CHECK(s[1].time(s[1].steps) == 1.0);
    CHECK(s[1].nearest_level(0.62) == 1);
    CHECK_THROWS_AS(make_schedule(tg, 0.7), InvalidArgument);
    CHECK_THROWS_AS(make_schedule(TimeGrid{{0.0, 0.5, 0.5}, {}}, 0.1), InvalidArgument);
}

TEST_CASE("grid validation") {
    GridSpec g = lsc::test::grid_1d(0.0, 1.0, 11, 2.0, 5, 2.0, 5, 0.1, 1.0);
    CHECK_NOTHROW(g.validate(1));
    CHECK_THROWS_AS(g.validate(2), InvalidArgument);
    g.p_axis.lo = 0.5;
    CHECK_THROWS_AS(g.validate(1), InvalidArgument);
    g.p_axis.lo = 0.0;
    g.dt = -1.0;
    CHECK_THROWS_AS(g.validate(1), InvalidArgument);
}

TEST_CASE("variant grid layout") {
    const GridSpec g = lsc::test::grid_1d(0.0, 1.0, 11, 2.0, 5, 2.0, 7, 0.1, 1.0);
    const VariantGrid vg = VariantGrid::make(g, root_variant(0, 2), 1);
    CHECK(vg.rank() == 4);
    CHECK(vg.budget_axes() == 3);
    CHECK(vg.size == 11u * 5u * 5u * 7u);
    CHECK(vg.strides.back() == 1u);
    for (std::size_t k : {0ul, 17ul, 400ul, vg.size - 1}) CHECK(vg.flat(vg.unflatten(k)) == k);
    const Vector x = vg.coordinates({10, 4, 2, 6});
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(2.0));
    CHECK(x[2] == doctest::Approx(1.0));
    CHECK(x[3] == doctest::Approx(2.0));
}
