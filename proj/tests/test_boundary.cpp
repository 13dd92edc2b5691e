#include <doctest.h>

#include <cmath>

#include "sbmlab/boundary_stats.hpp"
#include "sbmlab/errors.hpp"

using namespace sbmlab;
using namespace sbmlab::boundary;

namespace {

// density 2(1 - x) on [0, 1]: mass right of x is (1 - x)^2 there
GridFunction triangle(double scale = 1.0) {
    return GridFunction::sample(-1.0, 2.0, 301, [&](double x) { return x >= 0.0 && x <= 1.0 ? scale * 2.0 * (1.0 - x) : 0.0; });
}

GridFunction constant(double c) {
    return GridFunction::sample(0.0, 1.0, 101, [&](double) { return c; });
}

std::vector<StabilizationRow> rows_of(std::initializer_list<double> d) {
    std::vector<StabilizationRow> r;
    double lam = 1.0;
    for (double v : d) {
        r.push_back({lam, 2.0 * lam, v});
        lam *= 2.0;
    }
    return r;
}

}  // namespace

TEST_CASE("right mass of the triangle") {
    const GridFunction r = right_mass(triangle());
    // the trapezoid rule is exact on the linear part; the jump at 0 is not resolved
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double x = r.x(i);
        if (x < -1e-12) continue;
        const double exact = x >= 1.0 ? 0.0 : (1.0 - x) * (1.0 - x);
        CHECK(r[i] == doctest::Approx(exact).epsilon(1e-12).scale(1.0));
    }
    CHECK(mass_right_of(triangle(), 0.0) == doctest::Approx(1.0));
    CHECK(mass_right_of(triangle(), 0.5) == doctest::Approx(0.25).epsilon(1e-4));
    CHECK(mass_right_of(triangle(), -5.0) == doctest::Approx(r[0]));
    CHECK(mass_right_of(triangle(), 5.0) == 0.0);
}

TEST_CASE("tau_eps on the triangle and on a light snapshot") {
    for (double eps : {1e-3, 1e-2, 0.25}) {
        const TauEps t = tau_eps(triangle(), eps);
        REQUIRE(t.finite());
        CHECK(t.value == doctest::Approx(1.0 - std::sqrt(eps)).epsilon(2e-4));
    }
    const TauEps none = tau_eps(triangle(1e-4), 1e-3);
    CHECK_FALSE(none.finite());
    CHECK_THROWS_AS(tau_eps(triangle(), 0.0), InvalidArgument);
    // a zero snapshot never reaches eps
    CHECK_FALSE(tau_eps(GridFunction::zeros(0, 1, 11), 1e-9).finite());
}

TEST_CASE("excess mass on the triangle") {
    const double eps = 1e-2;
    const double tau = tau_eps(triangle(), eps).value;
    for (double u : {0.05, 0.1, 0.3}) {
        const double exact = (1.0 - tau + u) * (1.0 - tau + u) - (1.0 - tau) * (1.0 - tau);
        CHECK(excess_mass(triangle(), tau, u) == doctest::Approx(exact).epsilon(1e-6));
    }
}

TEST_CASE("growth experiment reproduces the triangle's excess") {
    const double eps = 1e-2;
    const std::vector<double> u = log_ladder(0.1, 0.5, 5);
    std::vector<GridFunction> snaps(120, triangle());
    snaps.push_back(triangle(1e-4));  // no tau, ignored
    const GrowthResult g = boundary_growth_experiment(snaps, eps, u);
    CHECK(g.survivors == 120);
    for (std::size_t j = 0; j < u.size(); ++j) {
        const double r = std::sqrt(eps) + u[j];
        CHECK(g.mean_total[j] == doctest::Approx(r * r).epsilon(1e-3));
        CHECK(g.mean_excess[j] == doctest::Approx(r * r - eps).epsilon(1e-3));
    }
    std::vector<GridFunction> few(99, triangle());
    CHECK_THROWS_AS(boundary_growth_experiment(few, eps, u), InsufficientSurvivors);
}

TEST_CASE("local time of a constant density") {
    for (double lam : {1.0, 16.0, 256.0}) {
        const LocalTimeApprox a = local_time_approx(constant(0.05), lam, 0.9);
        CHECK(a.total == doctest::Approx(std::pow(lam, 1.8) * 0.05 * std::exp(-lam * 0.05)));
    }
    CHECK_THROWS_AS(local_time_approx(constant(-1.0), 2.0, 0.9), InvalidArgument);
}

TEST_CASE("stabilization distances against a fine quadrature") {
    // density x on [0, 1]; the oracle integrates with Simpson's rule on a much finer grid
    const GridFunction s = GridFunction::sample(0.0, 1.0, 2001, [](double x) { return x; });
    const auto g = [](double lam, double x) { return std::pow(lam, 1.5) * x * std::exp(-lam * x); };
    for (auto [a, b] : {std::pair{8.0, 16.0}, std::pair{32.0, 64.0}}) {
        const int n = 200000;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double x = static_cast<double>(i) / n;
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            acc += w * std::abs(g(a, x) - g(b, x));
        }
        acc /= 3.0 * n;
        CHECK(local_time_distance(s, a, b, 0.75) == doctest::Approx(acc).epsilon(1e-4));
    }
    const auto rows = local_time_stabilization({s, s}, {8.0, 16.0, 32.0}, 0.75);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].distance == doctest::Approx(local_time_distance(s, 8.0, 16.0, 0.75)));
}

TEST_CASE("eventually decreasing") {
    CHECK(eventually_decreasing(rows_of({1, 2, 3, 2, 1})));
    CHECK(eventually_decreasing(rows_of({3, 2, 1})));
    CHECK_FALSE(eventually_decreasing(rows_of({1, 2, 3})));
    CHECK_FALSE(eventually_decreasing(rows_of({1, 3, 2, 2.5})));
    CHECK_FALSE(eventually_decreasing(rows_of({1})));
}

TEST_CASE("local time law scales conditioned moments by 2/t") {
    const std::vector<GridFunction> at_half{constant(0.1), constant(0.2)};
    const std::vector<GridFunction> at_two{constant(0.05)};
    const LocalTimeLaw law = local_time_power_law({at_half, at_two}, {0.5, 2.0}, 4.0, 0.5);
    const double l1 = local_time_approx(constant(0.1), 4.0, 0.5).total;
    const double l2 = local_time_approx(constant(0.2), 4.0, 0.5).total;
    const double l3 = local_time_approx(constant(0.05), 4.0, 0.5).total;
    CHECK(law.mean_total[0] == doctest::Approx(4.0 * 0.5 * (l1 + l2)));
    CHECK(law.second_moment[0] == doctest::Approx(4.0 * 0.5 * (l1 * l1 + l2 * l2)));
    CHECK(law.mean_total[1] == doctest::Approx(1.0 * l3));
    CHECK(law.mean_fit.exponent == doctest::Approx(std::log(law.mean_total[1] / law.mean_total[0]) / std::log(4.0)));
    CHECK_THROWS_AS(local_time_power_law({at_half}, {0.5}, 4.0, 0.5), InvalidArgument);
}

TEST_CASE("left tail counts small positive masses") {
    // masses right of 0: 0.5, 0.1, 0.02 and 0
    std::vector<GridFunction> snaps;
    for (double m : {0.5, 0.1, 0.02, 0.0}) snaps.push_back(triangle(m));
    const auto res = left_tail_experiment(snaps, {0.0}, {1.0, 4.0, 20.0, 100.0});
    REQUIRE(res.size() == 1);
    CHECK(res[0].counts == std::vector<std::size_t>{3, 2, 1, 0});
    CHECK(res[0].probabilities[0] == doctest::Approx(0.75));
    CHECK(res[0].monotone);
    CHECK(res[0].fit.exponent < 0.0);
}

TEST_CASE("log ladder") {
    const auto v = log_ladder(0.01, 1.0, 3);
    CHECK(v[0] == doctest::Approx(0.01));
    CHECK(v[1] == doctest::Approx(0.1));
    CHECK(v[2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(log_ladder(1.0, 0.5, 3), InvalidArgument);
}
