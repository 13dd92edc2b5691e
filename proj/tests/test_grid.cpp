#include <doctest.h>

#include <cmath>

#include "sbmlab/errors.hpp"
#include "sbmlab/grid_function.hpp"

using namespace sbmlab;

TEST_CASE("derivative of x^2 is exact") {
    const GridFunction f = GridFunction::sample(-2.0, 3.0, 51, [](double x) { return x * x; });
    const GridFunction d = derivative(f);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == doctest::Approx(2.0 * d.x(i)).epsilon(1e-10));
}

TEST_CASE("derivative is exact for quartics, including the end stencils") {
    const auto q = [](double x) { return x * x * x * x - 2.0 * x * x * x + x - 1.0; };
    const auto dq = [](double x) { return 4.0 * x * x * x - 6.0 * x * x + 1.0; };
    const GridFunction d = derivative(GridFunction::sample(0.0, 1.0, 21, q));
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == doctest::Approx(dq(d.x(i))).epsilon(1e-9));
}

TEST_CASE("interpolation reproduces cubics and extends by the edge values") {
    const auto c = [](double x) { return 0.5 * x * x * x - x + 2.0; };
    const GridFunction f = GridFunction::sample(-1.0, 1.0, 41, c);
    for (double x : {-0.987, -0.31, 0.0, 0.123, 0.9}) CHECK(f(x) == doctest::Approx(c(x)).epsilon(1e-12));
    CHECK(f(-5.0) == doctest::Approx(c(-1.0)));
    CHECK(f(5.0) == doctest::Approx(c(1.0)));
}

TEST_CASE("trapezoid integral and sup distance") {
    const GridFunction f = GridFunction::sample(0.0, 1.0, 1001, [](double x) { return std::sin(x); });
    CHECK(f.integral() == doctest::Approx(1.0 - std::cos(1.0)).epsilon(1e-6));
    const GridFunction g = GridFunction::sample(0.0, 1.0, 11, [](double x) { return std::sin(x) + 0.01; });
    CHECK(sup_distance(f, g) == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("even extension mirrors the half profile") {
    const GridFunction half = GridFunction::sample(0.0, 2.0, 21, [](double x) { return std::exp(-x); });
    const GridFunction full = even_extension(half);
    CHECK(full.size() == 41);
    CHECK(full.x_min() == doctest::Approx(-2.0));
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(full[i] == doctest::Approx(std::exp(-std::abs(full.x(i)))));
}

TEST_CASE("clip_nonnegative zeroes tiny negatives and rejects large ones") {
    GridFunction f(0.0, 1.0, {1.0, -1e-12, 0.5});
    f.clip_nonnegative(1e-9);
    CHECK(f[1] == 0.0);
    GridFunction g(0.0, 1.0, {1.0, -1e-3, 0.5});
    CHECK_THROWS_AS(g.clip_nonnegative(1e-9), StabilityViolation);
}

TEST_CASE("malformed grids are rejected") {
    CHECK_THROWS_AS(GridFunction(1.0, 0.0, {1.0, 2.0}), InvalidArgument);
    CHECK_THROWS_AS(GridFunction(0.0, 1.0, {1.0}), InvalidArgument);
}
