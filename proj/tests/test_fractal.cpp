#include <doctest.h>

#include <cmath>

#include "sbmlab/errors.hpp"
#include "sbmlab/fractal_dim.hpp"

using namespace sbmlab;
using namespace sbmlab::fractal;

TEST_CASE("Cantor set calibration") {
    const GridFunction c = cantor_indicator(10);
    const BoxCountResult r = box_dimension(c, dyadic_ladder(c), 0.5);
    CHECK(r.dimension == doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(0.05 / 0.6309));
}

TEST_CASE("Cantor indicator structure") {
    const GridFunction c = cantor_indicator(2);
    REQUIRE(c.size() == 9);
    const double expect[9] = {1, 0, 1, 0, 0, 0, 1, 0, 1};
    for (std::size_t i = 0; i < 9; ++i) CHECK(c[i] == expect[i]);
    CHECK_THROWS_AS(cantor_indicator(0), InvalidArgument);
}

TEST_CASE("boundary cells of a single jump") {
    const GridFunction s = GridFunction::sample(0.0, 1.0, 11, [](double x) { return x < 0.45 ? 0.0 : 1.0; });
    const auto cells = boundary_cells(s, 0.5);
    CHECK(cells == std::vector<std::size_t>{4, 5});
}

TEST_CASE("one boundary point is a degenerate fit") {
    // the jump lies between cells 512 and 513, which share a box at every dyadic size
    const GridFunction s = GridFunction::sample(0.0, 1.0, 1025, [](double x) { return x <= 0.5 ? 0.0 : 1.0; });
    CHECK(boundary_cells(s, 0.5) == std::vector<std::size_t>{512, 513});
    CHECK_THROWS_AS(box_dimension(s, dyadic_ladder(s), 0.5), DegenerateFit);
}

TEST_CASE("two distant points have dimension near zero") {
    const GridFunction s =
        GridFunction::sample(0.0, 1.0, 4097, [](double x) { return x > 0.1 && x < 0.9 ? 1.0 : 0.0; });
    std::vector<double> ladder;
    for (double e = 4.0 / 4096.0; e <= 1.0 / 16.0; e *= 2.0) ladder.push_back(e);
    const BoxCountResult r = box_dimension(s, ladder, 0.5);
    CHECK(std::abs(r.dimension) < 0.05);
}

TEST_CASE("a densely oscillating snapshot has dimension one") {
    const GridFunction s = GridFunction::zeros(0.0, 1.0, 4097);
    GridFunction osc = s;
    for (std::size_t i = 0; i < osc.size(); ++i) osc[i] = (i / 2) % 2 ? 1.0 : 0.0;
    const BoxCountResult r = box_dimension(osc, dyadic_ladder(osc), 0.5);
    CHECK(r.dimension == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("robust fit compares two thresholds") {
    const GridFunction c = cantor_indicator(8);
    const RobustBoxCount r = box_dimension_robust(c, dyadic_ladder(c), 0.8);
    CHECK(r.robust);
    CHECK(r.at_half.threshold_used == doctest::Approx(0.4));
}

TEST_CASE("bad ladders and thresholds") {
    const GridFunction c = cantor_indicator(6);
    CHECK_THROWS_AS(box_dimension(c, {0.1, 0.2}, 0.5), InvalidArgument);
    CHECK_THROWS_AS(box_dimension(c, {0.4, 0.3, 0.2, 0.1}, 0.5), InvalidArgument);
    CHECK_THROWS_AS(boundary_cells(c, 0.0), InvalidArgument);
}
