#include <doctest.h>

#include <array>
#include <cmath>

#include <boost/numeric/odeint.hpp>

#include "sbmlab/errors.hpp"
#include "sbmlab/profiles.hpp"

using namespace sbmlab;
using namespace sbmlab::profiles;

namespace {

// Shooting oracle on odeint's Dormand-Prince stepper: true when the
// trajectory F(0)=c, F'(0)=0 turns negative before x_max.
bool odeint_goes_negative(double c, double x_max) {
    namespace ode = boost::numeric::odeint;
    using State = std::array<double, 2>;
    const auto rhs = [](const State& s, State& d, double x) {
        d[0] = s[1];
        d[1] = -x * s[1] - 2.0 * s[0] + s[0] * s[0];
    };
    auto stepper = ode::make_controlled(1e-12, 1e-12, ode::runge_kutta_dopri5<State>());
    State y{c, 0.0};
    double x = 0.0, dx = 1e-3;
    while (x < x_max) {
        if (x + dx > x_max) dx = x_max - x;
        if (stepper.try_step(rhs, y, x, dx) == ode::success) {
            if (y[0] < 0.0) return true;
            if (y[0] > kBlowUpCap) return false;
        }
    }
    return false;
}

double odeint_c_star(double x_max) {
    double lo = 0.1, hi = 10.0;
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        (odeint_goes_negative(mid, x_max) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("solve_F agrees with an independent odeint bisection") {
    const ShootingResult r = solve_F();
    CHECK(r.c_star == doctest::Approx(odeint_c_star(10.0)).epsilon(1e-6));
    CHECK(r.c_high - r.c_low <= 1e-10);
}

TEST_CASE("solve_F is stable under grid refinement") {
    const ShootingResult a = solve_F(10.0, 1001, 1e-10);
    const ShootingResult b = solve_F(10.0, 2001, 1e-11);
    CHECK(a.c_star == doctest::Approx(b.c_star).epsilon(1e-8));
    for (double x : {0.0, 0.5, 1.0, 2.0, 3.0}) CHECK(a.profile(x) == doctest::Approx(b.profile(x)).epsilon(1e-6));
}

TEST_CASE("F is the decaying solution, not the constant 2") {
    const ShootingResult r = solve_F();
    CHECK(std::abs(r.c_star - 2.0) > 0.1);
    CHECK(r.profile[r.profile.size() - 1] < 1e-6);
    for (double v : r.profile.values()) CHECK(v >= 0.0);
    // decreasing on the half line
    for (std::size_t i = 1; i < r.profile.size(); ++i) CHECK(r.profile[i] <= r.profile[i - 1] + 1e-12);
}

TEST_CASE("F satisfies its ODE on the grid") {
    const ShootingResult r = solve_F();
    const GridFunction res = ode_residual(r.profile);
    for (std::size_t i = 2; i + 2 < res.size(); ++i) CHECK(std::abs(res[i]) < 1e-6);
}

TEST_CASE("classify_F brackets the minimal value") {
    const ShootingResult r = solve_F();
    CHECK(classify_F(r.c_star - 1e-3, 10.0) == Trajectory::goes_negative);
    CHECK(classify_F(r.c_star + 1e-3, 10.0) != Trajectory::goes_negative);
    CHECK(classify_F(5.0, 10.0) == Trajectory::blows_up);
}

TEST_CASE("v^lambda is bounded by the left limit, decreasing in x and increasing in lambda") {
    PdeRunConfig cfg;
    cfg.n_points = 801;
    GridFunction prev;
    for (double lam : {0.5, 1.0, 4.0}) {
        cfg.lambda = lam;
        const GridFunction v = solve_v_lambda(cfg);
        CHECK(v[0] == doctest::Approx(left_limit(lam, 1.0)).epsilon(1e-6));
        for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] <= v[i - 1] + 1e-12);
        for (double x : v.values()) CHECK(x <= left_limit(lam, 1.0) + 1e-9);
        if (prev.size() > 0) {
            for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] >= prev[i] - 1e-12);
        }
        prev = v;
    }
}

TEST_CASE("explicit and semi-implicit schemes agree") {
    PdeRunConfig cfg;
    cfg.lambda = 2.0;
    cfg.n_points = 401;
    cfg.dt = 1e-3;
    const GridFunction a = solve_v_lambda(cfg);
    cfg.scheme = Scheme::explicit_euler;
    const GridFunction b = solve_v_lambda(cfg);
    CHECK(sup_distance(a, b) < 2e-3);
}

TEST_CASE("explicit scheme rejects unstable steps") {
    PdeRunConfig cfg;
    cfg.scheme = Scheme::explicit_euler;
    cfg.n_points = 2001;
    cfg.dt = 1e-2;
    CHECK_THROWS_AS(solve_v_lambda(cfg), InvalidArgument);
}

TEST_CASE("scaling identity v^lambda(t,x) = lambda v^1(lambda t, sqrt(lambda) x)") {
    for (double lam : {0.25, 4.0}) CHECK(scaling_identity_error(lam, 0.5) < 1e-3);
}

TEST_CASE("G from the two routes") {
    const GSolution g = solve_G_detailed();
    CHECK(g.sup_gap <= 5e-3);
    CHECK(g.profile[0] == doctest::Approx(2.0).epsilon(1e-3));
    const GridFunction d = derivative(g.profile);
    for (double v : d.values()) CHECK(v <= 1e-6);
    CHECK(g.profile(4.0) / (4.0 * std::exp(-8.0)) < 100.0);
    for (double v : g.profile.values()) CHECK(v > 0.0);
    // the ODE holds away from the grid ends
    const GridFunction res = ode_residual(g.profile);
    for (std::size_t i = 0; i < res.size(); ++i) {
        if (std::abs(res.x(i)) < 8.0) CHECK(std::abs(res[i]) < 1e-4);
    }
}

TEST_CASE("v^infinity is self-similar in G") {
    const GridFunction G = solve_G();
    for (double t : {0.5, 2.0}) CHECK(self_similarity_error(t, G) < 5e-3);
}

TEST_CASE("an impossible cross-check tolerance raises CrossCheckMismatch") {
    CHECK_THROWS_AS(solve_G_detailed(-10.0, 10.0, 2001, 1e6, 1e-12, 1e-9), CrossCheckMismatch);
}

TEST_CASE("malformed PDE configurations are rejected") {
    PdeRunConfig cfg;
    cfg.t_final = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    PdeRunConfig c2;
    c2.n_points = 2;
    CHECK_THROWS_AS(c2.validate(), InvalidArgument);
}
