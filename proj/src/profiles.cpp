#include "sbmlab/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sbmlab/errors.hpp"
#include "sbmlab/ode.hpp"
#include "sbmlab/tridiagonal.hpp"

namespace sbmlab::profiles {

namespace {

using State = ode::State<2>;

// f'' = -y f' - 2 f + f^2
void profile_rhs(double y, const State& u, State& du) {
    du[0] = u[1];
    du[1] = -y * u[1] - 2.0 * u[0] + u[0] * u[0];
}

// same ODE for h = 2 - f: h'' = -y h' + 2 h - h^2
void deficit_rhs(double y, const State& u, State& du) {
    du[0] = u[1];
    du[1] = -y * u[1] + 2.0 * u[0] - u[0] * u[0];
}

std::vector<double> uniform_points(double a, double b, std::size_t n) {
    std::vector<double> x(n);
    const double h = (b - a) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) x[i] = a + h * static_cast<double>(i);
    x.back() = b;
    return x;
}

ode::Options shooting_options() {
    ode::Options o;
    o.rtol = 1e-10;
    o.atol = 1e-16;
    return o;
}

struct FTrajectory {
    Trajectory kind;
    double fail_x;
    std::vector<double> values;
};

FTrajectory integrate_F(double c, const std::vector<double>& grid) {
    FTrajectory t{Trajectory::stays_nonnegative, grid.back(), std::vector<double>(grid.size(), 0.0)};
    const ode::DormandPrince45<2> solver(shooting_options());
    double x_last = 0.0;
    solver.integrate(
        profile_rhs, 0.0, State{c, 0.0}, grid, [&](std::size_t i, const State& u) { t.values[i] = u[0]; },
        [&](double, const State& u) {
            if (u[0] < 0.0) {
                t.kind = Trajectory::goes_negative;
                return true;
            }
            if (u[0] >= kBlowUpCap) {
                t.kind = Trajectory::blows_up;
                return true;
            }
            return false;
        },
        &x_last);
    if (t.kind != Trajectory::stays_nonnegative) t.fail_x = x_last;
    return t;
}

}  // namespace

Trajectory classify_F(double c, double x_max, double* fail_x) {
    const std::vector<double> grid{x_max};
    const FTrajectory t = integrate_F(c, grid);
    if (fail_x) *fail_x = t.fail_x;
    return t.kind;
}

ShootingResult solve_F(double x_max, std::size_t n_points, double tol) {
    if (x_max < 8.0) throw InvalidArgument("solve_F needs x_max >= 8");
    if (!(tol > 0.0) || tol > 1e-8) throw InvalidArgument("solve_F needs 0 < tol <= 1e-8");
    if (n_points < 5) throw InvalidArgument("solve_F needs at least 5 grid points");
    const std::vector<double> grid = uniform_points(0.0, x_max, n_points);
    const std::vector<double> end{x_max};

    double lo = 0.1, hi = 10.0;
    FTrajectory t_lo = integrate_F(lo, end);
    const FTrajectory t_hi = integrate_F(hi, end);
    if (t_lo.kind != Trajectory::goes_negative || t_hi.kind == Trajectory::goes_negative) {
        throw BracketFailure("shooting classifier does not change sign over c in [0.1, 10]");
    }
    ShootingResult r;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        FTrajectory t = integrate_F(mid, end);
        if (t.kind == Trajectory::goes_negative) {
            lo = mid;
            t_lo = std::move(t);
        } else {
            hi = mid;
        }
        ++r.iterations;
    }
    FTrajectory accepted = integrate_F(hi, grid);
    r.c_star = hi;
    r.c_low = lo;
    r.c_high = hi;
    r.blowup_or_negativity_x = t_lo.fail_x;
    r.profile = GridFunction(0.0, x_max, std::move(accepted.values), "F");
    r.profile.clip_nonnegative(1e-12);
    const double tail = x_max * x_max * r.profile[n_points - 1];
    if (!(tail < 1e-3)) {
        throw CrossCheckMismatch("F tail x^2 F(x_max) = " + std::to_string(tail) + " does not decay");
    }
    return r;
}

double PdeRunConfig::effective_lambda() const {
    return std::isinf(lambda) ? lambda_surrogate : lambda;
}

void PdeRunConfig::validate() const {
    if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
    if (!(t_final > 0.0)) throw InvalidArgument("t_final must be positive");
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!(x_min < 0.0 && 0.0 < x_max)) throw InvalidArgument("grid must satisfy x_min < 0 < x_max");
    if (n_points < 5) throw InvalidArgument("grid needs at least 5 points");
    if (!(t_start > 0.0) || t_start >= t_final) throw InvalidArgument("t_start must lie in (0, t_final)");
    if (!(growth > 0.0)) throw InvalidArgument("growth must be positive");
    if (std::isinf(lambda) && !(lambda_surrogate > 0.0)) throw InvalidArgument("lambda_surrogate must be positive");
    const double h = spacing();
    if (scheme == Scheme::explicit_euler && dt > 0.5 * h * h) {
        throw InvalidArgument("explicit scheme needs dt <= h^2/2 (h = " + std::to_string(h) + ")");
    }
}

double left_limit(double lambda, double t) { return 2.0 * lambda / (2.0 + lambda * t); }

GridFunction solve_v_lambda(const PdeRunConfig& cfg) {
    cfg.validate();
    const double lambda = cfg.effective_lambda();
    const std::size_t n = cfg.n_points;
    const double h = cfg.spacing();

    // heat semigroup applied to the step, scaled by the exact x = -inf value
    double t = cfg.t_start;
    GridFunction v = GridFunction::sample(
        cfg.x_min, cfg.x_max, n,
        [&](double x) { return left_limit(lambda, t) * 0.5 * std::erfc(x / std::sqrt(2.0 * t)); },
        "v^lambda");
    std::span<double> vals = v.values();

    auto react = [&](double s) {
        for (double& u : vals) u = u / (1.0 + 0.5 * s * u);
    };
    auto check = [&]() {
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(vals[i]) || vals[i] < -1e-9) {
                throw StabilityViolation("v = " + std::to_string(vals[i]) + " at x = " +
                                         std::to_string(v.x(i)) + ", t = " + std::to_string(t));
            }
            if (vals[i] < 0.0) vals[i] = 0.0;
        }
    };

    std::vector<double> lower(n), diag(n), upper(n), rhs(n);
    while (t < cfg.t_final * (1.0 - 1e-14)) {
        double step = std::min({cfg.dt, cfg.growth * t, cfg.t_final - t});
        if (cfg.scheme == Scheme::explicit_euler) {
            step = std::min(step, 0.5 * h * h);
            const double a = 0.5 * step / (h * h);
            for (std::size_t i = 1; i + 1 < n; ++i) rhs[i] = vals[i] + a * (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]);
            t += step;
            // diffusion leaves the flat left end alone; the reaction moves it to left_limit(t)
            rhs[0] = vals[0];
            rhs[n - 1] = 0.0;
            std::copy(rhs.begin(), rhs.end(), vals.begin());
            react(step);
        } else {
            react(0.5 * step);
            // Crank–Nicolson for v_t = v''/2 with Dirichlet ends
            const double a = 0.25 * step / (h * h);
            for (std::size_t i = 1; i + 1 < n; ++i) {
                rhs[i] = vals[i] + a * (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]);
                lower[i] = -a;
                diag[i] = 1.0 + 2.0 * a;
                upper[i] = -a;
            }
            t += step;
            diag[0] = diag[n - 1] = 1.0;
            upper[0] = lower[n - 1] = 0.0;
            rhs[0] = vals[0];
            rhs[n - 1] = 0.0;
            solve_tridiagonal(lower, diag, upper, rhs);
            std::copy(rhs.begin(), rhs.end(), vals.begin());
            react(0.5 * step);
        }
        vals[0] = left_limit(lambda, t);
        vals[n - 1] = 0.0;
        check();
    }
    return v;
}

GridFunction shoot_G(double x_min, double x_max, std::size_t n_points, double tol, double* amplitude,
                     int* iterations) {
    if (x_min > -6.0) throw InvalidArgument("shoot_G needs x_min <= -6 for the left asymptote");
    if (x_max < 6.0) throw InvalidArgument("shoot_G needs x_max >= 6");
    const std::vector<double> grid = uniform_points(x_min, x_max, n_points);
    const ode::DormandPrince45<2> solver(shooting_options());

    // Integrates with the deficit h = 2 - G until G falls to 1, then with G
    // itself, so both tails keep full relative precision.
    struct Run {
        bool negative = false;
        std::vector<double> values;
    };
    auto run = [&](double log_a, bool record) {
        Run r;
        if (record) r.values.assign(n_points, 0.0);
        const double y0 = x_min;
        const double a = std::exp(log_a);
        const double h0 = a * std::abs(y0) * std::exp(-0.5 * y0 * y0);
        const double dh0 = h0 * (1.0 / y0 - y0);  // d/dy of A|y|e^{-y^2/2}
        double switch_x = x_max;
        State at_switch{};
        bool switched = false;
        double x_last = y0;
        std::size_t recorded = 0;
        solver.integrate(
            deficit_rhs, y0, State{h0, dh0}, grid,
            [&](std::size_t i, const State& u) {
                if (record) r.values[i] = 2.0 - u[0];
                recorded = i + 1;
            },
            [&](double x, const State& u) {
                if (u[0] >= 1.0) {
                    switched = true;
                    switch_x = x;
                    at_switch = u;
                    return true;
                }
                return false;
            },
            &x_last);
        if (!switched) return r;  // G stays above 1: amplitude too small
        std::vector<double> rest(grid.begin() + static_cast<std::ptrdiff_t>(recorded), grid.end());
        solver.integrate(
            profile_rhs, switch_x, State{2.0 - at_switch[0], -at_switch[1]}, rest,
            [&](std::size_t i, const State& u) {
                if (record) r.values[recorded + i] = u[0];
            },
            [&](double, const State& u) {
                if (u[0] < 0.0) {
                    r.negative = true;
                    return true;
                }
                return u[0] >= kBlowUpCap;
            });
        return r;
    };

    double lo = std::log(1e-8), hi = std::log(1e8);
    if (run(lo, false).negative || !run(hi, false).negative) {
        throw BracketFailure("left-tail amplitude bracket [1e-8, 1e8] does not straddle G");
    }
    int it = 0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (run(mid, false).negative) hi = mid; else lo = mid;
        ++it;
    }
    Run best = run(lo, true);
    if (amplitude) *amplitude = std::exp(lo);
    if (iterations) *iterations = it;
    GridFunction g(x_min, x_max, std::move(best.values), "G");
    g.clip_nonnegative(1e-12);
    return g;
}

GSolution solve_G_detailed(double x_min, double x_max, std::size_t n_points, double lambda_surrogate,
                           double tol, double cross_tol) {
    if (lambda_surrogate < 1e4) throw InvalidArgument("lambda_surrogate must be at least 1e4");
    GSolution s;
    PdeRunConfig cfg;
    cfg.lambda = PdeRunConfig::infinity;
    cfg.lambda_surrogate = lambda_surrogate;
    cfg.t_final = 1.0;
    cfg.x_min = x_min;
    cfg.x_max = x_max;
    cfg.n_points = n_points;
    s.pde_profile = solve_v_lambda(cfg);
    s.pde_profile.set_label("G_pde");
    s.profile = shoot_G(x_min, x_max, n_points, tol, &s.tail_amplitude, &s.iterations);
    s.sup_gap = sup_distance(s.profile, s.pde_profile);
    if (!(s.sup_gap <= cross_tol)) {
        throw CrossCheckMismatch("PDE and ODE routes to G differ by " + std::to_string(s.sup_gap) +
                                 " (tolerance " + std::to_string(cross_tol) + ")");
    }
    return s;
}

GridFunction solve_G(double x_min, double x_max, std::size_t n_points, double lambda_surrogate, double tol) {
    return solve_G_detailed(x_min, x_max, n_points, lambda_surrogate, tol).profile;
}

double scaling_identity_error(double lambda, double t, double x_min, double x_max, std::size_t n_points) {
    if (!(lambda > 0.0 && t > 0.0)) throw InvalidArgument("scaling check needs lambda > 0 and t > 0");
    PdeRunConfig a;
    a.lambda = lambda;
    a.t_final = t;
    a.x_min = x_min;
    a.x_max = x_max;
    a.n_points = n_points;
    PdeRunConfig b = a;
    b.lambda = 1.0;
    b.t_final = lambda * t;
    const GridFunction va = solve_v_lambda(a);
    const GridFunction vb = solve_v_lambda(b);
    const double r = std::sqrt(lambda);
    double worst = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        const double y = r * va.x(i);
        if (y < x_min || y > x_max) continue;
        worst = std::max(worst, std::abs(va[i] - lambda * vb(y)));
    }
    return worst / lambda;
}

double self_similarity_error(double t, const GridFunction& G, double lambda_surrogate) {
    if (!(t > 0.0)) throw InvalidArgument("self-similarity check needs t > 0");
    PdeRunConfig cfg;
    cfg.lambda = PdeRunConfig::infinity;
    cfg.lambda_surrogate = lambda_surrogate;
    cfg.t_final = t;
    cfg.x_min = G.x_min();
    cfg.x_max = G.x_max();
    cfg.n_points = G.size();
    const GridFunction v = solve_v_lambda(cfg);
    const double s = std::sqrt(t);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double y = v.x(i) / s;
        if (y < G.x_min() || y > G.x_max()) continue;
        worst = std::max(worst, t * std::abs(v[i] - G(y) / t));
    }
    return worst;
}

GridFunction ode_residual(const GridFunction& f) {
    const GridFunction d1 = derivative(f);
    const GridFunction d2 = derivative(d1);
    GridFunction r = GridFunction::zeros(f.x_min(), f.x_max(), f.size(), "residual");
    for (std::size_t i = 0; i < f.size(); ++i) {
        r[i] = 0.5 * d2[i] + 0.5 * f.x(i) * d1[i] + f[i] - 0.5 * f[i] * f[i];
    }
    return r;
}

}  // namespace sbmlab::profiles
