#pragma once

#include <cstddef>
#include <limits>

#include "sbmlab/grid_function.hpp"

namespace sbmlab::profiles {

/// Blow-up cap for the shooting classifier. The ODE's constant solutions are
/// 0 and 2, so a trajectory above the cap is escaping.
inline constexpr double kBlowUpCap = 10.0;

/// Outcome of bisecting on the shooting parameter.
struct ShootingResult {
    double c_star = 0.0;  ///< accepted end of the final bracket
    GridFunction profile;
    double c_low = 0.0;
    double c_high = 0.0;
    int iterations = 0;
    double blowup_or_negativity_x = 0.0;  ///< where the last rejected trajectory failed
};

/// Classification of one initial-value trajectory of
/// f''/2 + y f'/2 + f - f^2/2 = 0.
enum class Trajectory { goes_negative, stays_nonnegative, blows_up };

/// Integrates F(0)=c, F'(0)=0 on [0, x_max] and classifies the result.
/// `fail_x` receives the abscissa of the first negative value or cap crossing.
Trajectory classify_F(double c, double x_max, double* fail_x = nullptr);

/// The symmetric profile F: the minimal F(0) = c whose trajectory stays
/// nonnegative on [0, x_max], found by bisection on c in [0.1, 10] until the
/// bracket is narrower than `tol`. The profile is stored on [0, x_max].
///
/// Throws BracketFailure if the classifier does not change over [0.1, 10],
/// StiffnessFailure if the integrator's step control underflows.
ShootingResult solve_F(double x_max = 10.0, std::size_t n_points = 1001, double tol = 1e-10);

enum class Scheme { explicit_euler, semi_implicit };

/// Time-stepping configuration for v_t = v''/2 - v^2/2, v_0 = lambda 1{x <= 0}.
struct PdeRunConfig {
    /// Height of the initial step; +infinity selects the v^infinity sentinel,
    /// which is solved with `lambda_surrogate` in its place.
    double lambda = 1.0;
    double t_final = 1.0;
    /// Largest time step. The run starts at `t_start` from the analytic heat
    /// kernel solution and grows the step geometrically up to `dt`.
    double dt = 1e-3;
    double x_min = -10.0;
    double x_max = 10.0;
    std::size_t n_points = 2001;
    Scheme scheme = Scheme::semi_implicit;
    double lambda_surrogate = 1e6;
    double t_start = 1e-6;
    double growth = 0.05;

    static constexpr double infinity = std::numeric_limits<double>::infinity();

    double effective_lambda() const;
    double spacing() const { return (x_max - x_min) / static_cast<double>(n_points - 1); }
    /// Throws InvalidArgument on a malformed configuration.
    void validate() const;
};

/// Exact x = -infinity value 2 lambda / (2 + lambda t) of v^lambda_t, used as
/// the left Dirichlet value.
double left_limit(double lambda, double t);

/// v^lambda(t_final, .) on the configured grid.
///
/// Semi-implicit scheme: Strang splitting of the exact reaction flow
/// v -> v / (1 + s v / 2) around a Crank–Nicolson diffusion step. Explicit
/// scheme: forward-Euler diffusion (requires dt <= h^2/2) followed by the
/// exact reaction flow. Throws StabilityViolation on NaN or values below
/// -1e-9.
GridFunction solve_v_lambda(const PdeRunConfig& cfg);

/// Both routes to G = v^infinity(1, .) on a common grid.
struct GSolution {
    GridFunction profile;      ///< ODE shooting route (the accurate one)
    GridFunction pde_profile;  ///< PDE route with the infinity surrogate
    double sup_gap = 0.0;      ///< sup norm distance between the two routes
    double tail_amplitude = 0.0;  ///< A in 2 - G ~ A |x| e^{-x^2/2} at x_min
    int iterations = 0;
};

/// Shooting from the left asymptote G ~ 2 - A|x|e^{-x^2/2} at x_min, bisecting
/// on log A until the right tail neither turns negative nor stalls.
GridFunction shoot_G(double x_min, double x_max, std::size_t n_points, double tol,
                     double* amplitude = nullptr, int* iterations = nullptr);

/// Computes G by the PDE route, cross-checks it against `shoot_G`, and returns
/// both. Throws CrossCheckMismatch when the routes differ by more than
/// `cross_tol` in sup norm.
GSolution solve_G_detailed(double x_min = -10.0, double x_max = 10.0, std::size_t n_points = 2001,
                           double lambda_surrogate = 1e6, double tol = 1e-12,
                           double cross_tol = 5e-3);

/// G on the requested grid (ODE route, validated against the PDE route).
GridFunction solve_G(double x_min = -10.0, double x_max = 10.0, std::size_t n_points = 2001,
                     double lambda_surrogate = 1e6, double tol = 1e-12);

/// Largest |v^lambda(t, x) - lambda v^1(lambda t, sqrt(lambda) x)| over the
/// points x of the v^lambda grid whose image sqrt(lambda) x lies on the grid,
/// divided by lambda. Both sides come from `solve_v_lambda` on the same grid.
double scaling_identity_error(double lambda, double t, double x_min = -10.0, double x_max = 10.0,
                              std::size_t n_points = 2001);

/// Largest t |v^infinity(t, x) - G(x / sqrt t) / t| over the grid, with
/// v^infinity from the PDE route at time t and G the shooting profile.
double self_similarity_error(double t, const GridFunction& G, double lambda_surrogate = 1e6);

/// f''/2 + x f'/2 + f - f^2/2 evaluated with the grid derivative.
GridFunction ode_residual(const GridFunction& f);

}  // namespace sbmlab::profiles
