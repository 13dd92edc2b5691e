#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "sbmlab/grid_function.hpp"
#include "sbmlab/stats.hpp"

namespace sbmlab::boundary {

/// Density lambda^{2 lambda0} X e^{-lambda X} of the approximate boundary local time.
struct LocalTimeApprox {
    double lambda = 0.0;
    double lambda0_used = 0.0;
    GridFunction measure;
    double total = 0.0;  ///< trapezoid integral of `measure`
};

LocalTimeApprox local_time_approx(const GridFunction& snapshot, double lambda, double lambda0);

/// tau^eps = inf{x : X([x, inf)) < eps}, or -infinity when the total mass is below eps.
struct TauEps {
    double eps = 0.0;
    double value = -std::numeric_limits<double>::infinity();
    bool finite() const { return value > -std::numeric_limits<double>::infinity(); }
};

/// Right-cumulative trapezoid integral: entry i is the mass of [x_i, x_max].
GridFunction right_mass(const GridFunction& snapshot);

/// Mass of [x, x_max]: the right-cumulative interpolated linearly between grid
/// points; the total mass left of the grid and 0 right of it.
double mass_right_of(const GridFunction& snapshot, double x);

/// Linear interpolation of the right-cumulative between grid points.
TauEps tau_eps(const GridFunction& snapshot, double eps);

struct StabilizationRow {
    double lambda_a = 0.0;
    double lambda_b = 0.0;
    double distance = 0.0;  ///< ensemble mean of the L^1 distance between the two densities
};

/// L^1 distance between the L^lambda densities of one snapshot.
double local_time_distance(const GridFunction& snapshot, double lambda_a, double lambda_b, double lambda0);

/// Distances between consecutive ladder entries averaged over the snapshots.
std::vector<StabilizationRow> local_time_stabilization(const std::vector<GridFunction>& snapshots,
                                                       const std::vector<double>& lambda_ladder, double lambda0);

/// True when the distances decrease from some ladder entry on.
bool eventually_decreasing(const std::vector<StabilizationRow>& rows);

/// Moments of L^lambda_t(1) under the canonical measure at several times.
struct LocalTimeLaw {
    std::vector<double> t_values;
    /// canonical-measure moments: conditioned moments times N_0(X_t > 0) = 2/t
    std::vector<double> mean_total;
    std::vector<double> mean_stderr;
    std::vector<double> second_moment;
    PowerLawFit mean_fit;
    PowerLawFit second_fit;
    double lambda = 0.0;
    double lambda0_used = 0.0;
};

/// `clusters[i]` holds snapshots drawn from N_0(X_t in . | X_t > 0) at t_values[i].
LocalTimeLaw local_time_power_law(const std::vector<std::vector<GridFunction>>& clusters,
                                  const std::vector<double>& t_values, double lambda, double lambda0);

/// Mass of [tau^eps - u, tau^eps] (excluding the eps to the right of tau^eps).
double excess_mass(const GridFunction& snapshot, double tau, double u);

struct GrowthResult {
    std::vector<double> u_values;
    std::vector<double> mean_excess;  ///< E[X_t([tau^eps - u, tau^eps])] over survivors
    std::vector<double> mean_total;   ///< E[X_t([tau^eps - u, inf))] = eps + excess
    PowerLawFit fit;                  ///< fit of mean_excess against u
    PowerLawFit raw_fit;              ///< fit of mean_total against u
    std::size_t survivors = 0;
    double eps = 0.0;
};

/// Throws InsufficientSurvivors if fewer than 100 snapshots have tau^eps > -inf.
GrowthResult boundary_growth_experiment(const std::vector<GridFunction>& snapshots, double eps,
                                        const std::vector<double>& u_ladder);

/// Log-spaced ladder of `count` points over [lo, hi].
std::vector<double> log_ladder(double lo, double hi, std::size_t count);

struct LeftTailResult {
    double x = 0.0;
    std::vector<double> lambdas;
    std::vector<double> probabilities;  ///< P(0 < X_t([x, inf)) <= 1/lambda)
    std::vector<std::size_t> counts;
    bool monotone = true;  ///< probabilities non-increasing in lambda
    PowerLawFit fit;       ///< over the positive probabilities; exponent 0 if fewer than two
};

std::vector<LeftTailResult> left_tail_experiment(const std::vector<GridFunction>& snapshots,
                                                 const std::vector<double>& x_values,
                                                 const std::vector<double>& lambda_ladder);

}  // namespace sbmlab::boundary
