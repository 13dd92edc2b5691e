#pragma once

#include <cstddef>
#include <vector>

#include "sbmlab/grid_function.hpp"
#include "sbmlab/stats.hpp"

namespace sbmlab::fractal {

/// Indices i whose neighbourhood {i-1, i, i+1} holds both a value <= threshold
/// and a value > threshold.
std::vector<std::size_t> boundary_cells(const GridFunction& snapshot, double threshold);

/// Box sizes 2^j h for j = 1, 2, ... up to a quarter of the grid width.
std::vector<double> dyadic_ladder(const GridFunction& snapshot);

/// Box-counting estimate of the dimension of the numerical zero-set boundary.
/// This is a box dimension; it is only an exploratory proxy for a Hausdorff
/// dimension.
struct BoxCountResult {
    std::vector<double> eps_ladder;
    std::vector<std::size_t> counts;
    PowerLawFit fit;  ///< log N against log eps over the points with N >= 1
    double dimension = 0.0;  ///< -fit.exponent
    double threshold_used = 0.0;
};

/// Boxes are the lattice intervals [x_min + k eps, x_min + (k+1) eps). Throws
/// DegenerateFit when fewer than 3 ladder points have N(eps) >= 2, and
/// InvalidArgument unless the ladder holds at least 4 increasing sizes above
/// the grid spacing.
BoxCountResult box_dimension(const GridFunction& snapshot, const std::vector<double>& eps_ladder, double threshold);

/// The fit at `threshold` and at `threshold / 2`; `robust` is false when the
/// dimensions differ by 0.05 or more.
struct RobustBoxCount {
    BoxCountResult at_threshold;
    BoxCountResult at_half;
    bool robust = false;
};
RobustBoxCount box_dimension_robust(const GridFunction& snapshot, const std::vector<double>& eps_ladder,
                                    double threshold);

/// Indicator of the level-`depth` middle-thirds Cantor set on a grid of 3^depth
/// cells per unit length over [0, 1].
GridFunction cantor_indicator(int depth);

}  // namespace sbmlab::fractal
