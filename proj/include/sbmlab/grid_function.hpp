#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sbmlab {

/// A real function sampled on a uniform grid x_i = x_min + i*h, i < n_points.
///
/// Used for every 1-D profile in the library: the shooting profiles, PDE
/// solutions, killing functions, eigenfunctions and density snapshots.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(double x_min, double x_max, std::vector<double> values, std::string label = {});

    /// Samples `f` at every grid point.
    static GridFunction sample(double x_min, double x_max, std::size_t n_points,
                               const std::function<double(double)>& f, std::string label = {});
    static GridFunction zeros(double x_min, double x_max, std::size_t n_points,
                              std::string label = {});

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    std::size_t size() const { return values_.size(); }
    double spacing() const { return (x_max_ - x_min_) / static_cast<double>(values_.size() - 1); }
    double x(std::size_t i) const { return x_min_ + spacing() * static_cast<double>(i); }

    const std::string& label() const { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    /// Four-point Lagrange interpolation inside the grid, constant extension by
    /// the edge values outside it.
    double operator()(double x) const;

    /// Trapezoid rule over the whole grid.
    double integral() const;

    double max_abs() const;

    /// Values in [-tol, 0) are set to zero. Throws StabilityViolation for anything
    /// below -tol or non-finite.
    void clip_nonnegative(double tol);

    bool all_finite() const;

private:
    double x_min_ = 0.0;
    double x_max_ = 1.0;
    std::vector<double> values_;
    std::string label_;
};

/// Even extension of a profile stored on [0, x_max] to [-x_max, x_max].
GridFunction even_extension(const GridFunction& half);

/// Fourth-order first derivative: five-point central stencil in the interior,
/// one-sided five-point stencils in the first and last two cells. Exact for
/// quartics up to rounding. Requires at least five points.
GridFunction derivative(const GridFunction& f);

/// Maximum of |f - g| over the grid of `f`, evaluating `g` by interpolation.
double sup_distance(const GridFunction& f, const GridFunction& g);

}  // namespace sbmlab
