#include "sbmlab/grid_function.hpp"

#include <algorithm>
#include <cmath>

#include "sbmlab/errors.hpp"

namespace sbmlab {

GridFunction::GridFunction(double x_min, double x_max, std::vector<double> values, std::string label)
    : x_min_(x_min), x_max_(x_max), values_(std::move(values)), label_(std::move(label)) {
    if (values_.size() < 2) throw InvalidArgument("GridFunction needs at least two points");
    if (!(x_max_ > x_min_)) throw InvalidArgument("GridFunction needs x_max > x_min");
}

GridFunction GridFunction::sample(double x_min, double x_max, std::size_t n_points,
                                  const std::function<double(double)>& f, std::string label) {
    GridFunction g = zeros(x_min, x_max, n_points, std::move(label));
    for (std::size_t i = 0; i < n_points; ++i) g.values_[i] = f(g.x(i));
    return g;
}

GridFunction GridFunction::zeros(double x_min, double x_max, std::size_t n_points, std::string label) {
    return GridFunction(x_min, x_max, std::vector<double>(n_points, 0.0), std::move(label));
}

double GridFunction::operator()(double x) const {
    const std::size_t n = values_.size();
    if (x <= x_min_) return values_.front();
    if (x >= x_max_) return values_.back();
    const double h = spacing();
    const double s = (x - x_min_) / h;
    auto i = static_cast<std::size_t>(s);
    if (i >= n - 1) return values_.back();
    if (n < 4) {
        const double w = s - static_cast<double>(i);
        return (1.0 - w) * values_[i] + w * values_[i + 1];
    }
    // stencil i0..i0+3 containing [i, i+1]
    std::size_t i0 = i == 0 ? 0 : i - 1;
    if (i0 + 3 >= n) i0 = n - 4;
    const double u = s - static_cast<double>(i0);
    const double l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    const double l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
    const double l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
    const double l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
    return l0 * values_[i0] + l1 * values_[i0 + 1] + l2 * values_[i0 + 2] + l3 * values_[i0 + 3];
}

double GridFunction::integral() const {
    double s = 0.5 * (values_.front() + values_.back());
    for (std::size_t i = 1; i + 1 < values_.size(); ++i) s += values_[i];
    return s * spacing();
}

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

bool GridFunction::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void GridFunction::clip_nonnegative(double tol) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        double& v = values_[i];
        if (!std::isfinite(v) || v < -tol) {
            throw StabilityViolation("value " + std::to_string(v) + " at x=" + std::to_string(x(i)) +
                                     " in '" + label_ + "'");
        }
        if (v < 0.0) v = 0.0;
    }
}

GridFunction even_extension(const GridFunction& half) {
    if (half.x_min() != 0.0) throw InvalidArgument("even_extension expects a grid starting at 0");
    const std::size_t n = half.size();
    std::vector<double> v(2 * n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        v[n - 1 + i] = half[i];
        v[n - 1 - i] = half[i];
    }
    return GridFunction(-half.x_max(), half.x_max(), std::move(v), half.label());
}

GridFunction derivative(const GridFunction& f) {
    const std::size_t n = f.size();
    if (n < 5) throw InvalidArgument("derivative needs at least five grid points");
    const double c = 1.0 / (12.0 * f.spacing());
    GridFunction d = GridFunction::zeros(f.x_min(), f.x_max(), n, f.label() + "'");
    d[0] = c * (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]);
    d[1] = c * (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]);
    for (std::size_t i = 2; i + 2 < n; ++i) {
        d[i] = c * (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]);
    }
    d[n - 2] = c * (3 * f[n - 1] + 10 * f[n - 2] - 18 * f[n - 3] + 6 * f[n - 4] - f[n - 5]);
    d[n - 1] = c * (25 * f[n - 1] - 48 * f[n - 2] + 36 * f[n - 3] - 16 * f[n - 4] + 3 * f[n - 5]);
    return d;
}

double sup_distance(const GridFunction& f, const GridFunction& g) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f[i] - g(f.x(i))));
    return m;
}

}  // namespace sbmlab
