#include "sbmlab/fractal_dim.hpp"

#include <algorithm>
#include <cmath>

#include "sbmlab/errors.hpp"

namespace sbmlab::fractal {

std::vector<std::size_t> boundary_cells(const GridFunction& snapshot, double threshold) {
    if (!(threshold > 0.0)) throw InvalidArgument("boundary threshold must be positive");
    std::vector<std::size_t> cells;
    const std::size_t n = snapshot.size();
    for (std::size_t i = 0; i < n; ++i) {
        bool low = false, high = false;
        for (std::size_t j = i == 0 ? 0 : i - 1; j <= std::min(i + 1, n - 1); ++j) {
            (snapshot[j] > threshold ? high : low) = true;
        }
        if (low && high) cells.push_back(i);
    }
    return cells;
}

std::vector<double> dyadic_ladder(const GridFunction& snapshot) {
    const double h = snapshot.spacing();
    const double width = snapshot.x_max() - snapshot.x_min();
    std::vector<double> ladder;
    for (double eps = 2.0 * h; eps <= 0.25 * width; eps *= 2.0) ladder.push_back(eps);
    return ladder;
}

BoxCountResult box_dimension(const GridFunction& snapshot, const std::vector<double>& eps_ladder, double threshold) {
    const double h = snapshot.spacing();
    if (eps_ladder.size() < 4 || !std::is_sorted(eps_ladder.begin(), eps_ladder.end()) ||
        std::adjacent_find(eps_ladder.begin(), eps_ladder.end()) != eps_ladder.end() || eps_ladder.front() <= h) {
        throw InvalidArgument("box ladder needs at least 4 increasing sizes above the grid spacing");
    }
    const std::vector<std::size_t> cells = boundary_cells(snapshot, threshold);
    BoxCountResult r;
    r.eps_ladder = eps_ladder;
    r.threshold_used = threshold;
    std::vector<double> xs, ys;
    std::size_t usable = 0;
    for (double eps : eps_ladder) {
        std::size_t count = 0;
        long long last = -1;
        for (std::size_t i : cells) {
            // small offset keeps lattice points that sit on a box edge in the upper box
            const auto box = static_cast<long long>(std::floor((snapshot.x(i) - snapshot.x_min()) / eps + 1e-9));
            if (box != last) {
                ++count;
                last = box;
            }
        }
        r.counts.push_back(count);
        if (count >= 2) ++usable;
        if (count >= 1) {
            xs.push_back(eps);
            ys.push_back(static_cast<double>(count));
        }
    }
    if (usable < 3) {
        throw DegenerateFit("only " + std::to_string(usable) + " box sizes see two or more boundary boxes (need 3)");
    }
    r.fit = fit_power_law(xs, ys);
    r.dimension = -r.fit.exponent;
    return r;
}

RobustBoxCount box_dimension_robust(const GridFunction& snapshot, const std::vector<double>& eps_ladder,
                                    double threshold) {
    RobustBoxCount r;
    r.at_threshold = box_dimension(snapshot, eps_ladder, threshold);
    r.at_half = box_dimension(snapshot, eps_ladder, 0.5 * threshold);
    r.robust = std::abs(r.at_threshold.dimension - r.at_half.dimension) < 0.05;
    return r;
}

GridFunction cantor_indicator(int depth) {
    if (depth < 1 || depth > 15) throw InvalidArgument("Cantor depth must lie in [1, 15]");
    std::size_t n = 1;
    for (int d = 0; d < depth; ++d) n *= 3;
    std::vector<double> v(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i; k > 0; k /= 3) {
            if (k % 3 == 1) {
                v[i] = 0.0;
                break;
            }
        }
    }
    const double h = 1.0 / static_cast<double>(n);
    return GridFunction(0.5 * h, 1.0 - 0.5 * h, std::move(v), "cantor");
}

}  // namespace sbmlab::fractal
