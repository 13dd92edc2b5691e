#include "sbmlab/boundary_stats.hpp"

#include <algorithm>
#include <cmath>

#include "sbmlab/errors.hpp"

namespace sbmlab::boundary {

LocalTimeApprox local_time_approx(const GridFunction& snapshot, double lambda, double lambda0) {
    if (!(lambda > 0.0)) throw InvalidArgument("local time approximation needs lambda > 0");
    LocalTimeApprox a;
    a.lambda = lambda;
    a.lambda0_used = lambda0;
    a.measure = snapshot;
    a.measure.set_label("L^lambda");
    const double scale = std::pow(lambda, 2.0 * lambda0);
    for (double& v : a.measure.values()) {
        if (v < 0.0) throw InvalidArgument("snapshot must be nonnegative");
        v = scale * v * std::exp(-lambda * v);
    }
    a.total = a.measure.integral();
    return a;
}

GridFunction right_mass(const GridFunction& snapshot) {
    GridFunction r = snapshot;
    r.set_label("right_mass");
    const std::size_t n = snapshot.size();
    const double h = snapshot.spacing();
    auto v = r.values();
    v[n - 1] = 0.0;
    for (std::size_t i = n - 1; i-- > 0;) v[i] = v[i + 1] + 0.5 * h * (snapshot[i] + snapshot[i + 1]);
    return r;
}

namespace {

double interpolate_right(const GridFunction& snapshot, const GridFunction& r, double x) {
    if (x <= snapshot.x_min()) return r[0];
    if (x >= snapshot.x_max()) return 0.0;
    const double s = (x - snapshot.x_min()) / snapshot.spacing();
    const auto i = std::min(static_cast<std::size_t>(s), snapshot.size() - 2);
    const double w = s - static_cast<double>(i);
    return (1.0 - w) * r[i] + w * r[i + 1];
}

}  // namespace

double mass_right_of(const GridFunction& snapshot, double x) {
    return interpolate_right(snapshot, right_mass(snapshot), x);
}

TauEps tau_eps(const GridFunction& snapshot, double eps) {
    if (!(eps > 0.0)) throw InvalidArgument("tau_eps needs eps > 0");
    TauEps t;
    t.eps = eps;
    const GridFunction r = right_mass(snapshot);
    if (r[0] < eps) return t;
    // r is non-increasing; first index with r < eps
    std::size_t i = 1;
    while (i < r.size() && r[i] >= eps) ++i;
    if (i == r.size()) {
        t.value = snapshot.x_max();
        return t;
    }
    const double w = (r[i - 1] - eps) / (r[i - 1] - r[i]);
    t.value = snapshot.x(i - 1) + w * snapshot.spacing();
    return t;
}

double local_time_distance(const GridFunction& snapshot, double lambda_a, double lambda_b, double lambda0) {
    const GridFunction a = local_time_approx(snapshot, lambda_a, lambda0).measure;
    const GridFunction b = local_time_approx(snapshot, lambda_b, lambda0).measure;
    GridFunction d = a;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(a[i] - b[i]);
    return d.integral();
}

std::vector<StabilizationRow> local_time_stabilization(const std::vector<GridFunction>& snapshots,
                                                       const std::vector<double>& lambda_ladder, double lambda0) {
    if (lambda_ladder.size() < 2) throw InvalidArgument("stabilization needs at least two ladder entries");
    std::vector<StabilizationRow> rows;
    for (std::size_t j = 0; j + 1 < lambda_ladder.size(); ++j) {
        StabilizationRow row{lambda_ladder[j], lambda_ladder[j + 1], 0.0};
        for (const GridFunction& s : snapshots) row.distance += local_time_distance(s, row.lambda_a, row.lambda_b, lambda0);
        if (!snapshots.empty()) row.distance /= static_cast<double>(snapshots.size());
        rows.push_back(row);
    }
    return rows;
}

bool eventually_decreasing(const std::vector<StabilizationRow>& rows) {
    if (rows.size() < 2) return false;
    std::size_t k = 0;
    for (std::size_t j = 1; j < rows.size(); ++j) {
        if (rows[j].distance > rows[k].distance) k = j;
    }
    if (k + 1 >= rows.size()) return false;
    for (std::size_t j = k + 1; j < rows.size(); ++j) {
        if (rows[j].distance > rows[j - 1].distance) return false;
    }
    return true;
}

LocalTimeLaw local_time_power_law(const std::vector<std::vector<GridFunction>>& clusters,
                                  const std::vector<double>& t_values, double lambda, double lambda0) {
    if (clusters.size() != t_values.size() || t_values.size() < 2) {
        throw InvalidArgument("local time law needs one cluster ensemble per t (at least two)");
    }
    LocalTimeLaw law;
    law.t_values = t_values;
    law.lambda = lambda;
    law.lambda0_used = lambda0;
    for (std::size_t k = 0; k < t_values.size(); ++k) {
        std::vector<double> totals;
        double m2 = 0.0;
        for (const GridFunction& s : clusters[k]) {
            const double L = local_time_approx(s, lambda, lambda0).total;
            totals.push_back(L);
            m2 += L * L;
        }
        if (totals.empty()) throw InsufficientSurvivors("no clusters at t = " + std::to_string(t_values[k]));
        const MeanEstimate e = mean_estimate(totals);
        const double rate = 2.0 / t_values[k];  // N_0(X_t > 0)
        law.mean_total.push_back(rate * e.mean);
        law.mean_stderr.push_back(rate * e.stderr_);
        law.second_moment.push_back(rate * m2 / static_cast<double>(totals.size()));
    }
    law.mean_fit = fit_power_law(law.t_values, law.mean_total);
    law.second_fit = fit_power_law(law.t_values, law.second_moment);
    return law;
}

double excess_mass(const GridFunction& snapshot, double tau, double u) {
    const GridFunction r = right_mass(snapshot);
    return interpolate_right(snapshot, r, tau - u) - interpolate_right(snapshot, r, tau);
}

GrowthResult boundary_growth_experiment(const std::vector<GridFunction>& snapshots, double eps,
                                        const std::vector<double>& u_ladder) {
    if (u_ladder.size() < 2) throw InvalidArgument("growth experiment needs at least two u values");
    GrowthResult g;
    g.eps = eps;
    g.u_values = u_ladder;
    g.mean_excess.assign(u_ladder.size(), 0.0);
    for (const GridFunction& s : snapshots) {
        const TauEps tau = tau_eps(s, eps);
        if (!tau.finite()) continue;
        ++g.survivors;
        const GridFunction r = right_mass(s);
        const double at_tau = interpolate_right(s, r, tau.value);
        for (std::size_t j = 0; j < u_ladder.size(); ++j) {
            g.mean_excess[j] += interpolate_right(s, r, tau.value - u_ladder[j]) - at_tau;
        }
    }
    if (g.survivors < 100) {
        throw InsufficientSurvivors("only " + std::to_string(g.survivors) + " snapshots have tau^eps > -inf (need 100)");
    }
    for (double& m : g.mean_excess) m /= static_cast<double>(g.survivors);
    for (double m : g.mean_excess) g.mean_total.push_back(eps + m);
    g.fit = fit_power_law(g.u_values, g.mean_excess);
    g.raw_fit = fit_power_law(g.u_values, g.mean_total);
    return g;
}

std::vector<double> log_ladder(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0 && hi > lo) || count < 2) throw InvalidArgument("log ladder needs 0 < lo < hi and count >= 2");
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        v[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1));
    }
    return v;
}

std::vector<LeftTailResult> left_tail_experiment(const std::vector<GridFunction>& snapshots,
                                                 const std::vector<double>& x_values,
                                                 const std::vector<double>& lambda_ladder) {
    std::vector<std::vector<double>> masses(x_values.size());
    for (const GridFunction& s : snapshots) {
        const GridFunction r = right_mass(s);
        for (std::size_t k = 0; k < x_values.size(); ++k) masses[k].push_back(interpolate_right(s, r, x_values[k]));
    }
    std::vector<LeftTailResult> out;
    const double n = static_cast<double>(snapshots.size());
    for (std::size_t k = 0; k < x_values.size(); ++k) {
        LeftTailResult res;
        res.x = x_values[k];
        res.lambdas = lambda_ladder;
        for (double lam : lambda_ladder) {
            const auto c = static_cast<std::size_t>(std::count_if(masses[k].begin(), masses[k].end(),
                                                                  [&](double m) { return m > 0.0 && m <= 1.0 / lam; }));
            res.counts.push_back(c);
            res.probabilities.push_back(n > 0 ? static_cast<double>(c) / n : 0.0);
        }
        for (std::size_t j = 1; j < lambda_ladder.size(); ++j) {
            if ((lambda_ladder[j] - lambda_ladder[j - 1]) * (res.probabilities[j] - res.probabilities[j - 1]) > 0) {
                res.monotone = false;
            }
        }
        const auto positive = std::count_if(res.probabilities.begin(), res.probabilities.end(), [](double p) { return p > 0; });
        if (positive >= 2) res.fit = fit_power_law(res.lambdas, res.probabilities);
        out.push_back(std::move(res));
    }
    return out;
}

}  // namespace sbmlab::boundary
