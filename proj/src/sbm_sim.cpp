#include "sbmlab/sbm_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sbmlab/errors.hpp"
#include "sbmlab/parallel.hpp"
#include "sbmlab/stats.hpp"

namespace sbmlab::sim {

Backend parse_backend(const std::string& name) {
    if (name == "particles") return Backend::particles;
    if (name == "spde_grid") return Backend::spde_grid;
    throw InvalidArgument("unknown backend '" + name + "' (expected particles or spde_grid)");
}

const char* backend_name(Backend b) { return b == Backend::particles ? "particles" : "spde_grid"; }

SpdeScheme parse_spde_scheme(const std::string& name) {
    if (name == "feller_split") return SpdeScheme::feller_split;
    if (name == "euler_maruyama") return SpdeScheme::euler_maruyama;
    throw InvalidArgument("unknown SPDE scheme '" + name + "' (expected feller_split or euler_maruyama)");
}

const char* spde_scheme_name(SpdeScheme s) {
    return s == SpdeScheme::feller_split ? "feller_split" : "euler_maruyama";
}

double SimConfig::initial_mass() const {
    if (x0_density) return x0_density->integral();
    double m = 0.0;
    for (const Atom& a : atoms) m += a.mass;
    return m;
}

double SimConfig::effective_dt() const { return dt > 0.0 ? dt : 0.25 * spacing * spacing; }

void SimConfig::validate() const {
    if (!(t_final > 0.0)) throw InvalidArgument("t_final must be positive");
    if (!(spacing > 0.0)) throw InvalidArgument("spacing must be positive");
    if (!(x_min < x_max) || (x_max - x_min) < 4.0 * spacing) throw InvalidArgument("grid must span at least 4 cells");
    if (dt < 0.0) throw InvalidArgument("dt must be nonnegative");
    if (backend == Backend::spde_grid && effective_dt() > 0.5 * spacing * spacing) {
        throw InvalidArgument("explicit SPDE step needs dt <= spacing^2/2");
    }
    if (!(n_particles_per_unit_mass >= 1.0)) throw InvalidArgument("n_particles_per_unit_mass must be >= 1");
    if (kappa < 0.0) throw InvalidArgument("kappa must be nonnegative");
    for (const Atom& a : atoms) {
        if (!(a.mass >= 0.0) || !std::isfinite(a.x)) throw InvalidArgument("atoms need finite location and mass >= 0");
    }
    if (x0_density) {
        for (double v : x0_density->values()) {
            if (!(v >= 0.0)) throw InvalidArgument("initial density must be nonnegative");
        }
    }
}

namespace {

double one_particle_pgf(double s, double t, double b) {
    const double p = 1.0 / (1.0 + b * t);
    return (1.0 - p) + p * p * s / (1.0 - (1.0 - p) * s);
}

}  // namespace

double particle_laplace(double lambda, double t, double m, double n, double kappa) {
    const double k = std::round(m * n);
    return std::exp(k * std::log(one_particle_pgf(std::exp(-lambda / n), t, 0.5 * kappa * n)));
}

double calibrate_kappa(double n) {
    if (!(n >= 1.0)) throw InvalidArgument("calibration needs n >= 1");
    const double target = std::exp(-2.0 / 3.0);
    // the Laplace transform increases with kappa (more branching, more extinction)
    double lo = 0.01, hi = 100.0;
    if ((particle_laplace(1.0, 1.0, 1.0, n, lo) - target) * (particle_laplace(1.0, 1.0, 1.0, n, hi) - target) > 0) {
        throw BracketFailure("particle calibration: no kappa in [0.01, 100] matches the Feller transform");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (particle_laplace(1.0, 1.0, 1.0, n, mid) < target) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

// One family conditioned to survive to t, appended to `out`.
void sample_family(double x0, double t, double b, std::mt19937_64& rng, std::vector<double>& out) {
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif;
    const double bt = b * t;
    std::geometric_distribution<long long> extra(1.0 / (1.0 + bt));
    const long long size = 1 + extra(rng);
    // Brownian snake: breakpoints (time, position) of the path to the current leaf
    std::vector<double> st_t{0.0, t}, st_x{x0, x0 + std::sqrt(t) * gauss(rng)};
    out.push_back(st_x.back());
    const double q_max = bt / (1.0 + bt);
    for (long long j = 1; j < size; ++j) {
        // node depth H conditioned on H <= t, P(H > s) = 1 / (1 + b s)
        const double q = unif(rng) * q_max;
        const double depth = std::min(t, q / (b * (1.0 - q)));
        const double tau = t - depth;
        double tb = 0.0, xb = 0.0;
        while (st_t.back() > tau) {
            tb = st_t.back();
            xb = st_x.back();
            st_t.pop_back();
            st_x.pop_back();
        }
        const double ta = st_t.back(), xa = st_x.back();
        double pos = xa;
        if (tau > ta) {
            const double w = (tau - ta) / (tb - ta);
            pos = xa + w * (xb - xa) + std::sqrt((tau - ta) * (tb - tau) / (tb - ta)) * gauss(rng);
            st_t.push_back(tau);
            st_x.push_back(pos);
        }
        const double leaf = pos + std::sqrt(depth) * gauss(rng);
        st_t.push_back(t);
        st_x.push_back(leaf);
        out.push_back(leaf);
    }
}

std::size_t surviving_families(std::size_t k, double t, double b, std::mt19937_64& rng) {
    std::binomial_distribution<long long> fam(static_cast<long long>(k), 1.0 / (1.0 + b * t));
    return static_cast<std::size_t>(fam(rng));
}

std::vector<Atom> initial_atoms(const SimConfig& cfg) {
    if (!cfg.x0_density) return cfg.atoms;
    const GridFunction& d = *cfg.x0_density;
    std::vector<Atom> atoms;
    const double h = d.spacing();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double w = (i == 0 || i + 1 == d.size()) ? 0.5 * h : h;
        if (d[i] > 0.0) atoms.push_back({d[i] * w, d.x(i)});
    }
    return atoms;
}

}  // namespace

void sample_descendants(std::size_t k, double x0, double t, double b, std::mt19937_64& rng,
                        std::vector<double>& out) {
    const std::size_t fams = surviving_families(k, t, b, rng);
    for (std::size_t f = 0; f < fams; ++f) sample_family(x0, t, b, rng, out);
}

TreeRun simulate_full_tree(std::size_t k, double x0, double t, double b, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif;
    std::exponential_distribution<double> life(2.0 * b);
    TreeRun run;
    struct Node {
        double s, x;
    };
    std::vector<Node> stack(k, Node{0.0, x0});
    while (!stack.empty()) {
        const Node nd = stack.back();
        stack.pop_back();
        const double end = std::min(t, nd.s + life(rng));
        const double d = end - nd.s;
        const double y = nd.x + std::sqrt(d) * gauss(rng);
        // exact maximum of the Brownian bridge from x to y over time d
        const double u = 1.0 - unif(rng);
        const double top = 0.5 * (nd.x + y + std::sqrt((y - nd.x) * (y - nd.x) - 2.0 * d * std::log(u)));
        run.path_max = std::max(run.path_max, top);
        if (end >= t) {
            run.positions.push_back(y);
            continue;
        }
        ++run.events;
        if (unif(rng) < 0.5) {
            stack.push_back({end, y});
            stack.push_back({end, y});
        }
    }
    return run;
}

GridFunction histogram(const std::vector<double>& positions, double particle_mass, double x_min, double x_max,
                       double h, std::size_t* extended) {
    auto cells = [&](double a, double b) { return static_cast<std::size_t>(std::llround((b - a) / h)) + 1; };
    std::size_t widen = 0;
    if (!positions.empty()) {
        const auto [lo, hi] = std::minmax_element(positions.begin(), positions.end());
        while (*lo < x_min + 1.5 * h) {
            x_min -= std::max(0.25 * (x_max - x_min), std::ceil((x_min + 2.5 * h - *lo) / h) * h);
            ++widen;
        }
        while (*hi > x_max - 1.5 * h) {
            x_max += std::max(0.25 * (x_max - x_min), std::ceil((*hi - x_max + 2.5 * h) / h) * h);
            ++widen;
        }
    }
    const std::size_t n = cells(x_min, x_max);
    x_max = x_min + h * static_cast<double>(n - 1);
    std::vector<double> v(n, 0.0);
    const double add = particle_mass / h;
    for (double p : positions) {
        const auto i = static_cast<std::size_t>(std::llround((p - x_min) / h));
        v[std::min(i, n - 1)] += add;
    }
    if (extended) *extended = widen;
    return GridFunction(x_min, x_max, std::move(v), "X");
}

namespace {

struct ReplicateOut {
    GridFunction snapshot;
    double mass = 0.0;
    std::size_t clips = 0;
    std::size_t cell_steps = 0;
    std::size_t extensions = 0;
};

ReplicateOut run_particles(const SimConfig& cfg, const std::vector<Atom>& atoms, double kappa, std::mt19937_64& rng) {
    const double n = cfg.n_particles_per_unit_mass;
    const double b = 0.5 * kappa * n;
    std::vector<double> pos;
    for (const Atom& a : atoms) {
        const auto k = static_cast<std::size_t>(std::llround(a.mass * n));
        sample_descendants(k, a.x, cfg.t_final, b, rng, pos);
    }
    ReplicateOut r;
    r.mass = static_cast<double>(pos.size()) / n;
    const double m0 = cfg.initial_mass();
    if (r.mass > 100.0 * m0 && m0 > 0.0) {
        throw MassExplosion("replicate mass " + std::to_string(r.mass) + " exceeds 100 times the initial mass");
    }
    r.snapshot = histogram(pos, 1.0 / n, cfg.x_min, cfg.x_max, cfg.spacing, &r.extensions);
    return r;
}

ReplicateOut run_spde(const SimConfig& cfg, std::mt19937_64& rng) {
    const double h = cfg.spacing;
    double x_min = cfg.x_min;
    std::size_t n = static_cast<std::size_t>(std::llround((cfg.x_max - cfg.x_min) / h)) + 1;
    std::vector<double> X(n, 0.0), next(n, 0.0);
    const double m0 = cfg.initial_mass();
    if (cfg.x0_density) {
        for (std::size_t i = 0; i < n; ++i) X[i] = (*cfg.x0_density)(x_min + h * static_cast<double>(i));
    } else {
        for (const Atom& a : cfg.atoms) {
            const auto i = std::llround((a.x - x_min) / h);
            if (i < 0 || static_cast<std::size_t>(i) >= n) throw InvalidArgument("atom lies outside the SPDE grid");
            X[static_cast<std::size_t>(i)] += a.mass / h;
        }
    }
    const double dt_max = cfg.effective_dt();
    const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_final / dt_max - 1e-9));
    const double dt = cfg.t_final / static_cast<double>(steps);
    const double a = 0.5 * dt / (h * h);
    std::normal_distribution<double> gauss;
    ReplicateOut r;

    auto active = [&](std::size_t& lo, std::size_t& hi) {
        lo = 0;
        while (lo < n && X[lo] == 0.0) ++lo;
        hi = n;
        while (hi > lo && X[hi - 1] == 0.0) --hi;
        return lo < hi;  // [lo, hi)
    };
    std::size_t lo = 0, hi = 0;
    for (std::size_t s = 0; s < steps && active(lo, hi); ++s) {
        if (lo < 2 || hi + 2 > n) {
            const std::size_t pad = std::max<std::size_t>(4, n / 4);
            X.insert(X.begin(), pad, 0.0);
            X.insert(X.end(), pad, 0.0);
            x_min -= h * static_cast<double>(pad);
            n = X.size();
            next.assign(n, 0.0);
            lo += pad;
            hi += pad;
            ++r.extensions;
        }
        const std::size_t l = lo - 1, u = hi + 1;  // support after one diffusion step
        for (std::size_t i = l; i < u; ++i) {
            double d = 0.0;
            if (i > 0) d += X[i - 1] - X[i];
            if (i + 1 < n) d += X[i + 1] - X[i];
            next[i] = X[i] + a * d;
        }
        double mass = 0.0;
        for (std::size_t i = l; i < u; ++i) {
            double v = next[i];
            if (cfg.spde_scheme == SpdeScheme::feller_split) {
                if (v > 0.0) {
                    // exact Feller transition of the cell mass h v over dt
                    std::poisson_distribution<long long> pois(2.0 * h * v / dt);
                    const long long k = pois(rng);
                    if (k == 0) {
                        v = 0.0;
                    } else {
                        std::gamma_distribution<double> gam(static_cast<double>(k), 0.5 * dt);
                        v = gam(rng) / h;
                    }
                }
            } else {
                v += std::sqrt(std::max(v, 0.0) * dt / h) * gauss(rng);
                ++r.cell_steps;
                if (v < 0.0) {
                    v = 0.0;
                    ++r.clips;
                }
            }
            X[i] = v;
            mass += v;
        }
        if (m0 > 0.0 && mass * h > 100.0 * m0) {
            throw MassExplosion("SPDE mass " + std::to_string(mass * h) + " exceeds 100 times the initial mass at t = " +
                                std::to_string(dt * static_cast<double>(s + 1)));
        }
    }
    double mass = 0.0;
    for (double v : X) mass += v;
    r.mass = mass * h;
    r.snapshot = GridFunction(x_min, x_min + h * static_cast<double>(n - 1), std::move(X), "X");
    return r;
}

}  // namespace

DensityEnsemble simulate(const SimConfig& cfg, std::size_t n_replicates, unsigned jobs) {
    cfg.validate();
    DensityEnsemble e;
    e.config = cfg;
    if (cfg.backend == Backend::particles) {
        e.kappa = cfg.kappa > 0.0 ? cfg.kappa : calibrate_kappa(cfg.n_particles_per_unit_mass);
    }
    const std::vector<Atom> atoms = initial_atoms(cfg);
    std::vector<ReplicateOut> outs(n_replicates);
    e.replicate_seeds.resize(n_replicates);
    for (std::size_t i = 0; i < n_replicates; ++i) e.replicate_seeds[i] = derive_seed(cfg.seed, i);
    parallel_for(n_replicates, jobs, [&](std::size_t i) {
        std::mt19937_64 rng(e.replicate_seeds[i]);
        outs[i] = cfg.backend == Backend::particles ? run_particles(cfg, atoms, e.kappa, rng) : run_spde(cfg, rng);
    });
    std::size_t clips = 0, cell_steps = 0;
    for (ReplicateOut& o : outs) {
        e.snapshots.push_back(std::move(o.snapshot));
        e.total_mass.push_back(o.mass);
        clips += o.clips;
        cell_steps += o.cell_steps;
        e.grid_extensions += o.extensions;
    }
    e.clip_fraction = cell_steps ? static_cast<double>(clips) / static_cast<double>(cell_steps) : 0.0;
    return e;
}

ClusterBatch sample_cluster(const ClusterConfig& cfg, std::size_t n_replicates, unsigned jobs) {
    if (!(cfg.t > 0.0)) throw InvalidArgument("cluster sampling needs t > 0");
    if (cfg.m0 < 0.0) throw InvalidArgument("m0 must be nonnegative");
    if (!(cfg.n_particles_per_unit_mass >= 1.0)) throw InvalidArgument("n_particles_per_unit_mass must be >= 1");
    ClusterBatch batch;
    batch.m0 = cfg.effective_m0();
    batch.kappa = cfg.kappa > 0.0 ? cfg.kappa : calibrate_kappa(cfg.n_particles_per_unit_mass);
    batch.survival_prediction = -std::expm1(-2.0 * batch.m0 / cfg.t);
    const double n = cfg.n_particles_per_unit_mass;
    const double b = 0.5 * batch.kappa * n;
    const auto k = static_cast<std::size_t>(std::llround(batch.m0 * n));
    if (k == 0) throw InvalidArgument("m0 * n_particles_per_unit_mass rounds to zero particles");
    const double p_survive = -std::expm1(static_cast<double>(k) * std::log1p(-1.0 / (1.0 + b * cfg.t)));
    const double expected = 1.0 / p_survive;
    // 20 expected attempts per sample leaves an e^-20 chance of running out
    if (20.0 * expected > static_cast<double>(cfg.max_attempts)) {
        throw RejectionBudgetExceeded("survival probability " + std::to_string(p_survive) +
                                      " needs a budget of at least " + std::to_string(std::ceil(20.0 * expected)) +
                                      " attempts per sample (have " + std::to_string(cfg.max_attempts) + ")");
    }
    std::vector<ClusterSample> samples(n_replicates);
    std::vector<std::size_t> attempts(n_replicates, 0);
    parallel_for(n_replicates, jobs, [&](std::size_t i) {
        std::mt19937_64 rng(derive_seed(cfg.seed, i));
        std::size_t fams = 0;
        while (fams == 0) {
            if (attempts[i] == cfg.max_attempts) {
                throw RejectionBudgetExceeded("cluster sample " + std::to_string(i) + " exhausted " +
                                              std::to_string(cfg.max_attempts) + " attempts");
            }
            ++attempts[i];
            fams = surviving_families(k, cfg.t, b, rng);
        }
        std::vector<double> pos;
        for (std::size_t f = 0; f < fams; ++f) sample_family(0.0, cfg.t, b, rng, pos);
        ClusterSample& s = samples[i];
        s.families = fams;
        s.total_mass = static_cast<double>(pos.size()) / n;
        s.snapshot = histogram(pos, 1.0 / n, cfg.x_min, cfg.x_max, cfg.spacing);
    });
    batch.samples = std::move(samples);
    for (std::size_t a : attempts) batch.attempts += a;
    return batch;
}

HittingTable hitting_tail_check(const std::vector<double>& R_values, double t, std::size_t n_replicates,
                                double n_ppum, double mass, std::uint64_t seed, unsigned jobs) {
    if (!(t > 0.0) || !(mass > 0.0)) throw InvalidArgument("hitting check needs t > 0 and mass > 0");
    for (double R : R_values) {
        if (!(R > 2.0 * std::sqrt(t))) throw InvalidArgument("hitting check needs R > 2 sqrt(t)");
    }
    const double kappa = calibrate_kappa(n_ppum);
    const double b = 0.5 * kappa * n_ppum;
    const auto k = static_cast<std::size_t>(std::llround(mass * n_ppum));
    std::vector<double> maxima(n_replicates);
    parallel_for(n_replicates, jobs, [&](std::size_t i) {
        std::mt19937_64 rng(derive_seed(seed, i));
        maxima[i] = simulate_full_tree(k, 0.0, t, b, rng).path_max;
    });
    HittingTable table;
    table.replicates = n_replicates;
    const double N = static_cast<double>(n_replicates);
    std::vector<double> xs, ys;
    double c = 1.0;
    for (double R : R_values) {
        HittingRow row;
        row.R = R;
        row.hits = static_cast<std::size_t>(std::count_if(maxima.begin(), maxima.end(), [&](double m) { return m >= R; }));
        row.frequency = static_cast<double>(row.hits) / N;
        row.shape = std::pow(R, -2.0) * std::pow(R / std::sqrt(t), 3.0) * std::exp(-R * R / (2.0 * t));
        if (row.hits < n_replicates) {
            row.n0_estimate = -std::log1p(-row.frequency) / mass;
            row.n0_stderr = std::sqrt(row.frequency * (1.0 - row.frequency) / N) / ((1.0 - row.frequency) * mass);
        } else {
            row.n0_estimate = std::numeric_limits<double>::infinity();
        }
        if (row.hits > 0 && std::isfinite(row.n0_estimate)) c = std::max(c, row.n0_estimate / row.shape);
        if (row.hits >= 5 && std::isfinite(row.n0_estimate)) {
            xs.push_back(R * R / (2.0 * t));
            ys.push_back(std::log(row.n0_estimate));
        }
        table.rows.push_back(row);
    }
    table.fitted_c = c;
    if (xs.size() >= 2) {
        const LinearFit f = linear_fit(xs, ys);
        table.gaussian_slope = f.slope;
        table.gaussian_slope_stderr = f.slope_stderr;
    }
    return table;
}

}  // namespace sbmlab::sim
