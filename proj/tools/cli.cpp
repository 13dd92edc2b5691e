#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbmlab/boundary_stats.hpp"
#include "sbmlab/errors.hpp"
#include "sbmlab/fractal_dim.hpp"
#include "sbmlab/io_store.hpp"
#include "sbmlab/parallel.hpp"
#include "sbmlab/profiles.hpp"
#include "sbmlab/sbm_sim.hpp"
#include "sbmlab/spectral.hpp"
#include "sbmlab/stats.hpp"

namespace sbmlab::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

/// Bad flag, config key or value. Exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Kind { real, count, text, list };

struct Param {
    std::string key;
    Kind kind;
    json fallback;
    std::string help;
};

double parse_real(const std::string& key, const std::string& s) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    const auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || !std::isfinite(v)) {
        throw UsageError("config key '" + key + "': '" + s + "' is not a finite number");
    }
    return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(key, item));
    if (out.empty()) throw UsageError("config key '" + key + "': empty list");
    return out;
}

/// Canonical JSON value of a parameter given as CLI text or as a config-file value.
json normalize(const Param& p, const json& raw) {
    const auto bad = [&] { return UsageError("config key '" + p.key + "': unexpected value " + raw.dump()); };
    switch (p.kind) {
        case Kind::text:
            if (!raw.is_string()) throw bad();
            return raw;
        case Kind::real:
            if (raw.is_number()) return raw.get<double>();
            if (raw.is_string()) return parse_real(p.key, raw.get<std::string>());
            throw bad();
        case Kind::count: {
            double v = 0.0;
            if (raw.is_number()) v = raw.get<double>();
            else if (raw.is_string()) v = parse_real(p.key, raw.get<std::string>());
            else throw bad();
            if (v < 0.0 || v != std::floor(v) || v > 1e15) {
                throw UsageError("config key '" + p.key + "': expected a nonnegative integer");
            }
            return static_cast<std::uint64_t>(v);
        }
        case Kind::list: {
            if (raw.is_string()) return parse_list(p.key, raw.get<std::string>());
            if (!raw.is_array() || raw.empty()) throw bad();
            std::vector<double> v;
            for (const json& x : raw) {
                if (!x.is_number()) throw bad();
                v.push_back(x.get<double>());
            }
            return v;
        }
    }
    throw bad();
}

struct Settings {
    json values = json::object();
    json sources = json::object();

    double real(const std::string& k) const { return values.at(k).get<double>(); }
    std::size_t count(const std::string& k) const { return values.at(k).get<std::size_t>(); }
    std::string text(const std::string& k) const { return values.at(k).get<std::string>(); }
    std::vector<double> list(const std::string& k) const { return values.at(k).get<std::vector<double>>(); }
};

struct Context {
    const Settings& s;
    std::uint64_t seed;
    unsigned jobs;
    std::string run_id;
    std::ostream& err;
};

struct Output {
    json summary = json::object();
    io::Artifacts artifacts;
    std::vector<std::string> lines;  // stdout
};

struct Command {
    std::string name;
    std::string help;
    std::vector<Param> params;
    std::function<Output(const Context&)> body;
};

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

json fit_json(const PowerLawFit& f) {
    return {{"exponent", f.exponent}, {"stderr", f.stderr_}, {"r2", f.r2}, {"log_prefactor", f.intercept},
            {"x", f.x_values}, {"y", f.y_values}};
}

json eigen_json(const spectral::EigenResult& e) {
    json j = {{"method", spectral::method_name(e.method)},
              {"lambdas", e.lambdas},
              {"theta0", e.theta0},
              {"thetas", e.thetas},
              {"basis_size_or_n", e.basis_size_or_n},
              {"truncation_K", e.truncation_K},
              {"truncation_warning", e.truncation_warning},
              {"truncation_shift", e.truncation_shift}};
    try {
        j["dimension"] = spectral::dimension_from_lambda0(e.lambda0());
    } catch (const OutOfRange&) {
        j["dimension"] = nullptr;
    }
    return j;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_of(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(i);
    return i + 1 < v.size() ? (1.0 - w) * v[i] + w * v[i + 1] : v[i];
}

spectral::Method parse_method(const std::string& s) {
    if (s == "hermite" || s == "hermite_galerkin") return spectral::Method::hermite_galerkin;
    if (s == "fd" || s == "neumann_fd") return spectral::Method::neumann_fd;
    throw UsageError("config key 'method': expected hermite, fd or both, got '" + s + "'");
}

// ---------------------------------------------------------------- solve-f

Output solve_f(const Context& c) {
    const auto r = profiles::solve_F(c.s.real("x_max"), c.s.count("n_points"), c.s.real("tol"));
    const GridFunction res = profiles::ode_residual(r.profile);
    double worst = 0.0;
    // the one-sided stencils at the ends are less accurate than the interior
    for (std::size_t i = 2; i + 2 < res.size(); ++i) worst = std::max(worst, std::abs(res[i]));
    Output o;
    o.summary = {{"c_star", r.c_star},
                 {"c_low", r.c_low},
                 {"c_high", r.c_high},
                 {"iterations", r.iterations},
                 {"last_rejected_failure_x", r.blowup_or_negativity_x},
                 {"F_at_x_max", r.profile[r.profile.size() - 1]},
                 {"max_ode_residual", worst}};
    o.artifacts["F.csv"] = io::grid_csv(r.profile, c.run_id);
    o.lines.push_back("c_star " + fixed(r.c_star, 10));
    return o;
}

// ---------------------------------------------------------------- solve-g

Output solve_g(const Context& c) {
    const auto g = profiles::solve_G_detailed(c.s.real("x_min"), c.s.real("x_max"), c.s.count("n_points"),
                                              c.s.real("lambda_surrogate"), c.s.real("tol"), c.s.real("cross_tol"));
    const GridFunction d = derivative(g.profile);
    double max_slope = -1e300;
    for (double v : d.values()) max_slope = std::max(max_slope, v);
    Output o;
    o.summary = {{"sup_gap", g.sup_gap},
                 {"G_at_0", g.profile(0.0)},
                 {"G_at_x_min", g.profile[0]},
                 {"tail_amplitude", g.tail_amplitude},
                 {"G4_over_envelope", g.profile(4.0) / (4.0 * std::exp(-8.0))},
                 {"max_G_prime", max_slope},
                 {"iterations", g.iterations}};
    const double lam = c.s.real("scaling_lambda");
    const double t = c.s.real("scaling_t");
    o.summary["scaling_identity"] = {{"lambda", lam}, {"t", t},
                                     {"error", profiles::scaling_identity_error(lam, t, g.profile.x_min(),
                                                                                g.profile.x_max(), g.profile.size())}};
    json self = json::array();
    for (double s : c.s.list("self_similarity_t")) {
        self.push_back({{"t", s}, {"error", profiles::self_similarity_error(s, g.profile, c.s.real("lambda_surrogate"))}});
    }
    o.summary["self_similarity"] = self;
    o.artifacts["G.csv"] = io::grid_csv(g.profile, c.run_id);
    o.artifacts["G_pde.csv"] = io::grid_csv(g.pde_profile, c.run_id);
    o.lines.push_back("G(0) " + fixed(g.profile(0.0), 8));
    o.lines.push_back("sup_gap " + io::format_double(g.sup_gap));
    return o;
}

// ---------------------------------------------------------------- eig

Output eig(const Context& c) {
    const spectral::KillingSpec spec = spectral::KillingSpec::builtin(spectral::parse_builtin(c.s.text("phi")));
    std::vector<spectral::Method> methods;
    const std::string m = c.s.text("method");
    if (m == "both") methods = {spectral::Method::hermite_galerkin, spectral::Method::neumann_fd};
    else methods = {parse_method(m)};

    Output o;
    o.summary["phi"] = spec.name;
    json results = json::array();
    std::vector<spectral::EigenResult> computed;
    for (spectral::Method method : methods) {
        spectral::EigenResult e =
            method == spectral::Method::hermite_galerkin
                ? spectral::eig_hermite(spec, c.s.count("basis_size"), c.s.count("nodes"), c.s.count("n_eigen"))
                : spectral::eig_neumann_fd(spec, c.s.real("fd_K"), c.s.count("fd_n"), c.s.count("n_eigen"));
        json j = eigen_json(e);
        if (spec.name == "G") {
            const GridFunction ref = spectral::ground_state_from_G(spec.phi);
            j["ground_state_vs_G_prime"] = spectral::weighted_relative_error(e.eigenfunctions.at(0), ref, -4.0, 4.0);
        }
        const std::string tag = spectral::method_name(method);
        for (std::size_t k = 0; k < e.eigenfunctions.size(); ++k) {
            o.artifacts["psi" + std::to_string(k) + "_" + tag + ".csv"] = io::grid_csv(e.eigenfunctions[k], c.run_id);
        }
        if (e.truncation_warning) c.err << "warning: " << tag << " eigenvalue moved by " << e.truncation_shift
                                         << " when the domain was enlarged\n";
        o.lines.push_back("lambda0 " + tag + " " + fixed(e.lambda0(), 4));
        results.push_back(j);
        computed.push_back(std::move(e));
    }
    o.summary["results"] = results;
    const double t = c.s.real("survival_t");
    if (t > 0.0) {
        const auto s = spectral::survival_probability_check(spec, computed.front(), t, c.s.count("mc_samples"), c.seed,
                                                            c.jobs, c.s.real("mc_dt"));
        o.summary["survival"] = {{"t", t},
                                 {"mc_estimate", s.mc_estimate},
                                 {"mc_stderr", s.mc_stderr},
                                 {"prediction", s.prediction},
                                 {"prediction_all_modes", s.prediction_all_modes},
                                 {"z_score", s.z_score},
                                 {"samples", s.samples}};
        c.err << "survival at t=" << t << ": mc " << s.mc_estimate << " +- " << s.mc_stderr << ", leading order "
              << s.prediction << " (z " << fixed(s.z_score, 2) << "), all stored modes " << s.prediction_all_modes
              << "\n";
    }
    return o;
}

// ---------------------------------------------------------------- simulate

sim::SimConfig sim_config(const Settings& s, std::uint64_t seed) {
    sim::SimConfig cfg;
    cfg.backend = sim::parse_backend(s.text("backend"));
    cfg.spde_scheme = sim::parse_spde_scheme(s.text("spde_scheme"));
    cfg.atoms = {sim::Atom{s.real("mass"), s.real("x0")}};
    cfg.t_final = s.real("t");
    cfg.x_min = s.real("x_min");
    cfg.x_max = s.real("x_max");
    cfg.spacing = s.real("spacing");
    cfg.dt = s.real("dt");
    cfg.n_particles_per_unit_mass = s.real("n_ppum");
    cfg.kappa = s.real("kappa");
    cfg.seed = seed;
    return cfg;
}

json sim_config_json(const sim::DensityEnsemble& e) {
    const sim::SimConfig& c = e.config;
    return {{"backend", sim::backend_name(c.backend)},
            {"spde_scheme", sim::spde_scheme_name(c.spde_scheme)},
            {"effective_dt", c.effective_dt()},
            {"kappa", e.kappa},
            {"clip_fraction", e.clip_fraction},
            {"grid_extensions", e.grid_extensions}};
}

Output simulate_cmd(const Context& c) {
    const sim::SimConfig cfg = sim_config(c.s, c.seed);
    const std::size_t reps = c.s.count("replicates");
    const sim::DensityEnsemble e = sim::simulate(cfg, reps, c.jobs);
    const double m = cfg.initial_mass();
    const double t = cfg.t_final;

    Output o;
    o.summary["simulation"] = sim_config_json(e);
    o.summary["replicates"] = reps;

    std::vector<std::vector<double>> rows;
    json laplace = json::array();
    for (double lam : c.s.list("lambdas")) {
        std::vector<double> v;
        for (double x : e.total_mass) v.push_back(std::exp(-lam * x));
        const MeanEstimate est = mean_estimate(v);
        const double exact = std::exp(-2.0 * lam * m / (2.0 + lam * t));
        const double z = est.stderr_ > 0 ? (est.mean - exact) / est.stderr_ : 0.0;
        laplace.push_back({{"lambda", lam}, {"mean", est.mean}, {"stderr", est.stderr_}, {"exact", exact}, {"z", z}});
        rows.push_back({lam, est.mean, est.stderr_, exact, z});
    }
    {
        std::vector<double> v;
        for (double x : e.total_mass) v.push_back(x == 0.0 ? 1.0 : 0.0);
        const MeanEstimate est = mean_estimate(v);
        const double exact = std::exp(-2.0 * m / t);
        const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(v.size()));
        o.summary["extinction"] = {{"frequency", est.mean}, {"exact", exact}, {"stderr", se},
                                   {"z", (est.mean - exact) / se}};
    }
    o.summary["laplace"] = laplace;
    o.artifacts["laplace.csv"] = io::table_csv("laplace", {"lambda", "mean", "stderr", "exact", "z"}, rows, c.run_id);

    // duality with the PDE profile: E exp(-lambda X_t([x, inf))) = exp(-m v^lambda_t(x - x0))
    rows.clear();
    json duality = json::array();
    for (double lam : c.s.list("duality_lambdas")) {
        profiles::PdeRunConfig pc;
        pc.lambda = lam;
        pc.t_final = t;
        const GridFunction v = profiles::solve_v_lambda(pc);
        for (double x : c.s.list("duality_x")) {
            std::vector<double> samples;
            for (const GridFunction& s : e.snapshots) samples.push_back(std::exp(-lam * boundary::mass_right_of(s, x)));
            const MeanEstimate est = mean_estimate(samples);
            const double exact = std::exp(-m * v(x - cfg.atoms.front().x));
            const double z = est.stderr_ > 0 ? (est.mean - exact) / est.stderr_ : 0.0;
            duality.push_back({{"lambda", lam}, {"x", x}, {"mean", est.mean}, {"stderr", est.stderr_},
                               {"exact", exact}, {"z", z}});
            rows.push_back({lam, x, est.mean, est.stderr_, exact, z});
        }
    }
    o.summary["duality"] = duality;
    o.artifacts["duality.csv"] =
        io::table_csv("duality", {"lambda", "x", "mean", "stderr", "exact", "z"}, rows, c.run_id);

    rows.clear();
    for (std::size_t i = 0; i < reps; ++i) {
        rows.push_back({static_cast<double>(i), static_cast<double>(e.replicate_seeds[i]), e.total_mass[i]});
    }
    o.artifacts["total_mass.csv"] = io::table_csv("total_mass", {"replicate", "seed", "total_mass"}, rows, c.run_id);
    const std::size_t keep = std::min(reps, c.s.count("store_snapshots"));
    for (std::size_t i = 0; i < keep; ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "snapshot_%06zu.csv", i);
        o.artifacts[name] = io::grid_csv(e.snapshots[i], c.run_id);
    }

    double worst = 0.0;
    for (const json& j : laplace) worst = std::max(worst, std::abs(j["z"].get<double>()));
    for (const json& j : duality) worst = std::max(worst, std::abs(j["z"].get<double>()));
    worst = std::max(worst, std::abs(o.summary["extinction"]["z"].get<double>()));
    o.summary["max_abs_z"] = worst;
    o.lines.push_back("max_abs_z " + fixed(worst, 3));
    return o;
}

// ---------------------------------------------------------------- localtime

sim::ClusterConfig cluster_config(const Settings& s, double t, std::uint64_t seed) {
    sim::ClusterConfig cc;
    cc.t = t;
    cc.m0 = s.real("m0_per_t") * t;
    cc.n_particles_per_unit_mass = s.real("n_ppum");
    cc.spacing = s.real("spacing");
    cc.x_min = s.real("x_min");
    cc.x_max = s.real("x_max");
    cc.max_attempts = s.count("max_attempts");
    cc.seed = seed;
    return cc;
}

json batch_json(const sim::ClusterBatch& b) {
    const double p = b.survival_prediction;
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(std::max<std::size_t>(b.attempts, 1)));
    return {{"samples", b.samples.size()},
            {"attempts", b.attempts},
            {"m0", b.m0},
            {"kappa", b.kappa},
            {"survival_frequency", b.survival_frequency()},
            {"survival_prediction", p},
            {"survival_z", se > 0 ? (b.survival_frequency() - p) / se : 0.0}};
}

double computed_lambda0_F() { return spectral::eig_hermite(spectral::KillingSpec::builtin(spectral::Builtin::F)).lambda0(); }

Output localtime(const Context& c) {
    const std::vector<double> ts = c.s.list("t_values");
    const double lambda = c.s.real("lambda");
    double lambda0 = c.s.real("lambda0");
    if (lambda0 <= 0.0) lambda0 = computed_lambda0_F();
    const std::size_t n = c.s.count("clusters");

    Output o;
    std::vector<std::vector<GridFunction>> clusters;
    json batches = json::array();
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const sim::ClusterBatch b = sim::sample_cluster(cluster_config(c.s, ts[k], derive_seed(c.seed, k)), n, c.jobs);
        json j = batch_json(b);
        j["t"] = ts[k];
        batches.push_back(j);
        std::vector<GridFunction> snaps;
        for (const sim::ClusterSample& s : b.samples) snaps.push_back(s.snapshot);
        clusters.push_back(std::move(snaps));
        c.err << "t=" << ts[k] << ": " << b.samples.size() << " clusters from " << b.attempts << " attempts\n";
    }
    const boundary::LocalTimeLaw law = boundary::local_time_power_law(clusters, ts, lambda, lambda0);
    o.summary["clusters"] = batches;
    o.summary["lambda"] = lambda;
    o.summary["lambda0_used"] = lambda0;
    o.summary["mean_total"] = law.mean_total;
    o.summary["mean_stderr"] = law.mean_stderr;
    o.summary["second_moment"] = law.second_moment;
    o.summary["mean_fit"] = fit_json(law.mean_fit);
    o.summary["second_fit"] = fit_json(law.second_fit);
    o.summary["mean_exponent_target"] = -lambda0;
    o.summary["second_exponent_bound"] = 1.0 - 2.0 * lambda0;

    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        rows.push_back({ts[k], law.mean_total[k], law.mean_stderr[k], law.second_moment[k]});
    }
    o.artifacts["local_time.csv"] =
        io::table_csv("local_time", {"t", "mean_total", "mean_stderr", "second_moment"}, rows, c.run_id);

    // stabilization on the ensemble whose t is closest to stabilization_t
    const double st = c.s.real("stabilization_t");
    std::size_t pick = 0;
    for (std::size_t k = 1; k < ts.size(); ++k) {
        if (std::abs(ts[k] - st) < std::abs(ts[pick] - st)) pick = k;
    }
    const auto stab = boundary::local_time_stabilization(clusters[pick], c.s.list("stabilization_ladder"), lambda0);
    json sj = json::array();
    rows.clear();
    for (const auto& r : stab) {
        sj.push_back({{"lambda_a", r.lambda_a}, {"lambda_b", r.lambda_b}, {"distance", r.distance}});
        rows.push_back({r.lambda_a, r.lambda_b, r.distance});
    }
    o.summary["stabilization"] = {{"t", ts[pick]}, {"rows", sj}, {"eventually_decreasing", boundary::eventually_decreasing(stab)}};
    o.artifacts["stabilization.csv"] =
        io::table_csv("stabilization", {"lambda_a", "lambda_b", "distance"}, rows, c.run_id);

    o.lines.push_back("mean_exponent " + fixed(law.mean_fit.exponent, 4) + " target " + fixed(-lambda0, 4));
    o.lines.push_back("second_moment_exponent " + fixed(law.second_fit.exponent, 4) + " bound " +
                      fixed(1.0 - 2.0 * lambda0, 4));
    return o;
}

// ---------------------------------------------------------------- growth

sim::SimConfig delta_config(const Settings& s, std::uint64_t seed) {
    sim::SimConfig cfg;
    cfg.backend = sim::parse_backend(s.text("backend"));
    cfg.atoms = {sim::Atom{s.real("mass"), 0.0}};
    cfg.t_final = s.real("t");
    cfg.x_min = s.real("x_min");
    cfg.x_max = s.real("x_max");
    cfg.spacing = s.real("spacing");
    cfg.n_particles_per_unit_mass = s.real("n_ppum");
    cfg.seed = seed;
    return cfg;
}

Output growth(const Context& c) {
    const sim::DensityEnsemble e = sim::simulate(delta_config(c.s, c.seed), c.s.count("replicates"), c.jobs);
    const double eps = c.s.real("eps");
    const double root = std::sqrt(eps);
    const auto ladder =
        boundary::log_ladder(c.s.real("u_lo_factor") * root, c.s.real("u_hi_factor") * root, c.s.count("u_points"));
    const boundary::GrowthResult g = boundary::boundary_growth_experiment(e.snapshots, eps, ladder);
    Output o;
    o.summary["simulation"] = sim_config_json(e);
    o.summary["eps"] = eps;
    o.summary["survivors"] = g.survivors;
    o.summary["u_values"] = g.u_values;
    o.summary["mean_excess"] = g.mean_excess;
    o.summary["mean_total"] = g.mean_total;
    o.summary["fit"] = fit_json(g.fit);
    o.summary["raw_fit"] = fit_json(g.raw_fit);
    // local slopes between neighbouring ladder points
    std::vector<double> slopes;
    for (std::size_t j = 1; j < g.u_values.size(); ++j) {
        slopes.push_back(std::log(g.mean_excess[j] / g.mean_excess[j - 1]) / std::log(g.u_values[j] / g.u_values[j - 1]));
    }
    o.summary["local_slopes"] = slopes;
    std::vector<std::vector<double>> rows;
    for (std::size_t j = 0; j < g.u_values.size(); ++j) rows.push_back({g.u_values[j], g.mean_excess[j], g.mean_total[j]});
    o.artifacts["growth.csv"] = io::table_csv("growth", {"u", "mean_excess", "mean_total"}, rows, c.run_id);
    o.lines.push_back("u_exponent " + fixed(g.fit.exponent, 4) + " +- " + fixed(g.fit.stderr_, 4));
    return o;
}

// ---------------------------------------------------------------- tail

Output tail(const Context& c) {
    const sim::DensityEnsemble e = sim::simulate(delta_config(c.s, c.seed), c.s.count("replicates"), c.jobs);
    const auto res = boundary::left_tail_experiment(e.snapshots, c.s.list("x_values"), c.s.list("lambdas"));
    Output o;
    o.summary["simulation"] = sim_config_json(e);
    json tails = json::array();
    std::vector<std::vector<double>> rows;
    for (const auto& r : res) {
        tails.push_back({{"x", r.x},
                         {"lambdas", r.lambdas},
                         {"probabilities", r.probabilities},
                         {"counts", r.counts},
                         {"monotone", r.monotone},
                         {"fit", fit_json(r.fit)}});
        for (std::size_t j = 0; j < r.lambdas.size(); ++j) {
            rows.push_back({r.x, r.lambdas[j], r.probabilities[j], static_cast<double>(r.counts[j])});
        }
        o.lines.push_back("x " + fixed(r.x, 3) + " slope " + fixed(r.fit.exponent, 4) +
                          (r.monotone ? " monotone" : " not_monotone"));
    }
    o.summary["tails"] = tails;
    o.artifacts["left_tail.csv"] = io::table_csv("left_tail", {"x", "lambda", "probability", "count"}, rows, c.run_id);

    const std::size_t hreps = c.s.count("hitting_replicates");
    if (hreps > 0) {
        const auto h = sim::hitting_tail_check(c.s.list("hitting_R"), c.s.real("t"), hreps, c.s.real("hitting_n_ppum"),
                                               c.s.real("hitting_mass"), derive_seed(c.seed, 1), c.jobs);
        json hr = json::array();
        rows.clear();
        for (const auto& r : h.rows) {
            hr.push_back({{"R", r.R}, {"hits", r.hits}, {"frequency", r.frequency}, {"n0", r.n0_estimate},
                          {"n0_stderr", r.n0_stderr}, {"shape", r.shape}});
            rows.push_back({r.R, static_cast<double>(r.hits), r.n0_estimate, r.n0_stderr, r.shape});
        }
        o.summary["hitting"] = {{"rows", hr}, {"fitted_c", h.fitted_c}, {"gaussian_slope", h.gaussian_slope},
                                {"gaussian_slope_stderr", h.gaussian_slope_stderr}, {"replicates", h.replicates}};
        o.artifacts["hitting.csv"] = io::table_csv("hitting", {"R", "hits", "n0", "n0_stderr", "shape"}, rows, c.run_id);
    }
    return o;
}

// ---------------------------------------------------------------- boxdim

Output boxdim(const Context& c) {
    const double t = c.s.real("t");
    const sim::ClusterBatch b = sim::sample_cluster(cluster_config(c.s, t, c.seed), c.s.count("clusters"), c.jobs);
    double thr = c.s.real("threshold");
    if (thr <= 0.0) thr = 10.0 / (c.s.real("n_ppum") * c.s.real("spacing"));

    std::vector<double> dims;
    std::vector<std::vector<double>> rows;
    std::size_t degenerate = 0, robust = 0;
    for (std::size_t i = 0; i < b.samples.size(); ++i) {
        const GridFunction& s = b.samples[i].snapshot;
        try {
            const auto r = fractal::box_dimension_robust(s, fractal::dyadic_ladder(s), thr);
            dims.push_back(r.at_threshold.dimension);
            if (r.robust) ++robust;
            rows.push_back({static_cast<double>(i), r.at_threshold.dimension, r.at_half.dimension, r.robust ? 1.0 : 0.0});
        } catch (const DegenerateFit&) {
            ++degenerate;
        }
    }
    Output o;
    o.summary["clusters"] = batch_json(b);
    o.summary["threshold"] = thr;
    o.summary["fitted"] = dims.size();
    o.summary["degenerate"] = degenerate;
    o.summary["robust_fraction"] = dims.empty() ? 0.0 : static_cast<double>(robust) / static_cast<double>(dims.size());
    if (!dims.empty()) {
        o.summary["median_dimension"] = median_of(dims);
        o.summary["quartiles"] = {quantile_of(dims, 0.25), quantile_of(dims, 0.75)};
        o.lines.push_back("median_box_dimension " + fixed(median_of(dims), 4));
    } else {
        o.summary["median_dimension"] = nullptr;
        o.lines.push_back("median_box_dimension none");
    }
    const GridFunction cantor = fractal::cantor_indicator(static_cast<int>(c.s.count("cantor_depth")));
    const auto cb = fractal::box_dimension(cantor, fractal::dyadic_ladder(cantor), 0.5);
    o.summary["cantor"] = {{"depth", c.s.count("cantor_depth")}, {"dimension", cb.dimension},
                           {"target", std::log(2.0) / std::log(3.0)}, {"fit", fit_json(cb.fit)}};
    o.artifacts["boxdim.csv"] =
        io::table_csv("boxdim", {"cluster", "dimension", "dimension_half_threshold", "robust"}, rows, c.run_id);
    o.lines.push_back("cantor_box_dimension " + fixed(cb.dimension, 4));
    return o;
}

// ---------------------------------------------------------------- pipeline

Output pipeline(const Context& c) {
    Output o;
    const auto f = profiles::solve_F(c.s.real("f_x_max"), c.s.count("f_points"), c.s.real("f_tol"));
    GridFunction F = even_extension(f.profile);
    GridFunction Fh = F;
    for (double& v : Fh.values()) v *= 0.5;
    const auto g = profiles::solve_G_detailed(c.s.real("g_x_min"), c.s.real("g_x_max"), c.s.count("g_points"),
                                              c.s.real("lambda_surrogate"), c.s.real("g_tol"));
    c.err << "c_star " << fixed(f.c_star, 10) << "\n";
    c.err << "G sup gap between routes " << g.sup_gap << "\n";
    o.summary["c_star"] = f.c_star;
    o.summary["G_sup_gap"] = g.sup_gap;
    o.artifacts["F.csv"] = io::grid_csv(f.profile, c.run_id);
    o.artifacts["G.csv"] = io::grid_csv(g.profile, c.run_id);

    struct Case {
        std::string name;
        spectral::KillingSpec spec;
    };
    const std::vector<Case> cases = {{"F", spectral::KillingSpec::from_grid(F, true, "F")},
                                     {"F_half", spectral::KillingSpec::from_grid(Fh, true, "F_half")},
                                     {"G", spectral::KillingSpec::from_grid(g.profile, false, "G")}};
    double lambda0_F = 0.0;
    json eig = json::object();
    for (const Case& k : cases) {
        const auto h = spectral::eig_hermite(k.spec, c.s.count("basis_size"));
        const auto d = spectral::eig_neumann_fd(k.spec, c.s.real("fd_K"), c.s.count("fd_n"));
        eig[k.name] = {{"hermite_galerkin", eigen_json(h)}, {"neumann_fd", eigen_json(d)}};
        o.artifacts["psi0_" + k.name + ".csv"] = io::grid_csv(h.eigenfunctions.at(0), c.run_id);
        c.err << "lambda0[" << k.name << "] hermite " << fixed(h.lambda0(), 6) << " fd " << fixed(d.lambda0(), 6)
              << "\n";
        if (k.name == "F") lambda0_F = h.lambda0();
    }
    const double dim = spectral::dimension_from_lambda0(lambda0_F);
    o.summary["eigen"] = eig;
    o.summary["lambda0_F"] = lambda0_F;
    o.summary["dimension"] = dim;
    c.err << "lambda0_F " << fixed(lambda0_F, 4) << " dimension " << fixed(dim, 4) << "\n";
    o.lines.push_back(fixed(dim, 6));
    return o;
}

// ---------------------------------------------------------------- table

std::vector<Command> commands() {
    const Param cluster_n{"n_ppum", Kind::real, 2e5, "particles per unit mass"};
    const Param cluster_h{"spacing", Kind::real, 0.005, "histogram bandwidth"};
    const Param cluster_lo{"x_min", Kind::real, -8.0, "grid left end"};
    const Param cluster_hi{"x_max", Kind::real, 8.0, "grid right end"};
    const Param m0{"m0_per_t", Kind::real, 0.005, "atom mass divided by t"};
    const Param attempts{"max_attempts", Kind::count, 100000, "attempts allowed per conditioned cluster"};
    return {
        {"solve-f",
         "Shoot for the symmetric profile F",
         {{"x_max", Kind::real, 10.0, "right end of the half line"},
          {"n_points", Kind::count, 1001, "stored grid points"},
          {"tol", Kind::real, 1e-10, "bisection bracket width"}},
         solve_f},
        {"solve-g",
         "Compute G by PDE time stepping and ODE shooting",
         {{"x_min", Kind::real, -10.0, "grid left end"},
          {"x_max", Kind::real, 10.0, "grid right end"},
          {"n_points", Kind::count, 2001, "grid points"},
          {"lambda_surrogate", Kind::real, 1e6, "finite stand-in for lambda = infinity"},
          {"tol", Kind::real, 1e-12, "shooting tolerance on log A"},
          {"cross_tol", Kind::real, 5e-3, "allowed sup gap between the routes"},
          {"scaling_lambda", Kind::real, 4.0, "lambda of the scaling identity check"},
          {"scaling_t", Kind::real, 0.5, "t of the scaling identity check"},
          {"self_similarity_t", Kind::list, std::vector<double>{0.5, 2.0}, "times of the self-similarity check"}},
         solve_g},
        {"eig",
         "Ground state of the killed OU generator",
         {{"phi", Kind::text, "F", "killing function: zero, F, F_half, G"},
          {"method", Kind::text, "both", "hermite, fd or both"},
          {"basis_size", Kind::count, 120, "Hermite basis size"},
          {"nodes", Kind::count, 0, "quadrature nodes (0: automatic)"},
          {"fd_K", Kind::real, 8.0, "finite-difference half width"},
          {"fd_n", Kind::count, 2000, "finite-difference cells"},
          {"n_eigen", Kind::count, 4, "eigenpairs kept"},
          {"survival_t", Kind::real, 0.0, "time of the Monte Carlo survival check (0: skip)"},
          {"mc_samples", Kind::count, 20000, "Monte Carlo paths"},
          {"mc_dt", Kind::real, 2e-3, "Monte Carlo time step"}},
         eig},
        {"simulate",
         "Simulate super-Brownian motion from a point mass",
         {{"backend", Kind::text, "particles", "particles or spde_grid"},
          {"spde_scheme", Kind::text, "feller_split", "feller_split or euler_maruyama"},
          {"t", Kind::real, 1.0, "final time"},
          {"replicates", Kind::count, 2000, "independent replicates"},
          {"mass", Kind::real, 1.0, "initial atom mass"},
          {"x0", Kind::real, 0.0, "initial atom location"},
          {"n_ppum", Kind::real, 1e4, "particles per unit mass"},
          {"kappa", Kind::real, 0.0, "branching multiplier (0: calibrated)"},
          {"spacing", Kind::real, 0.05, "grid spacing"},
          {"x_min", Kind::real, -6.0, "grid left end"},
          {"x_max", Kind::real, 6.0, "grid right end"},
          {"dt", Kind::real, 0.0, "SPDE step (0: spacing^2/4)"},
          {"lambdas", Kind::list, std::vector<double>{0.5, 1.0, 2.0}, "Laplace transform arguments"},
          {"duality_lambdas", Kind::list, std::vector<double>{1.0, 2.0}, "duality check lambdas"},
          {"duality_x", Kind::list, std::vector<double>{0.0, 1.0}, "duality check points"},
          {"store_snapshots", Kind::count, 1000000, "snapshot CSVs written (first replicates)"}},
         simulate_cmd},
        {"localtime",
         "Moments of the approximate boundary local time under the cluster law",
         {{"t_values", Kind::list, std::vector<double>{0.5, 1.0, 2.0}, "cluster times"},
          {"clusters", Kind::count, 2000, "conditioned clusters per time"},
          {"lambda", Kind::real, 64.0, "approximation parameter"},
          {"lambda0", Kind::real, 0.0, "exponent in the normalization (0: computed)"},
          cluster_n, cluster_h, cluster_lo, cluster_hi, m0, attempts,
          {"stabilization_t", Kind::real, 1.0, "time of the stabilization table"},
          {"stabilization_ladder", Kind::list, std::vector<double>{16, 32, 64, 128, 256}, "lambda ladder"}},
         localtime},
        {"growth",
         "Mass just left of the eps-quantile of the right edge",
         {{"backend", Kind::text, "particles", "particles or spde_grid"},
          {"t", Kind::real, 1.0, "time"},
          {"mass", Kind::real, 1.0, "initial atom mass"},
          {"replicates", Kind::count, 600, "replicates"},
          {"eps", Kind::real, 1e-3, "mass to the right of tau"},
          {"u_lo_factor", Kind::real, 1.0, "smallest u in units of sqrt(eps)"},
          {"u_hi_factor", Kind::real, 10.0, "largest u in units of sqrt(eps)"},
          {"u_points", Kind::count, 8, "u ladder points"},
          {"n_ppum", Kind::real, 2e5, "particles per unit mass"},
          {"spacing", Kind::real, 0.005, "grid spacing"},
          {"x_min", Kind::real, -6.0, "grid left end"},
          {"x_max", Kind::real, 6.0, "grid right end"}},
         growth},
        {"tail",
         "Small-mass probabilities of the right tail and hitting frequencies",
         {{"backend", Kind::text, "particles", "particles or spde_grid"},
          {"t", Kind::real, 1.0, "time"},
          {"mass", Kind::real, 1.0, "initial atom mass"},
          {"replicates", Kind::count, 10000, "replicates"},
          {"n_ppum", Kind::real, 1e4, "particles per unit mass"},
          {"spacing", Kind::real, 0.01, "grid spacing"},
          {"x_min", Kind::real, -6.0, "grid left end"},
          {"x_max", Kind::real, 6.0, "grid right end"},
          {"x_values", Kind::list, std::vector<double>{0.0, 1.0}, "left ends of the tail"},
          {"lambdas", Kind::list, std::vector<double>{4, 8, 16, 32, 64, 128, 256}, "lambda ladder"},
          {"hitting_replicates", Kind::count, 0, "full-tree runs for the hitting table (0: skip)"},
          {"hitting_R", Kind::list, std::vector<double>{2.5, 3.0, 3.5, 4.0, 4.5}, "hitting levels"},
          {"hitting_n_ppum", Kind::real, 64.0, "particles per unit mass of the full-tree runs"},
          {"hitting_mass", Kind::real, 1.0, "initial mass of the full-tree runs"}},
         tail},
        {"boxdim",
         "Box-counting dimension of the zero-set boundary of clusters",
         {{"t", Kind::real, 1.0, "cluster time"},
          {"clusters", Kind::count, 200, "conditioned clusters"},
          {"threshold", Kind::real, 0.0, "zero threshold (0: ten particles per cell)"},
          {"cantor_depth", Kind::count, 10, "depth of the Cantor calibration set"},
          cluster_n, cluster_h, cluster_lo, cluster_hi, m0, attempts},
         boxdim},
        {"pipeline",
         "F, then the ground states of F, F/2 and G, then the dimension 2 - 2 lambda0",
         {{"f_x_max", Kind::real, 10.0, "F half-line end"},
          {"f_points", Kind::count, 1001, "F grid points"},
          {"f_tol", Kind::real, 1e-10, "F bisection tolerance"},
          {"g_x_min", Kind::real, -10.0, "G grid left end"},
          {"g_x_max", Kind::real, 10.0, "G grid right end"},
          {"g_points", Kind::count, 2001, "G grid points"},
          {"g_tol", Kind::real, 1e-12, "G shooting tolerance"},
          {"lambda_surrogate", Kind::real, 1e6, "finite stand-in for lambda = infinity"},
          {"basis_size", Kind::count, 120, "Hermite basis size"},
          {"fd_K", Kind::real, 8.0, "finite-difference half width"},
          {"fd_n", Kind::count, 2000, "finite-difference cells"}},
         pipeline},
    };
}

json load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw UsageError("config file '" + path + "' must hold a JSON object");
    return j;
}

struct Invocation {
    std::string config_path;
    std::uint64_t seed = 1;
    unsigned jobs = 0;
    std::string out;
    std::map<std::string, std::string> raw;
};

int execute(const Command& cmd, CLI::App& sub, const Invocation& inv, std::ostream& out, std::ostream& err) {
    Settings s;
    std::uint64_t seed = 1;
    std::string seed_source = "default";
    json file = json::object();
    if (!inv.config_path.empty()) file = load_config(inv.config_path);
    for (const auto& [key, value] : file.items()) {
        if (key == "seed") continue;
        const bool known = std::any_of(cmd.params.begin(), cmd.params.end(), [&](const Param& p) { return p.key == key; });
        if (!known) throw UsageError("unknown config key '" + key + "' for " + cmd.name);
    }
    if (file.contains("seed")) {
        if (!file["seed"].is_number_unsigned()) throw UsageError("config key 'seed': expected a nonnegative integer");
        seed = file["seed"].get<std::uint64_t>();
        seed_source = "file";
    }
    if (sub.count("--seed") > 0) {
        seed = inv.seed;
        seed_source = "cli";
    }
    for (const Param& p : cmd.params) {
        if (sub.count("--" + p.key) > 0) {
            s.values[p.key] = normalize(p, inv.raw.at(p.key));
            s.sources[p.key] = "cli";
        } else if (file.contains(p.key)) {
            s.values[p.key] = normalize(p, file[p.key]);
            s.sources[p.key] = "file";
        } else {
            s.values[p.key] = p.fallback;
            s.sources[p.key] = "default";
        }
    }
    s.sources["seed"] = seed_source;

    io::RunManifest m;
    m.config = {{"subcommand", cmd.name}, {"parameters", s.values}, {"sources", s.sources}};
    m.seed = seed;
    const std::string run_id = io::compute_run_id(m.config, seed);

    const Context ctx{s, seed, inv.jobs, run_id, err};
    Output o = cmd.body(ctx);
    o.summary["subcommand"] = cmd.name;
    o.artifacts["summary.json"] = io::json_text(o.summary);

    fs::path root = inv.out;
    if (root.empty()) {
        const char* env = std::getenv("SBMLAB_OUT");
        root = env && *env ? fs::path(env) : fs::path("sbmlab-out");
    }
    const fs::path dir = io::write_run(root, m, o.artifacts);
    err << "run " << dir.string() << "\n";
    for (const std::string& line : o.lines) out << line << "\n";
    out.flush();
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Numerics for the zero-set boundary of one-dimensional super-Brownian motion", "sbmlab"};
    app.require_subcommand(1);
    const std::vector<Command> cmds = commands();
    std::vector<Invocation> invs(cmds.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        CLI::App* sub = app.add_subcommand(cmds[i].name, cmds[i].help);
        Invocation& inv = invs[i];
        sub->add_option("--config", inv.config_path, "JSON file of parameter values");
        sub->add_option("--seed", inv.seed, "base seed");
        sub->add_option("--jobs", inv.jobs, "worker threads (0: all cores)");
        sub->add_option("--out", inv.out, "output root (default $SBMLAB_OUT, else ./sbmlab-out)");
        for (const Param& p : cmds[i].params) {
            std::string help = p.help + " [" + (p.fallback.is_string() ? p.fallback.get<std::string>() : p.fallback.dump()) + "]";
            sub->add_option("--" + p.key, inv.raw[p.key], help);
        }
        subs.push_back(sub);
    }

    if (argc <= 1) {
        err << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        // a subcommand's own --help lands here as well
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        err << "usage error: " << e.what() << "\n" << "run 'sbmlab --help' for the subcommands\n";
        return 2;
    }

    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        try {
            return execute(cmds[i], *subs[i], invs[i], out, err);
        } catch (const UsageError& e) {
            err << "usage error: " << e.what() << "\n";
            return 2;
        } catch (const InvalidArgument& e) {
            err << "invalid argument in " << cmds[i].name << ": " << e.what() << "\n";
            return 2;
        } catch (const Error& e) {
            err << "error in " << cmds[i].name << ": " << e.what() << "\n";
            return 1;
        } catch (const std::exception& e) {
            err << "error in " << cmds[i].name << ": " << e.what() << "\n";
            return 1;
        }
    }
    err << app.help();
    return 2;
}

}  // namespace sbmlab::cli
