#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sbmlab/grid_function.hpp"

namespace sbmlab::sim {

enum class Backend { particles, spde_grid };
enum class SpdeScheme { feller_split, euler_maruyama };

Backend parse_backend(const std::string& name);
const char* backend_name(Backend b);
SpdeScheme parse_spde_scheme(const std::string& name);
const char* spde_scheme_name(SpdeScheme s);

/// A point mass of the initial measure.
struct Atom {
    double mass = 1.0;
    double x = 0.0;
};

struct SimConfig {
    Backend backend = Backend::particles;
    /// Initial measure as atoms; ignored when `x0_density` is set.
    std::vector<Atom> atoms{Atom{}};
    std::optional<GridFunction> x0_density;
    double t_final = 1.0;
    /// Grid for the density snapshots (and the SPDE state).
    double x_min = -6.0;
    double x_max = 6.0;
    double spacing = 0.05;
    /// SPDE time step; 0 selects spacing^2 / 4.
    double dt = 0.0;
    SpdeScheme spde_scheme = SpdeScheme::feller_split;
    /// Particles per unit mass; each particle carries mass 1/n.
    double n_particles_per_unit_mass = 1e4;
    /// Branching-rate multiplier: particles branch at rate kappa * n into 0 or
    /// 2 offspring with equal probability. 0 selects the calibrated value.
    double kappa = 0.0;
    std::uint64_t seed = 1;

    double initial_mass() const;
    double effective_dt() const;
    /// Throws InvalidArgument on a malformed configuration.
    void validate() const;
};

/// Branching-rate multiplier for which the particle total mass has exactly the
/// Feller Laplace transform exp(-2 lambda m / (2 + lambda t)) at lambda = t = 1
/// and unit initial mass, from the closed-form generating function of the
/// critical birth-death process.
double calibrate_kappa(double n_particles_per_unit_mass);

/// E exp(-lambda N / n) for N particles at time t descending from round(m n)
/// particles with branching multiplier kappa (closed form).
double particle_laplace(double lambda, double t, double m, double n, double kappa);

struct DensityEnsemble {
    std::vector<GridFunction> snapshots;
    std::vector<double> total_mass;  ///< exact mass per replicate (particle count / n)
    std::vector<std::uint64_t> replicate_seeds;
    SimConfig config;
    double kappa = 0.0;          ///< particles backend only
    double clip_fraction = 0.0;  ///< Euler–Maruyama clip events per cell-step
    std::size_t grid_extensions = 0;
};

/// Simulates X_{t_final} for `n_replicates` independent replicates.
///
/// Particle backend: the positions at time t of critical binary branching
/// Brownian motion are sampled directly from the coalescent point process of
/// the surviving families, with a Brownian snake for the positions; the
/// density is the nearest-grid-point histogram at bandwidth `spacing`.
/// SPDE backend: explicit diffusion with zero-flux ends followed either by the
/// exact per-cell Feller transition (Poisson–Gamma) or by Euler–Maruyama with
/// clipping. Grids extend automatically when mass nears an edge.
///
/// Throws MassExplosion if a replicate's mass exceeds 100 times the initial mass.
DensityEnsemble simulate(const SimConfig& cfg, std::size_t n_replicates, unsigned jobs = 1);

/// Positions at time t of all particles descending from `k` initial particles at
/// `x0` (coalescent point process sampler). `b` is the per-particle splitting rate.
void sample_descendants(std::size_t k, double x0, double t, double b, std::mt19937_64& rng,
                        std::vector<double>& out);

/// Event-driven simulation of the whole branching tree, used as an independent
/// check of `sample_descendants` and for path maxima.
struct TreeRun {
    std::vector<double> positions;  ///< particles alive at t
    double path_max = -1e300;       ///< sup of all particle paths over [0, t]
    std::size_t events = 0;
};
TreeRun simulate_full_tree(std::size_t k, double x0, double t, double b, std::mt19937_64& rng);

struct ClusterConfig {
    double t = 1.0;
    /// Atom mass; 0 selects t/200.
    double m0 = 0.0;
    double n_particles_per_unit_mass = 2e5;
    double kappa = 0.0;
    double spacing = 0.005;
    double x_min = -8.0;
    double x_max = 8.0;
    /// Attempts allowed per conditioned sample.
    std::size_t max_attempts = 100000;
    std::uint64_t seed = 1;

    double effective_m0() const { return m0 > 0.0 ? m0 : t / 200.0; }
};

struct ClusterSample {
    GridFunction snapshot;
    double total_mass = 0.0;
    bool conditioned_on_survival = true;
    std::size_t families = 0;  ///< surviving ancestral families (1 for a single cluster)
};

struct ClusterBatch {
    std::vector<ClusterSample> samples;
    std::size_t attempts = 0;  ///< runs drawn, including the rejected extinct ones
    double kappa = 0.0;
    double m0 = 0.0;
    /// 1 - exp(-2 m0 / t)
    double survival_prediction = 0.0;
    double survival_frequency() const {
        return attempts ? static_cast<double>(samples.size()) / static_cast<double>(attempts) : 0.0;
    }
};

/// Approximate draws from the canonical cluster law conditioned on X_t > 0:
/// runs from m0 * delta_0, extinct runs rejected. Throws
/// RejectionBudgetExceeded when the expected number of attempts exceeds
/// `max_attempts` (the message states the required budget), or when a sample
/// actually runs out of attempts.
ClusterBatch sample_cluster(const ClusterConfig& cfg, std::size_t n_replicates, unsigned jobs = 1);

struct HittingRow {
    double R = 0.0;
    std::size_t hits = 0;
    double frequency = 0.0;   ///< fraction of replicates whose range reached R
    double n0_estimate = 0.0; ///< -log(1 - frequency) / m
    double n0_stderr = 0.0;
    double shape = 0.0;       ///< R^-2 (R / sqrt t)^3 e^{-R^2 / 2t}
};

struct HittingTable {
    std::vector<HittingRow> rows;
    double fitted_c = 0.0;        ///< max over rows of n0_estimate / shape, at least 1
    /// slope of log n0 against R^2 / 2t over rows with at least 5 hits
    double gaussian_slope = 0.0;
    double gaussian_slope_stderr = 0.0;
    std::size_t replicates = 0;
};

/// Estimates N_0(X_s([R, inf)) > 0 for some s <= t) from full-tree runs started
/// at `mass` * delta_0, using the Poisson cluster count.
HittingTable hitting_tail_check(const std::vector<double>& R_values, double t, std::size_t n_replicates,
                                double n_particles_per_unit_mass, double mass, std::uint64_t seed,
                                unsigned jobs = 1);

/// Histogram of particle positions with mass `particle_mass` each on a lattice
/// x_min + i h, widened as needed so every particle sits at least two cells
/// inside the grid. Returns the number of widening steps through `extended`.
GridFunction histogram(const std::vector<double>& positions, double particle_mass, double x_min, double x_max,
                       double h, std::size_t* extended = nullptr);

}  // namespace sbmlab::sim
