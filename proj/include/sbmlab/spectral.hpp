#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sbmlab/grid_function.hpp"

namespace sbmlab::spectral {

enum class Builtin { zero, F, F_half, G };

/// Parses "zero", "F", "F_half", "G". Throws InvalidArgument otherwise.
Builtin parse_builtin(const std::string& name);
const char* builtin_name(Builtin b);

/// The killing rate phi of A^phi f = f''/2 - x f'/2 - phi f.
struct KillingSpec {
    GridFunction phi;
    bool symmetric = false;
    std::string name;
    /// By default phi is extended beyond its grid by its edge values. With
    /// `strict_extension` set, evaluation outside the grid throws
    /// QuadratureUnderflow instead.
    bool strict_extension = false;

    /// Builtin profiles are computed once per process at default resolution.
    static KillingSpec builtin(Builtin b);
    /// Validates phi >= 0 and, when `symmetric`, phi(x) = phi(-x) to 1e-8.
    static KillingSpec from_grid(GridFunction phi, bool symmetric, std::string name = "custom");

    double operator()(double x) const;
};

enum class Method { hermite_galerkin, neumann_fd };
const char* method_name(Method m);

/// Eigenpairs of A^phi. `lambdas[n]` >= 0 with operator eigenvalue -lambdas[n],
/// ascending. Eigenfunctions are unit vectors of L^2(m), m = N(0,1), sampled
/// on a symmetric grid, with psi_0 chosen positive.
struct EigenResult {
    std::vector<double> lambdas;
    std::vector<GridFunction> eigenfunctions;
    double theta0 = 0.0;  ///< integral of psi_0 against m
    std::vector<double> thetas;  ///< integral of psi_n against m, for every stored n
    Method method = Method::hermite_galerkin;
    std::size_t basis_size_or_n = 0;
    double truncation_K = 0.0;
    /// Set when lambda_0 moved by more than 1e-4 as K -> K+1 (finite differences).
    bool truncation_warning = false;
    double truncation_shift = 0.0;
    std::string phi_name;

    double lambda0() const { return lambdas.at(0); }
};

/// Gauss–Hermite rule for the standard normal law (Golub–Welsch); weights sum to 1.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussRule gauss_hermite_probabilists(std::size_t n_nodes);

/// Galerkin matrix of A^phi in the orthonormal basis He_n / sqrt(n!) of
/// L^2(m). `n_nodes` = 0 selects max(300, 2 basis_size) quadrature nodes.
/// Eigenfunctions are sampled on [-K_out, K_out].
EigenResult eig_hermite(const KillingSpec& spec, std::size_t basis_size = 120, std::size_t n_nodes = 0,
                        std::size_t n_eigen = 6, double K_out = 8.0, std::size_t n_out = 1601);

/// Cell-centred flux-form finite differences for (w f')'/(2w) - phi f with
/// w = e^{-x^2/2} and zero-flux ends, symmetrized by sqrt(w). Symmetric specs
/// use n cells on [0, K] (even modes only); others use 2n cells on [-K, K].
/// With `check_truncation`, the solve is repeated at K+1 to fill the
/// truncation fields.
EigenResult eig_neumann_fd(const KillingSpec& spec, double K = 8.0, std::size_t n = 2000,
                           std::size_t n_eigen = 4, bool check_truncation = true);

/// 2 - 2 lambda0; throws OutOfRange unless lambda0 lies in (1/2, 1).
double dimension_from_lambda0(double lambda0);

/// Relative L^2(m) distance on [lo, hi] between `psi` and `reference` after
/// both are scaled to unit L^2(m) norm on [lo, hi] and given the same sign.
/// `reference` is evaluated on the grid of `psi`.
double weighted_relative_error(const GridFunction& psi, const GridFunction& reference, double lo, double hi);

/// -e^{x^2/2} G'(x) on the grid of `G`: the ground state predicted for phi = G.
GridFunction ground_state_from_G(const GridFunction& G);

struct SurvivalCheck {
    double mc_estimate = 0.0;
    double mc_stderr = 0.0;
    double prediction = 0.0;  ///< theta0^2 e^{-lambda0 t}
    double prediction_all_modes = 0.0;  ///< sum of theta_n^2 e^{-lambda_n t} over the stored modes
    double z_score = 0.0;
    std::size_t samples = 0;
};

/// Monte Carlo estimate of P_m(rho_phi > t) for the OU process
/// dY = -Y/2 dt + dB started from m, killed when the trapezoid integral of
/// phi(Y) exceeds an independent Exp(1) clock. Paths use the exact OU
/// transition on steps of `dt`.
SurvivalCheck survival_probability_check(const KillingSpec& spec, const EigenResult& eig, double t,
                                         std::size_t mc_samples, std::uint64_t seed, unsigned jobs = 1,
                                         double dt = 2e-3);

}  // namespace sbmlab::spectral
