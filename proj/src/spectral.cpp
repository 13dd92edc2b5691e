#include "sbmlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "sbmlab/errors.hpp"
#include "sbmlab/parallel.hpp"
#include "sbmlab/profiles.hpp"
#include "sbmlab/stats.hpp"
#include "sbmlab/tridiagonal.hpp"

namespace sbmlab::spectral {

Builtin parse_builtin(const std::string& name) {
    if (name == "zero") return Builtin::zero;
    if (name == "F") return Builtin::F;
    if (name == "F_half") return Builtin::F_half;
    if (name == "G") return Builtin::G;
    throw InvalidArgument("unknown killing function '" + name + "' (expected zero, F, F_half or G)");
}

const char* builtin_name(Builtin b) {
    switch (b) {
        case Builtin::zero: return "zero";
        case Builtin::F: return "F";
        case Builtin::F_half: return "F_half";
        case Builtin::G: return "G";
    }
    return "?";
}

const char* method_name(Method m) {
    return m == Method::hermite_galerkin ? "hermite_galerkin" : "neumann_fd";
}

namespace {

const GridFunction& cached_F() {
    static std::once_flag once;
    static GridFunction f;
    std::call_once(once, [] { f = even_extension(profiles::solve_F().profile); });
    return f;
}

const GridFunction& cached_G() {
    static std::once_flag once;
    static GridFunction g;
    std::call_once(once, [] { g = profiles::solve_G(); });
    return g;
}

}  // namespace

KillingSpec KillingSpec::builtin(Builtin b) {
    KillingSpec s;
    s.name = builtin_name(b);
    switch (b) {
        case Builtin::zero:
            s.phi = GridFunction::zeros(-10.0, 10.0, 2001, "zero");
            s.symmetric = true;
            break;
        case Builtin::F:
            s.phi = cached_F();
            s.symmetric = true;
            break;
        case Builtin::F_half:
            s.phi = cached_F();
            for (double& v : s.phi.values()) v *= 0.5;
            s.phi.set_label("F_half");
            s.symmetric = true;
            break;
        case Builtin::G:
            s.phi = cached_G();
            s.symmetric = false;
            break;
    }
    return s;
}

KillingSpec KillingSpec::from_grid(GridFunction phi, bool symmetric, std::string name) {
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (!(phi[i] >= 0.0)) throw InvalidArgument("killing function must be nonnegative and finite");
        if (symmetric && std::abs(phi[i] - phi(-phi.x(i))) > 1e-8) {
            throw InvalidArgument("killing function declared symmetric is not even at x = " +
                                  std::to_string(phi.x(i)));
        }
    }
    KillingSpec s;
    s.phi = std::move(phi);
    s.symmetric = symmetric;
    s.name = std::move(name);
    return s;
}

double KillingSpec::operator()(double x) const {
    if (strict_extension && (x < phi.x_min() || x > phi.x_max())) {
        throw QuadratureUnderflow("node x = " + std::to_string(x) + " lies outside the grid of '" + name + "'");
    }
    return phi(x);
}

namespace {

// Hermite functions u_n(x) = He_n(x) e^{-x^2/4} / sqrt(n!), bounded in n and x
void hermite_functions(double x, std::size_t count, std::vector<double>& out) {
    out.resize(count);
    out[0] = std::exp(-0.25 * x * x);
    if (count > 1) out[1] = x * out[0];
    for (std::size_t n = 1; n + 1 < count; ++n) {
        const double dn = static_cast<double>(n);
        out[n + 1] = (x * out[n] - std::sqrt(dn) * out[n - 1]) / std::sqrt(dn + 1.0);
    }
}

}  // namespace

GaussRule gauss_hermite_probabilists(std::size_t n_nodes) {
    if (n_nodes < 1) throw InvalidArgument("quadrature needs at least one node");
    // nodes: eigenvalues of the Jacobi matrix of x He_n = He_{n+1} + n He_{n-1}
    Eigen::VectorXd off(static_cast<Eigen::Index>(n_nodes > 1 ? n_nodes - 1 : 0));
    for (Eigen::Index k = 0; k < off.size(); ++k) off(k) = std::sqrt(static_cast<double>(k + 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_nodes)), off,
                              Eigen::EigenvaluesOnly);
    // weights from the Christoffel function, which stays accurate at the
    // extreme nodes where eigenvector components underflow
    GaussRule r;
    std::vector<double> u;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        const double x = es.eigenvalues()(k);
        hermite_functions(x, n_nodes, u);
        double s = 0.0;
        for (double v : u) s += v * v;
        r.nodes.push_back(x);
        r.weights.push_back(s > 0.0 ? std::exp(-0.5 * x * x) / s : 0.0);
    }
    return r;
}

namespace {

double normal_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// psi_0 positive: fix the sign so its integral against m is positive
void orient(GridFunction& psi) {
    double s = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) s += psi[i] * normal_density(psi.x(i));
    if (s < 0.0) {
        for (double& v : psi.values()) v = -v;
    }
}

}  // namespace

EigenResult eig_hermite(const KillingSpec& spec, std::size_t basis_size, std::size_t n_nodes, std::size_t n_eigen,
                        double K_out, std::size_t n_out) {
    if (basis_size < 20 || basis_size > 400) throw InvalidArgument("basis_size must lie in [20, 400]");
    if (n_nodes == 0) n_nodes = std::max<std::size_t>(300, 2 * basis_size);
    if (n_nodes < 2 * basis_size) throw InvalidArgument("need at least 2*basis_size quadrature nodes");
    n_eigen = std::min(n_eigen, basis_size);

    const GaussRule rule = gauss_hermite_probabilists(n_nodes);
    const auto N = static_cast<Eigen::Index>(basis_size);
    // Matrix of -A^phi: diagonal n/2 plus the killing Gram matrix.
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
    for (Eigen::Index n = 0; n < N; ++n) M(n, n) = 0.5 * static_cast<double>(n);
    std::vector<double> h;
    Eigen::VectorXd col(N);
    for (std::size_t k = 0; k < n_nodes; ++k) {
        const double p = spec(rule.nodes[k]);
        if (p == 0.0) continue;
        // sqrt(w) He_n/sqrt(n!) = u_n / sqrt(sum_{j < nodes} u_j^2), free of
        // the e^{+-x^2/4} factors that overflow at the outer nodes
        hermite_functions(rule.nodes[k], n_nodes, h);
        double s = 0.0;
        for (double v : h) s += v * v;
        const double scale = 1.0 / std::sqrt(s);
        for (Eigen::Index n = 0; n < N; ++n) col(n) = scale * h[static_cast<std::size_t>(n)];
        M.selfadjointView<Eigen::Lower>().rankUpdate(col, p);
    }
    M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw CrossCheckMismatch("Hermite eigen-solve did not converge");

    EigenResult r;
    r.method = Method::hermite_galerkin;
    r.basis_size_or_n = basis_size;
    r.truncation_K = K_out;
    r.phi_name = spec.name;
    for (std::size_t j = 0; j < n_eigen; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        r.lambdas.push_back(es.eigenvalues()(jj));
        const Eigen::VectorXd c = es.eigenvectors().col(jj);
        GridFunction psi = GridFunction::sample(
            -K_out, K_out, n_out,
            [&](double x) {
                std::vector<double> hx;
                hermite_functions(x, basis_size, hx);
                double s = 0.0;
                for (Eigen::Index n = 0; n < N; ++n) s += c(n) * hx[static_cast<std::size_t>(n)];
                return s * std::exp(0.25 * x * x);
            },
            "psi_" + std::to_string(j));
        // the integral of He_n/sqrt(n!) against m is 1 for n = 0 and 0 otherwise
        double theta = c(0);
        if (j == 0 && theta < 0.0) {
            for (double& v : psi.values()) v = -v;
            theta = -theta;
        }
        if (j == 0) r.theta0 = theta;
        r.thetas.push_back(theta);
        r.eigenfunctions.push_back(std::move(psi));
    }
    return r;
}

namespace {

struct FdSolve {
    std::vector<double> lambdas;
    std::vector<std::vector<double>> f;  // unweighted, cell centres
    double a = 0.0;
    double h = 0.0;
};

FdSolve fd_solve(const KillingSpec& spec, double a, double b, std::size_t cells, std::size_t count) {
    const double h = (b - a) / static_cast<double>(cells);
    std::vector<double> diag(cells), off(cells - 1), x(cells);
    for (std::size_t i = 0; i < cells; ++i) x[i] = a + (static_cast<double>(i) + 0.5) * h;
    const double c = 0.5 / (h * h);
    // w(x_i +- h/2) / w(x_i) and w(x_{i+1/2}) / sqrt(w_i w_{i+1}) in closed form
    const double cross = std::exp(h * h / 8.0);
    for (std::size_t i = 0; i < cells; ++i) {
        double d = 0.0;
        if (i + 1 < cells) d += std::exp(-0.5 * x[i] * h - h * h / 8.0);
        if (i > 0) d += std::exp(0.5 * x[i] * h - h * h / 8.0);
        diag[i] = -c * d - spec(x[i]);
        if (i + 1 < cells) off[i] = c * cross;
    }
    const TridiagonalEigen te = largest_eigenpairs(diag, off, count);
    FdSolve s;
    s.a = a;
    s.h = h;
    for (std::size_t k = 0; k < te.values.size(); ++k) {
        s.lambdas.push_back(-te.values[k]);
        std::vector<double> f(cells);
        for (std::size_t i = 0; i < cells; ++i) f[i] = te.vectors[k][i] * std::exp(0.25 * x[i] * x[i]);
        s.f.push_back(std::move(f));
    }
    return s;
}

}  // namespace

EigenResult eig_neumann_fd(const KillingSpec& spec, double K, std::size_t n, std::size_t n_eigen,
                           bool check_truncation) {
    if (K < 6.0) throw InvalidArgument("finite-difference domain needs K >= 6");
    if (n < 10) throw InvalidArgument("finite-difference solve needs n >= 10");
    const double h = K / static_cast<double>(n);
    auto solve = [&](double k_dom, std::size_t count) {
        const auto cells = static_cast<std::size_t>(std::llround(k_dom / h));
        return spec.symmetric ? fd_solve(spec, 0.0, k_dom, cells, count)
                              : fd_solve(spec, -k_dom, k_dom, 2 * cells, count);
    };
    const FdSolve s = solve(K, n_eigen);

    EigenResult r;
    r.method = Method::neumann_fd;
    r.basis_size_or_n = n;
    r.truncation_K = K;
    r.phi_name = spec.name;
    r.lambdas = s.lambdas;
    for (std::size_t k = 0; k < s.f.size(); ++k) {
        std::vector<double> v;
        if (spec.symmetric) {
            v.assign(s.f[k].rbegin(), s.f[k].rend());
            v.insert(v.end(), s.f[k].begin(), s.f[k].end());
        } else {
            v = s.f[k];
        }
        const double half = K - 0.5 * h;
        GridFunction psi(-half, half, std::move(v), "psi_" + std::to_string(k));
        // midpoint rule in L^2(m)
        double norm = 0.0;
        for (std::size_t i = 0; i < psi.size(); ++i) norm += psi[i] * psi[i] * normal_density(psi.x(i));
        norm = std::sqrt(norm * h);
        for (double& x : psi.values()) x /= norm;
        if (k == 0) orient(psi);
        double th = 0.0;
        for (std::size_t i = 0; i < psi.size(); ++i) th += psi[i] * normal_density(psi.x(i));
        if (k == 0) r.theta0 = th * h;
        r.thetas.push_back(th * h);
        r.eigenfunctions.push_back(std::move(psi));
    }
    if (check_truncation && !r.lambdas.empty()) {
        const FdSolve wider = solve(K + 1.0, 1);
        r.truncation_shift = std::abs(wider.lambdas[0] - r.lambdas[0]);
        r.truncation_warning = r.truncation_shift > 1e-4;
    }
    return r;
}

double dimension_from_lambda0(double lambda0) {
    if (!(lambda0 > 0.5 && lambda0 < 1.0)) {
        throw OutOfRange("lambda0 = " + std::to_string(lambda0) + " lies outside (1/2, 1)");
    }
    return 2.0 - 2.0 * lambda0;
}

SurvivalCheck survival_probability_check(const KillingSpec& spec, const EigenResult& eig, double t,
                                         std::size_t mc_samples, std::uint64_t seed, unsigned jobs, double dt) {
    if (!(t > 0.0)) throw InvalidArgument("survival check needs t > 0");
    if (mc_samples < 2) throw InvalidArgument("survival check needs at least two samples");
    if (!(dt > 0.0)) throw InvalidArgument("survival check needs dt > 0");
    const auto steps = static_cast<std::size_t>(std::ceil(t / dt - 1e-9));
    const double step = t / static_cast<double>(steps);
    const double decay = std::exp(-0.5 * step);
    const double noise = std::sqrt(1.0 - std::exp(-step));

    // fixed blocks so the estimate does not depend on the thread count
    const std::size_t blocks = std::min<std::size_t>(64, mc_samples);
    std::vector<std::size_t> survivors(blocks, 0);
    parallel_for(blocks, jobs, [&](std::size_t b) {
        std::mt19937_64 rng(derive_seed(seed, b));
        std::normal_distribution<double> gauss;
        std::exponential_distribution<double> clock;
        const std::size_t lo = b * mc_samples / blocks, hi = (b + 1) * mc_samples / blocks;
        std::size_t alive = 0;
        for (std::size_t s = lo; s < hi; ++s) {
            const double budget = clock(rng);
            double y = gauss(rng);
            double p = spec(y);
            double acc = 0.0;
            bool killed = false;
            for (std::size_t k = 0; k < steps; ++k) {
                y = y * decay + noise * gauss(rng);
                const double q = spec(y);
                acc += 0.5 * step * (p + q);
                p = q;
                if (acc > budget) {
                    killed = true;
                    break;
                }
            }
            if (!killed) ++alive;
        }
        survivors[b] = alive;
    });
    std::size_t alive = 0;
    for (std::size_t a : survivors) alive += a;
    SurvivalCheck c;
    c.samples = mc_samples;
    const double n = static_cast<double>(mc_samples);
    c.mc_estimate = static_cast<double>(alive) / n;
    c.mc_stderr = std::sqrt(std::max(c.mc_estimate * (1.0 - c.mc_estimate), 1.0 / n) / n);
    c.prediction = eig.theta0 * eig.theta0 * std::exp(-eig.lambda0() * t);
    for (std::size_t k = 0; k < eig.thetas.size() && k < eig.lambdas.size(); ++k) {
        c.prediction_all_modes += eig.thetas[k] * eig.thetas[k] * std::exp(-eig.lambdas[k] * t);
    }
    c.z_score = (c.mc_estimate - c.prediction) / c.mc_stderr;
    return c;
}

double weighted_relative_error(const GridFunction& psi, const GridFunction& reference, double lo, double hi) {
    if (!(hi > lo)) throw InvalidArgument("comparison interval must have hi > lo");
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double x = psi.x(i);
        if (x < lo || x > hi) continue;
        const double w = normal_density(x);
        const double a = psi[i], b = reference(x);
        aa += w * a * a;
        bb += w * b * b;
        ab += w * a * b;
    }
    if (!(aa > 0.0 && bb > 0.0)) throw DegenerateFit("a compared function vanishes on the interval");
    // |a/|a| - s b/|b||^2 with s the sign of <a, b>
    return std::sqrt(std::max(0.0, 2.0 - 2.0 * std::abs(ab) / std::sqrt(aa * bb)));
}

GridFunction ground_state_from_G(const GridFunction& G) {
    GridFunction d = derivative(G);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = -std::exp(0.5 * d.x(i) * d.x(i)) * d[i];
    d.set_label("minus_exp_G_prime");
    return d;
}

}  // namespace sbmlab::spectral
