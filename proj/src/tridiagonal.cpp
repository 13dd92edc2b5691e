#include "sbmlab/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sbmlab/errors.hpp"

namespace sbmlab {

void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n);
    double b = diag[0];
    if (b == 0.0) throw StabilityViolation("singular tridiagonal system");
    c[0] = n > 1 ? upper[0] / b : 0.0;
    rhs[0] /= b;
    for (std::size_t i = 1; i < n; ++i) {
        b = diag[i] - lower[i] * c[i - 1];
        if (b == 0.0) b = std::numeric_limits<double>::epsilon() * (std::abs(diag[i]) + 1.0);
        c[i] = i + 1 < n ? upper[i] / b : 0.0;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / b;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

namespace {

// Number of eigenvalues strictly below x.
std::size_t sturm_count(std::span<const double> d, std::span<const double> e, double x) {
    std::size_t count = 0;
    double q = d[0] - x;
    if (q < 0) ++count;
    for (std::size_t i = 1; i < d.size(); ++i) {
        if (q == 0.0) q = std::numeric_limits<double>::min();
        q = d[i] - x - e[i - 1] * e[i - 1] / q;
        if (q < 0) ++count;
    }
    return count;
}

}  // namespace

TridiagonalEigen largest_eigenpairs(std::span<const double> diag, std::span<const double> off,
                                    std::size_t count) {
    const std::size_t n = diag.size();
    if (n == 0 || off.size() + 1 != n) throw InvalidArgument("tridiagonal size mismatch");
    count = std::min(count, n);
    // Gershgorin bounds
    double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
    for (std::size_t i = 0; i < n; ++i) {
        const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < n ? std::abs(off[i]) : 0.0);
        lo = std::min(lo, diag[i] - r);
        hi = std::max(hi, diag[i] + r);
    }
    const double scale = std::max(std::abs(lo), std::abs(hi));
    TridiagonalEigen out;
    for (std::size_t k = 0; k < count; ++k) {
        // k-th largest = (n-1-k)-th smallest: find x with exactly n-1-k below
        const std::size_t target = n - 1 - k;
        double a = lo, b = hi;
        for (int it = 0; it < 200 && b - a > 4 * std::numeric_limits<double>::epsilon() * scale; ++it) {
            const double mid = 0.5 * (a + b);
            if (sturm_count(diag, off, mid) > target) b = mid; else a = mid;
        }
        out.values.push_back(0.5 * (a + b));
    }

    // inverse iteration; the shift is nudged off the eigenvalue to keep the
    // factorization finite, and vectors of close eigenvalues are orthogonalized
    for (std::size_t k = 0; k < count; ++k) {
        const double shift = out.values[k] + 1e-10 * (scale + 1.0);
        std::vector<double> lower(n, 0.0), d(n), upper(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) d[i] = diag[i] - shift;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            upper[i] = off[i];
            lower[i + 1] = off[i];
        }
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * std::sin(1.0 + 7.0 * static_cast<double>(i));
        for (int it = 0; it < 4; ++it) {
            solve_tridiagonal(lower, d, upper, v);
            for (std::size_t j = 0; j < k; ++j) {
                if (std::abs(out.values[j] - out.values[k]) > 1e-6 * (scale + 1.0)) continue;
                double dot = 0;
                for (std::size_t i = 0; i < n; ++i) dot += v[i] * out.vectors[j][i];
                for (std::size_t i = 0; i < n; ++i) v[i] -= dot * out.vectors[j][i];
            }
            double norm = 0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        out.vectors.push_back(std::move(v));
    }
    return out;
}

}  // namespace sbmlab
