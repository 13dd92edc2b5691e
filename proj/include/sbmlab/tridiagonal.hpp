#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sbmlab {

/// Solves a tridiagonal system in place (Thomas algorithm, no pivoting).
/// `lower[i]` couples row i to i-1 (lower[0] unused), `upper[i]` couples row i
/// to i+1 (upper[n-1] unused). `rhs` is overwritten with the solution.
void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs);

/// Lowest-first or highest-first eigenpairs of a symmetric tridiagonal matrix.
struct TridiagonalEigen {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;  ///< unit Euclidean norm
};

/// The `count` largest eigenvalues of the symmetric tridiagonal matrix with
/// diagonal `diag` and off-diagonal `off` (size n-1), in descending order.
/// Eigenvalues come from Sturm-sequence bisection, eigenvectors from inverse
/// iteration.
TridiagonalEigen largest_eigenpairs(std::span<const double> diag, std::span<const double> off,
                                    std::size_t count);

}  // namespace sbmlab
