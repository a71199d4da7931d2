#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mvisco/errors.hpp"

namespace mvisco {

/// Thomas algorithm for a tridiagonal system. lower[0] and upper[n-1] are
/// ignored. Throws SolverFailure on a vanishing pivot.
inline std::vector<double> solve_tridiagonal(std::span<const double> lower,
                                             std::span<const double> diag,
                                             std::span<const double> upper,
                                             std::span<const double> rhs) {
  const std::size_t n = diag.size();
  if (lower.size() != n || upper.size() != n || rhs.size() != n)
    throw SizeMismatch("tridiagonal bands must have equal length");
  if (n == 0) return {};

  std::vector<double> c(n), x(n);
  double pivot = diag[0];
  if (!(std::abs(pivot) > 0.0) || !std::isfinite(pivot)) throw SolverFailure("zero pivot");
  c[0] = upper[0] / pivot;
  x[0] = rhs[0] / pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = diag[i] - lower[i] * c[i - 1];
    if (!(std::abs(pivot) > 0.0) || !std::isfinite(pivot)) throw SolverFailure("zero pivot");
    c[i] = upper[i] / pivot;
    x[i] = (rhs[i] - lower[i] * x[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
  return x;
}

}  // namespace mvisco
