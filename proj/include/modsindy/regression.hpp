#pragma once

#include <vector>

#include "modsindy/library.hpp"

namespace modsindy {

struct StlsqResult {
  CoefficientMatrix xi;
  int sweeps = 0;
  std::vector<std::string> warnings;
};

// Sequentially thresholded least squares, per column: alternate least-squares
// solves on the active set and magnitude thresholding |value| < lambda until
// the support is stable or max_sweeps is reached.
StlsqResult stlsq(const Matrix& theta, const Matrix& xdot, double lambda, int max_sweeps = 25);

// Second-order finite differences: central in the interior, one-sided at both
// ends. Exact on polynomials of degree <= 2.
Matrix fd_derivative(const Matrix& X, double dt);

// Per-column Tikhonov smoother: argmin_u ||u - y||^2 + gamma ||D2 u||^2 with
// D2 the second-difference matrix. gamma = 0 returns Y unchanged.
Matrix smooth(const Matrix& Y, double gamma);

// Least-squares re-fit of the active entries of xi, column by column, against
// xdot over theta. Rank-deficient columns fall back to the minimum-norm
// solution and emit a warning.
void refit_active(CoefficientMatrix& xi, const Matrix& theta, const Matrix& xdot,
                  std::vector<std::string>* warnings = nullptr);

}  // namespace modsindy
