#include "modsindy/regression.hpp"

#include <Eigen/Sparse>
#include <cmath>

namespace modsindy {

namespace {

// Minimum-norm least squares on the selected columns of theta.
// Returns the solution and whether theta was rank deficient.
std::pair<Vector, bool> solve_columns(const Matrix& theta, const std::vector<int>& cols,
                                      const Vector& b) {
  Matrix sub(theta.rows(), cols.size());
  for (size_t i = 0; i < cols.size(); ++i) sub.col(i) = theta.col(cols[i]);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sub);
  const bool deficient = cod.rank() < static_cast<long>(cols.size());
  return {cod.solve(b), deficient};
}

}  // namespace

StlsqResult stlsq(const Matrix& theta, const Matrix& xdot, double lambda, int max_sweeps) {
  if (lambda <= 0.0) throw Error("stlsq: lambda must be positive");
  const int p = static_cast<int>(theta.cols());
  const int n = static_cast<int>(xdot.cols());
  StlsqResult res;
  res.xi = CoefficientMatrix::zero(p, n);
  for (int j = 0; j < n; ++j) {
    std::vector<bool> active(p, true);
    int sweeps = 0;
    for (; sweeps < max_sweeps; ++sweeps) {
      std::vector<int> idx;
      for (int i = 0; i < p; ++i)
        if (active[i]) idx.push_back(i);
      if (idx.empty()) break;
      auto [coef, deficient] = solve_columns(theta, idx, xdot.col(j));
      if (deficient)
        res.warnings.push_back("stlsq: rank-deficient regression in column " + std::to_string(j));
      bool changed = false;
      for (size_t i = 0; i < idx.size(); ++i) {
        if (std::abs(coef[i]) < lambda) {
          active[idx[i]] = false;
          changed = true;
        }
      }
      if (!changed) {
        for (size_t i = 0; i < idx.size(); ++i) res.xi.values(idx[i], j) = coef[i];
        break;
      }
    }
    res.sweeps = std::max(res.sweeps, sweeps + 1);
    for (int i = 0; i < p; ++i) res.xi.active(i, j) = active[i];
    bool all_zero = true;
    for (int i = 0; i < p; ++i)
      if (active[i]) all_zero = false;
    if (all_zero && xdot.col(j).squaredNorm() / xdot.rows() > 1e-12)
      res.warnings.push_back("stlsq: column " + std::to_string(j) +
                             " thresholded to an empty model; lambda is likely too large");
  }
  res.xi.enforce_mask();
  return res;
}

Matrix fd_derivative(const Matrix& X, double dt) {
  const long m = X.rows();
  if (m < 3) throw Error("fd_derivative needs at least 3 samples");
  Matrix D(m, X.cols());
  const double inv2dt = 1.0 / (2.0 * dt);
  D.middleRows(1, m - 2) = inv2dt * (X.bottomRows(m - 2) - X.topRows(m - 2));
  D.row(0) = inv2dt * (-3.0 * X.row(0) + 4.0 * X.row(1) - X.row(2));
  D.row(m - 1) = inv2dt * (3.0 * X.row(m - 1) - 4.0 * X.row(m - 2) + X.row(m - 3));
  return D;
}

Matrix smooth(const Matrix& Y, double gamma) {
  if (gamma < 0.0) throw Error("smooth: gamma must be non-negative");
  if (gamma == 0.0) return Y;
  const long m = Y.rows();
  if (m < 3) return Y;
  // A = I + gamma * D2^T D2, pentadiagonal SPD.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(5 * m);
  auto add = [&](long r, long c, double v) {
    if (r >= 0 && r < m && c >= 0 && c < m) trips.emplace_back(r, c, v);
  };
  for (long j = 0; j < m; ++j) add(j, j, 1.0);
  // D2 row k touches (k, k+1, k+2) with stencil (1, -2, 1), k = 0..m-3.
  for (long k = 0; k + 2 < m; ++k) {
    const long idx[3] = {k, k + 1, k + 2};
    const double w[3] = {1.0, -2.0, 1.0};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) add(idx[a], idx[b], gamma * w[a] * w[b]);
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
  if (solver.info() != Eigen::Success) throw Error("smooth: factorization failed");
  Matrix out(m, Y.cols());
  for (long j = 0; j < Y.cols(); ++j) out.col(j) = solver.solve(Y.col(j));
  return out;
}

void refit_active(CoefficientMatrix& xi, const Matrix& theta, const Matrix& xdot,
                  std::vector<std::string>* warnings) {
  const int p = static_cast<int>(theta.cols());
  for (long j = 0; j < xi.values.cols(); ++j) {
    std::vector<int> idx;
    for (int i = 0; i < p; ++i)
      if (xi.active(i, j)) idx.push_back(i);
    xi.values.col(j).setZero();
    if (idx.empty()) continue;
    auto [coef, deficient] = solve_columns(theta, idx, xdot.col(j));
    if (deficient && warnings)
      warnings->push_back("refit: rank-deficient regression in column " + std::to_string(j));
    for (size_t i = 0; i < idx.size(); ++i) xi.values(idx[i], j) = coef[i];
  }
}

}  // namespace modsindy
