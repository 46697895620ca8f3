#pragma once

#include <functional>
#include <string>
#include <vector>

#include "modsindy/library.hpp"

namespace modsindy {

struct MetricsReport {
  double e_f = 0.0;   // relative vector-field error
  double e_n = 0.0;   // mean squared noise identification error
  double e_F = 0.0;   // relative forward-prediction error
  double e_p = 0.0;   // relative parameter error
  bool prediction_unstable = false;
  long unstable_step = -1;
  bool structure_correct = false;
  double runtime_s = 0.0;

  std::string to_json() const;
  static std::string csv_header();
  std::string to_csv_row() const;
};

// sum ||f(x_i) - fhat(x_i)||^2 / sum ||f(x_i)||^2 over the rows of X.
double vector_field_error(const std::function<Vector(const Vector&)>& true_f,
                          const std::function<Vector(const Vector&)>& est_f, const Matrix& X);

// (1/m) sum_i ||n_i - nhat_i||^2.
double noise_error(const Matrix& N, const Matrix& Nhat);

struct PredictionError {
  double value = 0.0;
  bool unstable = false;
  long failed_step = -1;
};

// Simulate the estimated model from the first row of X_true over the next
// horizon_steps samples (defaults to the full trajectory) and compare.
// A blow-up marks the result unstable instead of throwing.
PredictionError prediction_error(const Matrix& X_true, const CandidateLibrary& lib,
                                 const CoefficientMatrix& xi, double dt,
                                 long horizon_steps = -1);

// ||Xi - Xi_hat||_F / ||Xi||_F.
double parameter_error(const Matrix& xi_true, const Matrix& xi_hat);

// Fraction of runs whose estimated support equals the true support exactly.
double success_rate(
    const std::vector<std::pair<Eigen::Matrix<bool, -1, -1>, Eigen::Matrix<bool, -1, -1>>>& runs);

bool support_equal(const Eigen::Matrix<bool, -1, -1>& a, const Eigen::Matrix<bool, -1, -1>& b);

}  // namespace modsindy
