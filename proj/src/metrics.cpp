#include "modsindy/metrics.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "modsindy/systems.hpp"

namespace modsindy {

double vector_field_error(const std::function<Vector(const Vector&)>& true_f,
                          const std::function<Vector(const Vector&)>& est_f, const Matrix& X) {
  if (X.rows() == 0) throw Error("vector_field_error: empty trajectory");
  double num = 0.0, den = 0.0;
  for (long i = 0; i < X.rows(); ++i) {
    const Vector x = X.row(i);
    const Vector f = true_f(x);
    num += (f - est_f(x)).squaredNorm();
    den += f.squaredNorm();
  }
  if (den == 0.0) throw DegenerateTrajectory("true vector field vanishes on the trajectory");
  return num / den;
}

double noise_error(const Matrix& N, const Matrix& Nhat) {
  if (N.rows() != Nhat.rows() || N.cols() != Nhat.cols())
    throw Error("noise_error: shape mismatch");
  return (N - Nhat).rowwise().squaredNorm().mean();
}

PredictionError prediction_error(const Matrix& X_true, const CandidateLibrary& lib,
                                 const CoefficientMatrix& xi, double dt, long horizon_steps) {
  const long m = X_true.rows();
  if (m < 2) throw Error("prediction_error needs at least 2 rows");
  const long steps = horizon_steps < 0 ? m - 1 : std::min(horizon_steps, m - 1);
  PredictionError res;
  auto rhs = [&](const Vector& x) { return model_rhs(lib, xi, x); };
  Vector x = X_true.row(0);
  double num = 0.0;
  for (long i = 1; i <= steps; ++i) {
    try {
      x = rk4_step(rhs, x, dt);
    } catch (const NonFiniteState&) {
      res.unstable = true;
      res.failed_step = i;
      break;
    }
    num += (X_true.row(i).transpose() - x).squaredNorm();
  }
  res.value = num / X_true.squaredNorm();
  return res;
}

double parameter_error(const Matrix& xi_true, const Matrix& xi_hat) {
  return (xi_true - xi_hat).norm() / xi_true.norm();
}

bool support_equal(const Eigen::Matrix<bool, -1, -1>& a, const Eigen::Matrix<bool, -1, -1>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

double success_rate(
    const std::vector<std::pair<Eigen::Matrix<bool, -1, -1>, Eigen::Matrix<bool, -1, -1>>>& runs) {
  if (runs.empty()) throw Error("success_rate: no runs");
  long ok = 0;
  for (const auto& [hat, truth] : runs)
    if (support_equal(hat, truth)) ++ok;
  return static_cast<double>(ok) / static_cast<double>(runs.size());
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["e_f"] = e_f;
  j["e_n"] = e_n;
  j["e_F"] = e_F;
  j["e_p"] = e_p;
  j["prediction_unstable"] = prediction_unstable;
  if (prediction_unstable) j["unstable_step"] = unstable_step;
  j["structure_correct"] = structure_correct;
  j["runtime_s"] = runtime_s;
  return j.dump(2);
}

std::string MetricsReport::csv_header() {
  return "e_f,e_n,e_F,e_p,prediction_unstable,structure_correct,runtime_s";
}

std::string MetricsReport::to_csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%d,%d,%.3f", e_f, e_n, e_F, e_p,
                prediction_unstable ? 1 : 0, structure_correct ? 1 : 0, runtime_s);
  return buf;
}

}  // namespace modsindy
