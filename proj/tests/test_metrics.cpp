#include <doctest.h>

#include <cmath>

#include "modsindy/metrics.hpp"
#include "modsindy/systems.hpp"

using namespace modsindy;

TEST_CASE("vector_field_error is zero for identical fields and scales correctly") {
  const SystemSpec& sys = catalog_system("lorenz");
  TimeSeries ts = simulate(sys, sys.default_x0, 0.01, 2.0);
  auto f = [&sys](const Vector& x) { return sys.rhs(x); };
  CHECK(vector_field_error(f, f, ts.states) == 0.0);
  auto f_scaled = [&sys](const Vector& x) { return Vector(1.1 * sys.rhs(x)); };
  // ||0.1 f||^2 / ||f||^2 = 0.01
  CHECK(vector_field_error(f, f_scaled, ts.states) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("vector_field_error rejects a zero denominator") {
  auto zero = [](const Vector& x) { return Vector(Vector::Zero(x.size())); };
  Matrix X = Matrix::Ones(5, 2);
  CHECK_THROWS_AS(vector_field_error(zero, zero, X), DegenerateTrajectory);
}

TEST_CASE("noise_error is the mean squared row mismatch") {
  Matrix N = Matrix::Zero(4, 2);
  Matrix Nh = Matrix::Zero(4, 2);
  Nh(1, 0) = 2.0;  // single entry off by 2 => mean of squared row norms = 4/4
  CHECK(noise_error(N, Nh) == doctest::Approx(1.0));
  CHECK(noise_error(N, N) == 0.0);
}

TEST_CASE("parameter_error is a relative Frobenius distance") {
  Matrix a(2, 2);
  a << 3.0, 0.0, 0.0, 4.0;
  CHECK(parameter_error(a, a) == 0.0);
  Matrix b = 1.1 * a;
  CHECK(parameter_error(a, b) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("prediction_error vanishes for the exact model") {
  const SystemSpec& sys = catalog_system("lorenz");
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  CoefficientMatrix xi = true_coefficients(sys, lib);
  TimeSeries ts = simulate(sys, sys.default_x0, 0.01, 2.0);
  PredictionError pe = prediction_error(ts.states, lib, xi, ts.dt);
  CHECK(!pe.unstable);
  CHECK(pe.value < 1e-20);
}

TEST_CASE("prediction_error flags blow-ups instead of throwing") {
  CandidateLibrary lib = build_polynomial_library(1, 2, false);
  CoefficientMatrix xi = CoefficientMatrix::zero(lib.size(), 1);
  xi.values(lib.find({2}), 0) = 1.0;  // dx = x^2, finite-time blow-up
  xi.active(lib.find({2}), 0) = true;
  Matrix X = Matrix::Constant(2000, 1, 1e3);
  PredictionError pe = prediction_error(X, lib, xi, 0.1);
  CHECK(pe.unstable);
  CHECK(pe.failed_step >= 0);
}

TEST_CASE("support_equal and success_rate") {
  Eigen::Matrix<bool, -1, -1> a = Eigen::Matrix<bool, -1, -1>::Constant(2, 2, false);
  Eigen::Matrix<bool, -1, -1> b = a;
  a(0, 0) = true;
  CHECK(!support_equal(a, b));
  b(0, 0) = true;
  CHECK(support_equal(a, b));
  std::vector<std::pair<Eigen::Matrix<bool, -1, -1>, Eigen::Matrix<bool, -1, -1>>> runs = {
      {a, b}, {a, a}, {a, Eigen::Matrix<bool, -1, -1>::Constant(2, 2, false)}, {b, b}};
  CHECK(success_rate(runs) == doctest::Approx(0.75));
}

TEST_CASE("metrics report serialization carries all fields") {
  MetricsReport r;
  r.e_f = 0.25;
  r.e_p = 0.5;
  r.structure_correct = true;
  std::string j = r.to_json();
  CHECK(j.find("\"e_f\"") != std::string::npos);
  CHECK(j.find("\"structure_correct\"") != std::string::npos);
  std::string header = MetricsReport::csv_header();
  std::string row = r.to_csv_row();
  CHECK(std::count(header.begin(), header.end(), ',') ==
        std::count(row.begin(), row.end(), ','));
}
