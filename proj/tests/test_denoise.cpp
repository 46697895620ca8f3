#include <doctest.h>

#include <cmath>
#include <random>

#include "modsindy/denoise.hpp"
#include "modsindy/noise.hpp"

using namespace modsindy;

namespace {

// Independent re-implementations of the two loss terms, written with scalar
// loops and rk4_step instead of the batched matrix pipeline.
double oracle_derivative_error(const Matrix& Y, const Matrix& nhat, const CandidateLibrary& lib,
                               const Matrix& xi, double dt) {
  Matrix X = Y - nhat;
  const long m = X.rows();
  Matrix dX(m, X.cols());
  for (long j = 0; j < m; ++j) {
    if (j == 0)
      dX.row(j) = (-3.0 * X.row(0) + 4.0 * X.row(1) - X.row(2)) / (2.0 * dt);
    else if (j == m - 1)
      dX.row(j) = (3.0 * X.row(m - 1) - 4.0 * X.row(m - 2) + X.row(m - 3)) / (2.0 * dt);
    else
      dX.row(j) = (X.row(j + 1) - X.row(j - 1)) / (2.0 * dt);
  }
  Matrix resid = dX - evaluate_library(lib, X) * xi;
  return resid.squaredNorm();
}

double oracle_simulation_error(const Matrix& Y, const Matrix& nhat, const CandidateLibrary& lib,
                               const Matrix& xi, int q, double c, double dt) {
  Matrix X = Y - nhat;
  const long m = X.rows();
  auto rhs = [&](const Vector& x) {
    Matrix row = evaluate_library(lib, x.transpose()) * xi;
    return Vector(row.transpose());
  };
  double es = 0.0;
  for (long j = q; j < m - q; ++j) {
    for (int dir : {1, -1}) {
      Vector z = X.row(j).transpose();
      for (int i = 1; i <= q; ++i) {
        z = rk4_step(rhs, z, dir * dt);
        double w = std::pow(c, i - 1);
        es += w * (X.row(j + dir * i).transpose() - z).squaredNorm();
      }
    }
  }
  return es;
}

TimeSeries short_lorenz(double T, double dt = 0.01) {
  const SystemSpec& sys = catalog_system("lorenz");
  return simulate(sys, sys.default_x0, dt, T);
}

}  // namespace

TEST_CASE("derivative and simulation errors match scalar oracles") {
  const SystemSpec& sys = catalog_system("lorenz");
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  TimeSeries ts = short_lorenz(0.2);  // 21 samples
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 0.05);
  Matrix nhat(ts.samples(), 3);
  for (long j = 0; j < nhat.rows(); ++j)
    for (long k = 0; k < 3; ++k) nhat(j, k) = gauss(rng);
  Matrix Y = ts.states + nhat;
  Matrix xi = true_coefficients(sys, lib).values;
  xi(0, 0) += 0.3;  // perturb so the residual is non-trivial

  double ed = derivative_error(Y, nhat, lib, xi, ts.dt);
  double ed_oracle = oracle_derivative_error(Y, nhat, lib, xi, ts.dt);
  CHECK(ed == doctest::Approx(ed_oracle).epsilon(1e-10));

  for (int q : {1, 3}) {
    double es = simulation_error(Y, nhat, lib, xi, q, 0.9, ts.dt);
    double es_oracle = oracle_simulation_error(Y, nhat, lib, xi, q, 0.9, ts.dt);
    CHECK(es == doctest::Approx(es_oracle).epsilon(1e-10));
  }

  FitConfig cfg;
  cfg.q = 2;
  double lt = total_loss(Y, nhat, lib, xi, cfg, ts.dt);
  CHECK(lt == doctest::Approx(oracle_derivative_error(Y, nhat, lib, xi, ts.dt) +
                              oracle_simulation_error(Y, nhat, lib, xi, 2, cfg.c, ts.dt))
                  .epsilon(1e-10));
}

TEST_CASE("loss graph forward pass agrees with the plain evaluators") {
  const SystemSpec& sys = catalog_system("lorenz");
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  TimeSeries ts = short_lorenz(0.3);
  Matrix nhat = 0.02 * Matrix::Random(ts.samples(), 3);
  Matrix xi = true_coefficients(sys, lib).values;
  Eigen::Matrix<bool, -1, -1> active =
      Eigen::Matrix<bool, -1, -1>::Constant(lib.size(), 3, true);

  FitConfig cfg;
  cfg.q = 2;
  LossGraph graph(ts.states + nhat, lib, cfg.q, cfg.c, ts.dt);
  const GradientRecord& rec = graph.value_and_grad(xi, active, nhat);
  double expected = total_loss(ts.states + nhat, nhat, lib, xi, cfg, ts.dt);
  CHECK(rec.loss_value == doctest::Approx(expected).epsilon(1e-10));
  CHECK(graph.last_es() + graph.last_ed() == doctest::Approx(rec.loss_value).epsilon(1e-12));
}

TEST_CASE("loss graph gradients match central finite differences") {
  const SystemSpec& sys = catalog_system("lorenz");
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  TimeSeries ts = short_lorenz(0.12);  // 13 samples
  Matrix nhat = 0.01 * Matrix::Random(ts.samples(), 3);
  Matrix Y = ts.states + 0.05 * Matrix::Random(ts.samples(), 3);
  Matrix xi = true_coefficients(sys, lib).values;
  Eigen::Matrix<bool, -1, -1> active =
      Eigen::Matrix<bool, -1, -1>::Constant(lib.size(), 3, true);

  FitConfig cfg;
  cfg.q = 2;
  LossGraph graph(Y, lib, cfg.q, cfg.c, ts.dt);
  GradientRecord rec = graph.value_and_grad(xi, active, nhat);

  const double h = 1e-6;
  auto loss_plain = [&](const Matrix& xi_v, const Matrix& nhat_v) {
    return total_loss(Y, nhat_v, lib, xi_v, cfg, ts.dt);
  };
  for (long i = 0; i < xi.rows(); ++i)
    for (long k = 0; k < xi.cols(); ++k) {
      Matrix xp = xi, xm = xi;
      xp(i, k) += h;
      xm(i, k) -= h;
      double fd = (loss_plain(xp, nhat) - loss_plain(xm, nhat)) / (2.0 * h);
      double scale = std::max({std::abs(fd), std::abs(rec.d_xi(i, k)), 1.0});
      CHECK(std::abs(rec.d_xi(i, k) - fd) / scale < 1e-5);
    }
  std::mt19937_64 rng(17);
  for (int probe = 0; probe < 40; ++probe) {
    long j = static_cast<long>(rng() % nhat.rows());
    long k = static_cast<long>(rng() % nhat.cols());
    Matrix np = nhat, nm = nhat;
    np(j, k) += h;
    nm(j, k) -= h;
    double fd = (loss_plain(xi, np) - loss_plain(xi, nm)) / (2.0 * h);
    double scale = std::max({std::abs(fd), std::abs(rec.d_nhat(j, k)), 1.0});
    CHECK(std::abs(rec.d_nhat(j, k) - fd) / scale < 1e-5);
  }
}

TEST_CASE("masked coefficients contribute nothing and receive zero gradient") {
  const SystemSpec& sys = catalog_system("lorenz");
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  TimeSeries ts = short_lorenz(0.15);
  Matrix nhat = Matrix::Zero(ts.samples(), 3);
  Matrix xi = true_coefficients(sys, lib).values;
  xi(0, 2) = 123.0;  // large junk entry (x1 in the z-equation) the mask must neutralize

  Eigen::Matrix<bool, -1, -1> active = true_coefficients(sys, lib).active;
  FitConfig cfg;
  cfg.q = 1;
  LossGraph graph(ts.states, lib, cfg.q, cfg.c, ts.dt);
  GradientRecord rec = graph.value_and_grad(xi, active, nhat);

  Matrix xi_masked = true_coefficients(sys, lib).values;
  double expected = total_loss(ts.states, nhat, lib, xi_masked, cfg, ts.dt);
  CHECK(rec.loss_value == doctest::Approx(expected).epsilon(1e-10));
  for (long i = 0; i < xi.rows(); ++i)
    for (long k = 0; k < xi.cols(); ++k)
      if (!active(i, k)) CHECK(rec.d_xi(i, k) == 0.0);
}

TEST_CASE("fit reconstructs denoised = measurement - noise estimate exactly") {
  TimeSeries ts = short_lorenz(2.0);
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  FitConfig cfg;
  cfg.q = 1;
  cfg.n_loop = 2;
  cfg.max_iter = 50;
  FitResult res = fit(ts, lib, cfg);
  CHECK((res.denoised - (ts.states - res.nhat)).cwiseAbs().maxCoeff() == 0.0);
  for (long i = 0; i < res.xi.values.rows(); ++i)
    for (long k = 0; k < res.xi.values.cols(); ++k)
      if (!res.xi.active(i, k)) CHECK(res.xi.values(i, k) == 0.0);
}

TEST_CASE("fit on clean data recovers the lorenz model") {
  TimeSeries ts = short_lorenz(5.0);
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  FitConfig cfg;
  cfg.q = 2;
  cfg.n_loop = 2;
  cfg.max_iter = 100;
  FitResult res = fit(ts, lib, cfg);
  CoefficientMatrix truth = true_coefficients(catalog_system("lorenz"), lib);
  CHECK((res.xi.active.array() == truth.active.array()).all());
  CHECK((res.xi.values - truth.values).norm() / truth.values.norm() < 0.02);
}

TEST_CASE("fit is deterministic for a fixed input") {
  const SystemSpec& sys = catalog_system("lorenz");
  TimeSeries ts = short_lorenz(2.0);
  NoiseSpec noise{NoiseKind::Gaussian, 5.0, 42};
  ts.states += generate_noise(noise, ts);
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  FitConfig cfg;
  cfg.q = 1;
  cfg.n_loop = 2;
  cfg.max_iter = 120;
  FitResult a = fit(ts, lib, cfg);
  FitResult b = fit(ts, lib, cfg);
  CHECK((a.xi.values - b.xi.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.nhat - b.nhat).cwiseAbs().maxCoeff() == 0.0);
  (void)sys;
}

TEST_CASE("an aggressive threshold that empties a state equation throws EmptyModel") {
  TimeSeries ts = short_lorenz(2.0);
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  FitConfig cfg;
  cfg.q = 1;
  cfg.n_loop = 2;
  cfg.max_iter = 30;
  cfg.lambda = 1e6;
  CHECK_THROWS_AS(fit(ts, lib, cfg), EmptyModel);
}

TEST_CASE("fit config validation rejects bad hyperparameters") {
  FitConfig cfg;
  cfg.q = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FitConfig{};
  cfg.c = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FitConfig{};
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FitConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("discrepancy fit keeps the prior support alive and returns the difference") {
  const SystemSpec& truth = catalog_system("modified_lorenz");
  const SystemSpec& prior = catalog_system("lorenz_prior");
  TimeSeries ts = simulate(truth, truth.default_x0, 0.01, 4.0);
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  FitConfig cfg;
  cfg.q = 2;
  cfg.n_loop = 2;
  cfg.max_iter = 150;
  cfg.lambda = 0.4;
  FitResult res = fit_discrepancy(ts, prior, lib, cfg);
  REQUIRE(res.discrepancy.has_value());
  // identified model = prior + discrepancy, entry by entry
  CoefficientMatrix xi_g = true_coefficients(prior, lib);
  Matrix recon = xi_g.values + res.discrepancy->values;
  CHECK((recon - res.xi.values).cwiseAbs().maxCoeff() < 1e-12);
  // the prior support can never be thresholded away
  for (long i = 0; i < xi_g.values.rows(); ++i)
    for (long k = 0; k < xi_g.values.cols(); ++k)
      if (xi_g.active(i, k)) CHECK(res.xi.active(i, k));
}

TEST_CASE("iterative mean handling with one outer pass equals plain fit") {
  TimeSeries ts = short_lorenz(2.0);
  NoiseSpec noise{NoiseKind::Gamma, 5.0, 7};
  ts.states += generate_noise(noise, ts);
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  FitConfig cfg;
  cfg.q = 1;
  cfg.n_loop = 2;
  cfg.max_iter = 80;
  FitResult plain = fit(ts, lib, cfg);
  FitResult once = fit_iterative_mean(ts, lib, cfg, 1);
  CHECK((plain.xi.values - once.xi.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK((plain.nhat - once.nhat).cwiseAbs().maxCoeff() == 0.0);
}
