#include "modsindy/denoise.hpp"

#include <cmath>

namespace modsindy {

namespace {

// One RK4 step of the field x -> Theta(x) Xi applied to every row of X.
Matrix rk4_batch(const Matrix& X, const CandidateLibrary& lib, const Matrix& xi, double h) {
  auto field = [&](const Matrix& S) -> Matrix { return evaluate_library(lib, S) * xi; };
  const Matrix k1 = field(X);
  const Matrix k2 = field(X + 0.5 * h * k1);
  const Matrix k3 = field(X + 0.5 * h * k2);
  const Matrix k4 = field(X + h * k3);
  return X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Matrix masked(const Matrix& xi, const Eigen::Matrix<bool, -1, -1>& active) {
  Matrix out = xi;
  for (long i = 0; i < out.rows(); ++i)
    for (long j = 0; j < out.cols(); ++j)
      if (!active(i, j)) out(i, j) = 0.0;
  return out;
}

}  // namespace

void FitConfig::validate() const {
  if (q < 1) throw ConfigError("fit config: q must be >= 1", "fit.q");
  if (lambda <= 0.0) throw ConfigError("fit config: lambda must be positive", "fit.lambda");
  if (c <= 0.0 || c > 1.0) throw ConfigError("fit config: c must lie in (0, 1]", "fit.c");
  if (n_loop < 1) throw ConfigError("fit config: n_loop must be >= 1", "fit.n_loop");
  if (lr <= 0.0) throw ConfigError("fit config: lr must be positive", "fit.lr");
  if (max_iter < 1) throw ConfigError("fit config: max_iter must be >= 1", "fit.max_iter");
  if (smoothing_gamma < 0.0) throw ConfigError("fit config: smoothing_gamma must be >= 0", "fit.smoothing_gamma");
}

double derivative_error(const Matrix& Y, const Matrix& nhat, const CandidateLibrary& lib,
                        const Matrix& xi, double dt) {
  const Matrix xhat = Y - nhat;
  const double e = (fd_derivative(xhat, dt) - evaluate_library(lib, xhat) * xi).squaredNorm();
  if (!std::isfinite(e)) throw NonFiniteLoss("derivative error is non-finite");
  return e;
}

double simulation_error(const Matrix& Y, const Matrix& nhat, const CandidateLibrary& lib,
                        const Matrix& xi, int q, double c, double dt) {
  const long m = Y.rows();
  if (m <= 2 * q) throw Error("simulation_error needs m > 2q");
  const Matrix xhat = Y - nhat;
  const long mw = m - 2 * q;
  double es = 0.0;
  for (int dir : {+1, -1}) {
    Matrix z = xhat.middleRows(q, mw);
    double w = 1.0;
    for (int i = 1; i <= q; ++i) {
      z = rk4_batch(z, lib, xi, dir * dt);
      if (!z.allFinite())
        throw NonFiniteLoss("flow map diverged", -1, /*window=*/-1, /*offset=*/dir * i);
      es += w * (xhat.middleRows(q + dir * i, mw) - z).squaredNorm();
      w *= c;
    }
  }
  if (!std::isfinite(es)) throw NonFiniteLoss("simulation error is non-finite");
  return es;
}

double total_loss(const Matrix& Y, const Matrix& nhat, const CandidateLibrary& lib,
                  const Matrix& xi, const FitConfig& config, double dt) {
  return simulation_error(Y, nhat, lib, xi, config.q, config.c, dt) +
         derivative_error(Y, nhat, lib, xi, dt);
}

LossGraph::LossGraph(const Matrix& Y, const CandidateLibrary& lib, int q, double c, double dt)
    : q_(q) {
  const long m = Y.rows();
  const long n = Y.cols();
  if (m <= 2 * q) throw Error("loss graph needs m > 2q");
  xi_in_ = tape_.input(lib.size(), n);
  nhat_in_ = tape_.input(m, n);
  const Tape::NodeId y = tape_.constant(Y);
  const Tape::NodeId xhat = tape_.sub(y, nhat_in_);

  // e_d = || D xhat - Theta(xhat) Xi ||^2
  ed_ = tape_.squared_norm(
      tape_.sub(tape_.fd_deriv(xhat, dt), tape_.matmul(tape_.library_eval(xhat, lib), xi_in_)));

  // e_s: windows j = q .. m-q-1 (0-based) propagated +-1..q steps.
  const long mw = m - 2 * q;
  const Tape::NodeId z0 = tape_.rows(xhat, q, mw);
  es_ = tape_.constant(Matrix::Zero(1, 1));
  for (int dir : {+1, -1}) {
    Tape::NodeId z = z0;
    double w = 1.0;
    for (int i = 1; i <= q; ++i) {
      z = tape_.rk4_library_step(z, xi_in_, lib, dir * dt);
      chain_.push_back({z, dir * i});
      const Tape::NodeId res = tape_.sub(tape_.rows(xhat, q + dir * i, mw), z);
      es_ = tape_.axpy(es_, w, tape_.squared_norm(res));
      w *= c;
    }
  }
  loss_ = tape_.add(es_, ed_);

  record_.d_xi = Matrix::Zero(lib.size(), n);
  record_.d_nhat = Matrix::Zero(m, n);
}

const GradientRecord& LossGraph::value_and_grad(const Matrix& xi_values,
                                                const Eigen::Matrix<bool, -1, -1>& active,
                                                const Matrix& nhat) {
  tape_.set_value(xi_in_, masked(xi_values, active));
  tape_.set_value(nhat_in_, nhat);
  tape_.forward();
  record_.loss_value = tape_.value(loss_)(0, 0);
  if (!std::isfinite(record_.loss_value)) {
    auto site = divergence_site();
    throw NonFiniteLoss("joint loss is non-finite", -1, site ? site->first : -1,
                        site ? site->second : 0);
  }
  tape_.backward(loss_);
  record_.d_xi = tape_.gradient(xi_in_);
  for (long i = 0; i < record_.d_xi.rows(); ++i)
    for (long j = 0; j < record_.d_xi.cols(); ++j)
      if (!active(i, j)) record_.d_xi(i, j) = 0.0;
  record_.d_nhat = tape_.gradient(nhat_in_);
  return record_;
}

double LossGraph::last_es() const { return tape_.value(es_)(0, 0); }
double LossGraph::last_ed() const { return tape_.value(ed_)(0, 0); }

std::optional<std::pair<long, int>> LossGraph::divergence_site() const {
  for (const auto& step : chain_) {
    const Matrix& z = tape_.value(step.node);
    if (z.allFinite()) continue;
    for (long r = 0; r < z.rows(); ++r) {
      if (!z.row(r).allFinite()) return std::make_pair(r + q_, step.offset);
    }
  }
  return std::nullopt;
}

namespace {

void threshold_mask(CoefficientMatrix& xi, double lambda,
                    const Eigen::Matrix<bool, -1, -1>* protected_mask) {
  for (long i = 0; i < xi.values.rows(); ++i) {
    for (long j = 0; j < xi.values.cols(); ++j) {
      if (protected_mask && (*protected_mask)(i, j)) continue;
      if (xi.active(i, j) && std::abs(xi.values(i, j)) < lambda) xi.active(i, j) = false;
    }
  }
  xi.enforce_mask();
}

void check_empty_columns(const CoefficientMatrix& xi, const Matrix& xdot) {
  for (long j = 0; j < xi.active.cols(); ++j) {
    bool any = false;
    for (long i = 0; i < xi.active.rows(); ++i)
      if (xi.active(i, j)) any = true;
    if (!any && xdot.col(j).squaredNorm() / xdot.rows() > 1e-10)
      throw EmptyModel("all terms of state " + std::to_string(j + 1) +
                           " were thresholded away; lambda is too large",
                       static_cast<int>(j));
  }
}

}  // namespace

FitResult fit(const TimeSeries& Y, const CandidateLibrary& lib, const FitConfig& config,
              const CoefficientMatrix* initial_xi,
              const Eigen::Matrix<bool, -1, -1>* protected_mask) {
  config.validate();
  const Matrix& y = Y.states;
  const long m = y.rows();
  const long n = y.cols();
  if (m <= 2 * config.q) throw Error("fit needs m > 2q samples");
  if (lib.n_states != n) throw Error("fit: library dimension mismatch");

  FitResult result;
  result.nhat = config.soft_start ? Matrix(y - smooth(y, config.smoothing_gamma))
                                  : Matrix::Zero(m, n);

  Matrix xhat = y - result.nhat;
  Matrix xdot = fd_derivative(xhat, Y.dt);
  if (initial_xi) {
    result.xi = *initial_xi;
    // All entries stay optimizable until the first thresholding pass.
    result.xi.active.setConstant(true);
  } else {
    auto init = stlsq(evaluate_library(lib, xhat), xdot, config.lambda);
    result.xi.values = init.xi.values;
    result.xi.active = Eigen::Matrix<bool, -1, -1>::Constant(lib.size(), n, true);
    for (const auto& w : init.warnings) result.warnings.push_back("init " + w);
  }

  LossGraph graph(y, lib, config.q, config.c, Y.dt);

  // A hot STLSQ initialization can make the flow maps blow up immediately;
  // restart from zero coefficients in that case rather than aborting.
  try {
    graph.value_and_grad(result.xi.values, result.xi.active, result.nhat);
  } catch (const NonFiniteLoss&) {
    result.xi.values.setZero();
    result.warnings.push_back("initial coefficients diverged; restarted from zero");
  }

  result.loss_history.reserve(static_cast<size_t>(config.n_loop) * config.max_iter);
  for (int loop = 0; loop < config.n_loop; ++loop) {
    AdamState adam_xi = AdamState::like(result.xi.values);
    AdamState adam_nhat = AdamState::like(result.nhat);
    for (int it = 0; it < config.max_iter; ++it) {
      const GradientRecord* rec;
      try {
        rec = &graph.value_and_grad(result.xi.values, result.xi.active, result.nhat);
      } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss("optimization diverged at loop " + std::to_string(loop + 1) +
                                ", iteration " + std::to_string(it + 1) +
                                "; consider a smaller learning rate",
                            static_cast<long>(loop) * config.max_iter + it, e.window, e.offset);
      }
      result.loss_history.push_back(rec->loss_value);
      adam_xi.step(result.xi.values, rec->d_xi, config.lr);
      adam_nhat.step(result.nhat, rec->d_nhat, config.lr);
      result.xi.enforce_mask();
    }

    threshold_mask(result.xi, config.lambda, protected_mask);
    xhat = y - result.nhat;
    xdot = fd_derivative(xhat, Y.dt);
    check_empty_columns(result.xi, xdot);
    refit_active(result.xi, evaluate_library(lib, xhat), xdot, &result.warnings);
  }

  result.denoised = y - result.nhat;
  return result;
}

FitResult fit_discrepancy(const TimeSeries& Y, const SystemSpec& known_g,
                          const CandidateLibrary& lib, const FitConfig& config) {
  const CoefficientMatrix xi_g = true_coefficients(known_g, lib);
  FitResult res = fit(Y, lib, config, &xi_g, &xi_g.active);
  CoefficientMatrix disc;
  disc.values = res.xi.values - xi_g.values;
  disc.active = res.xi.active;
  // Entries that only carry the prior (identified value equals g's) are not
  // part of the discrepancy.
  for (long i = 0; i < disc.values.rows(); ++i)
    for (long j = 0; j < disc.values.cols(); ++j)
      if (disc.values(i, j) == 0.0) disc.active(i, j) = false;
  res.discrepancy = std::move(disc);
  return res;
}

FitResult fit_iterative_mean(const TimeSeries& Y, const CandidateLibrary& lib,
                             const FitConfig& config, int n_outer) {
  if (n_outer < 1) throw Error("fit_iterative_mean: n_outer must be >= 1");
  TimeSeries shifted = Y;
  Eigen::RowVectorXd removed_mean = Eigen::RowVectorXd::Zero(Y.dim());
  FitResult res;
  Eigen::Matrix<bool, -1, -1> prev_active;
  for (int outer = 0; outer < n_outer; ++outer) {
    if (outer > 0) prev_active = res.xi.active;
    res = fit(shifted, lib, config);
    if (outer > 0 && outer == n_outer - 1)
      res.mean_iteration_unconverged = (prev_active != res.xi.active);
    if (outer < n_outer - 1) {
      // The mean removed here is no longer part of the next fit's nhat, so it
      // must be added back when reporting against the original measurement.
      const Eigen::RowVectorXd mean = res.nhat.colwise().mean();
      removed_mean += mean;
      shifted.states.rowwise() -= mean;
    }
  }
  // Report the noise against the original measurement.
  res.nhat.rowwise() += removed_mean;
  res.denoised = Y.states - res.nhat;
  return res;
}

}  // namespace modsindy
