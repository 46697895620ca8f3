#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modsindy/errors.hpp"

namespace modsindy {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Uniformly sampled multivariate trajectory. Row j is the state at t0 + j*dt.
struct TimeSeries {
  double t0 = 0.0;
  double dt = 0.0;
  Matrix states;  // m x n

  long samples() const { return states.rows(); }
  int dim() const { return static_cast<int>(states.cols()); }
  double time_at(long j) const { return t0 + static_cast<double>(j) * dt; }
};

// One polynomial term of a vector field: coeff * prod_k x_k^exponents[k]
// contributing to state component `state`.
struct PolyTerm {
  int state;
  std::vector<int> exponents;
  double coeff;
};

// A reference dynamical system. All catalog systems are polynomial, so the
// right-hand side is stored as a term list; rhs() evaluates it. The default_*
// fields record the simulation protocol each system is normally run with.
struct SystemSpec {
  std::string name;
  int dim = 0;
  std::map<std::string, double> params;
  std::vector<PolyTerm> terms;

  Vector default_x0;
  double default_dt = 0.01;
  double default_T = 25.0;
  int default_library_order = 2;
  bool default_include_constant = false;

  Vector rhs(const Vector& x) const;
};

// Classical fixed-step RK4. Negative dt integrates backward.
// Throws NonFiniteState if any stage evaluates to a non-finite value.
Vector rk4_step(const std::function<Vector(const Vector&)>& rhs, const Vector& x, double dt);

// Integrate sys from x0 with uniform step dt over horizon T.
// Produces round(T/dt)+1 samples; row 0 equals x0.
TimeSeries simulate(const SystemSpec& sys, const Vector& x0, double dt, double T);

// Same, for an arbitrary vector field.
TimeSeries simulate_field(const std::function<Vector(const Vector&)>& rhs, const Vector& x0,
                          double dt, double T);

// All reference systems with the parameter values used throughout.
std::vector<SystemSpec> catalog();
const SystemSpec& catalog_system(const std::string& name);

// CSV serialization: header `t,x1,...,xn`, 17 significant digits.
void write_timeseries_csv(const TimeSeries& ts, const std::string& path);
TimeSeries read_timeseries_csv(const std::string& path);

}  // namespace modsindy
