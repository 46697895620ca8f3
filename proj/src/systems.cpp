#include "modsindy/systems.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace modsindy {

Vector SystemSpec::rhs(const Vector& x) const {
  Vector out = Vector::Zero(dim);
  for (const auto& term : terms) {
    double v = term.coeff;
    for (int k = 0; k < dim; ++k) {
      for (int e = 0; e < term.exponents[k]; ++e) v *= x[k];
    }
    out[term.state] += v;
  }
  return out;
}

Vector rk4_step(const std::function<Vector(const Vector&)>& rhs, const Vector& x, double dt) {
  const Vector k1 = rhs(x);
  const Vector k2 = rhs(x + 0.5 * dt * k1);
  const Vector k3 = rhs(x + 0.5 * dt * k2);
  const Vector k4 = rhs(x + dt * k3);
  Vector out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.allFinite()) throw NonFiniteState("rk4_step produced a non-finite state", 0);
  return out;
}

TimeSeries simulate_field(const std::function<Vector(const Vector&)>& rhs, const Vector& x0,
                          double dt, double T) {
  const long m = std::lround(T / dt) + 1;
  TimeSeries ts;
  ts.t0 = 0.0;
  ts.dt = dt;
  ts.states.resize(m, x0.size());
  ts.states.row(0) = x0;
  Vector x = x0;
  for (long j = 1; j < m; ++j) {
    try {
      x = rk4_step(rhs, x, dt);
    } catch (const NonFiniteState&) {
      throw NonFiniteState("trajectory blew up", j);
    }
    ts.states.row(j) = x;
  }
  return ts;
}

TimeSeries simulate(const SystemSpec& sys, const Vector& x0, double dt, double T) {
  return simulate_field([&sys](const Vector& x) { return sys.rhs(x); }, x0, dt, T);
}

namespace {

std::vector<int> mono(std::initializer_list<int> e) { return {e}; }

SystemSpec make_lorenz() {
  SystemSpec s;
  s.name = "lorenz";
  s.dim = 3;
  const double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
  s.params = {{"sigma", sigma}, {"rho", rho}, {"beta", beta}};
  s.terms = {
      {0, mono({1, 0, 0}), -sigma}, {0, mono({0, 1, 0}), sigma},
      {1, mono({1, 0, 0}), rho},    {1, mono({1, 0, 1}), -1.0}, {1, mono({0, 1, 0}), -1.0},
      {2, mono({1, 1, 0}), 1.0},    {2, mono({0, 0, 1}), -beta},
  };
  s.default_x0 = Vector{{5.0, 5.0, 25.0}};
  s.default_dt = 0.01;
  s.default_T = 25.0;
  s.default_library_order = 2;
  s.default_include_constant = false;
  return s;
}

SystemSpec make_vanderpol() {
  SystemSpec s;
  s.name = "vanderpol";
  s.dim = 2;
  const double mu = 0.5;
  s.params = {{"mu", mu}};
  s.terms = {
      {0, mono({0, 1}), 1.0},
      {1, mono({0, 1}), mu},
      {1, mono({2, 1}), -mu},
      {1, mono({1, 0}), -1.0},
  };
  s.default_x0 = Vector{{-2.0, 1.0}};
  s.default_dt = 0.01;
  s.default_T = 10.0;
  s.default_library_order = 3;
  s.default_include_constant = false;
  return s;
}

SystemSpec make_rossler() {
  SystemSpec s;
  s.name = "rossler";
  s.dim = 3;
  const double a = 0.2, b = 0.2, c = 5.7;
  s.params = {{"a", a}, {"b", b}, {"c", c}};
  s.terms = {
      {0, mono({0, 1, 0}), -1.0}, {0, mono({0, 0, 1}), -1.0},
      {1, mono({1, 0, 0}), 1.0},  {1, mono({0, 1, 0}), a},
      {2, mono({0, 0, 0}), b},    {2, mono({1, 0, 1}), 1.0}, {2, mono({0, 0, 1}), -c},
  };
  s.default_x0 = Vector{{3.0, 5.0, 0.0}};
  s.default_dt = 0.01;
  s.default_T = 25.0;
  s.default_library_order = 2;
  s.default_include_constant = true;
  return s;
}

SystemSpec make_lorenz96() {
  SystemSpec s;
  s.name = "lorenz96";
  const int n = 6;  // 4 driven states plus 2 ghosts resolved by periodic wrapping
  s.dim = n;
  const double F = 8.0;
  s.params = {{"F", F}, {"N", static_cast<double>(n)}};
  auto wrap = [n](int i) { return ((i % n) + n) % n; };
  for (int i = 0; i < n; ++i) {
    std::vector<int> quad1(n, 0), quad2(n, 0), lin(n, 0), cst(n, 0);
    quad1[wrap(i + 1)] += 1;
    quad1[wrap(i - 1)] += 1;
    quad2[wrap(i - 2)] += 1;
    quad2[wrap(i - 1)] += 1;
    lin[i] = 1;
    s.terms.push_back({i, quad1, 1.0});
    s.terms.push_back({i, quad2, -1.0});
    s.terms.push_back({i, lin, -1.0});
    s.terms.push_back({i, cst, F});
  }
  s.default_x0 = Vector{{1.0, 8.0, 8.0, 8.0, 8.0, 8.0}};
  s.default_dt = 0.01;
  s.default_T = 25.0;
  s.default_library_order = 3;
  s.default_include_constant = true;
  return s;
}

SystemSpec make_duffing() {
  SystemSpec s;
  s.name = "duffing";
  s.dim = 2;
  const double p1 = 0.2, p2 = 0.1, p3 = 1.0;
  s.params = {{"p1", p1}, {"p2", p2}, {"p3", p3}};
  s.terms = {
      {0, mono({0, 1}), 1.0},
      {1, mono({0, 1}), -p1},
      {1, mono({1, 0}), -p2},
      {1, mono({3, 0}), -p3},
  };
  s.default_x0 = Vector{{-2.0, -2.0}};
  s.default_dt = 0.01;
  s.default_T = 25.0;
  s.default_library_order = 3;
  s.default_include_constant = false;
  return s;
}

SystemSpec make_cubic() {
  SystemSpec s;
  s.name = "cubic";
  s.dim = 2;
  const double p1 = -0.1, p2 = 2.0, p3 = -2.0, p4 = 0.1;
  s.params = {{"p1", p1}, {"p2", p2}, {"p3", p3}, {"p4", p4}};
  s.terms = {
      {0, mono({3, 0}), p1},
      {0, mono({0, 3}), p2},
      {1, mono({3, 0}), p3},
      {1, mono({0, 3}), p4},
  };
  s.default_x0 = Vector{{0.0, 2.0}};
  s.default_dt = 0.01;
  s.default_T = 25.0;
  s.default_library_order = 3;
  s.default_include_constant = false;
  return s;
}

SystemSpec make_lotka() {
  SystemSpec s;
  s.name = "lotka";
  s.dim = 2;
  const double p1 = 1.0, p2 = 0.5;
  s.params = {{"p1", p1}, {"p2", p2}};
  s.terms = {
      {0, mono({1, 0}), p1},
      {0, mono({1, 1}), -p2},
      {1, mono({1, 1}), p2},
      {1, mono({0, 1}), -2.0 * p1},
  };
  s.default_x0 = Vector{{1.0, 2.0}};
  s.default_dt = 0.01;
  s.default_T = 10.0;
  s.default_library_order = 3;
  s.default_include_constant = false;
  return s;
}

SystemSpec make_modified_lorenz() {
  SystemSpec s;
  s.name = "modified_lorenz";
  s.dim = 3;
  s.terms = {
      {0, mono({1, 0, 0}), -10.0}, {0, mono({0, 1, 0}), 10.0}, {0, mono({1, 1, 0}), 1.0},
      {1, mono({1, 0, 0}), 28.0},  {1, mono({1, 0, 1}), -1.0}, {1, mono({0, 1, 0}), -1.0},
      {1, mono({0, 0, 1}), 3.0},
      {2, mono({1, 1, 0}), 1.0},   {2, mono({0, 0, 1}), -8.0 / 3.0},
  };
  s.default_x0 = Vector{{5.0, 5.0, 25.0}};
  s.default_dt = 0.005;
  s.default_T = 30.0;
  s.default_library_order = 2;
  s.default_include_constant = false;
  return s;
}

// The imperfect prior model used in discrepancy learning: a Lorenz-like field
// with perturbed parameters and none of the modified terms.
SystemSpec make_lorenz_prior() {
  SystemSpec s;
  s.name = "lorenz_prior";
  s.dim = 3;
  s.terms = {
      {0, mono({1, 0, 0}), -9.5}, {0, mono({0, 1, 0}), 10.5},
      {1, mono({1, 0, 0}), 27.6}, {1, mono({1, 0, 1}), -1.1}, {1, mono({0, 1, 0}), -0.9},
      {2, mono({1, 1, 0}), 1.05}, {2, mono({0, 0, 1}), -2.6},
  };
  s.default_x0 = Vector{{5.0, 5.0, 25.0}};
  s.default_dt = 0.005;
  s.default_T = 30.0;
  s.default_library_order = 2;
  s.default_include_constant = false;
  return s;
}

}  // namespace

std::vector<SystemSpec> catalog() {
  return {make_lorenz(),  make_vanderpol(), make_rossler(),         make_lorenz96(),
          make_duffing(), make_cubic(),     make_lotka(),           make_modified_lorenz(),
          make_lorenz_prior()};
}

const SystemSpec& catalog_system(const std::string& name) {
  static const std::vector<SystemSpec> systems = catalog();
  for (const auto& s : systems) {
    if (s.name == name) return s;
  }
  throw ConfigError("unknown system: " + name, "system");
}

void write_timeseries_csv(const TimeSeries& ts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "t";
  for (int k = 1; k <= ts.dim(); ++k) out << ",x" << k;
  out << "\n";
  char buf[40];
  for (long j = 0; j < ts.samples(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g", ts.time_at(j));
    out << buf;
    for (int k = 0; k < ts.dim(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", ts.states(j, k));
      out << "," << buf;
    }
    out << "\n";
  }
}

TimeSeries read_timeseries_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty csv: " + path);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw Error("csv needs at least two samples: " + path);
  const int n = static_cast<int>(rows[0].size()) - 1;
  TimeSeries ts;
  ts.t0 = rows[0][0];
  ts.dt = rows[1][0] - rows[0][0];
  ts.states.resize(static_cast<long>(rows.size()), n);
  for (size_t j = 0; j < rows.size(); ++j)
    for (int k = 0; k < n; ++k) ts.states(j, k) = rows[j][k + 1];
  return ts;
}

}  // namespace modsindy
