#include "modsindy/library.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace modsindy {

namespace {

// Enumerate all multi-indices of n_states variables with total degree d,
// lexicographically descending in the first variable.
void enumerate_degree(int n_states, int d, std::vector<int>& current,
                      std::vector<TermDescriptor>& out) {
  const int k = static_cast<int>(current.size());
  if (k == n_states - 1) {
    current.push_back(d);
    out.push_back({current});
    current.pop_back();
    return;
  }
  for (int e = d; e >= 0; --e) {
    current.push_back(e);
    enumerate_degree(n_states, d - e, current, out);
    current.pop_back();
  }
}

}  // namespace

CandidateLibrary build_polynomial_library(int n_states, int max_order, bool include_constant) {
  if (n_states < 1 || max_order < 1) throw Error("library needs n_states >= 1 and max_order >= 1");
  CandidateLibrary lib;
  lib.n_states = n_states;
  lib.max_order = max_order;
  lib.include_constant = include_constant;
  if (include_constant) lib.terms.push_back({std::vector<int>(n_states, 0)});
  std::vector<int> current;
  for (int d = 1; d <= max_order; ++d) enumerate_degree(n_states, d, current, lib.terms);
  return lib;
}

int CandidateLibrary::find(const std::vector<int>& exponents) const {
  for (int i = 0; i < size(); ++i) {
    if (terms[i].exponents == exponents) return i;
  }
  return -1;
}

std::string CandidateLibrary::term_name(int i) const {
  const auto& e = terms[i].exponents;
  std::string name;
  for (int k = 0; k < n_states; ++k) {
    if (e[k] == 0) continue;
    if (!name.empty()) name += " ";
    name += "x" + std::to_string(k + 1);
    if (e[k] > 1) name += "^" + std::to_string(e[k]);
  }
  return name.empty() ? "1" : name;
}

CoefficientMatrix CoefficientMatrix::zero(int p, int n) {
  CoefficientMatrix xi;
  xi.values = Matrix::Zero(p, n);
  xi.active = Eigen::Matrix<bool, -1, -1>::Constant(p, n, true);
  return xi;
}

void CoefficientMatrix::enforce_mask() {
  for (long i = 0; i < values.rows(); ++i)
    for (long j = 0; j < values.cols(); ++j)
      if (!active(i, j)) values(i, j) = 0.0;
}

long CoefficientMatrix::active_count() const {
  long c = 0;
  for (long i = 0; i < active.rows(); ++i)
    for (long j = 0; j < active.cols(); ++j)
      if (active(i, j)) ++c;
  return c;
}

Matrix evaluate_library(const CandidateLibrary& lib, const Matrix& X) {
  if (X.cols() != lib.n_states) throw Error("evaluate_library: state dimension mismatch");
  const long m = X.rows();
  Matrix theta(m, lib.size());
  Eigen::ArrayXd col(m);
  for (int i = 0; i < lib.size(); ++i) {
    col.setOnes();
    const auto& e = lib.terms[i].exponents;
    for (int k = 0; k < lib.n_states; ++k)
      for (int rep = 0; rep < e[k]; ++rep) col *= X.col(k).array();
    theta.col(i) = col;
  }
  if (!theta.allFinite()) throw NonFiniteLibrary("library evaluation overflowed");
  return theta;
}

Vector model_rhs(const CandidateLibrary& lib, const CoefficientMatrix& xi, const Vector& x) {
  if (xi.values.rows() != lib.size()) throw Error("model_rhs: coefficient row count mismatch");
  const int n = lib.n_states;
  Vector out = Vector::Zero(xi.values.cols());
  for (int i = 0; i < lib.size(); ++i) {
    double t = 1.0;
    const auto& e = lib.terms[i].exponents;
    for (int k = 0; k < n; ++k)
      for (int rep = 0; rep < e[k]; ++rep) t *= x[k];
    out += t * xi.values.row(i).transpose();
  }
  return out;
}

CoefficientMatrix true_coefficients(const SystemSpec& sys, const CandidateLibrary& lib) {
  CoefficientMatrix xi = CoefficientMatrix::zero(lib.size(), sys.dim);
  xi.active.setConstant(false);
  for (const auto& term : sys.terms) {
    const int idx = lib.find(term.exponents);
    if (idx < 0) throw Error("system term not representable in library: " + sys.name);
    xi.values(idx, term.state) += term.coeff;
    xi.active(idx, term.state) = true;
  }
  return xi;
}

std::string format_model(const CandidateLibrary& lib, const CoefficientMatrix& xi) {
  std::ostringstream out;
  char buf[40];
  for (long j = 0; j < xi.values.cols(); ++j) {
    out << "dx" << (j + 1) << "/dt =";
    bool first = true;
    for (int i = 0; i < lib.size(); ++i) {
      const double v = xi.values(i, j);
      if (v == 0.0) continue;
      std::snprintf(buf, sizeof(buf), "%.3f", std::abs(v));
      out << (first ? (v < 0 ? " -" : " ") : (v < 0 ? " - " : " + ")) << buf;
      if (lib.term_name(i) != "1") out << " " << lib.term_name(i);
      first = false;
    }
    if (first) out << " 0";
    out << "\n";
  }
  return out.str();
}

std::string library_to_json(const CandidateLibrary& lib) {
  nlohmann::json j;
  j["n_states"] = lib.n_states;
  j["max_order"] = lib.max_order;
  j["include_constant"] = lib.include_constant;
  auto& terms = j["terms"] = nlohmann::json::array();
  for (const auto& t : lib.terms) terms.push_back(t.exponents);
  return j.dump();
}

CandidateLibrary library_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  CandidateLibrary lib;
  lib.n_states = j.at("n_states").get<int>();
  lib.max_order = j.at("max_order").get<int>();
  lib.include_constant = j.at("include_constant").get<bool>();
  for (const auto& t : j.at("terms")) lib.terms.push_back({t.get<std::vector<int>>()});
  return lib;
}

}  // namespace modsindy
