#pragma once

#include <string>
#include <vector>

#include "modsindy/systems.hpp"

namespace modsindy {

// Multi-index of one monomial candidate: term = prod_k x_k^exponents[k].
struct TermDescriptor {
  std::vector<int> exponents;

  int degree() const {
    int d = 0;
    for (int e : exponents) d += e;
    return d;
  }
  bool operator==(const TermDescriptor&) const = default;
};

// Ordered polynomial candidate library Theta(.). Term order is graded
// lexicographic and therefore stable across runs.
struct CandidateLibrary {
  int n_states = 0;
  int max_order = 0;
  bool include_constant = false;
  std::vector<TermDescriptor> terms;

  int size() const { return static_cast<int>(terms.size()); }
  // Index of the term with the given exponents, -1 if absent.
  int find(const std::vector<int>& exponents) const;
  std::string term_name(int i) const;
};

// Sparse coefficients Xi with the thresholding freeze state. Inactive entries
// are exactly zero.
struct CoefficientMatrix {
  Matrix values;                          // p x n
  Eigen::Matrix<bool, -1, -1> active;     // p x n

  static CoefficientMatrix zero(int p, int n);
  void enforce_mask();
  long active_count() const;
};

CandidateLibrary build_polynomial_library(int n_states, int max_order, bool include_constant);

// Theta(X): entry (j,i) = prod_k X(j,k)^alpha_i[k].
Matrix evaluate_library(const CandidateLibrary& lib, const Matrix& X);

// Theta(x) * Xi as a vector field usable with rk4_step / simulate_field.
Vector model_rhs(const CandidateLibrary& lib, const CoefficientMatrix& xi, const Vector& x);

// Exact coefficients of a polynomial system expressed in lib.
// Throws if a system term is not representable.
CoefficientMatrix true_coefficients(const SystemSpec& sys, const CandidateLibrary& lib);

// Human-readable equations, e.g. "dx1/dt = -10.000 x1 + 10.000 x2".
std::string format_model(const CandidateLibrary& lib, const CoefficientMatrix& xi);

std::string library_to_json(const CandidateLibrary& lib);
CandidateLibrary library_from_json(const std::string& json_text);

}  // namespace modsindy
