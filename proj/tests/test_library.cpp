#include <doctest.h>

#include <cmath>

#include "modsindy/library.hpp"

using namespace modsindy;

TEST_CASE("library sizes follow the multiset-coefficient formula") {
  CHECK(build_polynomial_library(3, 2, false).size() == 9);
  CHECK(build_polynomial_library(3, 2, true).size() == 10);
  CHECK(build_polynomial_library(2, 3, false).size() == 9);
  CHECK(build_polynomial_library(3, 3, true).size() == 20);
  CHECK(build_polynomial_library(6, 3, true).size() == 84);
}

TEST_CASE("term order is graded lexicographic and stable") {
  CandidateLibrary lib = build_polynomial_library(3, 2, true);
  CHECK(lib.terms[0].exponents == std::vector<int>{0, 0, 0});
  CHECK(lib.terms[1].exponents == std::vector<int>{1, 0, 0});
  CHECK(lib.terms[2].exponents == std::vector<int>{0, 1, 0});
  CHECK(lib.terms[3].exponents == std::vector<int>{0, 0, 1});
  CHECK(lib.terms[4].exponents == std::vector<int>{2, 0, 0});
  CHECK(lib.terms[5].exponents == std::vector<int>{1, 1, 0});
  for (int i = 1; i < lib.size(); ++i)
    CHECK(lib.terms[i - 1].degree() <= lib.terms[i].degree());
}

TEST_CASE("find locates terms by exponent vector") {
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  int xy = lib.find({1, 1, 0});
  REQUIRE(xy >= 0);
  CHECK(lib.terms[xy].exponents == std::vector<int>{1, 1, 0});
  CHECK(lib.find({4, 0, 0}) == -1);
}

TEST_CASE("evaluate_library computes monomials row-wise") {
  CandidateLibrary lib = build_polynomial_library(2, 2, true);
  Matrix X(2, 2);
  X << 2.0, 3.0, -1.0, 0.5;
  Matrix theta = evaluate_library(lib, X);
  REQUIRE(theta.rows() == 2);
  REQUIRE(theta.cols() == lib.size());
  // row 0: 1, x=2, y=3, x^2=4, xy=6, y^2=9
  CHECK(theta(0, 0) == doctest::Approx(1.0));
  CHECK(theta(0, lib.find({1, 0})) == doctest::Approx(2.0));
  CHECK(theta(0, lib.find({0, 1})) == doctest::Approx(3.0));
  CHECK(theta(0, lib.find({2, 0})) == doctest::Approx(4.0));
  CHECK(theta(0, lib.find({1, 1})) == doctest::Approx(6.0));
  CHECK(theta(0, lib.find({0, 2})) == doctest::Approx(9.0));
  CHECK(theta(1, lib.find({1, 1})) == doctest::Approx(-0.5));
}

TEST_CASE("evaluate_library rejects non-finite states") {
  CandidateLibrary lib = build_polynomial_library(2, 2, false);
  Matrix X(1, 2);
  X << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(evaluate_library(lib, X), NonFiniteLibrary);
}

TEST_CASE("true_coefficients reproduces the catalog vector fields") {
  for (const SystemSpec& sys : catalog()) {
    CandidateLibrary lib = build_polynomial_library(sys.dim, sys.default_library_order,
                                                    sys.default_include_constant);
    CoefficientMatrix xi = true_coefficients(sys, lib);
    Vector x = sys.default_x0 * 0.37;
    x.array() += 0.21;  // avoid special points
    Vector f_true = sys.rhs(x);
    Vector f_lib = model_rhs(lib, xi, x);
    CHECK((f_true - f_lib).norm() < 1e-12 * (1.0 + f_true.norm()));
  }
}

TEST_CASE("lorenz true coefficients match the known parameters") {
  const SystemSpec& sys = catalog_system("lorenz");
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  CoefficientMatrix xi = true_coefficients(sys, lib);
  CHECK(xi.active_count() == 7);
  CHECK(xi.values(lib.find({1, 0, 0}), 0) == doctest::Approx(-10.0));
  CHECK(xi.values(lib.find({0, 1, 0}), 0) == doctest::Approx(10.0));
  CHECK(xi.values(lib.find({1, 0, 0}), 1) == doctest::Approx(28.0));
  CHECK(xi.values(lib.find({0, 1, 0}), 1) == doctest::Approx(-1.0));
  CHECK(xi.values(lib.find({1, 0, 1}), 1) == doctest::Approx(-1.0));
  CHECK(xi.values(lib.find({1, 1, 0}), 2) == doctest::Approx(1.0));
  CHECK(xi.values(lib.find({0, 0, 1}), 2) == doctest::Approx(-8.0 / 3.0));
}

TEST_CASE("enforce_mask zeroes inactive coefficients") {
  CoefficientMatrix xi = CoefficientMatrix::zero(3, 2);
  xi.values.setOnes();
  xi.active.setConstant(false);
  xi.active(1, 0) = true;
  xi.enforce_mask();
  CHECK(xi.values.sum() == doctest::Approx(1.0));
  CHECK(xi.active_count() == 1);
}

TEST_CASE("format_model renders signed terms") {
  const SystemSpec& sys = catalog_system("lorenz");
  CandidateLibrary lib = build_polynomial_library(3, 2, false);
  CoefficientMatrix xi = true_coefficients(sys, lib);
  std::string text = format_model(lib, xi);
  CHECK(text.find("dx1/dt") != std::string::npos);
  CHECK(text.find("x1") != std::string::npos);
}

TEST_CASE("library json round trip") {
  CandidateLibrary lib = build_polynomial_library(3, 2, true);
  CandidateLibrary back = library_from_json(library_to_json(lib));
  CHECK(back.n_states == lib.n_states);
  CHECK(back.max_order == lib.max_order);
  CHECK(back.include_constant == lib.include_constant);
  REQUIRE(back.size() == lib.size());
  for (int i = 0; i < lib.size(); ++i) CHECK(back.terms[i].exponents == lib.terms[i].exponents);
}
