#include <doctest.h>

#include <cmath>
#include <random>

#include "modsindy/tape.hpp"

using namespace modsindy;

namespace {

double loss_at(Tape& tape, Tape::NodeId loss) {
  tape.forward();
  return tape.value(loss)(0, 0);
}

// Central finite difference of the loss w.r.t. one input entry.
double fd_entry(Tape& tape, Tape::NodeId input, Matrix base, long r, long c,
                Tape::NodeId loss, double h) {
  base(r, c) += h;
  tape.set_value(input, base);
  double up = loss_at(tape, loss);
  base(r, c) -= 2.0 * h;
  tape.set_value(input, base);
  double down = loss_at(tape, loss);
  base(r, c) += h;
  tape.set_value(input, base);
  return (up - down) / (2.0 * h);
}

void check_gradient(Tape& tape, Tape::NodeId input, const Matrix& base, Tape::NodeId loss,
                    double tol = 1e-6, double h = 1e-5) {
  tape.set_value(input, base);
  tape.forward();
  tape.backward(loss);
  Matrix analytic = tape.gradient(input);
  for (long r = 0; r < base.rows(); ++r)
    for (long c = 0; c < base.cols(); ++c) {
      double fd = fd_entry(tape, input, base, r, c, loss, h);
      double scale = std::max({std::abs(fd), std::abs(analytic(r, c)), 1.0});
      CHECK(std::abs(analytic(r, c) - fd) / scale < tol);
    }
  // Restore and re-derive: a second backward pass must reproduce the result.
  tape.set_value(input, base);
  tape.forward();
  tape.backward(loss);
  CHECK((tape.gradient(input) - analytic).cwiseAbs().maxCoeff() == 0.0);
}

}  // namespace

TEST_CASE("elementwise and matmul primitives differentiate correctly") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto rand_matrix = [&](long r, long c) {
    Matrix m(r, c);
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j) m(i, j) = dist(rng);
    return m;
  };

  Tape tape;
  auto a = tape.input(3, 4);
  auto b = tape.constant(rand_matrix(3, 4));
  auto w = tape.constant(rand_matrix(4, 2));
  auto expr = tape.matmul(tape.cmul(tape.add(a, b), tape.sub(a, b)), w);
  auto loss = tape.squared_norm(tape.axpy(expr, 0.7, tape.scale(expr, -0.3)));
  check_gradient(tape, a, rand_matrix(3, 4), loss);
}

TEST_CASE("cdiv, pow_int, sum, and rows differentiate correctly") {
  Matrix denom(2, 3);
  denom << 1.5, -2.0, 0.8, 1.1, -0.9, 2.5;
  Tape tape;
  auto a = tape.input(2, 3);
  auto d = tape.constant(denom);
  auto expr = tape.cdiv(tape.pow_int(a, 3), d);
  auto loss = tape.add(tape.sum(tape.rows(expr, 0, 1)), tape.squared_norm(expr));
  Matrix base(2, 3);
  base << 0.3, -1.2, 0.7, 1.4, 0.2, -0.5;
  check_gradient(tape, a, base, loss);
}

TEST_CASE("library_eval adjoint matches finite differences") {
  CandidateLibrary lib = build_polynomial_library(3, 3, true);
  Tape tape;
  auto x = tape.input(5, 3);
  auto loss = tape.squared_norm(tape.library_eval(x, lib));
  Matrix base(5, 3);
  base << 0.5, -0.3, 0.8, 1.1, 0.4, -0.6, -0.2, 0.9, 0.1, 0.7, -1.0, 0.3, 0.2, 0.6, -0.4;
  check_gradient(tape, x, base, loss, 1e-6, 1e-6);
}

TEST_CASE("fd_deriv adjoint matches finite differences and is linear") {
  Tape tape;
  auto x = tape.input(7, 2);
  auto loss = tape.squared_norm(tape.fd_deriv(x, 0.1));
  Matrix base(7, 2);
  base.setRandom();
  check_gradient(tape, x, base, loss);
}

TEST_CASE("rk4_library_step gradients w.r.t. state and coefficients") {
  CandidateLibrary lib = build_polynomial_library(2, 2, false);
  Matrix xi0(lib.size(), 2);
  xi0.setZero();
  xi0(lib.find({0, 1}), 0) = 1.0;   // dx = y
  xi0(lib.find({1, 0}), 1) = -1.0;  // dy = -x
  xi0(lib.find({2, 0}), 1) = 0.1;

  Matrix x0(4, 2);
  x0 << 1.0, 0.0, 0.5, -0.5, -0.3, 0.8, 0.2, 0.1;

  Tape tape;
  auto x = tape.input(4, 2);
  auto xi = tape.input(static_cast<long>(lib.size()), 2);
  auto step = tape.rk4_library_step(x, xi, lib, 0.05);
  auto loss = tape.squared_norm(step);
  tape.set_value(xi, xi0);
  check_gradient(tape, x, x0, loss);
  tape.set_value(x, x0);
  check_gradient(tape, xi, xi0, loss);
}

TEST_CASE("100 random composite graphs differentiate to FD accuracy") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_int_distribution<int> op_pick(0, 6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto rand_matrix = [&](long r, long c) {
    Matrix m(r, c);
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j) m(i, j) = gauss(rng);
    return m;
  };

  for (int trial = 0; trial < 100; ++trial) {
    long r = dim(rng), c = dim(rng);
    Tape tape;
    auto in = tape.input(r, c);
    Tape::NodeId cur = in;
    long cr = r, cc = c;
    int depth = 2 + static_cast<int>(rng() % 5);
    for (int d = 0; d < depth; ++d) {
      switch (op_pick(rng)) {
        case 0: cur = tape.add(cur, tape.constant(rand_matrix(cr, cc))); break;
        case 1: cur = tape.sub(tape.constant(rand_matrix(cr, cc)), cur); break;
        case 2: cur = tape.cmul(cur, tape.constant(rand_matrix(cr, cc))); break;
        case 3: cur = tape.scale(cur, 0.3 + 0.1 * static_cast<double>(d)); break;
        case 4: cur = tape.axpy(cur, -0.7, tape.constant(rand_matrix(cr, cc))); break;
        case 5: {
          long k = dim(rng);
          cur = tape.matmul(cur, tape.constant(rand_matrix(cc, k)));
          cc = k;
          break;
        }
        case 6: cur = tape.pow_int(cur, 2); break;
      }
    }
    auto loss = tape.squared_norm(cur);
    check_gradient(tape, in, rand_matrix(r, c), loss, 1e-5, 1e-5);
  }
}

TEST_CASE("gradient() is zero for nodes the loss does not reach") {
  Tape tape;
  auto a = tape.input(2, 2);
  auto b = tape.input(2, 2);
  auto loss = tape.squared_norm(a);
  tape.set_value(a, Matrix::Ones(2, 2));
  tape.set_value(b, Matrix::Ones(2, 2));
  tape.forward();
  tape.backward(loss);
  CHECK(tape.gradient(b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(tape.gradient(a).cwiseAbs().maxCoeff() == doctest::Approx(2.0));
}

TEST_CASE("first_non_finite locates divergent nodes") {
  Tape tape;
  auto a = tape.input(1, 1);
  auto expr = tape.pow_int(a, 3);
  tape.set_value(a, Matrix::Constant(1, 1, 1e200));
  tape.forward();
  CHECK(tape.first_non_finite() == expr);
  tape.set_value(a, Matrix::Constant(1, 1, 2.0));
  tape.forward();
  CHECK(tape.first_non_finite() == -1);
}

TEST_CASE("adam minimizes a quadratic") {
  Matrix target(3, 2);
  target << 1.0, -2.0, 0.5, 3.0, -1.5, 0.0;
  Matrix param = Matrix::Zero(3, 2);
  AdamState adam = AdamState::like(param);
  for (int iter = 0; iter < 4000; ++iter) {
    Matrix grad = 2.0 * (param - target);
    adam.step(param, grad, 0.01);
  }
  CHECK((param - target).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("adam bias correction makes the first step size ~lr") {
  Matrix param = Matrix::Zero(1, 1);
  Matrix grad = Matrix::Constant(1, 1, 1e-3);
  AdamState adam = AdamState::like(param);
  adam.step(param, grad, 0.1);
  CHECK(std::abs(param(0, 0) + 0.1) < 1e-3);  // step ~ -lr * sign(grad)
}
