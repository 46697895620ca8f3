#pragma once

#include <vector>

#include "modsindy/library.hpp"
#include "modsindy/systems.hpp"

namespace modsindy {

// Reverse-mode gradient engine over matrix-valued expressions.
//
// A Tape records a fixed computation graph once; forward() re-evaluates it
// in place after input leaves are updated, and backward() accumulates exact
// adjoints in reverse order. Node storage is preallocated, so repeated
// forward/backward passes (one per optimizer iteration) do not allocate.
class Tape {
 public:
  using NodeId = int;

  NodeId input(long rows, long cols);
  NodeId constant(const Matrix& value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId cmul(NodeId a, NodeId b);  // elementwise
  NodeId cdiv(NodeId a, NodeId b);  // elementwise
  NodeId matmul(NodeId a, NodeId b);
  NodeId pow_int(NodeId a, int k);  // elementwise integer power, k >= 1
  NodeId scale(NodeId a, double s);
  NodeId axpy(NodeId a, double s, NodeId b);  // a + s*b
  NodeId sum(NodeId a);                       // 1x1
  NodeId squared_norm(NodeId a);              // 1x1, Frobenius
  NodeId rows(NodeId a, long offset, long count);
  // Fused candidate-library evaluation Theta(a); lib must outlive the tape.
  NodeId library_eval(NodeId a, const CandidateLibrary& lib);
  // Second-order finite-difference derivative along columns (central in the
  // interior, one-sided at both ends), divided by dt.
  NodeId fd_deriv(NodeId a, double dt);

  // One RK4 step of the field x -> Theta(x) * xi applied row-wise, step h.
  NodeId rk4_library_step(NodeId x, NodeId xi, const CandidateLibrary& lib, double h);

  void set_value(NodeId id, const Matrix& v);
  const Matrix& value(NodeId id) const { return nodes_[id].value; }
  // Valid for nodes reachable from the loss of the last backward() call.
  const Matrix& adjoint(NodeId id) const { return nodes_[id].adjoint; }
  // Like adjoint(), but returns zeros for nodes the loss does not depend on.
  const Matrix& gradient(NodeId id) { return adj(id); }

  // Re-evaluate every node in recording order.
  void forward();
  // Accumulate d(loss)/d(node) for every node; loss must be 1x1.
  void backward(NodeId loss);

  // Index of the first node with a non-finite value, -1 if all finite.
  NodeId first_non_finite() const;
  long size() const { return static_cast<long>(nodes_.size()); }

 private:
  enum class Op {
    Input, Constant, Add, Sub, CMul, CDiv, MatMul, PowInt, Scale, Axpy,
    Sum, SqNorm, Rows, LibEval, FdDeriv
  };

  struct Node {
    Op op;
    NodeId a = -1, b = -1;
    double scalar = 0.0;
    int ipow = 0;
    long offset = 0;
    const CandidateLibrary* lib = nullptr;
    Matrix value;
    Matrix adjoint;
    long epoch = 0;
  };

  NodeId push(Node n);
  void eval(Node& n);
  void accumulate(const Node& n);
  // Adjoint storage of id, zero-initialized on first touch per backward pass.
  Matrix& adj(NodeId id);

  std::vector<Node> nodes_;
  long epoch_ = 0;
};

// Adam optimizer state for one parameter matrix.
struct AdamState {
  Matrix m1, m2;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState like(const Matrix& p);
  // In-place Adam update of param against grad.
  void step(Matrix& param, const Matrix& grad, double lr);
};

// Scalar loss value with its gradients w.r.t. the two parameter blocks of the
// joint denoising problem.
struct GradientRecord {
  double loss_value = 0.0;
  Matrix d_xi;    // p x n
  Matrix d_nhat;  // m x n
};

}  // namespace modsindy
