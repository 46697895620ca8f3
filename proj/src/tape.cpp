#include "modsindy/tape.hpp"

#include <cmath>

namespace modsindy {

Tape::NodeId Tape::push(Node n) {
  n.adjoint = Matrix::Zero(n.value.rows(), n.value.cols());
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::input(long rows, long cols) {
  Node n;
  n.op = Op::Input;
  n.value = Matrix::Zero(rows, cols);
  return push(std::move(n));
}

Tape::NodeId Tape::constant(const Matrix& value) {
  Node n;
  n.op = Op::Constant;
  n.value = value;
  return push(std::move(n));
}

#define BINARY_SAME_SHAPE(NAME, OPK)                                       \
  Tape::NodeId Tape::NAME(NodeId a, NodeId b) {                            \
    Node n;                                                                \
    n.op = Op::OPK;                                                        \
    n.a = a;                                                               \
    n.b = b;                                                               \
    n.value = Matrix::Zero(nodes_[a].value.rows(), nodes_[a].value.cols());\
    return push(std::move(n));                                             \
  }

BINARY_SAME_SHAPE(add, Add)
BINARY_SAME_SHAPE(sub, Sub)
BINARY_SAME_SHAPE(cmul, CMul)
BINARY_SAME_SHAPE(cdiv, CDiv)
#undef BINARY_SAME_SHAPE

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.value = Matrix::Zero(nodes_[a].value.rows(), nodes_[b].value.cols());
  return push(std::move(n));
}

Tape::NodeId Tape::pow_int(NodeId a, int k) {
  Node n;
  n.op = Op::PowInt;
  n.a = a;
  n.ipow = k;
  n.value = Matrix::Zero(nodes_[a].value.rows(), nodes_[a].value.cols());
  return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double s) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.scalar = s;
  n.value = Matrix::Zero(nodes_[a].value.rows(), nodes_[a].value.cols());
  return push(std::move(n));
}

Tape::NodeId Tape::axpy(NodeId a, double s, NodeId b) {
  Node n;
  n.op = Op::Axpy;
  n.a = a;
  n.b = b;
  n.scalar = s;
  n.value = Matrix::Zero(nodes_[a].value.rows(), nodes_[a].value.cols());
  return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId a) {
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.value = Matrix::Zero(1, 1);
  return push(std::move(n));
}

Tape::NodeId Tape::squared_norm(NodeId a) {
  Node n;
  n.op = Op::SqNorm;
  n.a = a;
  n.value = Matrix::Zero(1, 1);
  return push(std::move(n));
}

Tape::NodeId Tape::rows(NodeId a, long offset, long count) {
  Node n;
  n.op = Op::Rows;
  n.a = a;
  n.offset = offset;
  n.value = Matrix::Zero(count, nodes_[a].value.cols());
  return push(std::move(n));
}

Tape::NodeId Tape::library_eval(NodeId a, const CandidateLibrary& lib) {
  Node n;
  n.op = Op::LibEval;
  n.a = a;
  n.lib = &lib;
  n.value = Matrix::Zero(nodes_[a].value.rows(), lib.size());
  return push(std::move(n));
}

Tape::NodeId Tape::fd_deriv(NodeId a, double dt) {
  Node n;
  n.op = Op::FdDeriv;
  n.a = a;
  n.scalar = dt;
  n.value = Matrix::Zero(nodes_[a].value.rows(), nodes_[a].value.cols());
  return push(std::move(n));
}

Tape::NodeId Tape::rk4_library_step(NodeId x, NodeId xi, const CandidateLibrary& lib, double h) {
  auto field = [&](NodeId s) { return matmul(library_eval(s, lib), xi); };
  const NodeId k1 = field(x);
  const NodeId k2 = field(axpy(x, 0.5 * h, k1));
  const NodeId k3 = field(axpy(x, 0.5 * h, k2));
  const NodeId k4 = field(axpy(x, h, k3));
  // x + h/6 * (k1 + 2 k2 + 2 k3 + k4)
  const NodeId s = add(axpy(k1, 2.0, k2), axpy(k4, 2.0, k3));
  return axpy(x, h / 6.0, s);
}

void Tape::set_value(NodeId id, const Matrix& v) {
  nodes_[id].value = v;
}

void Tape::eval(Node& n) {
  switch (n.op) {
    case Op::Input:
    case Op::Constant:
      break;
    case Op::Add:
      n.value.noalias() = nodes_[n.a].value + nodes_[n.b].value;
      break;
    case Op::Sub:
      n.value.noalias() = nodes_[n.a].value - nodes_[n.b].value;
      break;
    case Op::CMul:
      n.value.array() = nodes_[n.a].value.array() * nodes_[n.b].value.array();
      break;
    case Op::CDiv:
      n.value.array() = nodes_[n.a].value.array() / nodes_[n.b].value.array();
      break;
    case Op::MatMul:
      n.value.noalias() = nodes_[n.a].value * nodes_[n.b].value;
      break;
    case Op::PowInt: {
      const auto& a = nodes_[n.a].value.array();
      auto out = n.value.array();
      out = a;
      for (int rep = 1; rep < n.ipow; ++rep) out *= a;
      break;
    }
    case Op::Scale:
      n.value.noalias() = n.scalar * nodes_[n.a].value;
      break;
    case Op::Axpy:
      n.value.noalias() = nodes_[n.a].value + n.scalar * nodes_[n.b].value;
      break;
    case Op::Sum:
      n.value(0, 0) = nodes_[n.a].value.sum();
      break;
    case Op::SqNorm:
      n.value(0, 0) = nodes_[n.a].value.squaredNorm();
      break;
    case Op::Rows:
      n.value = nodes_[n.a].value.middleRows(n.offset, n.value.rows());
      break;
    case Op::LibEval: {
      const Matrix& x = nodes_[n.a].value;
      Eigen::ArrayXd col(x.rows());
      for (int i = 0; i < n.lib->size(); ++i) {
        col.setOnes();
        const auto& e = n.lib->terms[i].exponents;
        for (int k = 0; k < n.lib->n_states; ++k)
          for (int rep = 0; rep < e[k]; ++rep) col *= x.col(k).array();
        n.value.col(i) = col;
      }
      break;
    }
    case Op::FdDeriv: {
      const Matrix& x = nodes_[n.a].value;
      const long m = x.rows();
      const double inv2dt = 1.0 / (2.0 * n.scalar);
      n.value.middleRows(1, m - 2) = inv2dt * (x.bottomRows(m - 2) - x.topRows(m - 2));
      n.value.row(0) = inv2dt * (-3.0 * x.row(0) + 4.0 * x.row(1) - x.row(2));
      n.value.row(m - 1) = inv2dt * (3.0 * x.row(m - 1) - 4.0 * x.row(m - 2) + x.row(m - 3));
      break;
    }
  }
}

void Tape::forward() {
  for (auto& n : nodes_) eval(n);
}

Matrix& Tape::adj(NodeId id) {
  Node& n = nodes_[id];
  if (n.epoch != epoch_) {
    n.adjoint.setZero();
    n.epoch = epoch_;
  }
  return n.adjoint;
}

void Tape::accumulate(const Node& n) {
  const Matrix& g = n.adjoint;
  switch (n.op) {
    case Op::Input:
    case Op::Constant:
      break;
    case Op::Add:
      adj(n.a) += g;
      adj(n.b) += g;
      break;
    case Op::Sub:
      adj(n.a) += g;
      adj(n.b) -= g;
      break;
    case Op::CMul:
      adj(n.a).array() += g.array() * nodes_[n.b].value.array();
      adj(n.b).array() += g.array() * nodes_[n.a].value.array();
      break;
    case Op::CDiv: {
      const auto& b = nodes_[n.b].value.array();
      adj(n.a).array() += g.array() / b;
      adj(n.b).array() -= g.array() * n.value.array() / b;
      break;
    }
    case Op::MatMul:
      adj(n.a).noalias() += g * nodes_[n.b].value.transpose();
      adj(n.b).noalias() += nodes_[n.a].value.transpose() * g;
      break;
    case Op::PowInt: {
      const auto& a = nodes_[n.a].value.array();
      if (n.ipow == 1) {
        adj(n.a) += g;
      } else {
        Eigen::ArrayXXd d = a;
        for (int rep = 2; rep < n.ipow; ++rep) d *= a;
        adj(n.a).array() += static_cast<double>(n.ipow) * g.array() * d;
      }
      break;
    }
    case Op::Scale:
      adj(n.a) += n.scalar * g;
      break;
    case Op::Axpy:
      adj(n.a) += g;
      adj(n.b) += n.scalar * g;
      break;
    case Op::Sum:
      adj(n.a).array() += g(0, 0);
      break;
    case Op::SqNorm:
      adj(n.a) += (2.0 * g(0, 0)) * nodes_[n.a].value;
      break;
    case Op::Rows:
      adj(n.a).middleRows(n.offset, n.value.rows()) += g;
      break;
    case Op::LibEval: {
      const Matrix& x = nodes_[n.a].value;
      Matrix& xa = adj(n.a);
      Eigen::ArrayXd d(x.rows());
      for (int i = 0; i < n.lib->size(); ++i) {
        const auto& e = n.lib->terms[i].exponents;
        for (int k = 0; k < n.lib->n_states; ++k) {
          if (e[k] == 0) continue;
          // d(term_i)/d(x_k) = e[k] * x_k^(e[k]-1) * prod_{l != k} x_l^e[l]
          d.setConstant(static_cast<double>(e[k]));
          for (int rep = 1; rep < e[k]; ++rep) d *= x.col(k).array();
          for (int l = 0; l < n.lib->n_states; ++l) {
            if (l == k) continue;
            for (int rep = 0; rep < e[l]; ++rep) d *= x.col(l).array();
          }
          xa.col(k).array() += g.col(i).array() * d;
        }
      }
      break;
    }
    case Op::FdDeriv: {
      Matrix& xa = adj(n.a);
      const long m = g.rows();
      const double inv2dt = 1.0 / (2.0 * n.scalar);
      xa.bottomRows(m - 2) += inv2dt * g.middleRows(1, m - 2);
      xa.topRows(m - 2) -= inv2dt * g.middleRows(1, m - 2);
      xa.row(0) += -3.0 * inv2dt * g.row(0);
      xa.row(1) += 4.0 * inv2dt * g.row(0);
      xa.row(2) += -inv2dt * g.row(0);
      xa.row(m - 1) += 3.0 * inv2dt * g.row(m - 1);
      xa.row(m - 2) += -4.0 * inv2dt * g.row(m - 1);
      xa.row(m - 3) += inv2dt * g.row(m - 1);
      break;
    }
  }
}

void Tape::backward(NodeId loss) {
  ++epoch_;
  adj(loss).setConstant(1.0);
  for (NodeId id = loss; id >= 0; --id) {
    if (nodes_[id].epoch == epoch_) accumulate(nodes_[id]);
  }
}

Tape::NodeId Tape::first_non_finite() const {
  for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) {
    if (!nodes_[id].value.allFinite()) return id;
  }
  return -1;
}

AdamState AdamState::like(const Matrix& p) {
  AdamState s;
  s.m1 = Matrix::Zero(p.rows(), p.cols());
  s.m2 = Matrix::Zero(p.rows(), p.cols());
  return s;
}

void AdamState::step(Matrix& param, const Matrix& grad, double lr) {
  ++t;
  m1 = beta1 * m1 + (1.0 - beta1) * grad;
  m2.array() = beta2 * m2.array() + (1.0 - beta2) * grad.array().square();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  param.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
}

}  // namespace modsindy
