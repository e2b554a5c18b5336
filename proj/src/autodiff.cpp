#include "qcfd/autodiff.hpp"

#include <cmath>

#include "qcfd/errors.hpp"

namespace qcfd::ad {

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_same_shape(int a, int b, const char* who) const {
  if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
      nodes_[a].value.cols() != nodes_[b].value.cols()) {
    throw ParamError(std::string(who) + ": shape mismatch");
  }
}

int Tape::leaf(MatX value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  check_same_shape(a, b, "add");
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value + nodes_[b].value;
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  check_same_shape(a, b, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value - nodes_[b].value;
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  if (nodes_[a].value.cols() != nodes_[b].value.rows()) {
    throw ParamError("matmul: inner dimension mismatch");
  }
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value * nodes_[b].value;
  return push(std::move(n));
}

int Tape::transpose(int a) {
  Node n;
  n.op = Op::Transpose;
  n.a = a;
  n.value = nodes_[a].value.transpose();
  return push(std::move(n));
}

int Tape::cwise_mul(int a, int b) {
  check_same_shape(a, b, "cwise_mul");
  Node n;
  n.op = Op::CwiseMul;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value.cwiseProduct(nodes_[b].value);
  return push(std::move(n));
}

int Tape::cwise_div(int a, int b) {
  check_same_shape(a, b, "cwise_div");
  Node n;
  n.op = Op::CwiseDiv;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value.cwiseQuotient(nodes_[b].value);
  return push(std::move(n));
}

int Tape::tanh(int a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a;
  n.value = nodes_[a].value.array().tanh();
  return push(std::move(n));
}

int Tape::sqrt(int a) {
  Node n;
  n.op = Op::Sqrt;
  n.a = a;
  n.value = nodes_[a].value.array().sqrt();
  return push(std::move(n));
}

int Tape::exp(int a) {
  Node n;
  n.op = Op::Exp;
  n.a = a;
  n.value = nodes_[a].value.array().exp();
  return push(std::move(n));
}

int Tape::log(int a) {
  Node n;
  n.op = Op::Log;
  n.a = a;
  n.value = nodes_[a].value.array().log();
  return push(std::move(n));
}

int Tape::sum(int a) {
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.value = MatX::Constant(1, 1, nodes_[a].value.sum());
  return push(std::move(n));
}

int Tape::mul_const(int a, double c) {
  Node n;
  n.op = Op::MulConst;
  n.a = a;
  n.c = c;
  n.value = nodes_[a].value * c;
  return push(std::move(n));
}

int Tape::smul(int scalar, int a) {
  if (nodes_[scalar].value.size() != 1) throw ParamError("smul: scalar node must be 1x1");
  Node n;
  n.op = Op::SMul;
  n.a = scalar;
  n.b = a;
  n.value = nodes_[scalar].value(0, 0) * nodes_[a].value;
  return push(std::move(n));
}

int Tape::segment_rows(int a, int row0, int rows) {
  if (row0 < 0 || rows < 1 || row0 + rows > nodes_[a].value.rows()) {
    throw ParamError("segment_rows: out of range");
  }
  Node n;
  n.op = Op::SegmentRows;
  n.a = a;
  n.row0 = row0;
  n.rows = rows;
  n.value = nodes_[a].value.middleRows(row0, rows);
  return push(std::move(n));
}

int Tape::vconcat(const std::vector<int>& parts) {
  if (parts.empty()) throw ParamError("vconcat: no parts");
  long cols = nodes_[parts[0]].value.cols();
  long rows = 0;
  for (int p : parts) {
    if (nodes_[p].value.cols() != cols) throw ParamError("vconcat: column mismatch");
    rows += nodes_[p].value.rows();
  }
  Node n;
  n.op = Op::VConcat;
  n.list = parts;
  n.value.resize(rows, cols);
  long r = 0;
  for (int p : parts) {
    n.value.middleRows(r, nodes_[p].value.rows()) = nodes_[p].value;
    r += nodes_[p].value.rows();
  }
  return push(std::move(n));
}

int Tape::abs(int a) {
  if (nodes_[a].value.size() != 1) throw ParamError("abs: expects a 1x1 node");
  Node n;
  n.op = Op::Abs;
  n.a = a;
  n.value = MatX::Constant(1, 1, std::abs(nodes_[a].value(0, 0)));
  return push(std::move(n));
}

int Tape::mean_all(int a) {
  return mul_const(sum(a), 1.0 / static_cast<double>(nodes_[a].value.size()));
}

void Tape::backward(int loss) {
  if (nodes_[loss].value.size() != 1) {
    throw ParamError("backward: loss must be scalar");
  }
  for (auto& n : nodes_) n.adj = MatX::Zero(n.value.rows(), n.value.cols());
  nodes_[loss].adj(0, 0) = 1.0;

  for (int id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    const MatX& g = n.adj;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        nodes_[n.a].adj += g;
        nodes_[n.b].adj += g;
        break;
      case Op::Sub:
        nodes_[n.a].adj += g;
        nodes_[n.b].adj -= g;
        break;
      case Op::MatMul:
        nodes_[n.a].adj.noalias() += g * nodes_[n.b].value.transpose();
        nodes_[n.b].adj.noalias() += nodes_[n.a].value.transpose() * g;
        break;
      case Op::Transpose:
        nodes_[n.a].adj += g.transpose();
        break;
      case Op::CwiseMul:
        nodes_[n.a].adj += g.cwiseProduct(nodes_[n.b].value);
        nodes_[n.b].adj += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::CwiseDiv:
        nodes_[n.a].adj += g.cwiseQuotient(nodes_[n.b].value);
        nodes_[n.b].adj -= g.cwiseProduct(n.value).cwiseQuotient(nodes_[n.b].value);
        break;
      case Op::Tanh:
        nodes_[n.a].adj.array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::Sqrt:
        nodes_[n.a].adj.array() += g.array() * 0.5 / n.value.array();
        break;
      case Op::Exp:
        nodes_[n.a].adj += g.cwiseProduct(n.value);
        break;
      case Op::Log:
        nodes_[n.a].adj += g.cwiseQuotient(nodes_[n.a].value);
        break;
      case Op::Sum:
        nodes_[n.a].adj.array() += g(0, 0);
        break;
      case Op::MulConst:
        nodes_[n.a].adj += n.c * g;
        break;
      case Op::SMul:
        nodes_[n.a].adj(0, 0) += g.cwiseProduct(nodes_[n.b].value).sum();
        nodes_[n.b].adj += nodes_[n.a].value(0, 0) * g;
        break;
      case Op::SegmentRows:
        nodes_[n.a].adj.middleRows(n.row0, n.rows) += g;
        break;
      case Op::VConcat: {
        long r = 0;
        for (int p : n.list) {
          nodes_[p].adj += g.middleRows(r, nodes_[p].value.rows());
          r += nodes_[p].value.rows();
        }
        break;
      }
      case Op::Abs: {
        const double x = nodes_[n.a].value(0, 0);
        const double s = (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        nodes_[n.a].adj(0, 0) += s * g(0, 0);
        break;
      }
    }
  }
}

}  // namespace qcfd::ad
