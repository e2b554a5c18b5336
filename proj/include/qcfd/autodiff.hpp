#pragma once

#include <vector>

#include "qcfd/types.hpp"

namespace qcfd::ad {

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
// order (value computed eagerly), so a single reverse sweep from any scalar
// node yields exact gradients. Gradient-of-gradient quantities (the WGAN-GP
// input-gradient norm) are handled by expressing the inner backward pass
// with tape ops.
class Tape {
 public:
  int leaf(MatX value);
  int add(int a, int b);
  int sub(int a, int b);
  int matmul(int a, int b);
  int transpose(int a);
  int cwise_mul(int a, int b);
  int cwise_div(int a, int b);
  int tanh(int a);
  int sqrt(int a);   // entries must stay positive along the used path
  int exp(int a);
  int log(int a);
  int sum(int a);                     // 1x1
  int mul_const(int a, double c);
  int smul(int scalar, int a);        // (1x1 node) * matrix
  int segment_rows(int a, int row0, int rows);
  int vconcat(const std::vector<int>& parts);
  int abs(int a);                     // 1x1; subgradient 0 at the kink

  // Convenience compounds.
  int constant(double c) { return leaf(MatX::Constant(1, 1, c)); }
  int mean_all(int a);
  int dot(int a, int b) { return sum(cwise_mul(a, b)); }
  int ones(int rows, int cols) { return leaf(MatX::Ones(rows, cols)); }

  const MatX& value(int id) const { return nodes_[id].value; }
  double scalar_value(int id) const { return nodes_[id].value(0, 0); }

  // Seeds d(loss)/d(loss) = 1 and sweeps backward. Adjoints of every node
  // at or below `loss` become valid.
  void backward(int loss);
  const MatX& grad(int id) const { return nodes_[id].adj; }

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf, Add, Sub, MatMul, Transpose, CwiseMul, CwiseDiv, Tanh, Sqrt, Exp,
    Log, Sum, MulConst, SMul, SegmentRows, VConcat, Abs
  };
  struct Node {
    Op op;
    int a = -1, b = -1;
    std::vector<int> list;
    double c = 0.0;
    int row0 = 0, rows = 0;
    MatX value;
    MatX adj;
  };

  int push(Node n);
  void check_same_shape(int a, int b, const char* who) const;

  std::vector<Node> nodes_;
};

}  // namespace qcfd::ad
