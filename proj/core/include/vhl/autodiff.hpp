#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace vhl::ad {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Eager reverse-mode tape over Eigen matrices. Values are computed when ops
// are recorded; backward() runs the recorded closures in reverse order.
// Column vectors are matrices with one column.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Var leaf(Mat value, bool requires_grad);
  Var constant(Mat value) { return leaf(std::move(value), false); }
  Var scalar(double v, bool requires_grad = false) {
    Mat m(1, 1);
    m(0, 0) = v;
    return leaf(std::move(m), requires_grad);
  }

  const Mat& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  const Mat& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }
  bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].requires_grad; }

  // W (m x n) * x (n x 1) -> (m x 1)
  Var matvec(Var w, Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var row_as_col(Var m, int row);  // row of a matrix as a column vector
  Var concat(const std::vector<Var>& xs);  // stack column vectors
  Var dot(Var a, Var b);                   // (1 x 1)
  Var stack_scalars(const std::vector<Var>& xs);
  Var add_all(const std::vector<Var>& xs);
  Var mean_of(const std::vector<Var>& xs);
  Var softmax(Var logits);
  // -log softmax(logits)[target]
  Var cross_entropy(Var logits, int target);
  // Uniform patch means: pixels is (h*w*3) x 1 row-major RGB; output is
  // (grid*grid*3) x 1 ordered (py, px, channel).
  Var patch_means(Var pixels, int width, int height, int grid);

  // Seeds d(out)/d(out) = 1 (out must be 1x1) and sweeps the tape backwards.
  void backward(Var out);

  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

 private:
  // Backward closure: receives the node's accumulated output gradient.
  using BackFn = std::function<void(Tape&, const Mat&)>;

  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    BackFn back;  // empty for leaves
  };

  Mat& grad_ref(Var v) { return nodes_[static_cast<size_t>(v.id)].grad; }
  void accumulate(Var v, const Mat& g) {
    if (requires_grad(v)) grad_ref(v) += g;
  }
  Var push(Mat value, bool requires_grad, BackFn back);

  std::vector<Node> nodes_;
};

using Var = Tape::Var;

}  // namespace vhl::ad
