#ifndef MDFN_TAPE_H_
#define MDFN_TAPE_H_

#include <cstddef>
#include <functional>
#include <vector>

#include "mdfn/matrix.h"

namespace mdfn {

class Tape;

// Handle to a tape node. Cheap to copy; valid for the tape's lifetime.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
};

// Reverse-mode tape over Matrix values. Every op computes its value eagerly
// and records a closure that adds its contribution to the parents' gradients.
// backward() walks the nodes in reverse creation order, so each node's
// gradient is complete before its closure runs.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad);

  // y = x w, shapes (n,k)(k,m) -> (n,m).
  Var matmul(Var x, Var w);
  // y = x w^T, shapes (n,k)(m,k) -> (n,m). Attention scores use this.
  Var matmul_nt(Var x, Var w);
  Var add(Var a, Var b);
  // Adds a 1 x m bias row to every row of x.
  Var add_row(Var x, Var bias);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var x, double s);
  Var linear(Var x, Var w);              // matmul
  Var linear(Var x, Var w, Var bias);    // matmul + broadcast bias

  // Row-wise softmax with max subtraction. Throws NumericError on
  // non-finite input.
  Var softmax_rows(Var x);

  // Per-row normalization with population variance:
  // y = gamma * (x - mean) / sqrt(var + eps) + beta, gamma/beta are 1 x d.
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

  Var gelu(Var x);     // exact form, 0.5 x (1 + erf(x / sqrt 2))
  Var sigmoid(Var x);

  Var concat_cols(Var a, Var b);
  Var slice_cols(Var x, std::size_t c0, std::size_t c1);  // [c0, c1)
  Var select_rows(Var x, std::vector<std::size_t> rows);

  // Mean over rows of -log softmax(logits)[gold], optionally weighted per
  // row; with weights the mean is sum(w_i nll_i) / sum(w_i). Returns 1 x 1.
  Var cross_entropy(Var logits, std::vector<std::size_t> gold,
                    std::vector<double> row_weights = {});

  Var mean_all(Var x);  // 1 x 1

  // Seeds d(loss)/d(loss) = 1 and runs all recorded closures in reverse.
  // loss must be 1 x 1 and finite.
  void backward(Var loss);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  Var push(Matrix value, bool requires_grad, std::function<void(Tape&)> backward);
  Matrix& grad_mut(std::size_t id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
};

}  // namespace mdfn

#endif  // MDFN_TAPE_H_
