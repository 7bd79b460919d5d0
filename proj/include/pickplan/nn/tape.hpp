#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "pickplan/errors.hpp"

namespace pickplan::nn {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive and not cleared.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat& val() const;
  int rows() const { return static_cast<int>(val().rows()); }
  int cols() const { return static_cast<int>(val().cols()); }
  double scalar() const;
};

// Dynamic computation graph for reverse-mode differentiation. Nodes are
// recorded in creation order; backward() replays them in reverse, so every
// op's inputs always precede it on the tape. 64-bit floats throughout.
class Tape {
 public:
  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  Var leaf(Mat value, bool requires_grad = false);
  Var constant(Mat value) { return leaf(std::move(value), false); }
  Var constant_scalar(double v) { return leaf(Mat::Constant(1, 1, v), false); }

  // --- elementwise / structural ops ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var add_scalar(Var a, double k);
  Var matmul(Var a, Var b);
  Var rowwise_add(Var a, Var row);   // a: MxN, row: 1xN
  Var relu(Var a);
  Var leaky_relu(Var a, double slope);
  Var tanh(Var a);
  Var exp(Var a);
  Var softplus(Var a);               // log(1 + e^x), overflow-safe
  Var square(Var a);
  Var clamp(Var a, double lo, double hi);  // gradient zero outside [lo, hi]
  Var minimum(Var a, Var b);         // elementwise min; ties route grad to a
  Var sum(Var a);                    // 1x1
  Var mean(Var a);                   // 1x1
  Var row_sum(Var a);                // MxN -> Mx1
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, int start, int n);
  Var entry(Var a, int r, int c);    // 1x1 pick

  // e_ij = u_i + w_j for column vectors u (Mx1), w (Mx1) -> MxM.
  Var outer_sum(Var u, Var w);

  // Row-wise softmax restricted to mask != 0 (mask is a plain matrix, not a
  // Var). Masked-out entries get probability exactly 0; all-masked rows give
  // an all-zero row.
  Var masked_row_softmax(Var a, const Mat& mask);

  // log softmax over a Mx1 column vector, numerically stable.
  Var log_softmax_vec(Var a);

  void backward(Var loss);
  const Mat& val(Var v) const { return nodes_[v.id].val; }
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  void clear();
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Mat val;
    Mat grad;
    bool requires_grad = false;
    std::function<void(Tape&)> back;  // null for leaves
  };

  Var push(Mat value, bool requires_grad, std::function<void(Tape&)> back);
  void check(const Mat& m, const char* op) const;
  Mat& grad_ref(int id) { return nodes_[id].grad; }
  void accumulate(int id, const Mat& g);

  std::vector<Node> nodes_;
  bool check_finite_ = true;
};

inline const Mat& Var::val() const { return tape->val(*this); }
inline double Var::scalar() const {
  const Mat& m = val();
  return m(0, 0);
}

}  // namespace pickplan::nn
