#include "pickplan/nn/tape.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace pickplan::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}

}  // namespace

Var Tape::push(Mat value, bool requires_grad, std::function<void(Tape&)> back) {
  Node node;
  node.val = std::move(value);
  node.requires_grad = requires_grad;
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(const Mat& m, const char* op) const {
  if (check_finite_ && !m.allFinite())
    throw NumericalError(std::string("non-finite values in ") + op);
}

void Tape::accumulate(int id, const Mat& g) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0)
    node.grad = g;
  else
    node.grad += g;
}

Var Tape::leaf(Mat value, bool requires_grad) {
  check(value, "leaf");
  return push(std::move(value), requires_grad, nullptr);
}

Var Tape::add(Var a, Var b) {
  require(a.tape == this && b.tape == this, "add: foreign tape");
  require(a.val().rows() == b.val().rows() && a.val().cols() == b.val().cols(),
          "add: shape mismatch");
  Mat out = a.val() + b.val();
  check(out, "add");
  const bool req = requires_grad(a) || requires_grad(b);
  const int ia = a.id, ib = b.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& g = t.nodes_[io].grad;
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require(a.tape == this && b.tape == this, "sub: foreign tape");
  require(a.val().rows() == b.val().rows() && a.val().cols() == b.val().cols(),
          "sub: shape mismatch");
  Mat out = a.val() - b.val();
  check(out, "sub");
  const bool req = requires_grad(a) || requires_grad(b);
  const int ia = a.id, ib = b.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& g = t.nodes_[io].grad;
    t.accumulate(ia, g);
    t.accumulate(ib, Mat(-g));
  });
}

Var Tape::mul(Var a, Var b) {
  require(a.tape == this && b.tape == this, "mul: foreign tape");
  require(a.val().rows() == b.val().rows() && a.val().cols() == b.val().cols(),
          "mul: shape mismatch");
  Mat out = a.val().cwiseProduct(b.val());
  check(out, "mul");
  const bool req = requires_grad(a) || requires_grad(b);
  const int ia = a.id, ib = b.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& g = t.nodes_[io].grad;
    if (t.nodes_[ia].requires_grad) t.accumulate(ia, g.cwiseProduct(t.nodes_[ib].val));
    if (t.nodes_[ib].requires_grad) t.accumulate(ib, g.cwiseProduct(t.nodes_[ia].val));
  });
}

Var Tape::scale(Var a, double k) {
  require(a.tape == this, "scale: foreign tape");
  Mat out = a.val() * k;
  check(out, "scale");
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    t.accumulate(ia, Mat(t.nodes_[io].grad * k));
  });
}

Var Tape::add_scalar(Var a, double k) {
  require(a.tape == this, "add_scalar: foreign tape");
  Mat out = (a.val().array() + k).matrix();
  check(out, "add_scalar");
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    t.accumulate(ia, t.nodes_[io].grad);
  });
}

Var Tape::matmul(Var a, Var b) {
  require(a.tape == this && b.tape == this, "matmul: foreign tape");
  require(a.val().cols() == b.val().rows(), "matmul: inner dimensions differ");
  Mat out = a.val() * b.val();
  check(out, "matmul");
  const bool req = requires_grad(a) || requires_grad(b);
  const int ia = a.id, ib = b.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& g = t.nodes_[io].grad;
    if (t.nodes_[ia].requires_grad) t.accumulate(ia, Mat(g * t.nodes_[ib].val.transpose()));
    if (t.nodes_[ib].requires_grad) t.accumulate(ib, Mat(t.nodes_[ia].val.transpose() * g));
  });
}

Var Tape::rowwise_add(Var a, Var row) {
  require(a.tape == this && row.tape == this, "rowwise_add: foreign tape");
  require(row.val().rows() == 1 && row.val().cols() == a.val().cols(),
          "rowwise_add: row must be 1 x cols(a)");
  Mat out = a.val().rowwise() + row.val().row(0);
  check(out, "rowwise_add");
  const bool req = requires_grad(a) || requires_grad(row);
  const int ia = a.id, ir = row.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& g = t.nodes_[io].grad;
    t.accumulate(ia, g);
    if (t.nodes_[ir].requires_grad) t.accumulate(ir, Mat(g.colwise().sum()));
  });
}

Var Tape::relu(Var a) {
  require(a.tape == this, "relu: foreign tape");
  Mat out = a.val().cwiseMax(0.0);
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat mask = (t.nodes_[ia].val.array() > 0.0).cast<double>().matrix();
    t.accumulate(ia, t.nodes_[io].grad.cwiseProduct(mask));
  });
}

Var Tape::leaky_relu(Var a, double slope) {
  require(a.tape == this, "leaky_relu: foreign tape");
  Mat out = a.val().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat d = t.nodes_[ia].val.unaryExpr(
        [slope](double x) { return x > 0.0 ? 1.0 : slope; });
    t.accumulate(ia, t.nodes_[io].grad.cwiseProduct(d));
  });
}

Var Tape::tanh(Var a) {
  require(a.tape == this, "tanh: foreign tape");
  Mat out = a.val().array().tanh().matrix();
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& y = t.nodes_[io].val;
    const Mat d = (1.0 - y.array().square()).matrix();
    t.accumulate(ia, t.nodes_[io].grad.cwiseProduct(d));
  });
}

Var Tape::exp(Var a) {
  require(a.tape == this, "exp: foreign tape");
  Mat out = a.val().array().exp().matrix();
  check(out, "exp");
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    t.accumulate(ia, t.nodes_[io].grad.cwiseProduct(t.nodes_[io].val));
  });
}

Var Tape::softplus(Var a) {
  require(a.tape == this, "softplus: foreign tape");
  Mat out = a.val().unaryExpr([](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  check(out, "softplus");
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat d = t.nodes_[ia].val.unaryExpr([](double x) {
      return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    t.accumulate(ia, t.nodes_[io].grad.cwiseProduct(d));
  });
}

Var Tape::square(Var a) {
  require(a.tape == this, "square: foreign tape");
  Mat out = a.val().array().square().matrix();
  check(out, "square");
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    t.accumulate(ia, Mat(t.nodes_[io].grad.cwiseProduct(t.nodes_[ia].val) * 2.0));
  });
}

Var Tape::clamp(Var a, double lo, double hi) {
  require(a.tape == this, "clamp: foreign tape");
  require(lo <= hi, "clamp: lo > hi");
  Mat out = a.val().cwiseMax(lo).cwiseMin(hi);
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat mask = ((t.nodes_[ia].val.array() >= lo) && (t.nodes_[ia].val.array() <= hi))
                         .cast<double>()
                         .matrix();
    t.accumulate(ia, t.nodes_[io].grad.cwiseProduct(mask));
  });
}

Var Tape::minimum(Var a, Var b) {
  require(a.tape == this && b.tape == this, "minimum: foreign tape");
  require(a.val().rows() == b.val().rows() && a.val().cols() == b.val().cols(),
          "minimum: shape mismatch");
  Mat out = a.val().cwiseMin(b.val());
  const bool req = requires_grad(a) || requires_grad(b);
  const int ia = a.id, ib = b.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat take_a =
        (t.nodes_[ia].val.array() <= t.nodes_[ib].val.array()).cast<double>().matrix();
    const Mat& g = t.nodes_[io].grad;
    if (t.nodes_[ia].requires_grad) t.accumulate(ia, g.cwiseProduct(take_a));
    if (t.nodes_[ib].requires_grad)
      t.accumulate(ib, Mat(g.cwiseProduct(Mat((1.0 - take_a.array()).matrix()))));
  });
}

Var Tape::sum(Var a) {
  require(a.tape == this, "sum: foreign tape");
  Mat out = Mat::Constant(1, 1, a.val().sum());
  check(out, "sum");
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const double g = t.nodes_[io].grad(0, 0);
    t.accumulate(ia, Mat(Mat::Constant(t.nodes_[ia].val.rows(), t.nodes_[ia].val.cols(), g)));
  });
}

Var Tape::mean(Var a) {
  require(a.tape == this, "mean: foreign tape");
  require(a.val().size() > 0, "mean: empty input");
  Mat out = Mat::Constant(1, 1, a.val().mean());
  check(out, "mean");
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const double g = t.nodes_[io].grad(0, 0) / static_cast<double>(t.nodes_[ia].val.size());
    t.accumulate(ia, Mat(Mat::Constant(t.nodes_[ia].val.rows(), t.nodes_[ia].val.cols(), g)));
  });
}

Var Tape::row_sum(Var a) {
  require(a.tape == this, "row_sum: foreign tape");
  Mat out = a.val().rowwise().sum();
  check(out, "row_sum");
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& g = t.nodes_[io].grad;  // Mx1
    t.accumulate(ia, Mat(g * Mat::Ones(1, t.nodes_[ia].val.cols())));
  });
}

Var Tape::concat_cols(Var a, Var b) {
  require(a.tape == this && b.tape == this, "concat_cols: foreign tape");
  require(a.val().rows() == b.val().rows(), "concat_cols: row mismatch");
  Mat out(a.val().rows(), a.val().cols() + b.val().cols());
  out << a.val(), b.val();
  const bool req = requires_grad(a) || requires_grad(b);
  const int ia = a.id, ib = b.id, io = size();
  const int ca = static_cast<int>(a.val().cols()), cb = static_cast<int>(b.val().cols());
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& g = t.nodes_[io].grad;
    t.accumulate(ia, Mat(g.leftCols(ca)));
    t.accumulate(ib, Mat(g.rightCols(cb)));
  });
}

Var Tape::slice_cols(Var a, int start, int n) {
  require(a.tape == this, "slice_cols: foreign tape");
  require(start >= 0 && n >= 1 && start + n <= a.val().cols(), "slice_cols: out of range");
  Mat out = a.val().middleCols(start, n);
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    Mat g = Mat::Zero(t.nodes_[ia].val.rows(), t.nodes_[ia].val.cols());
    g.middleCols(start, n) = t.nodes_[io].grad;
    t.accumulate(ia, g);
  });
}

Var Tape::entry(Var a, int r, int c) {
  require(a.tape == this, "entry: foreign tape");
  require(r >= 0 && r < a.val().rows() && c >= 0 && c < a.val().cols(),
          "entry: out of range");
  Mat out = Mat::Constant(1, 1, a.val()(r, c));
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    Mat g = Mat::Zero(t.nodes_[ia].val.rows(), t.nodes_[ia].val.cols());
    g(r, c) = t.nodes_[io].grad(0, 0);
    t.accumulate(ia, g);
  });
}

Var Tape::outer_sum(Var u, Var w) {
  require(u.tape == this && w.tape == this, "outer_sum: foreign tape");
  require(u.val().cols() == 1 && w.val().cols() == 1, "outer_sum: inputs must be column vectors");
  const int m = static_cast<int>(u.val().rows());
  const int n = static_cast<int>(w.val().rows());
  Mat out = u.val() * Mat::Ones(1, n) + Mat::Ones(m, 1) * w.val().transpose();
  check(out, "outer_sum");
  const bool req = requires_grad(u) || requires_grad(w);
  const int iu = u.id, iw = w.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& g = t.nodes_[io].grad;
    if (t.nodes_[iu].requires_grad) t.accumulate(iu, Mat(g.rowwise().sum()));
    if (t.nodes_[iw].requires_grad) t.accumulate(iw, Mat(g.colwise().sum().transpose()));
  });
}

Var Tape::masked_row_softmax(Var a, const Mat& mask) {
  require(a.tape == this, "masked_row_softmax: foreign tape");
  require(a.val().rows() == mask.rows() && a.val().cols() == mask.cols(),
          "masked_row_softmax: mask shape mismatch");
  const Mat& x = a.val();
  Mat out = Mat::Zero(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0 && x(i, j) > mx) mx = x(i, j);
    if (!std::isfinite(mx)) continue;  // fully masked row stays zero
    double denom = 0.0;
    for (int j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) denom += std::exp(x(i, j) - mx);
    for (int j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) out(i, j) = std::exp(x(i, j) - mx) / denom;
  }
  check(out, "masked_row_softmax");
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& p = t.nodes_[io].val;
    const Mat& g = t.nodes_[io].grad;
    Mat da = Mat::Zero(p.rows(), p.cols());
    for (int i = 0; i < p.rows(); ++i) {
      const double dot = g.row(i).cwiseProduct(p.row(i)).sum();
      da.row(i) = (p.row(i).array() * (g.row(i).array() - dot)).matrix();
    }
    t.accumulate(ia, da);
  });
}

Var Tape::log_softmax_vec(Var a) {
  require(a.tape == this, "log_softmax_vec: foreign tape");
  require(a.val().cols() == 1 && a.val().rows() >= 1, "log_softmax_vec: expects Mx1");
  const Mat& x = a.val();
  const double mx = x.maxCoeff();
  const double lse = mx + std::log((x.array() - mx).exp().sum());
  Mat out = (x.array() - lse).matrix();
  check(out, "log_softmax_vec");
  const bool req = requires_grad(a);
  const int ia = a.id, io = size();
  return push(std::move(out), req, !req ? std::function<void(Tape&)>() : [=](Tape& t) {
    const Mat& y = t.nodes_[io].val;
    const Mat& g = t.nodes_[io].grad;
    const double gsum = g.sum();
    const Mat p = y.array().exp().matrix();
    t.accumulate(ia, Mat(g - p * gsum));
  });
}

void Tape::backward(Var loss) {
  require(loss.tape == this, "backward: foreign tape");
  require(loss.val().rows() == 1 && loss.val().cols() == 1, "backward: loss must be 1x1");
  if (!nodes_[static_cast<std::size_t>(loss.id)].requires_grad)
    throw Error("backward: loss does not depend on any differentiable leaf");
  accumulate(loss.id, Mat::Ones(1, 1));
  for (int id = loss.id; id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.back && node.grad.size() != 0) node.back(*this);
  }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace pickplan::nn
