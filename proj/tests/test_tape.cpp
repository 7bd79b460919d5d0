#include <doctest.h>

#include <cmath>
#include <functional>

#include "pickplan/nn/tape.hpp"
#include "pickplan/rng.hpp"

using namespace pickplan;
using nn::Mat;
using nn::Tape;
using nn::Var;

namespace {

Mat random_mat(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Central finite-difference check of d(loss)/d(x) for loss = f(tape, leaf(x)).
// Returns the max relative error against the tape gradient.
double fd_check(const Mat& x0, const std::function<Var(Tape&, Var)>& f, double eps = 1e-5) {
  Tape tape;
  Var x = tape.leaf(x0, true);
  Var loss = f(tape, x);
  tape.backward(loss);
  const Mat analytic = tape.grad(x);
  REQUIRE(analytic.rows() == x0.rows());
  REQUIRE(analytic.cols() == x0.cols());

  auto eval = [&](const Mat& xv) {
    Tape t;
    return f(t, t.leaf(xv, false)).scalar();
  };

  double worst = 0.0;
  for (int i = 0; i < x0.rows(); ++i)
    for (int j = 0; j < x0.cols(); ++j) {
      Mat xp = x0, xm = x0;
      xp(i, j) += eps;
      xm(i, j) -= eps;
      const double numeric = (eval(xp) - eval(xm)) / (2.0 * eps);
      const double a = analytic(i, j);
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  return worst;
}

// Weighted sum so every output entry has a distinct gradient path.
Var weighted(Tape& t, Var v, const Mat& w) { return t.sum(t.mul(v, t.constant(w))); }

}  // namespace

TEST_CASE("gradients of elementwise and structural ops match finite differences") {
  Rng rng(7);
  const Mat x = random_mat(rng, 3, 4);
  const Mat w = random_mat(rng, 3, 4);

  CHECK(fd_check(x, [&](Tape& t, Var v) { return weighted(t, v, w); }) < 1e-6);
  CHECK(fd_check(x, [&](Tape& t, Var v) {
          return weighted(t, t.add(v, t.constant(w)), w);
        }) < 1e-6);
  CHECK(fd_check(x, [&](Tape& t, Var v) {
          return weighted(t, t.sub(t.constant(w), v), w);
        }) < 1e-6);
  CHECK(fd_check(x, [&](Tape& t, Var v) { return weighted(t, t.mul(v, v), w); }) < 1e-6);
  CHECK(fd_check(x, [&](Tape& t, Var v) { return weighted(t, t.scale(v, -2.5), w); }) < 1e-6);
  CHECK(fd_check(x, [&](Tape& t, Var v) { return weighted(t, t.add_scalar(v, 0.7), w); }) <
        1e-6);
  CHECK(fd_check(x, [&](Tape& t, Var v) { return weighted(t, t.square(v), w); }) < 1e-6);
  CHECK(fd_check(x, [&](Tape& t, Var v) { return weighted(t, t.exp(v), w); }) < 1e-5);
  CHECK(fd_check(x, [&](Tape& t, Var v) { return weighted(t, t.tanh(v), w); }) < 1e-5);
  CHECK(fd_check(x, [&](Tape& t, Var v) { return weighted(t, t.softplus(v), w); }) < 1e-5);
  CHECK(fd_check(x, [&](Tape& t, Var v) { return t.mean(t.square(v)); }) < 1e-6);
  const Mat wr = random_mat(rng, 3, 1);
  CHECK(fd_check(x, [&](Tape& t, Var v) {
          return t.sum(t.mul(t.row_sum(v), t.constant(wr)));
        }) < 1e-6);
}

TEST_CASE("gradients of activations avoid the kink and match finite differences") {
  Rng rng(9);
  // keep entries away from zero so the relu subgradient is unambiguous
  Mat x = random_mat(rng, 4, 3);
  for (int i = 0; i < x.size(); ++i) {
    double& v = x.data()[i];
    if (std::abs(v) < 0.05) v = v < 0 ? v - 0.1 : v + 0.1;
  }
  const Mat w = random_mat(rng, 4, 3);
  CHECK(fd_check(x, [&](Tape& t, Var v) { return weighted(t, t.relu(v), w); }) < 1e-6);
  CHECK(fd_check(x, [&](Tape& t, Var v) {
          return weighted(t, t.leaky_relu(v, 0.2), w);
        }) < 1e-6);
  // clamp: half the entries pushed outside the window
  CHECK(fd_check(x, [&](Tape& t, Var v) {
          return weighted(t, t.clamp(v, -0.5, 0.5), w);
        }) < 1e-6);
}

TEST_CASE("matmul gradients match finite differences for both operands") {
  Rng rng(13);
  const Mat a = random_mat(rng, 3, 5);
  const Mat b = random_mat(rng, 5, 2);
  const Mat w = random_mat(rng, 3, 2);
  CHECK(fd_check(a, [&](Tape& t, Var v) {
          return weighted(t, t.matmul(v, t.constant(b)), w);
        }) < 1e-6);
  CHECK(fd_check(b, [&](Tape& t, Var v) {
          return weighted(t, t.matmul(t.constant(a), v), w);
        }) < 1e-6);
}

TEST_CASE("rowwise_add, concat, slice and entry gradients match finite differences") {
  Rng rng(17);
  const Mat a = random_mat(rng, 4, 3);
  const Mat row = random_mat(rng, 1, 3);
  const Mat w = random_mat(rng, 4, 3);
  CHECK(fd_check(a, [&](Tape& t, Var v) {
          return weighted(t, t.rowwise_add(v, t.constant(row)), w);
        }) < 1e-6);
  CHECK(fd_check(row, [&](Tape& t, Var v) {
          return weighted(t, t.rowwise_add(t.constant(a), v), w);
        }) < 1e-6);

  const Mat b = random_mat(rng, 4, 2);
  const Mat wc = random_mat(rng, 4, 5);
  CHECK(fd_check(a, [&](Tape& t, Var v) {
          return weighted(t, t.concat_cols(v, t.constant(b)), wc);
        }) < 1e-6);
  const Mat ws = random_mat(rng, 4, 2);
  CHECK(fd_check(a, [&](Tape& t, Var v) {
          return weighted(t, t.slice_cols(v, 1, 2), ws);
        }) < 1e-6);
  CHECK(fd_check(a, [&](Tape& t, Var v) { return t.entry(v, 2, 1); }) < 1e-6);
}

TEST_CASE("minimum gradient matches finite differences and routes ties to a") {
  Rng rng(19);
  Mat a = random_mat(rng, 3, 3);
  Mat b = random_mat(rng, 3, 3);
  // separate entries so FD never straddles the switch point
  for (int i = 0; i < a.size(); ++i)
    if (std::abs(a.data()[i] - b.data()[i]) < 0.01) b.data()[i] += 0.5;
  const Mat w = random_mat(rng, 3, 3);
  CHECK(fd_check(a, [&](Tape& t, Var v) {
          return weighted(t, t.minimum(v, t.constant(b)), w);
        }) < 1e-6);
  CHECK(fd_check(b, [&](Tape& t, Var v) {
          return weighted(t, t.minimum(t.constant(a), v), w);
        }) < 1e-6);

  Tape tape;
  Var va = tape.leaf(Mat::Constant(1, 1, 2.0), true);
  Var vb = tape.leaf(Mat::Constant(1, 1, 2.0), true);
  tape.backward(tape.minimum(va, vb));
  CHECK(tape.grad(va)(0, 0) == 1.0);
  CHECK(tape.grad(vb)(0, 0) == 0.0);
}

TEST_CASE("outer_sum gradient matches finite differences") {
  Rng rng(23);
  const Mat u = random_mat(rng, 4, 1);
  const Mat v = random_mat(rng, 4, 1);
  const Mat w = random_mat(rng, 4, 4);
  CHECK(fd_check(u, [&](Tape& t, Var x) {
          return weighted(t, t.outer_sum(x, t.constant(v)), w);
        }) < 1e-6);
  CHECK(fd_check(v, [&](Tape& t, Var x) {
          return weighted(t, t.outer_sum(t.constant(u), x), w);
        }) < 1e-6);

  Tape tape;
  Var a = tape.constant((Mat(2, 1) << 1.0, 2.0).finished());
  Var b = tape.constant((Mat(2, 1) << 10.0, 20.0).finished());
  const Mat out = tape.outer_sum(a, b).val();
  CHECK(out(0, 0) == 11.0);
  CHECK(out(0, 1) == 21.0);
  CHECK(out(1, 0) == 12.0);
  CHECK(out(1, 1) == 22.0);
}

TEST_CASE("masked_row_softmax values and gradient") {
  Rng rng(29);
  const Mat x = random_mat(rng, 3, 3, -2.0, 2.0);
  Mat mask = Mat::Ones(3, 3);
  mask.diagonal().setZero();
  mask(2, 0) = 0.0;  // row 2 keeps only column 1

  Tape tape;
  const Mat p = tape.masked_row_softmax(tape.leaf(x), mask).val();
  for (int i = 0; i < 3; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < 3; ++j) {
      if (mask(i, j) == 0.0) CHECK(p(i, j) == 0.0);
      row_sum += p(i, j);
    }
    CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(p(2, 1) == 1.0);  // singleton row

  const Mat w = random_mat(rng, 3, 3);
  CHECK(fd_check(x, [&](Tape& t, Var v) {
          return weighted(t, t.masked_row_softmax(v, mask), w);
        }) < 1e-5);

  // an all-masked row collapses to zeros and passes no gradient
  Mat dead = Mat::Ones(2, 2);
  dead.row(0).setZero();
  Tape t2;
  Var v2 = t2.leaf(random_mat(rng, 2, 2), true);
  Var sm = t2.masked_row_softmax(v2, dead);
  CHECK(sm.val().row(0).cwiseAbs().sum() == 0.0);
  t2.backward(t2.sum(sm));
  CHECK(t2.grad(v2).row(0).cwiseAbs().sum() == 0.0);
}

TEST_CASE("log_softmax_vec is stable and differentiates correctly") {
  Rng rng(31);
  Mat x = random_mat(rng, 5, 1, -3.0, 3.0);
  Tape tape;
  const Mat lp = tape.log_softmax_vec(tape.leaf(x)).val();
  double total = 0.0;
  for (int i = 0; i < 5; ++i) total += std::exp(lp(i, 0));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // huge logits must not overflow
  Mat huge = (Mat(3, 1) << 1000.0, 999.0, -1000.0).finished();
  Tape t2;
  const Mat lp2 = t2.log_softmax_vec(t2.leaf(huge)).val();
  CHECK(std::isfinite(lp2(0, 0)));
  CHECK(lp2(0, 0) == doctest::Approx(std::log(1.0 / (1.0 + std::exp(-1.0)))).epsilon(1e-9));

  const Mat w = random_mat(rng, 5, 1);
  CHECK(fd_check(x, [&](Tape& t, Var v) {
          return weighted(t, t.log_softmax_vec(v), w);
        }) < 1e-5);
}

TEST_CASE("gradient accumulation over reused nodes") {
  Tape tape;
  Var x = tape.leaf(Mat::Constant(1, 1, 3.0), true);
  // z = x*x + x -> dz/dx = 2x + 1 = 7
  Var z = tape.add(tape.mul(x, x), x);
  tape.backward(z);
  CHECK(tape.grad(x)(0, 0) == doctest::Approx(7.0));

  Tape tape2;
  Var y = tape2.leaf(Mat::Constant(1, 1, 5.0), true);
  tape2.backward(tape2.add(y, y));
  CHECK(tape2.grad(y)(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("constants receive no gradient and backward validates its input") {
  Tape tape;
  Var x = tape.leaf(Mat::Constant(2, 2, 1.0), true);
  Var c = tape.constant(Mat::Constant(2, 2, 4.0));
  Var loss = tape.sum(tape.mul(x, c));
  tape.backward(loss);
  CHECK(tape.grad(c).size() == 0);  // never materialized

  Tape t2;
  Var nc = t2.leaf(Mat::Constant(2, 2, 1.0), false);
  CHECK_THROWS_AS(t2.backward(t2.sum(nc)), Error);  // nothing to differentiate

  Tape t3;
  Var big = t3.leaf(Mat::Constant(2, 2, 1.0), true);
  CHECK_THROWS_AS(t3.backward(big), Error);  // non-scalar loss
}

TEST_CASE("tape clear resets the graph") {
  Tape tape;
  tape.leaf(Mat::Zero(2, 2), true);
  CHECK(tape.size() == 1);
  tape.clear();
  CHECK(tape.size() == 0);
}
