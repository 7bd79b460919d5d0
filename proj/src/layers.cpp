#include "pickplan/nn/layers.hpp"

#include <cmath>

#include "pickplan/errors.hpp"

namespace pickplan::nn {

void mlp_init(ParamStore& store, const std::string& prefix, const std::vector<int>& sizes,
              Rng& rng) {
  if (sizes.size() < 2) throw Error("mlp_init: need at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    Mat& w = store.add(prefix + "/w" + std::to_string(i), sizes[i], sizes[i + 1]);
    init_uniform(w, sizes[i], rng);
    Mat& b = store.add(prefix + "/b" + std::to_string(i), 1, sizes[i + 1]);
    init_uniform(b, sizes[i], rng);
  }
}

Var mlp_forward(Binding& bind, const std::string& prefix, Var input,
                const std::vector<int>& sizes, Activation hidden, bool params_require_grad) {
  if (sizes.size() < 2) throw Error("mlp_forward: need at least input and output sizes");
  if (input.cols() != sizes.front())
    throw ShapeMismatch("mlp_forward: input width does not match sizes.front()");
  Tape& tape = bind.tape();
  Var x = input;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    Var w = bind(prefix + "/w" + std::to_string(i), params_require_grad);
    Var b = bind(prefix + "/b" + std::to_string(i), params_require_grad);
    x = tape.rowwise_add(tape.matmul(x, w), b);
    if (i + 2 < sizes.size()) {
      if (hidden == Activation::Relu)
        x = tape.relu(x);
      else if (hidden == Activation::Tanh)
        x = tape.tanh(x);
    }
  }
  return x;
}

void gat_init(ParamStore& store, const std::string& prefix, int obj_in, int robot_in,
              int width, Rng& rng) {
  Mat& wg = store.add(prefix + "/wg", obj_in, width);
  init_uniform(wg, obj_in, rng);
  Mat& wr = store.add(prefix + "/wr", robot_in, width);
  init_uniform(wr, robot_in, rng);
  Mat& wo = store.add(prefix + "/wo", obj_in, width);
  init_uniform(wo, obj_in, rng);
  Mat& a_self = store.add(prefix + "/a_self", width, 1);
  init_uniform(a_self, width, rng);
  Mat& a_other = store.add(prefix + "/a_other", width, 1);
  init_uniform(a_other, width, rng);
}

GatOutput gat_layer(Binding& bind, const std::string& prefix, Var obj_feats, Var robot_feat,
                    const Mat& neighbor_mask, AttentionMode mode, bool params_require_grad) {
  Tape& tape = bind.tape();
  const int m = obj_feats.rows();
  if (robot_feat.rows() != 1) throw ShapeMismatch("gat_layer: robot_feat must be one row");
  if (neighbor_mask.rows() != m || neighbor_mask.cols() != m)
    throw ShapeMismatch("gat_layer: neighbor mask must be M x M");

  Var wg = bind(prefix + "/wg", params_require_grad);
  Var wr = bind(prefix + "/wr", params_require_grad);
  Var wo = bind(prefix + "/wo", params_require_grad);

  Var p = tape.matmul(obj_feats, wo);
  Var alpha{};
  if (mode == AttentionMode::Learned) {
    Var a_self = bind(prefix + "/a_self", params_require_grad);
    Var a_other = bind(prefix + "/a_other", params_require_grad);
    Var scores = tape.leaky_relu(
        tape.outer_sum(tape.matmul(p, a_self), tape.matmul(p, a_other)), 0.2);
    alpha = tape.masked_row_softmax(scores, neighbor_mask);
  } else {
    Mat uniform = Mat::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      int count = 0;
      for (int j = 0; j < m; ++j)
        if (neighbor_mask(i, j) != 0.0) ++count;
      if (count == 0) continue;
      for (int j = 0; j < m; ++j)
        if (neighbor_mask(i, j) != 0.0) uniform(i, j) = 1.0 / count;
    }
    alpha = tape.constant(std::move(uniform));
  }

  Var messages = tape.matmul(alpha, p);
  Var r = tape.matmul(robot_feat, wr);
  Var objects =
      tape.relu(tape.rowwise_add(tape.add(tape.matmul(obj_feats, wg), messages), r));
  Var robot = tape.relu(r);
  return GatOutput{objects, robot, alpha};
}

SquashedSample squashed_gaussian(Tape& tape, Var mean, Var log_std, const Mat& noise) {
  if (mean.rows() != log_std.rows() || mean.cols() != log_std.cols())
    throw ShapeMismatch("squashed_gaussian: mean/log_std shape mismatch");
  if (noise.rows() != mean.rows() || noise.cols() != mean.cols())
    throw ShapeMismatch("squashed_gaussian: noise shape mismatch");

  Var ls = tape.clamp(log_std, kLogStdMin, kLogStdMax);
  Var std_dev = tape.exp(ls);
  Var u = tape.add(mean, tape.mul(std_dev, tape.constant(noise)));
  Var action = tape.tanh(u);

  // log N(u | mean, std) with u = mean + std * z: the z-dependent part is
  // constant, leaving -log_std with gradient only through ls.
  const Mat gauss_const =
      (-0.5 * noise.array().square() - 0.5 * std::log(2.0 * M_PI)).matrix();
  Var gauss = tape.sub(tape.constant(gauss_const), ls);

  // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)), numerically safe.
  Var squash = tape.scale(
      tape.add_scalar(tape.add(u, tape.softplus(tape.scale(u, -2.0))), -std::log(2.0)),
      -2.0);

  Var log_prob = tape.row_sum(tape.sub(gauss, squash));
  return SquashedSample{action, log_prob};
}

}  // namespace pickplan::nn
