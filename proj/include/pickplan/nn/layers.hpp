#pragma once

#include <string>
#include <vector>

#include "pickplan/nn/params.hpp"
#include "pickplan/nn/tape.hpp"
#include "pickplan/rng.hpp"

namespace pickplan::nn {

enum class Activation { Relu, Tanh, None };

// Dense chain: weights "<prefix>/w<i>" (in x out) and biases "<prefix>/b<i>"
// (1 x out). `sizes` lists every layer width including input and output; the
// hidden activation is applied between layers, the output stays linear.
void mlp_init(ParamStore& store, const std::string& prefix, const std::vector<int>& sizes,
              Rng& rng);
Var mlp_forward(Binding& bind, const std::string& prefix, Var input,
                const std::vector<int>& sizes, Activation hidden = Activation::Relu,
                bool params_require_grad = true);

enum class AttentionMode { Learned, Uniform };

// Single graph-attention layer over object nodes with the robot as a context
// node. Object embeddings: relu(obj * Wg + robot * Wr + A * (obj * Wo)) where
// the attention rows A are a masked softmax of leaky-relu pair scores
// (Learned) or uniform over neighbors (Uniform). The robot embedding advances
// as relu(robot * Wr).
struct GatOutput {
  Var objects;  // M x width
  Var robot;    // 1 x width
  Var alpha;    // M x M attention rows (constant in Uniform mode)
};

void gat_init(ParamStore& store, const std::string& prefix, int obj_in, int robot_in,
              int width, Rng& rng);
GatOutput gat_layer(Binding& bind, const std::string& prefix, Var obj_feats, Var robot_feat,
                    const Mat& neighbor_mask, AttentionMode mode,
                    bool params_require_grad = true);

// Tanh-squashed diagonal Gaussian with the exact log-density correction.
// `noise` holds the standard-normal draws (same shape as mean); log_std is
// clamped to [-20, 2] before use. Returns the squashed action in (-1,1)^d and
// the per-row log probability.
struct SquashedSample {
  Var action;    // M x d, strictly inside (-1, 1)
  Var log_prob;  // M x 1
};
SquashedSample squashed_gaussian(Tape& tape, Var mean, Var log_std, const Mat& noise);

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

}  // namespace pickplan::nn
