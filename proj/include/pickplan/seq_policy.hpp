#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pickplan/base_policy.hpp"
#include "pickplan/nn/layers.hpp"
#include "pickplan/plan.hpp"
#include "pickplan/scene.hpp"

namespace pickplan {

enum class BaselineMode { GreedyRollout, None };

std::string attention_mode_name(nn::AttentionMode m);
nn::AttentionMode attention_mode_from_name(const std::string& s);
std::string baseline_mode_name(BaselineMode m);
BaselineMode baseline_mode_from_name(const std::string& s);

struct SeqHyperparams {
  int encoder_layers = 5;
  int width = 64;
  std::vector<int> decoder_hidden{64, 64};
  double lr = 1e-3;
  double gamma5 = 1e3;           // navigation reward weight
  int batch_episodes = 64;       // sampled rollouts per update
  int baseline_eval_scenes = 128;
  double replace_p = 0.05;       // one-sided paired test threshold
  nn::AttentionMode attention = nn::AttentionMode::Learned;
  BaselineMode baseline = BaselineMode::GreedyRollout;
  int epochs = 200;
  int n_objects = 5;             // training scene size
  std::array<double, 2> start_annulus{2.5, 3.0};
  double t_fail = 30.0;          // seconds charged per ungrasped object on collision
};

// Graph view of the remaining task: robot node features (4) and one 9-float
// row per remaining object (x, y, cos, sin, one-hot class). Neighbors of an
// object are all other remaining objects.
struct SceneGraph {
  nn::Mat object_features;   // M x 9
  nn::Mat robot_features;    // 1 x 4
  nn::Mat neighbor_mask;     // M x M, zero diagonal
  std::vector<int> object_ids;  // row -> scene object id
};

SceneGraph build_scene_graph(const Pose2& robot, const std::vector<ObjectState>& remaining);

struct SeqPolicy {
  nn::ParamStore params;
  SeqHyperparams hp;
};

SeqPolicy make_seq_policy(const SeqHyperparams& hp, std::uint64_t init_seed);

// Per-object embeddings after the attention stack: M x width.
nn::Var encode(nn::Binding& bind, const SeqPolicy& policy, const SceneGraph& graph,
               bool params_require_grad = true);

// Row sums of every attention layer's coefficients, for diagnostics.
std::vector<nn::Mat> encode_attention_rows(const SeqPolicy& policy, const SceneGraph& graph);

// Probability of grasping each remaining object (softmax over decoder
// logits); masked objects carry exactly zero probability.
std::vector<double> grasp_probabilities(const SeqPolicy& policy, const SceneGraph& graph,
                                        const std::vector<bool>* mask = nullptr);

enum class RolloutMode { Sample, Greedy };

struct RolloutStep {
  int object_id = 0;
  double log_prob = 0.0;  // log probability of the chosen object
  double reward = 0.0;
  Pose2 base;
  bool grasped = false;
};

struct RolloutResult {
  std::vector<RolloutStep> steps;
  double total_reward = 0.0;
  int grasped = 0;
  bool collided = false;
};

// Episode under the composite policy: the sequence policy picks the object
// (sampled or argmax), the frozen base policy supplies the base pose. Reward
// per step is -gamma5 * nav_time; a colliding prediction ends the episode
// with -gamma5 * t_fail per remaining object.
RolloutResult rollout(const SeqPolicy& seq, const BasePolicy& base, const Scene& scene,
                      RolloutMode mode, Rng& rng);

struct SeqTrainRow {
  int epoch = 0;
  double mean_return = 0.0;      // sampled rollouts, this update
  double baseline_return = 0.0;  // baseline greedy mean on the eval scenes
  bool replaced = false;
};

// REINFORCE with a greedy rollout baseline: advantage = sampled return minus
// the frozen baseline policy's greedy return on the same scene. The baseline
// is replaced by the current parameters when the current policy's greedy
// returns beat it on the eval scenes under a one-sided paired test.
SeqPolicy train_seq_policy(const SeqHyperparams& hp, const BasePolicy& base, std::uint64_t seed,
                           std::vector<SeqTrainRow>* log = nullptr);

// Mean greedy return over a deterministic evaluation corpus.
double evaluate_seq_policy(const SeqPolicy& seq, const BasePolicy& base, int scenes,
                           std::uint64_t seed);

// Greedy rollout converted to a Plan (truncated before any colliding stop).
Plan plan_learned(const SeqPolicy& seq, const BasePolicy& base, const Scene& scene);

void save_seq_policy(const SeqPolicy& policy, const std::string& path);
SeqPolicy load_seq_policy(const std::string& path);

void write_seq_log_csv(const std::vector<SeqTrainRow>& log, const std::string& path);

}  // namespace pickplan
