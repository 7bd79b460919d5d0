#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pickplan/nn/params.hpp"
#include "pickplan/reach.hpp"
#include "pickplan/scene.hpp"

namespace pickplan {

// Frame in which the raw policy action is interpreted.
enum class FrameMode { Object, Table };

std::string frame_mode_name(FrameMode m);
FrameMode frame_mode_from_name(const std::string& s);

// Reward constants for the single-object base-pose task.
inline constexpr double kRewardCollision = -2e5;  // gamma1
inline constexpr double kRewardGraspBonus = 1e6;  // gamma2
inline constexpr double kRewardNavWeight = 5e5;   // gamma3
inline constexpr double kRewardGraspWeight = 5e5; // gamma4

// Affine bounds of the action mapping: raw (-1,1)^3 -> (dx, dy, dtheta).
inline constexpr double kActionPosBound = 1.2;  // meters

struct SacHyperparams {
  double lr = 3e-4;
  std::vector<int> hidden{256, 256, 256};
  int batch = 256;
  int replay_capacity = 100000;
  int warmup_steps = 1000;
  double tau = 0.005;
  double discount = 0.99;  // inert: every episode is a single step
  double entropy_target = -3.0;
  long total_steps = 150000;
  long eval_interval = 1000;
  int eval_episodes = 200;
  std::array<double, 2> start_annulus{0.8, 3.0};
};

// 8 floats: robot (x, y, cos, sin) then object (x, y, cos, sin), table frame.
std::array<double, 8> base_pose_observation(const Pose2& robot, const Pose2& object);

// Map a raw squashed action to a table-frame base pose.
Pose2 map_base_action(const std::array<double, 3>& raw, const ObjectState& object,
                      const TableRect& table, FrameMode mode);

// Single-object reward: collision penalty short-circuits; otherwise the grasp
// bonus plus navigation/grasp-time shaping when IK is available, else zero.
double reward_base(const Scene& single_object_scene, const Pose2& action_pose,
                   const ManipulatorModel& model);

struct BasePolicy {
  nn::ParamStore params;
  SacHyperparams hp;
  FrameMode frame = FrameMode::Object;
  ManipulatorModel model;
};

// Deterministic (tanh-mean) base pose prediction.
Pose2 predict_base_pose(const BasePolicy& policy, const Pose2& robot, const ObjectState& object,
                        const TableRect& table);

struct BaseTrainRow {
  long step = 0;
  double mean_reward = 0.0;
  double success_rate = 0.0;
};

struct BaseEvalResult {
  double success_rate = 0.0;
  double mean_reward = 0.0;
};

// Single-step SAC with twin critics, target networks and a learned entropy
// temperature. Fully deterministic for a given seed. Appends one evaluation
// row per eval_interval environment steps to `log`.
BasePolicy train_base_policy(const SacHyperparams& hp, FrameMode frame, std::uint64_t seed,
                             std::vector<BaseTrainRow>* log = nullptr,
                             const ManipulatorModel& model = {});

// Success = collision-free AND IK available, deterministic actions, fresh
// single-object episodes.
BaseEvalResult evaluate_base_policy(const BasePolicy& policy, int episodes, std::uint64_t seed);

// Checkpoint I/O (JSON; bit-exact round-trip).
void save_base_policy(const BasePolicy& policy, const std::string& path);
BasePolicy load_base_policy(const std::string& path);

void write_base_log_csv(const std::vector<BaseTrainRow>& log, const std::string& path);

}  // namespace pickplan
