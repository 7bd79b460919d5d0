#include "pickplan/base_policy.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pickplan/cost.hpp"
#include "pickplan/errors.hpp"
#include "pickplan/io.hpp"
#include "pickplan/nn/layers.hpp"

namespace pickplan {

namespace {

using nn::Binding;
using nn::Mat;
using nn::Tape;
using nn::Var;

constexpr int kObsDim = 8;
constexpr int kActDim = 3;

std::vector<int> actor_sizes(const SacHyperparams& hp) {
  std::vector<int> s{kObsDim};
  s.insert(s.end(), hp.hidden.begin(), hp.hidden.end());
  s.push_back(2 * kActDim);  // mean and log_std
  return s;
}

std::vector<int> critic_sizes(const SacHyperparams& hp) {
  std::vector<int> s{kObsDim + kActDim};
  s.insert(s.end(), hp.hidden.begin(), hp.hidden.end());
  s.push_back(1);
  return s;
}

// Parameter suffixes of one MLP ("w0", "b0", ...), used to mirror critics
// into their target copies.
std::vector<std::string> mlp_suffixes(const std::vector<int>& sizes) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    out.push_back("w" + std::to_string(i));
    out.push_back("b" + std::to_string(i));
  }
  return out;
}

struct ActorOut {
  Var mean;
  Var log_std;
};

ActorOut actor_forward(Binding& bind, const SacHyperparams& hp, Var obs, bool req_grad) {
  Var net = nn::mlp_forward(bind, "actor", obs, actor_sizes(hp), nn::Activation::Relu, req_grad);
  return ActorOut{bind.tape().slice_cols(net, 0, kActDim),
                  bind.tape().slice_cols(net, kActDim, kActDim)};
}

Var critic_forward(Binding& bind, const SacHyperparams& hp, const std::string& prefix, Var obs,
                   Var act, bool req_grad) {
  Var in = bind.tape().concat_cols(obs, act);
  return nn::mlp_forward(bind, prefix, in, critic_sizes(hp), nn::Activation::Relu, req_grad);
}

BasePolicy make_base_policy(const SacHyperparams& hp, FrameMode frame, std::uint64_t seed,
                            const ManipulatorModel& model) {
  BasePolicy policy;
  policy.hp = hp;
  policy.frame = frame;
  policy.model = model;
  policy.params.init_seed = seed;

  Rng rng(derive_seed(seed, 0));
  nn::mlp_init(policy.params, "actor", actor_sizes(hp), rng);
  nn::mlp_init(policy.params, "q1", critic_sizes(hp), rng);
  nn::mlp_init(policy.params, "q2", critic_sizes(hp), rng);
  policy.params.add("log_alpha", 1, 1);  // starts at temperature 1

  for (const auto& suffix : mlp_suffixes(critic_sizes(hp))) {
    const Mat& q1 = policy.params.at("q1/" + suffix);
    policy.params.add("q1t/" + suffix, static_cast<int>(q1.rows()),
                      static_cast<int>(q1.cols())) = q1;
    const Mat& q2 = policy.params.at("q2/" + suffix);
    policy.params.add("q2t/" + suffix, static_cast<int>(q2.rows()),
                      static_cast<int>(q2.cols())) = q2;
  }
  return policy;
}

Mat observation_row(const Pose2& robot, const Pose2& object) {
  const auto obs = base_pose_observation(robot, object);
  Mat row(1, kObsDim);
  for (int i = 0; i < kObsDim; ++i) row(0, i) = obs[static_cast<std::size_t>(i)];
  return row;
}

struct Replay {
  Mat obs;
  Mat act;
  Eigen::VectorXd reward;
  int capacity = 0;
  int size = 0;
  int head = 0;

  explicit Replay(int cap)
      : obs(Mat::Zero(cap, kObsDim)),
        act(Mat::Zero(cap, kActDim)),
        reward(Eigen::VectorXd::Zero(cap)),
        capacity(cap) {}

  void push(const Mat& o, const std::array<double, 3>& a, double r) {
    obs.row(head) = o.row(0);
    for (int i = 0; i < kActDim; ++i) act(head, i) = a[static_cast<std::size_t>(i)];
    reward(head) = r;
    head = (head + 1) % capacity;
    if (size < capacity) ++size;
  }
};

void soft_update_targets(nn::ParamStore& params, const SacHyperparams& hp, double tau) {
  for (const auto& suffix : mlp_suffixes(critic_sizes(hp))) {
    for (const char* pair : {"q1", "q2"}) {
      const Mat& src = params.at(std::string(pair) + "/" + suffix);
      Mat& dst = params.at(std::string(pair) + "t/" + suffix);
      dst = tau * src + (1.0 - tau) * dst;
    }
  }
}

void sac_update(BasePolicy& policy, Replay& replay, Rng& rng_replay, Rng& rng_action,
                nn::AdamOptimizer& critic_opt, nn::AdamOptimizer& actor_opt,
                nn::AdamOptimizer& alpha_opt) {
  const SacHyperparams& hp = policy.hp;
  const int batch = std::min(hp.batch, replay.size);

  Mat obs_b(batch, kObsDim), act_b(batch, kActDim), y(batch, 1);
  for (int b = 0; b < batch; ++b) {
    const int i = rng_replay.uniform_int(replay.size);
    obs_b.row(b) = replay.obs.row(i);
    act_b.row(b) = replay.act.row(i);
    y(b, 0) = replay.reward(i);  // single-step episodes: the target is the reward
  }

  {  // critic regression toward the reward targets
    Tape tape;
    Binding bind(tape, policy.params);
    Var obs_v = tape.constant(obs_b);
    Var act_v = tape.constant(act_b);
    Var y_v = tape.constant(y);
    Var q1 = critic_forward(bind, hp, "q1", obs_v, act_v, true);
    Var q2 = critic_forward(bind, hp, "q2", obs_v, act_v, true);
    Var loss = tape.add(tape.mean(tape.square(tape.sub(q1, y_v))),
                        tape.mean(tape.square(tape.sub(q2, y_v))));
    tape.backward(loss);
    nn::GradMap grads;
    bind.collect_grads(grads);
    critic_opt.step(policy.params, grads);
  }

  double mean_log_prob = 0.0;
  {  // actor ascends min(Q1, Q2) with entropy regularization
    Tape tape;
    Binding bind(tape, policy.params);
    Var obs_v = tape.constant(obs_b);
    ActorOut out = actor_forward(bind, hp, obs_v, true);
    Mat noise(batch, kActDim);
    for (int r = 0; r < batch; ++r)
      for (int c = 0; c < kActDim; ++c) noise(r, c) = rng_action.normal();
    nn::SquashedSample sample = squashed_gaussian(tape, out.mean, out.log_std, noise);
    Var q1 = critic_forward(bind, hp, "q1", obs_v, sample.action, false);
    Var q2 = critic_forward(bind, hp, "q2", obs_v, sample.action, false);
    Var qmin = tape.minimum(q1, q2);
    const double alpha = std::exp(policy.params.at("log_alpha")(0, 0));
    Var loss = tape.mean(tape.sub(tape.scale(sample.log_prob, alpha), qmin));
    tape.backward(loss);
    nn::GradMap grads;
    bind.collect_grads(grads);
    actor_opt.step(policy.params, grads);
    mean_log_prob = sample.log_prob.val().mean();
  }

  {  // temperature: d/dlog_alpha of -log_alpha * (log_prob + target) is closed form
    nn::GradMap grads;
    grads["log_alpha"] = Mat::Constant(1, 1, -(mean_log_prob + hp.entropy_target));
    alpha_opt.step(policy.params, grads);
  }

  soft_update_targets(policy.params, hp, hp.tau);
}

std::array<double, 3> sample_action(const BasePolicy& policy, const Mat& obs_row,
                                    Rng& rng_action) {
  Tape tape;
  Binding bind(tape, const_cast<nn::ParamStore&>(policy.params));
  Var obs_v = tape.constant(obs_row);
  ActorOut out = actor_forward(bind, policy.hp, obs_v, false);
  Mat noise(1, kActDim);
  for (int c = 0; c < kActDim; ++c) noise(0, c) = rng_action.normal();
  nn::SquashedSample sample = squashed_gaussian(tape, out.mean, out.log_std, noise);
  return {sample.action.val()(0, 0), sample.action.val()(0, 1), sample.action.val()(0, 2)};
}

std::string hyperparams_json(const BasePolicy& policy) {
  nlohmann::ordered_json j;
  j["kind"] = "base";
  j["frame"] = frame_mode_name(policy.frame);
  j["lr"] = policy.hp.lr;
  j["hidden"] = policy.hp.hidden;
  j["batch"] = policy.hp.batch;
  j["replay_capacity"] = policy.hp.replay_capacity;
  j["warmup_steps"] = policy.hp.warmup_steps;
  j["tau"] = policy.hp.tau;
  j["discount"] = policy.hp.discount;
  j["entropy_target"] = policy.hp.entropy_target;
  j["total_steps"] = policy.hp.total_steps;
  j["eval_interval"] = policy.hp.eval_interval;
  j["eval_episodes"] = policy.hp.eval_episodes;
  j["start_annulus"] = {policy.hp.start_annulus[0], policy.hp.start_annulus[1]};
  return j.dump();
}

}  // namespace

std::string frame_mode_name(FrameMode m) {
  return m == FrameMode::Object ? "object" : "table";
}

FrameMode frame_mode_from_name(const std::string& s) {
  if (s == "object") return FrameMode::Object;
  if (s == "table") return FrameMode::Table;
  throw Error("unknown frame mode: " + s);
}

std::array<double, 8> base_pose_observation(const Pose2& robot, const Pose2& object) {
  return {robot.x,  robot.y,  std::cos(robot.theta),  std::sin(robot.theta),
          object.x, object.y, std::cos(object.theta), std::sin(object.theta)};
}

Pose2 map_base_action(const std::array<double, 3>& raw, const ObjectState& object,
                      const TableRect& table, FrameMode mode) {
  const Pose2 delta{kActionPosBound * raw[0], kActionPosBound * raw[1], M_PI * raw[2]};
  if (mode == FrameMode::Object) return transform(delta, object.pose);
  return transform(delta, table.center);
}

double reward_base(const Scene& scene, const Pose2& action_pose, const ManipulatorModel& model) {
  if (scene.objects.size() != 1)
    throw Error("reward_base: expects a single-object scene");
  const ObjectState& obj = scene.objects.front();
  if (footprint_collides(action_pose, scene.table)) return kRewardCollision;
  if (!ik_available(model, action_pose, obj.pose, scene.table)) return 0.0;
  const double t_nav = nav_time(scene.robot_start, action_pose);
  const double t_grasp = grasp_time(model, action_pose, obj);
  return kRewardGraspBonus + kRewardNavWeight / (1.0 + t_nav) +
         kRewardGraspWeight / (1.0 + t_grasp);
}

Pose2 predict_base_pose(const BasePolicy& policy, const Pose2& robot, const ObjectState& object,
                        const TableRect& table) {
  Tape tape;
  Binding bind(tape, const_cast<nn::ParamStore&>(policy.params));
  Var obs_v = tape.constant(observation_row(robot, object.pose));
  ActorOut out = actor_forward(bind, policy.hp, obs_v, false);
  Var action = tape.tanh(out.mean);
  const std::array<double, 3> raw{action.val()(0, 0), action.val()(0, 1), action.val()(0, 2)};
  return map_base_action(raw, object, table, policy.frame);
}

BasePolicy train_base_policy(const SacHyperparams& hp, FrameMode frame, std::uint64_t seed,
                             std::vector<BaseTrainRow>* log, const ManipulatorModel& model) {
  BasePolicy policy = make_base_policy(hp, frame, seed, model);

  nn::AdamOptimizer critic_opt(hp.lr), actor_opt(hp.lr), alpha_opt(hp.lr);
  Replay replay(hp.replay_capacity);
  Rng rng_action(derive_seed(seed, 1));
  Rng rng_replay(derive_seed(seed, 2));
  Rng rng_warmup(derive_seed(seed, 3));
  const std::uint64_t scene_stream = derive_seed(seed, 4);
  const std::uint64_t eval_stream = derive_seed(seed, 5);

  for (long step = 1; step <= hp.total_steps; ++step) {
    const Scene scene = sample_scene(derive_seed(scene_stream, static_cast<std::uint64_t>(step)),
                                     1, hp.start_annulus);
    const ObjectState& obj = scene.objects.front();
    const Mat obs = observation_row(scene.robot_start, obj.pose);

    std::array<double, 3> raw{};
    if (step <= hp.warmup_steps) {
      for (auto& v : raw) v = rng_warmup.uniform(-1.0, 1.0);
    } else {
      raw = sample_action(policy, obs, rng_action);
    }
    const Pose2 pose = map_base_action(raw, obj, scene.table, frame);
    replay.push(obs, raw, reward_base(scene, pose, model));

    if (step >= hp.warmup_steps && replay.size >= hp.batch)
      sac_update(policy, replay, rng_replay, rng_action, critic_opt, actor_opt, alpha_opt);

    if (log != nullptr && step % hp.eval_interval == 0) {
      const BaseEvalResult eval = evaluate_base_policy(
          policy, hp.eval_episodes, derive_seed(eval_stream, static_cast<std::uint64_t>(step)));
      log->push_back(BaseTrainRow{step, eval.mean_reward, eval.success_rate});
    }
  }
  return policy;
}

BaseEvalResult evaluate_base_policy(const BasePolicy& policy, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw Error("evaluate_base_policy: episodes must be positive");
  int successes = 0;
  double reward_sum = 0.0;
  for (int i = 0; i < episodes; ++i) {
    const Scene scene = sample_scene(derive_seed(seed, static_cast<std::uint64_t>(i)), 1,
                                     policy.hp.start_annulus);
    const ObjectState& obj = scene.objects.front();
    const Pose2 pose = predict_base_pose(policy, scene.robot_start, obj, scene.table);
    reward_sum += reward_base(scene, pose, policy.model);
    if (!footprint_collides(pose, scene.table) &&
        ik_available(policy.model, pose, obj.pose, scene.table))
      ++successes;
  }
  BaseEvalResult out;
  out.success_rate = static_cast<double>(successes) / episodes;
  out.mean_reward = reward_sum / episodes;
  return out;
}

void save_base_policy(const BasePolicy& policy, const std::string& path) {
  nn::save_checkpoint(policy.params, hyperparams_json(policy), path);
}

BasePolicy load_base_policy(const std::string& path) {
  BasePolicy policy;
  std::string hp_json;
  nn::load_checkpoint(path, policy.params, &hp_json);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(hp_json);
    if (j.at("kind").get<std::string>() != "base")
      throw IoError("load_base_policy: checkpoint is not a base policy");
    policy.frame = frame_mode_from_name(j.at("frame").get<std::string>());
    policy.hp.lr = j.at("lr").get<double>();
    policy.hp.hidden = j.at("hidden").get<std::vector<int>>();
    policy.hp.batch = j.at("batch").get<int>();
    policy.hp.replay_capacity = j.at("replay_capacity").get<int>();
    policy.hp.warmup_steps = j.at("warmup_steps").get<int>();
    policy.hp.tau = j.at("tau").get<double>();
    policy.hp.discount = j.at("discount").get<double>();
    policy.hp.entropy_target = j.at("entropy_target").get<double>();
    policy.hp.total_steps = j.at("total_steps").get<long>();
    policy.hp.eval_interval = j.at("eval_interval").get<long>();
    policy.hp.eval_episodes = j.at("eval_episodes").get<int>();
    const auto annulus = j.at("start_annulus").get<std::vector<double>>();
    if (annulus.size() == 2) policy.hp.start_annulus = {annulus[0], annulus[1]};
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("load_base_policy: bad hyperparams: ") + e.what());
  }
  return policy;
}

void write_base_log_csv(const std::vector<BaseTrainRow>& log, const std::string& path) {
  std::ostringstream out;
  out << "step,mean_reward,success_rate\n";
  for (const auto& row : log)
    out << row.step << ',' << fmt_double(row.mean_reward) << ',' << fmt_double(row.success_rate)
        << '\n';
  write_file(path, out.str());
}

}  // namespace pickplan
