#include "pickplan/seq_policy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pickplan/cost.hpp"
#include "pickplan/errors.hpp"
#include "pickplan/io.hpp"

namespace pickplan {

namespace {

using nn::Binding;
using nn::Mat;
using nn::Tape;
using nn::Var;

constexpr int kObjFeat = 9;
constexpr int kRobotFeat = 4;

std::string enc_prefix(int layer) { return "enc" + std::to_string(layer); }

std::vector<int> decoder_sizes(const SeqHyperparams& hp) {
  std::vector<int> s{hp.width};
  s.insert(s.end(), hp.decoder_hidden.begin(), hp.decoder_hidden.end());
  s.push_back(1);
  return s;
}

// Encoder stack shared by every forward path; optionally reports each layer's
// attention matrix.
Var encode_stack(Binding& bind, const SeqPolicy& policy, const SceneGraph& graph, bool req_grad,
                 std::vector<Var>* alphas) {
  Tape& tape = bind.tape();
  Var obj = tape.constant(graph.object_features);
  Var robot = tape.constant(graph.robot_features);
  for (int layer = 0; layer < policy.hp.encoder_layers; ++layer) {
    nn::GatOutput out = nn::gat_layer(bind, enc_prefix(layer), obj, robot, graph.neighbor_mask,
                                      policy.hp.attention, req_grad);
    obj = out.objects;
    robot = out.robot;
    if (alphas != nullptr) alphas->push_back(out.alpha);
  }
  return obj;
}

Var decode_logits(Binding& bind, const SeqPolicy& policy, Var embeddings, bool req_grad) {
  return nn::mlp_forward(bind, "dec", embeddings, decoder_sizes(policy.hp),
                         nn::Activation::Relu, req_grad);
}

int sample_row(const Mat& log_probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (int i = 0; i < log_probs.rows(); ++i) {
    cum += std::exp(log_probs(i, 0));
    if (u < cum) return i;
  }
  return static_cast<int>(log_probs.rows()) - 1;
}

int argmax_row(const Mat& logits) {
  int best = 0;
  for (int i = 1; i < logits.rows(); ++i)
    if (logits(i, 0) > logits(best, 0)) best = i;
  return best;
}

// One composite-policy episode. When `trace` is non-null the per-step chosen
// log-probabilities are recorded on its tape with parameter gradients enabled.
struct TraceSink {
  Tape* tape = nullptr;
  Binding* bind = nullptr;
  std::vector<Var> chosen_log_probs;
};

RolloutResult rollout_impl(const SeqPolicy& seq, const BasePolicy& base, const Scene& scene,
                           RolloutMode mode, Rng& rng, TraceSink* trace) {
  RolloutResult result;
  std::vector<ObjectState> remaining = scene.objects;
  Pose2 current = scene.robot_start;
  const int max_steps = static_cast<int>(scene.objects.size());

  for (int step_i = 0; step_i < max_steps && !remaining.empty(); ++step_i) {
    const SceneGraph graph = build_scene_graph(current, remaining);

    Tape local_tape;
    nn::ParamStore& store = const_cast<nn::ParamStore&>(seq.params);
    Binding local_bind(local_tape, store);
    Tape& tape = trace != nullptr ? *trace->tape : local_tape;
    Binding& bind = trace != nullptr ? *trace->bind : local_bind;
    const bool req_grad = trace != nullptr;

    Var embeddings = encode_stack(bind, seq, graph, req_grad, nullptr);
    Var logits = decode_logits(bind, seq, embeddings, req_grad);
    Var log_probs = tape.log_softmax_vec(logits);

    const int row = mode == RolloutMode::Sample ? sample_row(log_probs.val(), rng)
                                                : argmax_row(logits.val());
    if (trace != nullptr) trace->chosen_log_probs.push_back(tape.entry(log_probs, row, 0));

    RolloutStep step;
    step.object_id = graph.object_ids[static_cast<std::size_t>(row)];
    step.log_prob = log_probs.val()(row, 0);

    const ObjectState obj = remaining[static_cast<std::size_t>(row)];
    step.base = predict_base_pose(base, current, obj, scene.table);

    if (footprint_collides(step.base, scene.table)) {
      step.reward = -seq.hp.gamma5 * seq.hp.t_fail * static_cast<double>(remaining.size());
      step.grasped = false;
      result.collided = true;
      result.total_reward += step.reward;
      result.steps.push_back(step);
      break;
    }

    step.reward = -seq.hp.gamma5 * nav_time(current, step.base);
    step.grasped = ik_available(base.model, step.base, obj.pose, scene.table);
    if (step.grasped) {
      remaining.erase(remaining.begin() + row);
      ++result.grasped;
    }
    current = step.base;
    result.total_reward += step.reward;
    result.steps.push_back(step);
  }
  return result;
}

std::string hyperparams_json(const SeqPolicy& policy) {
  nlohmann::ordered_json j;
  j["kind"] = "seq";
  j["encoder_layers"] = policy.hp.encoder_layers;
  j["width"] = policy.hp.width;
  j["decoder_hidden"] = policy.hp.decoder_hidden;
  j["lr"] = policy.hp.lr;
  j["gamma5"] = policy.hp.gamma5;
  j["batch_episodes"] = policy.hp.batch_episodes;
  j["baseline_eval_scenes"] = policy.hp.baseline_eval_scenes;
  j["replace_p"] = policy.hp.replace_p;
  j["attention"] = attention_mode_name(policy.hp.attention);
  j["baseline"] = baseline_mode_name(policy.hp.baseline);
  j["epochs"] = policy.hp.epochs;
  j["n_objects"] = policy.hp.n_objects;
  j["start_annulus"] = {policy.hp.start_annulus[0], policy.hp.start_annulus[1]};
  j["t_fail"] = policy.hp.t_fail;
  return j.dump();
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

std::string attention_mode_name(nn::AttentionMode m) {
  return m == nn::AttentionMode::Learned ? "learned" : "uniform";
}

nn::AttentionMode attention_mode_from_name(const std::string& s) {
  if (s == "learned") return nn::AttentionMode::Learned;
  if (s == "uniform") return nn::AttentionMode::Uniform;
  throw Error("unknown attention mode: " + s);
}

std::string baseline_mode_name(BaselineMode m) {
  return m == BaselineMode::GreedyRollout ? "greedy" : "none";
}

BaselineMode baseline_mode_from_name(const std::string& s) {
  if (s == "greedy") return BaselineMode::GreedyRollout;
  if (s == "none") return BaselineMode::None;
  throw Error("unknown baseline mode: " + s);
}

SceneGraph build_scene_graph(const Pose2& robot, const std::vector<ObjectState>& remaining) {
  if (remaining.empty()) throw Error("build_scene_graph: no remaining objects");
  const int m = static_cast<int>(remaining.size());
  SceneGraph graph;
  graph.object_features = Mat::Zero(m, kObjFeat);
  for (int i = 0; i < m; ++i) {
    const ObjectState& o = remaining[static_cast<std::size_t>(i)];
    if (o.class_id < 0 || o.class_id >= kNumObjectClasses)
      throw Error("build_scene_graph: class_id out of range");
    graph.object_features(i, 0) = o.pose.x;
    graph.object_features(i, 1) = o.pose.y;
    graph.object_features(i, 2) = std::cos(o.pose.theta);
    graph.object_features(i, 3) = std::sin(o.pose.theta);
    graph.object_features(i, 4 + o.class_id) = 1.0;
    graph.object_ids.push_back(o.id);
  }
  graph.robot_features = Mat(1, kRobotFeat);
  graph.robot_features << robot.x, robot.y, std::cos(robot.theta), std::sin(robot.theta);
  graph.neighbor_mask = Mat::Ones(m, m) - Mat::Identity(m, m);
  return graph;
}

SeqPolicy make_seq_policy(const SeqHyperparams& hp, std::uint64_t init_seed) {
  SeqPolicy policy;
  policy.hp = hp;
  policy.params.init_seed = init_seed;
  Rng rng(derive_seed(init_seed, 0));
  for (int layer = 0; layer < hp.encoder_layers; ++layer) {
    const int obj_in = layer == 0 ? kObjFeat : hp.width;
    const int robot_in = layer == 0 ? kRobotFeat : hp.width;
    nn::gat_init(policy.params, enc_prefix(layer), obj_in, robot_in, hp.width, rng);
  }
  nn::mlp_init(policy.params, "dec", decoder_sizes(hp), rng);
  return policy;
}

Var encode(Binding& bind, const SeqPolicy& policy, const SceneGraph& graph,
           bool params_require_grad) {
  return encode_stack(bind, policy, graph, params_require_grad, nullptr);
}

std::vector<Mat> encode_attention_rows(const SeqPolicy& policy, const SceneGraph& graph) {
  Tape tape;
  Binding bind(tape, const_cast<nn::ParamStore&>(policy.params));
  std::vector<Var> alphas;
  encode_stack(bind, policy, graph, false, &alphas);
  std::vector<Mat> sums;
  for (const Var& a : alphas) sums.push_back(a.val().rowwise().sum());
  return sums;
}

std::vector<double> grasp_probabilities(const SeqPolicy& policy, const SceneGraph& graph,
                                        const std::vector<bool>* mask) {
  const int m = static_cast<int>(graph.object_ids.size());
  if (mask != nullptr && static_cast<int>(mask->size()) != m)
    throw Error("grasp_probabilities: mask size mismatch");

  Tape tape;
  Binding bind(tape, const_cast<nn::ParamStore&>(policy.params));
  Var embeddings = encode_stack(bind, policy, graph, false, nullptr);
  const Mat logits = decode_logits(bind, policy, embeddings, false).val();

  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i)
    if ((mask == nullptr || !(*mask)[static_cast<std::size_t>(i)]) && logits(i, 0) > mx)
      mx = logits(i, 0);
  if (!std::isfinite(mx)) throw EmptyCandidateSet("grasp_probabilities: everything masked");

  std::vector<double> probs(static_cast<std::size_t>(m), 0.0);
  double denom = 0.0;
  for (int i = 0; i < m; ++i) {
    if (mask != nullptr && (*mask)[static_cast<std::size_t>(i)]) continue;
    denom += std::exp(logits(i, 0) - mx);
  }
  for (int i = 0; i < m; ++i) {
    if (mask != nullptr && (*mask)[static_cast<std::size_t>(i)]) continue;
    probs[static_cast<std::size_t>(i)] = std::exp(logits(i, 0) - mx) / denom;
  }
  return probs;
}

RolloutResult rollout(const SeqPolicy& seq, const BasePolicy& base, const Scene& scene,
                      RolloutMode mode, Rng& rng) {
  return rollout_impl(seq, base, scene, mode, rng, nullptr);
}

SeqPolicy train_seq_policy(const SeqHyperparams& hp, const BasePolicy& base, std::uint64_t seed,
                           std::vector<SeqTrainRow>* log) {
  SeqPolicy policy = make_seq_policy(hp, seed);
  SeqPolicy baseline = policy;  // frozen snapshot

  nn::AdamOptimizer opt(hp.lr);
  Rng rng_sample(derive_seed(seed, 1));
  const std::uint64_t scene_stream = derive_seed(seed, 2);
  const std::uint64_t eval_stream = derive_seed(seed, 3);

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    const std::uint64_t epoch_scenes =
        derive_seed(scene_stream, static_cast<std::uint64_t>(epoch));

    nn::GradMap accum;
    double return_sum = 0.0;
    for (int e = 0; e < hp.batch_episodes; ++e) {
      const Scene scene = sample_scene(derive_seed(epoch_scenes, static_cast<std::uint64_t>(e)),
                                       hp.n_objects, hp.start_annulus);

      Tape tape;
      Binding bind(tape, policy.params);
      TraceSink trace{&tape, &bind, {}};
      const RolloutResult sampled =
          rollout_impl(policy, base, scene, RolloutMode::Sample, rng_sample, &trace);
      return_sum += sampled.total_reward;

      double bl = 0.0;
      if (hp.baseline == BaselineMode::GreedyRollout)
        bl = rollout(baseline, base, scene, RolloutMode::Greedy, rng_sample).total_reward;
      const double advantage = sampled.total_reward - bl;

      Var log_prob_sum = trace.chosen_log_probs.front();
      for (std::size_t i = 1; i < trace.chosen_log_probs.size(); ++i)
        log_prob_sum = tape.add(log_prob_sum, trace.chosen_log_probs[i]);
      Var loss = tape.scale(log_prob_sum, -advantage);
      tape.backward(loss);

      nn::GradMap grads;
      bind.collect_grads(grads);
      for (auto& [name, g] : grads) {
        auto it = accum.find(name);
        if (it == accum.end())
          accum.emplace(name, g);
        else
          it->second += g;
      }
    }
    for (auto& [name, g] : accum) g /= static_cast<double>(hp.batch_episodes);
    opt.step(policy.params, accum);

    SeqTrainRow row;
    row.epoch = epoch;
    row.mean_return = return_sum / hp.batch_episodes;

    if (hp.baseline == BaselineMode::GreedyRollout) {
      const std::uint64_t eval_seed = derive_seed(eval_stream, static_cast<std::uint64_t>(epoch));
      double mean_diff = 0.0, mean_bl = 0.0;
      std::vector<double> diffs;
      diffs.reserve(static_cast<std::size_t>(hp.baseline_eval_scenes));
      for (int i = 0; i < hp.baseline_eval_scenes; ++i) {
        const Scene scene = sample_scene(derive_seed(eval_seed, static_cast<std::uint64_t>(i)),
                                         hp.n_objects, hp.start_annulus);
        const double cur = rollout(policy, base, scene, RolloutMode::Greedy, rng_sample).total_reward;
        const double old = rollout(baseline, base, scene, RolloutMode::Greedy, rng_sample).total_reward;
        diffs.push_back(cur - old);
        mean_diff += cur - old;
        mean_bl += old;
      }
      const int n = hp.baseline_eval_scenes;
      mean_diff /= n;
      mean_bl /= n;
      double var = 0.0;
      for (double d : diffs) var += (d - mean_diff) * (d - mean_diff);
      var /= std::max(1, n - 1);
      const double sd = std::sqrt(var);
      double p_value = 1.0;
      if (sd < 1e-12) {
        p_value = mean_diff > 0.0 ? 0.0 : 1.0;
      } else {
        const double t = mean_diff / (sd / std::sqrt(static_cast<double>(n)));
        p_value = 1.0 - normal_cdf(t);
      }
      row.baseline_return = mean_bl;
      if (mean_diff > 0.0 && p_value < hp.replace_p) {
        baseline.params = policy.params;
        row.replaced = true;
      }
    }

    if (log != nullptr) log->push_back(row);
  }
  return policy;
}

double evaluate_seq_policy(const SeqPolicy& seq, const BasePolicy& base, int scenes,
                           std::uint64_t seed) {
  if (scenes < 1) throw Error("evaluate_seq_policy: scenes must be positive");
  Rng rng(seed);  // unused by greedy rollouts, required by the signature
  double sum = 0.0;
  for (int i = 0; i < scenes; ++i) {
    const Scene scene = sample_scene(derive_seed(seed, static_cast<std::uint64_t>(i)),
                                     seq.hp.n_objects, seq.hp.start_annulus);
    sum += rollout(seq, base, scene, RolloutMode::Greedy, rng).total_reward;
  }
  return sum / scenes;
}

Plan plan_learned(const SeqPolicy& seq, const BasePolicy& base, const Scene& scene) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(0);  // greedy rollouts draw nothing
  const RolloutResult result = rollout(seq, base, scene, RolloutMode::Greedy, rng);

  Plan plan;
  plan.planner_name = "learned";
  std::vector<int> attempted;
  for (const auto& step : result.steps) {
    if (footprint_collides(step.base, scene.table)) break;  // truncate at the colliding stop
    if (std::find(attempted.begin(), attempted.end(), step.object_id) != attempted.end())
      continue;  // repeated attempt at the same object adds no new assignment
    attempted.push_back(step.object_id);
    plan.stops.push_back(Stop{step.base, {step.object_id}});
  }
  plan.predicted_cost = plan_cost(scene, plan, base.model);
  plan.planning_wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return plan;
}

void save_seq_policy(const SeqPolicy& policy, const std::string& path) {
  nn::save_checkpoint(policy.params, hyperparams_json(policy), path);
}

SeqPolicy load_seq_policy(const std::string& path) {
  SeqPolicy policy;
  std::string hp_json;
  nn::load_checkpoint(path, policy.params, &hp_json);
  try {
    const nlohmann::json j = nlohmann::json::parse(hp_json);
    if (j.at("kind").get<std::string>() != "seq")
      throw IoError("load_seq_policy: checkpoint is not a sequence policy");
    policy.hp.encoder_layers = j.at("encoder_layers").get<int>();
    policy.hp.width = j.at("width").get<int>();
    policy.hp.decoder_hidden = j.at("decoder_hidden").get<std::vector<int>>();
    policy.hp.lr = j.at("lr").get<double>();
    policy.hp.gamma5 = j.at("gamma5").get<double>();
    policy.hp.batch_episodes = j.at("batch_episodes").get<int>();
    policy.hp.baseline_eval_scenes = j.at("baseline_eval_scenes").get<int>();
    policy.hp.replace_p = j.at("replace_p").get<double>();
    policy.hp.attention = attention_mode_from_name(j.at("attention").get<std::string>());
    policy.hp.baseline = baseline_mode_from_name(j.at("baseline").get<std::string>());
    policy.hp.epochs = j.at("epochs").get<int>();
    policy.hp.n_objects = j.at("n_objects").get<int>();
    const auto annulus = j.at("start_annulus").get<std::vector<double>>();
    if (annulus.size() == 2) policy.hp.start_annulus = {annulus[0], annulus[1]};
    policy.hp.t_fail = j.at("t_fail").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("load_seq_policy: bad hyperparams: ") + e.what());
  }
  return policy;
}

void write_seq_log_csv(const std::vector<SeqTrainRow>& log, const std::string& path) {
  std::ostringstream out;
  out << "epoch,mean_return,baseline_return,replaced\n";
  for (const auto& row : log)
    out << row.epoch << ',' << fmt_double(row.mean_return) << ','
        << fmt_double(row.baseline_return) << ',' << (row.replaced ? 1 : 0) << '\n';
  write_file(path, out.str());
}

}  // namespace pickplan
