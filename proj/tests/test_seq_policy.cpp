#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>
#include <vector>

#include "pickplan/cost.hpp"
#include "pickplan/errors.hpp"
#include "pickplan/io.hpp"
#include "pickplan/seq_policy.hpp"
#include "pickplan/solvers.hpp"

using namespace pickplan;
using nn::Binding;
using nn::Mat;
using nn::Tape;
using nn::Var;

namespace {

SeqHyperparams tiny_seq_hp() {
  SeqHyperparams hp;
  hp.encoder_layers = 2;
  hp.width = 8;
  hp.decoder_hidden = {8};
  hp.batch_episodes = 4;
  hp.baseline_eval_scenes = 8;
  hp.epochs = 2;
  hp.n_objects = 3;
  return hp;
}

// Base policy with zeroed weights and a scripted final bias: the deterministic
// action is tanh of that bias regardless of the observation, giving a fixed
// object-frame offset. Lets rollouts run without any training.
BasePolicy scripted_base_policy(double raw_y, double raw_theta) {
  BasePolicy bp;
  bp.hp.hidden = {4};
  bp.frame = FrameMode::Object;
  bp.params.add("actor/w0", 8, 4);
  bp.params.add("actor/b0", 1, 4);
  bp.params.add("actor/w1", 4, 6);
  bp.params.add("actor/b1", 1, 6);
  Mat& b1 = bp.params.at("actor/b1");
  b1(0, 1) = std::atanh(raw_y);
  b1(0, 2) = std::atanh(raw_theta);
  return bp;
}

// Objects in a row near the south edge; with scripted_base_policy(-0.55, -0.5)
// every predicted base is collision-free and within grasping range.
Scene row_scene(int n) {
  Scene scene;
  const double xs[] = {-0.8, -0.3, 0.3, 0.8};
  for (int i = 0; i < n; ++i)
    scene.objects.push_back(ObjectState{i, i % kNumObjectClasses, make_pose(xs[i], -0.3, 0.0)});
  scene.robot_start = make_pose(0.0, -2.5, M_PI / 2.0);
  return scene;
}

std::vector<ObjectState> three_objects() {
  return {ObjectState{0, 2, make_pose(0.3, -0.1, 0.7)},
          ObjectState{1, 0, make_pose(-0.5, 0.2, -1.2)},
          ObjectState{2, 4, make_pose(0.7, 0.3, 2.0)}};
}

}  // namespace

TEST_CASE("scene graph packs poses, one-hot classes and the neighbor mask") {
  const auto objs = three_objects();
  const Pose2 robot = make_pose(1.0, -2.0, M_PI / 3.0);
  const SceneGraph g = build_scene_graph(robot, objs);

  REQUIRE(g.object_features.rows() == 3);
  REQUIRE(g.object_features.cols() == 9);
  CHECK(g.object_features(0, 0) == 0.3);
  CHECK(g.object_features(0, 1) == -0.1);
  CHECK(g.object_features(0, 2) == doctest::Approx(std::cos(0.7)).epsilon(1e-15));
  CHECK(g.object_features(0, 3) == doctest::Approx(std::sin(0.7)).epsilon(1e-15));
  // class 2 one-hot occupies column 4 + 2
  CHECK(g.object_features(0, 6) == 1.0);
  CHECK(g.object_features(0, 4) == 0.0);
  CHECK(g.object_features(1, 4) == 1.0);  // class 0
  CHECK(g.object_features(2, 8) == 1.0);  // class 4
  CHECK(g.object_features.row(0).sum() ==
        doctest::Approx(0.3 - 0.1 + std::cos(0.7) + std::sin(0.7) + 1.0).epsilon(1e-12));

  REQUIRE(g.robot_features.rows() == 1);
  REQUIRE(g.robot_features.cols() == 4);
  CHECK(g.robot_features(0, 0) == 1.0);
  CHECK(g.robot_features(0, 1) == -2.0);

  REQUIRE(g.neighbor_mask.rows() == 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(g.neighbor_mask(i, j) == (i == j ? 0.0 : 1.0));

  CHECK(g.object_ids == std::vector<int>{0, 1, 2});
}

TEST_CASE("scene graph rejects empty input and bad classes") {
  CHECK_THROWS_AS(build_scene_graph(make_pose(0, 0, 0), {}), Error);
  std::vector<ObjectState> bad{ObjectState{0, kNumObjectClasses, make_pose(0, 0, 0)}};
  CHECK_THROWS_AS(build_scene_graph(make_pose(0, 0, 0), bad), Error);
}

TEST_CASE("a single remaining object has probability exactly one") {
  const SeqPolicy policy = make_seq_policy(tiny_seq_hp(), 7);
  std::vector<ObjectState> one{ObjectState{3, 1, make_pose(0.2, 0.1, 0.0)}};
  const SceneGraph g = build_scene_graph(make_pose(0, -2, M_PI / 2), one);
  const auto probs = grasp_probabilities(policy, g);
  REQUIRE(probs.size() == 1);
  CHECK(probs[0] == 1.0);
}

TEST_CASE("grasp probabilities sum to one and masked rows are exactly zero") {
  const SeqPolicy policy = make_seq_policy(tiny_seq_hp(), 7);
  Scene scene = sample_scene(31, 5, {2.5, 3.0});
  const SceneGraph g = build_scene_graph(scene.robot_start, scene.objects);

  const auto open = grasp_probabilities(policy, g);
  double sum = 0.0;
  for (double p : open) {
    CHECK(p > 0.0);
    sum += p;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<bool> mask{false, true, false, true, false};
  const auto masked = grasp_probabilities(policy, g, &mask);
  CHECK(masked[1] == 0.0);
  CHECK(masked[3] == 0.0);
  double msum = 0.0;
  for (double p : masked) msum += p;
  CHECK(msum == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<bool> all(5, true);
  CHECK_THROWS_AS(grasp_probabilities(policy, g, &all), EmptyCandidateSet);
  std::vector<bool> wrong(4, false);
  CHECK_THROWS_AS(grasp_probabilities(policy, g, &wrong), Error);
}

TEST_CASE("objects with identical features get identical probabilities") {
  const SeqPolicy policy = make_seq_policy(tiny_seq_hp(), 9);
  std::vector<ObjectState> objs{ObjectState{0, 1, make_pose(0.4, -0.2, 0.3)},
                                ObjectState{1, 1, make_pose(0.4, -0.2, 0.3)},
                                ObjectState{2, 3, make_pose(-0.6, 0.1, -1.0)}};
  const SceneGraph g = build_scene_graph(make_pose(0, -2.7, M_PI / 2), objs);
  const auto probs = grasp_probabilities(policy, g);
  CHECK(probs[0] == doctest::Approx(probs[1]).epsilon(1e-12));
  CHECK(std::abs(probs[0] - probs[2]) > 1e-12);  // the distinct object differs
}

TEST_CASE("encoder embeddings are equivariant to object permutations") {
  const SeqPolicy policy = make_seq_policy(tiny_seq_hp(), 11);
  Scene scene = sample_scene(55, 4, {2.5, 3.0});
  const SceneGraph g = build_scene_graph(scene.robot_start, scene.objects);

  std::vector<int> perm{2, 0, 3, 1};
  std::vector<ObjectState> shuffled;
  for (int i : perm) shuffled.push_back(scene.objects[static_cast<std::size_t>(i)]);
  const SceneGraph gp = build_scene_graph(scene.robot_start, shuffled);

  Tape t1, t2;
  Binding b1(t1, const_cast<nn::ParamStore&>(policy.params));
  Binding b2(t2, const_cast<nn::ParamStore&>(policy.params));
  const Mat e = encode(b1, policy, g, false).val();
  const Mat ep = encode(b2, policy, gp, false).val();

  for (int r = 0; r < 4; ++r)
    CHECK((ep.row(r) - e.row(perm[static_cast<std::size_t>(r)])).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("attention row sums are one per layer with neighbors present") {
  const SeqPolicy policy = make_seq_policy(tiny_seq_hp(), 13);
  Scene scene = sample_scene(77, 4, {2.5, 3.0});
  const SceneGraph g = build_scene_graph(scene.robot_start, scene.objects);
  const auto rows = encode_attention_rows(policy, g);
  REQUIRE(static_cast<int>(rows.size()) == policy.hp.encoder_layers);
  for (const Mat& layer : rows) {
    REQUIRE(layer.rows() == 4);
    for (int i = 0; i < layer.rows(); ++i)
      CHECK(layer(i, 0) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("learned and uniform attention disagree on probabilities") {
  SeqHyperparams hp = tiny_seq_hp();
  const SeqPolicy learned = make_seq_policy(hp, 17);
  hp.attention = nn::AttentionMode::Uniform;
  const SeqPolicy uniform = make_seq_policy(hp, 17);  // identical parameters
  REQUIRE(learned.params.at("enc0/wg") == uniform.params.at("enc0/wg"));

  Scene scene = sample_scene(91, 4, {2.5, 3.0});
  const SceneGraph g = build_scene_graph(scene.robot_start, scene.objects);
  const auto pl = grasp_probabilities(learned, g);
  const auto pu = grasp_probabilities(uniform, g);
  double diff = 0.0;
  for (std::size_t i = 0; i < pl.size(); ++i) diff = std::max(diff, std::abs(pl[i] - pu[i]));
  CHECK(diff > 1e-9);
}

TEST_CASE("greedy rollout grasps a scripted row scene object by object") {
  const BasePolicy base = scripted_base_policy(-0.55, -0.5);
  const SeqPolicy seq = make_seq_policy(tiny_seq_hp(), 19);
  const Scene scene = row_scene(4);

  Rng rng(1);
  const RolloutResult result = rollout(seq, base, scene, RolloutMode::Greedy, rng);
  REQUIRE(result.steps.size() == 4);
  CHECK(result.grasped == 4);
  CHECK(!result.collided);

  std::set<int> ids;
  double total = 0.0;
  Pose2 current = scene.robot_start;
  for (const auto& step : result.steps) {
    CHECK(step.grasped);
    ids.insert(step.object_id);
    CHECK(step.reward == -seq.hp.gamma5 * nav_time(current, step.base));
    const ObjectState* obj = scene.find_object(step.object_id);
    CHECK(ik_available(base.model, step.base, obj->pose, scene.table));
    current = step.base;
    total += step.reward;
  }
  CHECK(ids.size() == 4);  // no object picked twice
  CHECK(result.total_reward == total);

  Rng rng2(99);  // greedy draws nothing; any seed gives the same episode
  const RolloutResult again = rollout(seq, base, scene, RolloutMode::Greedy, rng2);
  REQUIRE(again.steps.size() == result.steps.size());
  for (std::size_t i = 0; i < again.steps.size(); ++i) {
    CHECK(again.steps[i].object_id == result.steps[i].object_id);
    CHECK(again.steps[i].base.x == result.steps[i].base.x);
    CHECK(again.steps[i].reward == result.steps[i].reward);
  }
}

TEST_CASE("single-object rollout reward is the scaled navigation time") {
  const BasePolicy base = scripted_base_policy(-0.55, -0.5);
  const SeqPolicy seq = make_seq_policy(tiny_seq_hp(), 21);
  const Scene scene = row_scene(1);

  Rng rng(1);
  const RolloutResult result = rollout(seq, base, scene, RolloutMode::Greedy, rng);
  REQUIRE(result.steps.size() == 1);
  REQUIRE(result.grasped == 1);
  const Pose2& b = result.steps.front().base;
  CHECK(result.total_reward == -seq.hp.gamma5 * nav_time(scene.robot_start, b));
}

TEST_CASE("a colliding base prediction ends the episode with the failure charge") {
  const BasePolicy base = scripted_base_policy(0.0, 0.0);  // predicts onto the table
  const SeqPolicy seq = make_seq_policy(tiny_seq_hp(), 23);
  const Scene scene = row_scene(3);

  Rng rng(1);
  const RolloutResult result = rollout(seq, base, scene, RolloutMode::Greedy, rng);
  REQUIRE(result.steps.size() == 1);
  CHECK(result.collided);
  CHECK(result.grasped == 0);
  CHECK(result.total_reward == -seq.hp.gamma5 * seq.hp.t_fail * 3.0);
  CHECK(result.total_reward == -90000.0);
}

TEST_CASE("recorded log-probabilities replay through grasp_probabilities") {
  const BasePolicy base = scripted_base_policy(-0.55, -0.5);
  const SeqPolicy seq = make_seq_policy(tiny_seq_hp(), 25);
  const Scene scene = row_scene(4);

  Rng rng(1);
  const RolloutResult result = rollout(seq, base, scene, RolloutMode::Greedy, rng);
  REQUIRE(result.steps.size() == 4);

  std::vector<ObjectState> remaining = scene.objects;
  Pose2 current = scene.robot_start;
  for (const auto& step : result.steps) {
    const SceneGraph g = build_scene_graph(current, remaining);
    const auto probs = grasp_probabilities(seq, g);
    int row = -1;
    for (std::size_t i = 0; i < g.object_ids.size(); ++i)
      if (g.object_ids[i] == step.object_id) row = static_cast<int>(i);
    REQUIRE(row >= 0);
    CHECK(std::exp(step.log_prob) ==
          doctest::Approx(probs[static_cast<std::size_t>(row)]).epsilon(1e-9));
    // the greedy choice is the argmax
    for (double p : probs) CHECK(probs[static_cast<std::size_t>(row)] >= p);

    REQUIRE(step.grasped);
    remaining.erase(remaining.begin() + row);
    current = step.base;
  }
}

TEST_CASE("sampled rollouts are reproducible for a fixed generator seed") {
  const BasePolicy base = scripted_base_policy(-0.55, -0.5);
  const SeqPolicy seq = make_seq_policy(tiny_seq_hp(), 27);
  const Scene scene = row_scene(4);

  Rng ra(5), rb(5);
  const RolloutResult a = rollout(seq, base, scene, RolloutMode::Sample, ra);
  const RolloutResult b = rollout(seq, base, scene, RolloutMode::Sample, rb);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i)
    CHECK(a.steps[i].object_id == b.steps[i].object_id);
  CHECK(a.total_reward == b.total_reward);
}

TEST_CASE("policy-gradient loss gradients match finite differences") {
  SeqHyperparams hp = tiny_seq_hp();
  SeqPolicy policy = make_seq_policy(hp, 91);
  const SceneGraph graph = build_scene_graph(make_pose(0.1, -2.2, M_PI / 2), three_objects());
  std::vector<int> decoder{hp.width};
  decoder.insert(decoder.end(), hp.decoder_hidden.begin(), hp.decoder_hidden.end());
  decoder.push_back(1);
  const int chosen = 2;
  const double advantage = 1.7;

  auto loss_of = [&](Tape* tape_out, nn::GradMap* grads_out) {
    Tape tape;
    Binding bind(tape, policy.params);
    Var emb = encode(bind, policy, graph, true);
    Var logits = nn::mlp_forward(bind, "dec", emb, decoder);
    Var log_probs = tape.log_softmax_vec(logits);
    Var loss = tape.scale(tape.entry(log_probs, chosen, 0), -advantage);
    if (tape_out != nullptr) {
      tape.backward(loss);
      bind.collect_grads(*grads_out);
    }
    return loss.scalar();
  };

  Tape tape;
  nn::GradMap grads;
  loss_of(&tape, &grads);

  const double eps = 1e-5;
  double worst = 0.0;
  for (const auto& name : policy.params.names()) {
    REQUIRE(grads.count(name) == 1);
    const Mat analytic = grads[name];
    Mat& p = policy.params.at(name);
    for (int i = 0; i < p.rows(); ++i)
      for (int j = 0; j < p.cols(); ++j) {
        const double keep = p(i, j);
        p(i, j) = keep + eps;
        const double up = loss_of(nullptr, nullptr);
        p(i, j) = keep - eps;
        const double dn = loss_of(nullptr, nullptr);
        p(i, j) = keep;
        const double numeric = (up - dn) / (2.0 * eps);
        const double a = analytic(i, j);
        worst = std::max(worst, std::abs(a - numeric) /
                                    std::max({1.0, std::abs(a), std::abs(numeric)}));
      }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("sequence training is deterministic for a fixed seed") {
  const BasePolicy base = scripted_base_policy(-0.55, -0.5);
  std::vector<SeqTrainRow> log1, log2;
  const SeqPolicy a = train_seq_policy(tiny_seq_hp(), base, 13, &log1);
  const SeqPolicy b = train_seq_policy(tiny_seq_hp(), base, 13, &log2);

  REQUIRE(a.params.names() == b.params.names());
  for (const auto& name : a.params.names()) CHECK(a.params.at(name) == b.params.at(name));

  REQUIRE(log1.size() == 2);
  REQUIRE(log2.size() == 2);
  for (std::size_t i = 0; i < log1.size(); ++i) {
    CHECK(log1[i].epoch == log2[i].epoch);
    CHECK(log1[i].mean_return == log2[i].mean_return);
    CHECK(log1[i].baseline_return == log2[i].baseline_return);
    CHECK(log1[i].replaced == log2[i].replaced);
  }

  // Training moves the parameters. The scripted base collides on most random
  // scenes, and a colliding first step scores the same -gamma5 * t_fail * n
  // for any choice, so the greedy-baseline advantage can be exactly zero; the
  // no-baseline variant keeps the full return as the gradient weight.
  SeqHyperparams nb = tiny_seq_hp();
  nb.baseline = BaselineMode::None;
  const SeqPolicy moved = train_seq_policy(nb, base, 13);
  const SeqPolicy fresh = make_seq_policy(nb, 13);
  CHECK(moved.params.at("dec/w0") != fresh.params.at("dec/w0"));
}

TEST_CASE("learned plan visits each object at most once and prices itself") {
  const BasePolicy base = scripted_base_policy(-0.55, -0.5);
  const SeqPolicy seq = make_seq_policy(tiny_seq_hp(), 33);
  const Scene scene = row_scene(4);

  const Plan plan = plan_learned(seq, base, scene);
  CHECK(plan.planner_name == "learned");
  REQUIRE(plan.stops.size() == 4);

  std::set<int> ids;
  for (const auto& stop : plan.stops) {
    REQUIRE(stop.object_ids.size() == 1);
    ids.insert(stop.object_ids.front());
  }
  CHECK(ids.size() == 4);

  const CostBreakdown recomputed = plan_cost(scene, plan, base.model);
  CHECK(plan.predicted_cost.total == recomputed.total);
  CHECK(plan.predicted_cost.nav_time == recomputed.nav_time);
  CHECK(plan.predicted_cost.grasp_time == recomputed.grasp_time);
  CHECK(plan.planning_wall_time >= 0.0);

  const ExecutionReport report = execute_plan(scene, plan, base.model);
  CHECK(report.objects_grasped == 4);
  CHECK(report.realized.total == plan.predicted_cost.total);
}

TEST_CASE("a colliding prediction truncates the learned plan") {
  const BasePolicy base = scripted_base_policy(0.0, 0.0);
  const SeqPolicy seq = make_seq_policy(tiny_seq_hp(), 35);
  const Plan plan = plan_learned(seq, base, row_scene(3));
  CHECK(plan.stops.empty());
  CHECK(plan.predicted_cost.total == 0.0);
}

TEST_CASE("sequence evaluation is deterministic") {
  const BasePolicy base = scripted_base_policy(-0.55, -0.5);
  SeqHyperparams hp = tiny_seq_hp();
  const SeqPolicy seq = make_seq_policy(hp, 37);
  const double a = evaluate_seq_policy(seq, base, 10, 41);
  const double b = evaluate_seq_policy(seq, base, 10, 41);
  CHECK(a == b);
  CHECK_THROWS_AS(evaluate_seq_policy(seq, base, 0, 1), Error);
}

TEST_CASE("sequence checkpoint round-trip preserves parameters and modes") {
  SeqHyperparams hp = tiny_seq_hp();
  hp.attention = nn::AttentionMode::Uniform;
  hp.baseline = BaselineMode::None;
  const SeqPolicy policy = make_seq_policy(hp, 43);

  const std::string path = "seq_ckpt_test.json";
  save_seq_policy(policy, path);
  const SeqPolicy loaded = load_seq_policy(path);
  std::remove(path.c_str());

  CHECK(loaded.hp.encoder_layers == hp.encoder_layers);
  CHECK(loaded.hp.width == hp.width);
  CHECK(loaded.hp.decoder_hidden == hp.decoder_hidden);
  CHECK(loaded.hp.attention == nn::AttentionMode::Uniform);
  CHECK(loaded.hp.baseline == BaselineMode::None);
  CHECK(loaded.hp.n_objects == hp.n_objects);
  CHECK(loaded.hp.t_fail == hp.t_fail);
  REQUIRE(loaded.params.names() == policy.params.names());
  for (const auto& name : policy.params.names())
    CHECK(loaded.params.at(name) == policy.params.at(name));
}

TEST_CASE("loading a non-sequence checkpoint fails") {
  nn::ParamStore store;
  store.add("w", 1, 1);
  const std::string path = "bad_seq_ckpt.json";
  nn::save_checkpoint(store, "{\"kind\":\"base\"}", path);
  CHECK_THROWS_AS(load_seq_policy(path), IoError);
  std::remove(path.c_str());
}

TEST_CASE("sequence training log serializes with the expected header") {
  std::vector<SeqTrainRow> log{{1, -2.5, -3.0, false}, {2, 4.0, 3.5, true}};
  const std::string path = "seq_log_test.csv";
  write_seq_log_csv(log, path);
  const std::string text = read_file(path);
  std::remove(path.c_str());
  CHECK(text == "epoch,mean_return,baseline_return,replaced\n1,-2.5,-3,0\n2,4,3.5,1\n");
}
