#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "pickplan/bench.hpp"
#include "pickplan/io.hpp"

namespace fs = std::filesystem;
using namespace pickplan;

namespace {

std::string zero_pad(int value, int width) {
  std::ostringstream out;
  out.fill('0');
  out.width(width);
  out << value;
  return out.str();
}

int run_gen_scenes(std::uint64_t seed, int n_objects, int count, const std::string& out_dir,
                   double annulus_lo, double annulus_hi) {
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t scene_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    const Scene scene = sample_scene(scene_seed, n_objects, {annulus_lo, annulus_hi});
    save_scene(scene, (fs::path(out_dir) / ("scene_" + zero_pad(i, 3) + ".json")).string());
  }
  std::cout << "wrote " << count << " scenes to " << out_dir << "\n";
  return 0;
}

int run_plan(const std::string& method_str, const std::string& scene_path,
             const std::string& out_path, double latency, int top_k, bool timing,
             const std::string& base_ckpt, const std::string& seq_ckpt) {
  const Method method = method_from_name(method_str);
  const Scene scene = load_scene(scene_path);
  const ManipulatorModel model;

  BasePolicy base;
  SeqPolicy seq;
  if (method == Method::LEARNED) {
    if (base_ckpt.empty() || seq_ckpt.empty())
      throw Error("plan: learned method needs --base-ckpt and --seq-ckpt");
    base = load_base_policy(base_ckpt);
    seq = load_seq_policy(seq_ckpt);
  }

  const std::vector<CandidateSet> irms =
      method == Method::LEARNED ? std::vector<CandidateSet>{} : build_irms(model, scene);

  const auto t0 = std::chrono::steady_clock::now();
  Plan plan = plan_with_method(method, scene, irms, model, latency, top_k,
                               method == Method::LEARNED ? &base : nullptr,
                               method == Method::LEARNED ? &seq : nullptr);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (method == Method::LEARNED)
    plan.planning_wall_time = timing ? plan.planning_wall_time : 0.0;
  else if (timing)
    plan.planning_wall_time += wall;

  save_plan(plan, out_path);

  const ExecutionReport report = execute_plan(scene, plan, model);
  std::cout << "planner=" << plan.planner_name << " stops=" << plan.stops.size()
            << " grasped=" << report.objects_grasped << "/" << scene.objects.size()
            << " predicted_total=" << fmt_double(plan.predicted_cost.total)
            << " realized_total=" << fmt_double(report.realized.total) << "\n";
  std::cout << "plan written to " << out_path << "\n";
  return 0;
}

int run_train_base(std::uint64_t seed, const std::string& frame_str, long steps,
                   long eval_interval, int eval_episodes, const std::string& out_path,
                   std::string log_path) {
  SacHyperparams hp;
  hp.total_steps = steps;
  hp.eval_interval = eval_interval;
  hp.eval_episodes = eval_episodes;
  const FrameMode frame = frame_mode_from_name(frame_str);

  std::vector<BaseTrainRow> log;
  const BasePolicy policy = train_base_policy(hp, frame, seed, &log);
  save_base_policy(policy, out_path);
  if (log_path.empty()) log_path = out_path + ".log.csv";
  write_base_log_csv(log, log_path);

  const BaseEvalResult final_eval = evaluate_base_policy(policy, 1000, derive_seed(seed, 999));
  std::cout << "frame=" << frame_str << " steps=" << steps
            << " final_success=" << fmt_double(final_eval.success_rate)
            << " final_mean_reward=" << fmt_double(final_eval.mean_reward) << "\n";
  std::cout << "checkpoint written to " << out_path << ", log to " << log_path << "\n";
  return 0;
}

int run_train_seq(std::uint64_t seed, const std::string& base_ckpt,
                  const std::string& attention_str, const std::string& baseline_str, int epochs,
                  int batch_episodes, int n_objects, const std::string& out_path,
                  std::string log_path) {
  SeqHyperparams hp;
  hp.attention = attention_mode_from_name(attention_str);
  hp.baseline = baseline_mode_from_name(baseline_str);
  hp.epochs = epochs;
  hp.batch_episodes = batch_episodes;
  hp.n_objects = n_objects;

  const BasePolicy base = load_base_policy(base_ckpt);
  std::vector<SeqTrainRow> log;
  const SeqPolicy policy = train_seq_policy(hp, base, seed, &log);
  save_seq_policy(policy, out_path);
  if (log_path.empty()) log_path = out_path + ".log.csv";
  write_seq_log_csv(log, log_path);

  const double final_return = evaluate_seq_policy(policy, base, 200, derive_seed(seed, 999));
  std::cout << "attention=" << attention_str << " baseline=" << baseline_str
            << " epochs=" << epochs << " final_greedy_return=" << fmt_double(final_return)
            << "\n";
  std::cout << "checkpoint written to " << out_path << ", log to " << log_path << "\n";
  return 0;
}

int run_bench(const std::string& config_path, const std::string& out_dir, bool timing) {
  BenchConfig config = bench_config_from_json(read_file(config_path));
  if (timing) config.measure_wall_time = true;
  const BenchResult result = run_benchmark(config);
  fs::create_directories(out_dir);
  write_scene_csv(result.records, (fs::path(out_dir) / "per_scene.csv").string());
  write_summary_csv(result.rows, (fs::path(out_dir) / "summary.csv").string());
  std::cout << format_result_table(result.rows);
  std::cout << "CSV written to " << out_dir << "\n";
  return 0;
}

int run_eval(const std::string& base_ckpt, const std::string& seq_ckpt, int episodes,
             int n_objects, std::uint64_t seed, const std::string& out_path) {
  const BasePolicy base = load_base_policy(base_ckpt);
  std::ostringstream report;
  if (seq_ckpt.empty()) {
    const BaseEvalResult eval = evaluate_base_policy(base, episodes, seed);
    report << "base_success_rate=" << fmt_double(eval.success_rate)
           << " base_mean_reward=" << fmt_double(eval.mean_reward) << "\n";
  } else {
    const SeqPolicy seq = load_seq_policy(seq_ckpt);
    const ManipulatorModel model;
    long grasped = 0;
    double return_sum = 0.0;
    Rng rng(seed);  // greedy rollouts draw nothing
    for (int i = 0; i < episodes; ++i) {
      const Scene scene = sample_scene(derive_seed(seed, static_cast<std::uint64_t>(i)),
                                       n_objects, seq.hp.start_annulus);
      const RolloutResult r = rollout(seq, base, scene, RolloutMode::Greedy, rng);
      grasped += r.grasped;
      return_sum += r.total_reward;
    }
    report << "scenes=" << episodes << " n_objects=" << n_objects
           << " pct_grasped=" << fmt_double(100.0 * grasped / (double(episodes) * n_objects))
           << " mean_return=" << fmt_double(return_sum / episodes) << "\n";
    (void)model;
  }
  std::cout << report.str();
  if (!out_path.empty()) write_file(out_path, report.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pickplan: minimum-time base-pose sequence planning for tabletop picking"};
  app.require_subcommand(1);

  // gen-scenes
  auto* gen = app.add_subcommand("gen-scenes", "Sample a deterministic scene corpus");
  std::uint64_t gen_seed = 1;
  int gen_n = 5, gen_count = 50;
  std::string gen_out = "scenes";
  double gen_lo = 2.5, gen_hi = 3.0;
  gen->add_option("--seed", gen_seed, "Corpus seed");
  gen->add_option("--n", gen_n, "Objects per scene")->check(CLI::Range(1, 10));
  gen->add_option("--count", gen_count, "Number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--annulus-min", gen_lo, "Robot start annulus inner radius (m)");
  gen->add_option("--annulus-max", gen_hi, "Robot start annulus outer radius (m)");

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "Plan one scene with one method");
  std::string plan_method, plan_scene, plan_out = "plan.json", plan_base, plan_seq;
  double plan_latency = 0.0;
  int plan_top_k = 20;
  bool plan_timing = false;
  plan_cmd->add_option("--method", plan_method, "pbg|pbg-gc|mbp|mbp-gc|dp|learned")
      ->required()
      ->check(CLI::IsMember({"pbg", "pbg-gc", "mbp", "mbp-gc", "dp", "learned"}));
  plan_cmd->add_option("--scene", plan_scene, "Scene JSON path")->required();
  plan_cmd->add_option("--out", plan_out, "Plan JSON output path");
  plan_cmd->add_option("--latency", plan_latency, "Emulated seconds per feasibility check");
  plan_cmd->add_option("--top-k", plan_top_k, "Candidate cap per object (dp)");
  plan_cmd->add_flag("--timing", plan_timing, "Include measured wall time (non-reproducible)");
  plan_cmd->add_option("--base-ckpt", plan_base, "Base policy checkpoint (learned)");
  plan_cmd->add_option("--seq-ckpt", plan_seq, "Sequence policy checkpoint (learned)");

  // train-base
  auto* tb = app.add_subcommand("train-base", "Train the base-pose policy (single-step SAC)");
  std::uint64_t tb_seed = 1;
  std::string tb_frame = "object", tb_out = "base.ckpt.json", tb_log;
  long tb_steps = 150000, tb_eval_interval = 1000;
  int tb_eval_episodes = 200;
  tb->add_option("--seed", tb_seed, "Run seed");
  tb->add_option("--frame", tb_frame, "object|table")
      ->check(CLI::IsMember({"object", "table"}));
  tb->add_option("--steps", tb_steps, "Environment steps")->check(CLI::PositiveNumber);
  tb->add_option("--eval-interval", tb_eval_interval, "Steps between evaluations");
  tb->add_option("--eval-episodes", tb_eval_episodes, "Episodes per evaluation");
  tb->add_option("--out", tb_out, "Checkpoint output path");
  tb->add_option("--log", tb_log, "Training log CSV path (default <out>.log.csv)");

  // train-seq
  auto* ts = app.add_subcommand("train-seq", "Train the grasp-sequence policy (REINFORCE)");
  std::uint64_t ts_seed = 1;
  std::string ts_base, ts_attention = "learned", ts_baseline = "greedy",
              ts_out = "seq.ckpt.json", ts_log;
  int ts_epochs = 200, ts_batch = 64, ts_n = 5;
  ts->add_option("--seed", ts_seed, "Run seed");
  ts->add_option("--base-ckpt", ts_base, "Trained base policy checkpoint")->required();
  ts->add_option("--attention", ts_attention, "learned|uniform")
      ->check(CLI::IsMember({"learned", "uniform"}));
  ts->add_option("--baseline", ts_baseline, "greedy|none")
      ->check(CLI::IsMember({"greedy", "none"}));
  ts->add_option("--epochs", ts_epochs, "Training updates")->check(CLI::PositiveNumber);
  ts->add_option("--batch-episodes", ts_batch, "Sampled episodes per update");
  ts->add_option("--n", ts_n, "Objects per training scene")->check(CLI::Range(1, 10));
  ts->add_option("--out", ts_out, "Checkpoint output path");
  ts->add_option("--log", ts_log, "Training log CSV path (default <out>.log.csv)");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Run the benchmark harness");
  std::string bench_config, bench_out = "bench";
  bool bench_timing = false;
  bench_cmd->add_option("--config", bench_config, "Benchmark config JSON")->required();
  bench_cmd->add_option("--out", bench_out, "Output directory for CSVs");
  bench_cmd->add_flag("--timing", bench_timing, "Measure wall time (non-reproducible output)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate trained checkpoints");
  std::string ev_base, ev_seq, ev_out;
  int ev_episodes = 200, ev_n = 5;
  std::uint64_t ev_seed = 1;
  eval_cmd->add_option("--base-ckpt", ev_base, "Base policy checkpoint")->required();
  eval_cmd->add_option("--seq-ckpt", ev_seq, "Sequence policy checkpoint (optional)");
  eval_cmd->add_option("--episodes", ev_episodes, "Episodes / scenes")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--n", ev_n, "Objects per scene (sequence eval)")->check(CLI::Range(1, 10));
  eval_cmd->add_option("--seed", ev_seed, "Evaluation seed");
  eval_cmd->add_option("--out", ev_out, "Optional metrics output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (gen->parsed())
      return run_gen_scenes(gen_seed, gen_n, gen_count, gen_out, gen_lo, gen_hi);
    if (plan_cmd->parsed())
      return run_plan(plan_method, plan_scene, plan_out, plan_latency, plan_top_k, plan_timing,
                      plan_base, plan_seq);
    if (tb->parsed())
      return run_train_base(tb_seed, tb_frame, tb_steps, tb_eval_interval, tb_eval_episodes,
                            tb_out, tb_log);
    if (ts->parsed())
      return run_train_seq(ts_seed, ts_base, ts_attention, ts_baseline, ts_epochs, ts_batch,
                           ts_n, ts_out, ts_log);
    if (bench_cmd->parsed()) return run_bench(bench_config, bench_out, bench_timing);
    if (eval_cmd->parsed())
      return run_eval(ev_base, ev_seq, ev_episodes, ev_n, ev_seed, ev_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << app.help();
  return 1;
}
