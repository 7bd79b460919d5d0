#include "pickplan/bench.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pickplan/errors.hpp"
#include "pickplan/io.hpp"

namespace pickplan {

namespace {

std::string task_name(int n_objects) { return std::to_string(n_objects) + "-objs"; }

struct Stats {
  double mean = 0.0;
  double std_pop = 0.0;
};

Stats stats_of(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.std_pop = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::PBG: return "pbg";
    case Method::PBG_GC: return "pbg-gc";
    case Method::MBP: return "mbp";
    case Method::MBP_GC: return "mbp-gc";
    case Method::DP: return "dp";
    case Method::LEARNED: return "learned";
  }
  throw Error("method_name: bad enum");
}

Method method_from_name(const std::string& s) {
  if (s == "pbg") return Method::PBG;
  if (s == "pbg-gc") return Method::PBG_GC;
  if (s == "mbp") return Method::MBP;
  if (s == "mbp-gc") return Method::MBP_GC;
  if (s == "dp") return Method::DP;
  if (s == "learned") return Method::LEARNED;
  throw Error("unknown method: " + s);
}

BenchConfig bench_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bench config parse error: ") + e.what());
  }
  BenchConfig cfg;
  try {
    if (j.contains("tasks")) {
      cfg.tasks.clear();
      for (const auto& t : j.at("tasks"))
        cfg.tasks.push_back(BenchTask{t.at("n_objects").get<int>(), t.at("n_scenes").get<int>()});
    }
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j.at("methods"))
        cfg.methods.push_back(method_from_name(m.get<std::string>()));
    }
    cfg.scene_seed = j.value("scene_seed", cfg.scene_seed);
    if (j.contains("start_annulus")) {
      const auto a = j.at("start_annulus").get<std::vector<double>>();
      if (a.size() != 2) throw IoError("bench config: start_annulus needs two entries");
      cfg.start_annulus = {a[0], a[1]};
    }
    cfg.latency = j.value("latency", cfg.latency);
    cfg.dp_top_k = j.value("dp_top_k", cfg.dp_top_k);
    cfg.base_checkpoint = j.value("base_checkpoint", cfg.base_checkpoint);
    cfg.seq_checkpoint = j.value("seq_checkpoint", cfg.seq_checkpoint);
    cfg.measure_wall_time = j.value("measure_wall_time", cfg.measure_wall_time);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bench config field error: ") + e.what());
  }
  if (cfg.methods.empty()) throw Error("bench config: methods must be non-empty");
  if (cfg.tasks.empty()) throw Error("bench config: tasks must be non-empty");
  for (Method m : cfg.methods) {
    if (m == Method::LEARNED && (cfg.base_checkpoint.empty() || cfg.seq_checkpoint.empty()))
      throw Error("bench config: learned method needs base_checkpoint and seq_checkpoint");
  }
  return cfg;
}

std::string bench_config_to_json(const BenchConfig& config) {
  nlohmann::ordered_json j;
  j["tasks"] = nlohmann::ordered_json::array();
  for (const auto& t : config.tasks)
    j["tasks"].push_back({{"n_objects", t.n_objects}, {"n_scenes", t.n_scenes}});
  j["methods"] = nlohmann::ordered_json::array();
  for (Method m : config.methods) j["methods"].push_back(method_name(m));
  j["scene_seed"] = config.scene_seed;
  j["start_annulus"] = {config.start_annulus[0], config.start_annulus[1]};
  j["latency"] = config.latency;
  j["dp_top_k"] = config.dp_top_k;
  j["base_checkpoint"] = config.base_checkpoint;
  j["seq_checkpoint"] = config.seq_checkpoint;
  j["measure_wall_time"] = config.measure_wall_time;
  return j.dump(2) + "\n";
}

Plan plan_with_method(Method method, const Scene& scene, const std::vector<CandidateSet>& irms,
                      const ManipulatorModel& model, double latency, int dp_top_k,
                      const BasePolicy* base, const SeqPolicy* seq) {
  switch (method) {
    case Method::PBG:
      return solve_pbg(scene, irms, model, FeasibilityMode::IkOnly, latency);
    case Method::PBG_GC:
      return solve_pbg(scene, irms, model, FeasibilityMode::GraspChecked, latency);
    case Method::MBP:
      return solve_mbp(scene, irms, model, FeasibilityMode::IkOnly, latency);
    case Method::MBP_GC:
      return solve_mbp(scene, irms, model, FeasibilityMode::GraspChecked, latency);
    case Method::DP:
      return solve_dp(scene, irms, model, dp_top_k, latency);
    case Method::LEARNED:
      if (base == nullptr || seq == nullptr)
        throw Error("plan_with_method: learned method needs both policies");
      return plan_learned(*seq, *base, scene);
  }
  throw Error("plan_with_method: bad method enum");
}

BenchResult run_benchmark(const BenchConfig& config, const ManipulatorModel& model) {
  BasePolicy base;
  SeqPolicy seq;
  bool have_policies = false;
  for (Method m : config.methods) {
    if (m == Method::LEARNED && !have_policies) {
      base = load_base_policy(config.base_checkpoint);
      seq = load_seq_policy(config.seq_checkpoint);
      have_policies = true;
    }
  }

  BenchResult result;
  for (const BenchTask& task : config.tasks) {
    const std::uint64_t task_stream =
        derive_seed(config.scene_seed, static_cast<std::uint64_t>(task.n_objects));

    // Per-method accumulators, index-aligned with config.methods.
    std::vector<std::vector<double>> planning(config.methods.size()), nav(config.methods.size()),
        grasp(config.methods.size());
    std::vector<long> grasped_total(config.methods.size(), 0);

    for (int i = 0; i < task.n_scenes; ++i) {
      const std::uint64_t scene_seed = derive_seed(task_stream, static_cast<std::uint64_t>(i));
      const Scene scene = sample_scene(scene_seed, task.n_objects, config.start_annulus);
      const std::vector<CandidateSet> irms = build_irms(model, scene);

      for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        const Method method = config.methods[mi];
        const auto t0 = std::chrono::steady_clock::now();
        const Plan plan =
            plan_with_method(method, scene, irms, model, config.latency, config.dp_top_k,
                             have_policies ? &base : nullptr, have_policies ? &seq : nullptr);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const double emulated = method == Method::LEARNED ? 0.0 : plan.planning_wall_time;
        const double planning_s = emulated + (config.measure_wall_time ? wall : 0.0);

        const ExecutionReport report = execute_plan(scene, plan, model);

        SceneRecord rec;
        rec.task = task_name(task.n_objects);
        rec.method = method_name(method);
        rec.scene_seed = scene_seed;
        rec.n_grasped = report.objects_grasped;
        rec.planning_s = planning_s;
        rec.nav_s = report.realized.nav_time;
        rec.grasp_s = report.realized.grasp_time;
        result.records.push_back(rec);

        planning[mi].push_back(planning_s);
        nav[mi].push_back(report.realized.nav_time);
        grasp[mi].push_back(report.realized.grasp_time);
        grasped_total[mi] += report.objects_grasped;
      }
    }

    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      ResultRow row;
      row.method = method_name(config.methods[mi]);
      row.task = task_name(task.n_objects);
      row.pct_grasped = 100.0 * static_cast<double>(grasped_total[mi]) /
                        (static_cast<double>(task.n_scenes) * task.n_objects);
      const Stats p = stats_of(planning[mi]);
      const Stats n = stats_of(nav[mi]);
      const Stats g = stats_of(grasp[mi]);
      row.planning_mean = p.mean;
      row.planning_std = p.std_pop;
      row.nav_mean = n.mean;
      row.nav_std = n.std_pop;
      row.grasp_mean = g.mean;
      row.grasp_std = g.std_pop;
      row.total_exec = n.mean + g.mean;
      row.total_all = p.mean + row.total_exec;
      result.rows.push_back(row);
    }
  }
  return result;
}

void write_scene_csv(const std::vector<SceneRecord>& records, const std::string& path) {
  std::ostringstream out;
  out << "task,method,scene_seed,n_grasped,planning_s,nav_s,grasp_s\n";
  for (const auto& r : records)
    out << r.task << ',' << r.method << ',' << r.scene_seed << ',' << r.n_grasped << ','
        << fmt_double(r.planning_s) << ',' << fmt_double(r.nav_s) << ','
        << fmt_double(r.grasp_s) << '\n';
  write_file(path, out.str());
}

void write_summary_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ostringstream out;
  out << "method,task,pct_grasped,planning_mean,planning_std_pop,nav_mean,nav_std_pop,"
         "grasp_mean,grasp_std_pop,total_exec,total_all\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.task << ',' << fmt_double(r.pct_grasped) << ','
        << fmt_double(r.planning_mean) << ',' << fmt_double(r.planning_std) << ','
        << fmt_double(r.nav_mean) << ',' << fmt_double(r.nav_std) << ','
        << fmt_double(r.grasp_mean) << ',' << fmt_double(r.grasp_std) << ','
        << fmt_double(r.total_exec) << ',' << fmt_double(r.total_all) << '\n';
  write_file(path, out.str());
}

std::string format_result_table(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(9) << "method" << std::setw(9) << "task" << std::right
      << std::setw(10) << "%grasped" << std::setw(16) << "planning(s)" << std::setw(16)
      << "nav(s)" << std::setw(16) << "grasp(s)" << std::setw(10) << "exec(s)" << std::setw(10)
      << "total(s)" << '\n';
  out << std::string(96, '-') << '\n';
  out << std::fixed << std::setprecision(1);
  for (const auto& r : rows) {
    std::ostringstream p, n, g;
    p << std::fixed << std::setprecision(1) << r.planning_mean << "+-" << r.planning_std;
    n << std::fixed << std::setprecision(1) << r.nav_mean << "+-" << r.nav_std;
    g << std::fixed << std::setprecision(1) << r.grasp_mean << "+-" << r.grasp_std;
    out << std::left << std::setw(9) << r.method << std::setw(9) << r.task << std::right
        << std::setw(10) << r.pct_grasped << std::setw(16) << p.str() << std::setw(16) << n.str()
        << std::setw(16) << g.str() << std::setw(10) << r.total_exec << std::setw(10)
        << r.total_all << '\n';
  }
  return out.str();
}

}  // namespace pickplan
