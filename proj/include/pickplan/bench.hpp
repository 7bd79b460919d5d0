#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pickplan/base_policy.hpp"
#include "pickplan/seq_policy.hpp"
#include "pickplan/solvers.hpp"

namespace pickplan {

enum class Method { PBG, PBG_GC, MBP, MBP_GC, DP, LEARNED };

std::string method_name(Method m);
Method method_from_name(const std::string& s);

struct BenchTask {
  int n_objects = 5;
  int n_scenes = 50;
};

struct BenchConfig {
  std::vector<BenchTask> tasks{{5, 50}, {10, 50}};
  std::vector<Method> methods{Method::PBG, Method::PBG_GC, Method::MBP,
                              Method::MBP_GC, Method::DP};
  std::uint64_t scene_seed = 1;
  std::array<double, 2> start_annulus{2.5, 3.0};
  double latency = 0.0;  // seconds per feasibility check (emulated)
  int dp_top_k = 20;
  std::string base_checkpoint;  // required for LEARNED
  std::string seq_checkpoint;
  // Off by default so repeated runs emit byte-identical CSVs; planning_s then
  // carries only the emulated feasibility latency.
  bool measure_wall_time = false;
};

BenchConfig bench_config_from_json(const std::string& text);
std::string bench_config_to_json(const BenchConfig& config);

struct SceneRecord {
  std::string task;
  std::string method;
  std::uint64_t scene_seed = 0;
  int n_grasped = 0;
  double planning_s = 0.0;
  double nav_s = 0.0;
  double grasp_s = 0.0;
};

struct ResultRow {
  std::string method;
  std::string task;
  double pct_grasped = 0.0;  // percent of all objects grasped
  double planning_mean = 0.0, planning_std = 0.0;
  double nav_mean = 0.0, nav_std = 0.0;
  double grasp_mean = 0.0, grasp_std = 0.0;
  double total_exec = 0.0;  // nav_mean + grasp_mean
  double total_all = 0.0;   // planning_mean + total_exec
};

struct BenchResult {
  std::vector<SceneRecord> records;
  std::vector<ResultRow> rows;
};

// Plan one scene with one method. IRM construction is excluded from the
// reported planning time; checkpoint loading happens outside.
Plan plan_with_method(Method method, const Scene& scene, const std::vector<CandidateSet>& irms,
                      const ManipulatorModel& model, double latency, int dp_top_k,
                      const BasePolicy* base, const SeqPolicy* seq);

BenchResult run_benchmark(const BenchConfig& config, const ManipulatorModel& model = {});

// Per-scene CSV: task,method,scene_seed,n_grasped,planning_s,nav_s,grasp_s.
void write_scene_csv(const std::vector<SceneRecord>& records, const std::string& path);
// Summary CSV mirroring ResultRow; std columns are population std.
void write_summary_csv(const std::vector<ResultRow>& rows, const std::string& path);
// Human-readable table.
std::string format_result_table(const std::vector<ResultRow>& rows);

}  // namespace pickplan
