#pragma once

#include <string>
#include <vector>

#include "pickplan/cost.hpp"
#include "pickplan/pose.hpp"
#include "pickplan/reach.hpp"
#include "pickplan/scene.hpp"

namespace pickplan {

struct Stop {
  Pose2 base;                   // table frame
  std::vector<int> object_ids;  // grasped at this stop, in grasp order
};

struct Plan {
  std::vector<Stop> stops;
  CostBreakdown predicted_cost;
  std::string planner_name;
  double planning_wall_time = 0.0;  // seconds, includes emulated check latency
};

enum class FeasibilityMode {
  IkOnly,        // accept any IRM candidate
  GraspChecked,  // restrict to candidates with traj_ok
};

// Predicted cost of a plan: navigation summed over robot_start -> stops in
// order, grasp time summed per (stop, object). Objects whose grasp is not
// IK-reachable from their stop contribute zero grasp time, mirroring
// execute_plan. Throws InvalidPlan on duplicate or unknown object ids.
CostBreakdown plan_cost(const Scene& scene, const Plan& plan, const ManipulatorModel& model);

std::string plan_to_json(const Plan& plan);
Plan plan_from_json(const std::string& text);
void save_plan(const Plan& plan, const std::string& path);
Plan load_plan(const std::string& path);

}  // namespace pickplan
