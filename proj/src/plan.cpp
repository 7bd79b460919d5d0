#include "pickplan/plan.hpp"

#include <nlohmann/json.hpp>
#include <set>

#include "pickplan/errors.hpp"
#include "pickplan/io.hpp"

namespace pickplan {

using json = nlohmann::json;

CostBreakdown plan_cost(const Scene& scene, const Plan& plan, const ManipulatorModel& model) {
  std::set<int> seen;
  for (const auto& stop : plan.stops) {
    for (int id : stop.object_ids) {
      if (scene.find_object(id) == nullptr)
        throw InvalidPlan("plan_cost: unknown object id " + std::to_string(id));
      if (!seen.insert(id).second)
        throw InvalidPlan("plan_cost: object id " + std::to_string(id) + " appears twice");
    }
  }

  CostBreakdown cost;
  Pose2 current = scene.robot_start;
  for (const auto& stop : plan.stops) {
    cost.nav_time += nav_time(current, stop.base);
    current = stop.base;
    for (int id : stop.object_ids) {
      const ObjectState* obj = scene.find_object(id);
      if (ik_available(model, stop.base, obj->pose, scene.table))
        cost.grasp_time += grasp_time(model, stop.base, *obj);
    }
  }
  cost.total = cost.nav_time + cost.grasp_time;
  return cost;
}

std::string plan_to_json(const Plan& plan) {
  json j;
  j["planner"] = plan.planner_name;
  json stops = json::array();
  for (const auto& s : plan.stops) {
    stops.push_back({{"x", s.base.x},
                     {"y", s.base.y},
                     {"theta", s.base.theta},
                     {"objects", s.object_ids}});
  }
  j["stops"] = std::move(stops);
  j["predicted"] = {{"nav", plan.predicted_cost.nav_time},
                    {"grasp", plan.predicted_cost.grasp_time},
                    {"total", plan.predicted_cost.total}};
  j["wall_time"] = plan.planning_wall_time;
  return j.dump(2) + "\n";
}

Plan plan_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("plan parse error: ") + e.what());
  }
  Plan plan;
  try {
    plan.planner_name = j.at("planner").get<std::string>();
    for (const auto& s : j.at("stops")) {
      Stop stop;
      stop.base = Pose2{s.at("x").get<double>(), s.at("y").get<double>(),
                        s.at("theta").get<double>()};
      stop.object_ids = s.at("objects").get<std::vector<int>>();
      plan.stops.push_back(std::move(stop));
    }
    const auto& p = j.at("predicted");
    plan.predicted_cost.nav_time = p.at("nav").get<double>();
    plan.predicted_cost.grasp_time = p.at("grasp").get<double>();
    plan.predicted_cost.total = p.at("total").get<double>();
    plan.planning_wall_time = j.at("wall_time").get<double>();
  } catch (const json::exception& e) {
    throw IoError(std::string("plan field error: ") + e.what());
  }
  return plan;
}

void save_plan(const Plan& plan, const std::string& path) {
  write_file(path, plan_to_json(plan));
}

Plan load_plan(const std::string& path) { return plan_from_json(read_file(path)); }

}  // namespace pickplan
