#include "pickplan/reach.hpp"

#include <algorithm>
#include <cmath>

#include "pickplan/errors.hpp"

namespace pickplan {

double mount_distance(const ManipulatorModel& model, const Pose2& base, const Pose2& object) {
  const Pose2 mount = transform(model.mount_offset, base);
  return std::hypot(mount.x - object.x, mount.y - object.y);
}

bool ik_available(const ManipulatorModel& model, const Pose2& base, const Pose2& object,
                  const TableRect& table) {
  if (footprint_collides(base, table)) return false;
  const double d = mount_distance(model, base, object);
  return d >= model.r_min && d <= model.r_max;
}

bool trajectory_feasible(const ManipulatorModel& model, const Pose2& base, const Pose2& object,
                         const TableRect& table) {
  if (!ik_available(model, base, object, table)) return false;
  if (mount_distance(model, base, object) > model.r_traj_max) return false;
  // Distance from the footprint disc (not its center) to the table.
  return rect_distance(table, base.x, base.y) - kRobotRadius >= model.clearance;
}

double grasp_time(const ManipulatorModel& model, const Pose2& base, const ObjectState& object) {
  const double d = mount_distance(model, base, object.pose);
  if (d < model.r_min || d > model.r_max)
    throw InfeasibleGrasp("grasp_time: mount distance outside reachable annulus");
  return model.grasp_time_base[static_cast<std::size_t>(object.class_id)] +
         model.grasp_time_per_meter * d;
}

CandidateSet build_irm(const ManipulatorModel& model, const ObjectState& object,
                       const TableRect& table, double grid_xy, double grid_theta) {
  if (!(grid_xy > 0.0) || !(grid_theta > 0.0))
    throw Error("build_irm: grid steps must be positive");

  CandidateSet set;
  set.object_id = object.id;

  const double radius = model.r_max + kRobotRadius;
  const long ix_lo = static_cast<long>(std::ceil((object.pose.x - radius) / grid_xy - 1e-9));
  const long ix_hi = static_cast<long>(std::floor((object.pose.x + radius) / grid_xy + 1e-9));
  const long iy_lo = static_cast<long>(std::ceil((object.pose.y - radius) / grid_xy - 1e-9));
  const long iy_hi = static_cast<long>(std::floor((object.pose.y + radius) / grid_xy + 1e-9));
  const int n_theta = std::max(1, static_cast<int>(std::lround(2.0 * M_PI / grid_theta)));

  for (long ix = ix_lo; ix <= ix_hi; ++ix) {
    for (long iy = iy_lo; iy <= iy_hi; ++iy) {
      for (int it = 0; it < n_theta; ++it) {
        Candidate c;
        c.base = make_pose(static_cast<double>(ix) * grid_xy,
                           static_cast<double>(iy) * grid_xy,
                           static_cast<double>(it) * grid_theta);
        if (!ik_available(model, c.base, object.pose, table)) continue;
        c.ik_ok = true;
        c.traj_ok = trajectory_feasible(model, c.base, object.pose, table);
        c.grasp_time = grasp_time(model, c.base, object);
        set.candidates.push_back(c);
      }
    }
  }

  if (set.candidates.empty())
    throw EmptyCandidateSet("build_irm: object " + std::to_string(object.id) +
                            " has no reachable base pose");

  std::sort(set.candidates.begin(), set.candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.grasp_time != b.grasp_time) return a.grasp_time < b.grasp_time;
              if (a.base.x != b.base.x) return a.base.x < b.base.x;
              if (a.base.y != b.base.y) return a.base.y < b.base.y;
              return a.base.theta < b.base.theta;
            });
  return set;
}

std::vector<CandidateSet> build_irms(const ManipulatorModel& model, const Scene& scene,
                                     double grid_xy, double grid_theta) {
  std::vector<CandidateSet> irms;
  irms.reserve(scene.objects.size());
  for (const auto& obj : scene.objects) {
    try {
      irms.push_back(build_irm(model, obj, scene.table, grid_xy, grid_theta));
    } catch (const EmptyCandidateSet&) {
      CandidateSet empty;
      empty.object_id = obj.id;
      irms.push_back(std::move(empty));
    }
  }
  return irms;
}

}  // namespace pickplan
