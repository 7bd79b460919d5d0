#pragma once

#include <array>
#include <vector>

#include "pickplan/pose.hpp"
#include "pickplan/scene.hpp"

namespace pickplan {

// Analytic stand-in for a full kinematics stack. A grasp is IK-reachable when
// the arm mount point sits inside an annulus around the object; a trajectory
// is plannable under the stricter reach limit plus a clearance band between
// the footprint and the table. The gap between the two predicates is what
// separates the grasp-checked planners from the plain IRM ones.
struct ManipulatorModel {
  Pose2 mount_offset{-0.20, -0.20, 0.0};  // arm mount in the base frame
  double r_min = 0.30;
  double r_max = 0.85;
  double r_traj_max = 0.75;
  double clearance = 0.10;  // footprint-to-table clearance required for a trajectory
  std::array<double, kNumObjectClasses> grasp_time_base{10.0, 10.0, 10.0, 10.0, 10.0};
  double grasp_time_per_meter = 8.0;
};

struct Candidate {
  Pose2 base;  // table frame
  bool ik_ok = false;
  bool traj_ok = false;
  double grasp_time = 0.0;  // valid when ik_ok
};

// Discretized base-pose candidates for one object, sorted by grasp_time
// ascending, ties by (x, y, theta).
struct CandidateSet {
  int object_id = 0;
  std::vector<Candidate> candidates;
};

// Planar distance from the arm mount point at `base` to the object.
double mount_distance(const ManipulatorModel& model, const Pose2& base, const Pose2& object);

bool ik_available(const ManipulatorModel& model, const Pose2& base, const Pose2& object,
                  const TableRect& table);

// Strictly stronger than ik_available: tighter reach plus clearance.
bool trajectory_feasible(const ManipulatorModel& model, const Pose2& base, const Pose2& object,
                         const TableRect& table);

// grasp_time_base[class] + grasp_time_per_meter * mount distance.
// Throws InfeasibleGrasp when the mount distance is outside [r_min, r_max].
double grasp_time(const ManipulatorModel& model, const Pose2& base, const ObjectState& object);

// Enumerate grid base poses around the object (grid anchored at the table
// frame origin, 8 heading bins by default) and keep the IK-reachable ones.
// Throws EmptyCandidateSet when nothing qualifies.
CandidateSet build_irm(const ManipulatorModel& model, const ObjectState& object,
                       const TableRect& table, double grid_xy = 0.10,
                       double grid_theta = M_PI / 4.0);

// IRMs for a whole scene, aligned with scene.objects. Unreachable objects get
// an empty candidate set here instead of an error; planners skip them.
std::vector<CandidateSet> build_irms(const ManipulatorModel& model, const Scene& scene,
                                     double grid_xy = 0.10, double grid_theta = M_PI / 4.0);

}  // namespace pickplan
