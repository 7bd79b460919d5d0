#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "pickplan/plan.hpp"

namespace pickplan {

// Sentinel for "no candidate pruning" in solve_dp.
inline constexpr int kNoTopK = std::numeric_limits<int>::max();

// Proximity-based greedy: repeatedly grasp the object nearest to the current
// base, from the candidate with the lowest navigation time. One object per
// stop. Objects without feasible candidates under `mode` are skipped.
// In GraspChecked mode every candidate feasibility lookup adds `latency`
// seconds to the reported planning time (emulating expensive validation).
Plan solve_pbg(const Scene& scene, const std::vector<CandidateSet>& irms,
               const ManipulatorModel& model, FeasibilityMode mode, double latency = 0.0);

// Minimum base poses: greedy set cover over the shared candidate lattice,
// then greedy stop ordering by navigation time. Stops may grasp several
// objects.
Plan solve_mbp(const Scene& scene, const std::vector<CandidateSet>& irms,
               const ManipulatorModel& model, FeasibilityMode mode, double latency = 0.0);

// Exact minimum-time sequence over grasp-checked candidates, pruned to the
// top_k lowest grasp times per object. State = (grasped bitmask, last
// candidate), memoized. Throws InstanceTooLarge for more than 12 objects.
Plan solve_dp(const Scene& scene, const std::vector<CandidateSet>& irms,
              const ManipulatorModel& model, int top_k = 20, double latency = 0.0);

// Exhaustive test oracle: all object orders x candidate choices, grasp-checked
// candidates capped at cap_candidates per object. Guarded to N <= 4 objects
// and cap <= 6.
Plan brute_force(const Scene& scene, const std::vector<CandidateSet>& irms,
                 const ManipulatorModel& model, int cap_candidates);

struct ExecutionReport {
  std::vector<std::pair<int, bool>> object_success;  // (object id, grasped), all scene objects
  CostBreakdown realized;
  int objects_grasped = 0;

  bool grasped(int object_id) const {
    for (const auto& [id, ok] : object_success)
      if (id == object_id) return ok;
    return false;
  }
};

// Walk the plan: navigation accrues for every visited stop; a colliding stop
// fails all of its objects; an object is grasped iff trajectory_feasible at
// the executed stop. Failed grasps contribute zero grasp time.
ExecutionReport execute_plan(const Scene& scene, const Plan& plan, const ManipulatorModel& model);

}  // namespace pickplan
