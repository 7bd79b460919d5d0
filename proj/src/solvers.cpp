#include "pickplan/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <vector>

#include "pickplan/errors.hpp"

namespace pickplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool candidate_ok(const Candidate& c, FeasibilityMode mode) {
  return mode == FeasibilityMode::GraspChecked ? c.traj_ok : c.ik_ok;
}

const CandidateSet* set_for(const std::vector<CandidateSet>& irms, int object_id) {
  for (const auto& s : irms)
    if (s.object_id == object_id) return &s;
  return nullptr;
}

// Append (base, {id}) as a stop, merging into the previous stop when the base
// pose is identical (zero-cost self-transition).
void push_stop(Plan& plan, const Pose2& base, int object_id) {
  if (!plan.stops.empty()) {
    const Pose2& prev = plan.stops.back().base;
    if (prev.x == base.x && prev.y == base.y && prev.theta == base.theta) {
      plan.stops.back().object_ids.push_back(object_id);
      return;
    }
  }
  plan.stops.push_back(Stop{base, {object_id}});
}

// Candidate lattice key; candidates are exact grid multiples so rounding is safe.
std::tuple<long, long, long> lattice_key(const Pose2& p) {
  const long ix = std::lround(p.x / 0.10);
  const long iy = std::lround(p.y / 0.10);
  long it = std::lround(p.theta / (M_PI / 4.0));
  it = ((it % 8) + 8) % 8;
  return {ix, iy, it};
}

struct DpProblem {
  std::vector<int> object_ids;               // planned objects, ascending id position
  std::vector<std::vector<Candidate>> cand;  // filtered + pruned, aligned with object_ids
  int total_checks = 0;                      // traj_ok consultations (for latency emulation)
};

DpProblem grasp_checked_problem(const Scene& scene, const std::vector<CandidateSet>& irms,
                                int cap) {
  DpProblem prob;
  for (const auto& obj : scene.objects) {
    const CandidateSet* set = set_for(irms, obj.id);
    if (set == nullptr) continue;
    prob.total_checks += static_cast<int>(set->candidates.size());
    std::vector<Candidate> keep;
    for (const auto& c : set->candidates) {
      if (!c.traj_ok) continue;
      keep.push_back(c);
      if (static_cast<int>(keep.size()) >= cap) break;
    }
    if (keep.empty()) continue;  // unreachable object, skipped
    prob.object_ids.push_back(obj.id);
    prob.cand.push_back(std::move(keep));
  }
  return prob;
}

// Shared exact search over visit orders and candidate choices. Suffix-value
// table f[mask][c] = cheapest completion of the objects in `mask` starting at
// candidate c (or the start pose, c = C). The plan is reconstructed forward,
// re-running each argmin with the same loop order so ties resolve toward the
// smaller object id, then earlier candidate.
Plan solve_exact(const Scene& scene, const DpProblem& prob, const char* name) {
  const int n = static_cast<int>(prob.object_ids.size());
  Plan plan;
  plan.planner_name = name;
  if (n == 0) return plan;

  std::vector<int> offset(n + 1, 0);
  for (int i = 0; i < n; ++i)
    offset[i + 1] = offset[i] + static_cast<int>(prob.cand[i].size());
  const int total = offset[n];  // global candidate count; index `total` = robot start

  auto pose_of = [&](int g) -> const Pose2& {
    if (g == total) return scene.robot_start;
    for (int i = 0; i < n; ++i)
      if (g < offset[i + 1]) return prob.cand[i][g - offset[i]].base;
    throw Error("solve_exact: bad candidate index");
  };

  // Pairwise navigation times, including the start row.
  std::vector<std::vector<double>> nav(total + 1, std::vector<double>(total));
  for (int a = 0; a <= total; ++a)
    for (int b = 0; b < total; ++b) nav[a][b] = nav_time(pose_of(a), pose_of(b));

  const int full = (1 << n) - 1;
  std::vector<std::vector<double>> f(full + 1, std::vector<double>(total + 1, 0.0));
  for (int mask = 1; mask <= full; ++mask) {
    for (int c = 0; c <= total; ++c) {
      double best = kInf;
      for (int o = 0; o < n; ++o) {
        if (!(mask & (1 << o))) continue;
        const double* sub = f[mask & ~(1 << o)].data();
        for (int g = offset[o]; g < offset[o + 1]; ++g) {
          const double v =
              nav[c][g] + prob.cand[o][g - offset[o]].grasp_time + sub[g];
          if (v < best) best = v;
        }
      }
      f[mask][c] = best;
    }
  }

  int mask = full;
  int at = total;
  while (mask != 0) {
    double best = kInf;
    int best_o = -1, best_g = -1;
    for (int o = 0; o < n; ++o) {
      if (!(mask & (1 << o))) continue;
      const double* sub = f[mask & ~(1 << o)].data();
      for (int g = offset[o]; g < offset[o + 1]; ++g) {
        const double v = nav[at][g] + prob.cand[o][g - offset[o]].grasp_time + sub[g];
        if (v < best) {
          best = v;
          best_o = o;
          best_g = g;
        }
      }
    }
    if (best_o < 0) throw NumericalError("solve_exact: no feasible transition");
    push_stop(plan, prob.cand[best_o][best_g - offset[best_o]].base, prob.object_ids[best_o]);
    mask &= ~(1 << best_o);
    at = best_g;
  }
  return plan;
}

}  // namespace

Plan solve_pbg(const Scene& scene, const std::vector<CandidateSet>& irms,
               const ManipulatorModel& model, FeasibilityMode mode, double latency) {
  Plan plan;
  plan.planner_name = mode == FeasibilityMode::GraspChecked ? "pbg-gc" : "pbg";

  Pose2 current = scene.robot_start;
  std::vector<int> remaining;
  for (const auto& obj : scene.objects) remaining.push_back(obj.id);

  int checks = 0;
  while (!remaining.empty()) {
    // Nearest remaining object by euclidean distance, ties toward the lower id.
    int pick = -1;
    double pick_dist = kInf;
    for (int id : remaining) {
      const ObjectState* obj = scene.find_object(id);
      const double d = std::hypot(obj->pose.x - current.x, obj->pose.y - current.y);
      if (d < pick_dist || (d == pick_dist && (pick < 0 || id < pick))) {
        pick_dist = d;
        pick = id;
      }
    }
    remaining.erase(std::find(remaining.begin(), remaining.end(), pick));

    const CandidateSet* set = set_for(irms, pick);
    if (set == nullptr || set->candidates.empty()) continue;
    if (mode == FeasibilityMode::GraspChecked)
      checks += static_cast<int>(set->candidates.size());

    const Candidate* best = nullptr;
    double best_nav = kInf;
    for (const auto& c : set->candidates) {
      if (!candidate_ok(c, mode)) continue;
      const double t = nav_time(current, c.base);
      if (t < best_nav) {
        best_nav = t;
        best = &c;
      }
    }
    if (best == nullptr) continue;  // nothing feasible under this mode; skip
    push_stop(plan, best->base, pick);
    current = best->base;
  }

  plan.predicted_cost = plan_cost(scene, plan, model);
  plan.planning_wall_time = latency * checks;
  return plan;
}

Plan solve_mbp(const Scene& scene, const std::vector<CandidateSet>& irms,
               const ManipulatorModel& model, FeasibilityMode mode, double latency) {
  Plan plan;
  plan.planner_name = mode == FeasibilityMode::GraspChecked ? "mbp-gc" : "mbp";

  // Per lattice pose: which objects it can serve and at what grasp time.
  struct Cover {
    Pose2 base;
    std::map<int, double> grasp;  // object id -> grasp_time
  };
  std::map<std::tuple<long, long, long>, Cover> covers;
  int checks = 0;
  for (const auto& obj : scene.objects) {
    const CandidateSet* set = set_for(irms, obj.id);
    if (set == nullptr) continue;
    if (mode == FeasibilityMode::GraspChecked)
      checks += static_cast<int>(set->candidates.size());
    for (const auto& c : set->candidates) {
      if (!candidate_ok(c, mode)) continue;
      Cover& cover = covers[lattice_key(c.base)];
      cover.base = c.base;
      cover.grasp[obj.id] = c.grasp_time;
    }
  }

  // Greedy set cover: most uncovered objects, ties by smaller summed grasp
  // time, then lattice order (the map iterates in lattice order already).
  std::vector<int> uncovered;
  for (const auto& obj : scene.objects)
    if (set_for(irms, obj.id) != nullptr) uncovered.push_back(obj.id);

  struct ChosenStop {
    Pose2 base;
    std::vector<int> object_ids;
  };
  std::vector<ChosenStop> chosen;
  while (!uncovered.empty()) {
    const Cover* best = nullptr;
    int best_count = 0;
    double best_sum = kInf;
    for (const auto& [key, cover] : covers) {
      int count = 0;
      double sum = 0.0;
      for (int id : uncovered) {
        auto it = cover.grasp.find(id);
        if (it != cover.grasp.end()) {
          ++count;
          sum += it->second;
        }
      }
      if (count > best_count || (count == best_count && count > 0 && sum < best_sum)) {
        best = &cover;
        best_count = count;
        best_sum = sum;
      }
    }
    if (best == nullptr || best_count == 0) break;  // leftovers are unservable

    ChosenStop stop;
    stop.base = best->base;
    for (auto it = uncovered.begin(); it != uncovered.end();) {
      if (best->grasp.count(*it)) {
        stop.object_ids.push_back(*it);
        it = uncovered.erase(it);
      } else {
        ++it;
      }
    }
    chosen.push_back(std::move(stop));
  }

  // Order stops greedily by navigation time; ties by lattice order.
  Pose2 current = scene.robot_start;
  std::vector<bool> used(chosen.size(), false);
  for (std::size_t step = 0; step < chosen.size(); ++step) {
    int pick = -1;
    double pick_nav = kInf;
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      if (used[i]) continue;
      const double t = nav_time(current, chosen[i].base);
      const bool better =
          pick < 0 || t < pick_nav ||
          (t == pick_nav &&
           lattice_key(chosen[i].base) < lattice_key(chosen[static_cast<std::size_t>(pick)].base));
      if (better) {
        pick_nav = t;
        pick = static_cast<int>(i);
      }
    }
    used[static_cast<std::size_t>(pick)] = true;
    plan.stops.push_back(
        Stop{chosen[static_cast<std::size_t>(pick)].base, chosen[static_cast<std::size_t>(pick)].object_ids});
    current = chosen[static_cast<std::size_t>(pick)].base;
  }

  plan.predicted_cost = plan_cost(scene, plan, model);
  plan.planning_wall_time = latency * checks;
  return plan;
}

Plan solve_dp(const Scene& scene, const std::vector<CandidateSet>& irms,
              const ManipulatorModel& model, int top_k, double latency) {
  if (scene.objects.size() > 12)
    throw InstanceTooLarge("solve_dp: more than 12 objects");
  if (top_k < 1) throw Error("solve_dp: top_k must be positive");

  DpProblem prob = grasp_checked_problem(scene, irms, top_k);
  Plan plan = solve_exact(scene, prob, "dp");
  plan.predicted_cost = plan_cost(scene, plan, model);
  plan.planning_wall_time = latency * prob.total_checks;
  return plan;
}

Plan brute_force(const Scene& scene, const std::vector<CandidateSet>& irms,
                 const ManipulatorModel& model, int cap_candidates) {
  if (scene.objects.size() > 4)
    throw InstanceTooLarge("brute_force: more than 4 objects");
  if (cap_candidates < 1 || cap_candidates > 6)
    throw InstanceTooLarge("brute_force: cap_candidates must be in [1, 6]");

  DpProblem prob = grasp_checked_problem(scene, irms, cap_candidates);
  const int n = static_cast<int>(prob.object_ids.size());

  Plan plan;
  plan.planner_name = "brute-force";
  if (n == 0) {
    plan.predicted_cost = plan_cost(scene, plan, model);
    return plan;
  }

  // Enumerate permutations in lexicographic order over object positions, and
  // candidate tuples in lexicographic order, keeping the first strict minimum.
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  double best_cost = kInf;
  std::vector<int> best_order, best_pick;
  std::vector<int> pick(static_cast<std::size_t>(n), 0);
  do {
    std::fill(pick.begin(), pick.end(), 0);
    while (true) {
      double cost = 0.0;
      Pose2 at = scene.robot_start;
      for (int s = 0; s < n; ++s) {
        const Candidate& c =
            prob.cand[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])]
                     [static_cast<std::size_t>(pick[static_cast<std::size_t>(s)])];
        cost += nav_time(at, c.base) + c.grasp_time;
        at = c.base;
      }
      if (cost < best_cost) {
        best_cost = cost;
        best_order = order;
        best_pick = pick;
      }
      // Advance the candidate tuple (odometer).
      int s = n - 1;
      while (s >= 0) {
        const int limit =
            static_cast<int>(prob.cand[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])].size());
        if (++pick[static_cast<std::size_t>(s)] < limit) break;
        pick[static_cast<std::size_t>(s)] = 0;
        --s;
      }
      if (s < 0) break;
    }
  } while (std::next_permutation(order.begin(), order.end()));

  for (int s = 0; s < n; ++s) {
    const int o = best_order[static_cast<std::size_t>(s)];
    push_stop(plan,
              prob.cand[static_cast<std::size_t>(o)][static_cast<std::size_t>(best_pick[static_cast<std::size_t>(s)])].base,
              prob.object_ids[static_cast<std::size_t>(o)]);
  }
  plan.predicted_cost = plan_cost(scene, plan, model);
  return plan;
}

ExecutionReport execute_plan(const Scene& scene, const Plan& plan, const ManipulatorModel& model) {
  ExecutionReport report;
  for (const auto& obj : scene.objects) report.object_success.emplace_back(obj.id, false);
  auto mark = [&](int id, bool ok) {
    for (auto& [oid, flag] : report.object_success)
      if (oid == id) flag = ok;
  };

  Pose2 current = scene.robot_start;
  for (const auto& stop : plan.stops) {
    report.realized.nav_time += nav_time(current, stop.base);
    current = stop.base;
    if (footprint_collides(stop.base, scene.table)) continue;  // stop aborted
    for (int id : stop.object_ids) {
      const ObjectState* obj = scene.find_object(id);
      if (obj == nullptr) continue;
      if (trajectory_feasible(model, stop.base, obj->pose, scene.table)) {
        mark(id, true);
        report.realized.grasp_time += grasp_time(model, stop.base, *obj);
      }
    }
  }
  report.realized.total = report.realized.nav_time + report.realized.grasp_time;
  for (const auto& [id, ok] : report.object_success)
    if (ok) ++report.objects_grasped;
  return report;
}

}  // namespace pickplan
