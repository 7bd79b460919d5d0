#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pickplan/pose.hpp"

namespace pickplan {

// Robot footprint modeled as a disc; rotation-invariant collision checks.
inline constexpr double kRobotRadius = 0.45;

inline constexpr int kNumObjectClasses = 5;
inline constexpr double kTableMargin = 0.05;       // object distance from table edge
inline constexpr double kObjectSeparation = 0.15;  // minimum pairwise object distance
inline constexpr int kSamplingAttemptCap = 10000;

struct TableRect {
  Pose2 center;             // table frame origin in world coordinates
  double half_length = 1.0;  // along local x
  double half_width = 0.4;   // along local y
};

struct ObjectState {
  int id = 0;
  int class_id = 0;   // in [0, kNumObjectClasses)
  Pose2 pose;         // scene frame (= table frame W; the rectangle sits at table.center)
};

// Problem instance: table geometry, objects on the table surface and the
// robot start pose. Immutable after construction; cheap to copy.
struct Scene {
  TableRect table;
  std::vector<ObjectState> objects;
  Pose2 robot_start;
  std::uint64_t seed = 0;

  const ObjectState* find_object(int id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
};

// Distance from a point to the table rectangle (0 inside).
double rect_distance(const TableRect& table, double x, double y);

// True iff the robot footprint disc intersects the table rectangle.
bool footprint_collides(const Pose2& base, const TableRect& table);

// Deterministically sample a scene: n_objects placed on the table with the
// pairwise-separation and edge-margin constraints, robot start inside the
// given annulus around the table center. Throws SamplingExhausted if the
// constraints cannot be met within kSamplingAttemptCap attempts.
Scene sample_scene(std::uint64_t seed, int n_objects, std::array<double, 2> start_annulus);

// Scene file format (one JSON document per scene).
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace pickplan
