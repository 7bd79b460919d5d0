#pragma once

#include "pickplan/pose.hpp"
#include "pickplan/reach.hpp"
#include "pickplan/scene.hpp"

namespace pickplan {

inline constexpr double kDefaultLinearVelocity = 0.5;   // m/s
inline constexpr double kDefaultAngularVelocity = 0.5;  // rad/s

struct CostBreakdown {
  double nav_time = 0.0;
  double grasp_time = 0.0;
  double total = 0.0;  // nav_time + grasp_time
};

// Rotate-drive-rotate navigation time: turn toward the goal position, drive
// straight, turn to the goal heading. Degenerates to a single in-place
// rotation when the positions coincide (dist < 1e-9).
double nav_time(const Pose2& from, const Pose2& to,
                double v_lin = kDefaultLinearVelocity,
                double v_ang = kDefaultAngularVelocity);

}  // namespace pickplan
