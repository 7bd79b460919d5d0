#pragma once

#include <cmath>

namespace pickplan {

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::fmod(a + M_PI, 2.0 * M_PI);
  if (r <= 0.0) r += 2.0 * M_PI;
  return r - M_PI;
}

// Planar rigid pose (x, y, heading). Heading is kept normalized to (-pi, pi]
// by every operation that produces a Pose2.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  static Pose2 identity() { return {0.0, 0.0, 0.0}; }

  bool operator==(const Pose2&) const = default;
};

inline Pose2 make_pose(double x, double y, double theta) {
  return {x, y, wrap_angle(theta)};
}

// Express `local`, given in the coordinate frame `frame`, in the parent frame
// of `frame` (frame composition: frame * local).
inline Pose2 transform(const Pose2& local, const Pose2& frame) {
  const double c = std::cos(frame.theta);
  const double s = std::sin(frame.theta);
  return {frame.x + c * local.x - s * local.y,
          frame.y + s * local.x + c * local.y,
          wrap_angle(frame.theta + local.theta)};
}

// Express the parent-frame pose `global` in the coordinate frame `frame`
// (inverse of transform).
inline Pose2 inverse_transform(const Pose2& global, const Pose2& frame) {
  const double c = std::cos(frame.theta);
  const double s = std::sin(frame.theta);
  const double dx = global.x - frame.x;
  const double dy = global.y - frame.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(global.theta - frame.theta)};
}

inline double position_distance(const Pose2& a, const Pose2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace pickplan
