#include "pickplan/cost.hpp"

#include <cmath>

#include "pickplan/errors.hpp"

namespace pickplan {

double nav_time(const Pose2& from, const Pose2& to, double v_lin, double v_ang) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  const double dist = std::hypot(dx, dy);
  if (dist < 1e-9) {
    return std::abs(wrap_angle(to.theta - from.theta)) / v_ang;
  }
  const double bearing = std::atan2(dy, dx);
  const double turn_in = std::abs(wrap_angle(bearing - from.theta));
  const double turn_out = std::abs(wrap_angle(to.theta - bearing));
  return turn_in / v_ang + dist / v_lin + turn_out / v_ang;
}

}  // namespace pickplan
