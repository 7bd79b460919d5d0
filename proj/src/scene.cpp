#include "pickplan/scene.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "pickplan/errors.hpp"
#include "pickplan/io.hpp"
#include "pickplan/rng.hpp"

namespace pickplan {

using json = nlohmann::json;

double rect_distance(const TableRect& table, double x, double y) {
  // Work in the rectangle's local frame so rotated tables are handled too.
  const Pose2 local = inverse_transform(Pose2{x, y, 0.0}, table.center);
  const double cx = std::clamp(local.x, -table.half_length, table.half_length);
  const double cy = std::clamp(local.y, -table.half_width, table.half_width);
  return std::hypot(local.x - cx, local.y - cy);
}

bool footprint_collides(const Pose2& base, const TableRect& table) {
  return rect_distance(table, base.x, base.y) < kRobotRadius;
}

Scene sample_scene(std::uint64_t seed, int n_objects, std::array<double, 2> start_annulus) {
  if (n_objects < 1 || n_objects > 10)
    throw Error("sample_scene: n_objects must be in [1, 10]");
  if (!(start_annulus[0] > 0.0) || !(start_annulus[1] >= start_annulus[0]))
    throw Error("sample_scene: annulus bounds must be positive and ordered");

  Scene scene;
  scene.seed = seed;
  scene.table = TableRect{};
  Rng rng(seed);

  const double x_max = scene.table.half_length - kTableMargin;
  const double y_max = scene.table.half_width - kTableMargin;

  scene.objects.reserve(n_objects);
  for (int i = 0; i < n_objects; ++i) {
    ObjectState obj;
    obj.id = i;
    obj.class_id = rng.uniform_int(kNumObjectClasses);
    bool placed = false;
    for (int attempt = 0; attempt < kSamplingAttemptCap; ++attempt) {
      const double x = rng.uniform(-x_max, x_max);
      const double y = rng.uniform(-y_max, y_max);
      const double theta = rng.angle();
      bool ok = true;
      for (const auto& other : scene.objects) {
        if (std::hypot(other.pose.x - x, other.pose.y - y) < kObjectSeparation) {
          ok = false;
          break;
        }
      }
      if (ok) {
        obj.pose = Pose2{x, y, theta};
        placed = true;
        break;
      }
    }
    if (!placed)
      throw SamplingExhausted("sample_scene: could not place object " + std::to_string(i));
    scene.objects.push_back(obj);
  }

  bool start_ok = false;
  for (int attempt = 0; attempt < kSamplingAttemptCap; ++attempt) {
    const double r = rng.uniform(start_annulus[0], start_annulus[1]);
    const double phi = rng.angle();
    const double heading = rng.angle();
    const Pose2 start = transform(Pose2{r * std::cos(phi), r * std::sin(phi), heading},
                                  scene.table.center);
    if (!footprint_collides(start, scene.table)) {
      scene.robot_start = start;
      start_ok = true;
      break;
    }
  }
  if (!start_ok)
    throw SamplingExhausted("sample_scene: could not place robot start");
  return scene;
}

std::string scene_to_json(const Scene& scene) {
  json j;
  j["seed"] = scene.seed;
  j["table"] = {{"cx", scene.table.center.x},
                {"cy", scene.table.center.y},
                {"ctheta", scene.table.center.theta},
                {"half_length", scene.table.half_length},
                {"half_width", scene.table.half_width}};
  json objs = json::array();
  for (const auto& o : scene.objects) {
    objs.push_back({{"id", o.id},
                    {"class_id", o.class_id},
                    {"x", o.pose.x},
                    {"y", o.pose.y},
                    {"theta", o.pose.theta}});
  }
  j["objects"] = std::move(objs);
  j["robot_start"] = {{"x", scene.robot_start.x},
                      {"y", scene.robot_start.y},
                      {"theta", scene.robot_start.theta}};
  return j.dump(2) + "\n";
}

Scene scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("scene parse error: ") + e.what());
  }
  Scene scene;
  try {
    scene.seed = j.at("seed").get<std::uint64_t>();
    const auto& t = j.at("table");
    scene.table.center = Pose2{t.at("cx").get<double>(), t.at("cy").get<double>(),
                               t.at("ctheta").get<double>()};
    scene.table.half_length = t.at("half_length").get<double>();
    scene.table.half_width = t.at("half_width").get<double>();
    for (const auto& o : j.at("objects")) {
      ObjectState obj;
      obj.id = o.at("id").get<int>();
      obj.class_id = o.at("class_id").get<int>();
      obj.pose = Pose2{o.at("x").get<double>(), o.at("y").get<double>(),
                       o.at("theta").get<double>()};
      scene.objects.push_back(obj);
    }
    const auto& r = j.at("robot_start");
    scene.robot_start = Pose2{r.at("x").get<double>(), r.at("y").get<double>(),
                              r.at("theta").get<double>()};
  } catch (const json::exception& e) {
    throw IoError(std::string("scene field error: ") + e.what());
  }
  return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
  write_file(path, scene_to_json(scene));
}

Scene load_scene(const std::string& path) { return scene_from_json(read_file(path)); }

}  // namespace pickplan
