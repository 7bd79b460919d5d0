#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pickplan/bench.hpp"
#include "pickplan/io.hpp"

namespace py = pybind11;
using namespace pickplan;

namespace {

py::dict pose_dict(const Pose2& p) {
  py::dict d;
  d["x"] = p.x;
  d["y"] = p.y;
  d["theta"] = p.theta;
  return d;
}

py::dict plan_dict(const Plan& plan) {
  py::dict d;
  d["planner"] = plan.planner_name;
  py::list stops;
  for (const auto& s : plan.stops) {
    py::dict sd = pose_dict(s.base);
    sd["objects"] = s.object_ids;
    stops.append(sd);
  }
  d["stops"] = stops;
  d["nav"] = plan.predicted_cost.nav_time;
  d["grasp"] = plan.predicted_cost.grasp_time;
  d["total"] = plan.predicted_cost.total;
  d["wall_time"] = plan.planning_wall_time;
  return d;
}

Plan plan_scene(const Scene& scene, const std::string& method_str, double latency, int top_k,
                const std::string& base_ckpt, const std::string& seq_ckpt) {
  const Method method = method_from_name(method_str);
  const ManipulatorModel model;
  BasePolicy base;
  SeqPolicy seq;
  if (method == Method::LEARNED) {
    if (base_ckpt.empty() || seq_ckpt.empty())
      throw Error("learned method needs base_ckpt and seq_ckpt");
    base = load_base_policy(base_ckpt);
    seq = load_seq_policy(seq_ckpt);
  }
  const auto irms =
      method == Method::LEARNED ? std::vector<CandidateSet>{} : build_irms(model, scene);
  return plan_with_method(method, scene, irms, model, latency, top_k,
                          method == Method::LEARNED ? &base : nullptr,
                          method == Method::LEARNED ? &seq : nullptr);
}

}  // namespace

PYBIND11_MODULE(_pickplan, m) {
  m.doc() = "Minimum-time base-pose sequence planning for tabletop picking";

  py::register_exception<Error>(m, "PickplanError");

  py::class_<Pose2>(m, "Pose2")
      .def(py::init([](double x, double y, double theta) { return make_pose(x, y, theta); }),
           py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("theta") = 0.0)
      .def_readwrite("x", &Pose2::x)
      .def_readwrite("y", &Pose2::y)
      .def_readwrite("theta", &Pose2::theta)
      .def("__repr__", [](const Pose2& p) {
        return "Pose2(" + fmt_double(p.x) + ", " + fmt_double(p.y) + ", " + fmt_double(p.theta) +
               ")";
      });

  py::class_<Scene>(m, "Scene")
      .def_property_readonly("n_objects",
                             [](const Scene& s) { return s.objects.size(); })
      .def_property_readonly("robot_start", [](const Scene& s) { return s.robot_start; })
      .def("object_poses",
           [](const Scene& s) {
             py::list out;
             for (const auto& o : s.objects) {
               py::dict d = pose_dict(o.pose);
               d["id"] = o.id;
               d["class_id"] = o.class_id;
               out.append(d);
             }
             return out;
           })
      .def("to_json", &scene_to_json)
      .def_static("from_json", &scene_from_json);

  py::class_<Plan>(m, "Plan")
      .def_property_readonly("planner", [](const Plan& p) { return p.planner_name; })
      .def_property_readonly("n_stops", [](const Plan& p) { return p.stops.size(); })
      .def_property_readonly("total", [](const Plan& p) { return p.predicted_cost.total; })
      .def("to_dict", &plan_dict)
      .def("to_json", &plan_to_json);

  m.def("sample_scene", &sample_scene, py::arg("seed"), py::arg("n_objects"),
        py::arg("start_annulus") = std::array<double, 2>{2.5, 3.0});
  m.def("load_scene", &load_scene, py::arg("path"));
  m.def("save_scene", &save_scene, py::arg("scene"), py::arg("path"));

  m.def("nav_time", [](const Pose2& a, const Pose2& b) { return nav_time(a, b); },
        py::arg("from_pose"), py::arg("to_pose"),
        "Rotate-drive-rotate travel time between two base poses");

  m.def("plan_scene", &plan_scene, py::arg("scene"), py::arg("method"),
        py::arg("latency") = 0.0, py::arg("top_k") = 20, py::arg("base_ckpt") = "",
        py::arg("seq_ckpt") = "",
        "Plan one scene with pbg|pbg-gc|mbp|mbp-gc|dp|learned");

  m.def("execute_plan",
        [](const Scene& scene, const Plan& plan) {
          const ExecutionReport r = execute_plan(scene, plan, ManipulatorModel{});
          py::dict d;
          d["grasped"] = r.objects_grasped;
          d["nav"] = r.realized.nav_time;
          d["grasp"] = r.realized.grasp_time;
          d["total"] = r.realized.total;
          return d;
        },
        py::arg("scene"), py::arg("plan"));

  m.def("plan_cost",
        [](const Scene& scene, const Plan& plan) {
          const CostBreakdown c = plan_cost(scene, plan, ManipulatorModel{});
          py::dict d;
          d["nav"] = c.nav_time;
          d["grasp"] = c.grasp_time;
          d["total"] = c.total;
          return d;
        },
        py::arg("scene"), py::arg("plan"));

  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stream"));
}
