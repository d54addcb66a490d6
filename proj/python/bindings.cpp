#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fetosim/collision/contact.hpp"
#include "fetosim/harness/run.hpp"
#include "fetosim/harness/scenario.hpp"

namespace py = pybind11;
using namespace fetosim;

namespace {

py::dict telemetry_dict(const FrameTelemetry& t)
{
    py::list tools;
    for (const auto& tool : t.tools) {
        py::dict d;
        d["id"] = tool.id;
        d["force"] = tool.force;
        d["contacts"] = tool.contacts;
        d["attachments"] = tool.attachments;
        tools.append(d);
    }
    py::dict d;
    d["frame"] = t.frame;
    d["time"] = t.time;
    d["elastic_residual"] = t.elastic_residual;
    d["volume"] = t.volume;
    d["volume_ratio"] = t.volume_ratio;
    d["kinetic_energy"] = t.kinetic_energy;
    d["contact_count"] = t.contact_count;
    d["degenerate"] = t.degenerate;
    d["removed_mass"] = t.removed_mass;
    d["cuts"] = t.cuts;
    d["rejected_cuts"] = t.rejected_cuts;
    d["position_hash"] = t.position_hash;
    d["tools"] = tools;
    return d;
}

py::array_t<double> positions(const Simulation& sim)
{
    const auto& x = sim.state().x;
    py::array_t<double> out({static_cast<py::ssize_t>(x.size()), py::ssize_t{3}});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            view(static_cast<py::ssize_t>(i), k) = x[i][k];
        }
    }
    return out;
}

py::array_t<int> surface(const Simulation& sim)
{
    const auto& s = sim.mesh().surface;
    py::array_t<int> out({static_cast<py::ssize_t>(s.size()), py::ssize_t{3}});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            view(static_cast<py::ssize_t>(i), k) = s[i].verts[static_cast<std::size_t>(k)];
        }
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Bindings for the fetosim simulation core";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    m.def("tool_kinds", [] {
        return std::vector<std::string>{to_string(ToolKind::Diathermy), to_string(ToolKind::Scissors),
                                        to_string(ToolKind::Grasper)};
    });

    py::class_<ToolPose>(m, "ToolPose")
        .def(py::init([](const std::string& kind, const Vec3& position, const Eigen::Vector4d& wxyz, double jaw,
                         bool active) {
                 ToolPose p;
                 p.kind = tool_kind_from_string(kind);
                 p.position = position;
                 p.orientation = Quat(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
                 p.jaw = jaw;
                 p.active = active;
                 p.sanitize();
                 return p;
             }),
             py::arg("kind"), py::arg("position"), py::arg("orientation") = Eigen::Vector4d(1, 0, 0, 0),
             py::arg("jaw") = 1.0, py::arg("active") = false)
        .def_property_readonly("kind", [](const ToolPose& p) { return to_string(p.kind); })
        .def_readonly("position", &ToolPose::position)
        .def_property_readonly("orientation",
                               [](const ToolPose& p) {
                                   const Quat& q = p.orientation;
                                   return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
                               })
        .def_readonly("jaw", &ToolPose::jaw)
        .def_readonly("active", &ToolPose::active);

    py::class_<SdfShape>(m, "SdfShape")
        .def_static("sphere", &SdfShape::sphere, py::arg("center"), py::arg("radius"))
        .def_static("capsule", &SdfShape::capsule, py::arg("a"), py::arg("b"), py::arg("radius"))
        .def_static("rounded_box", &SdfShape::rounded_box, py::arg("half_extents"), py::arg("radius"))
        .def_static("union", &SdfShape::make_union, py::arg("children"))
        .def("distance", &SdfShape::distance, py::arg("p"))
        .def("gradient", [](const SdfShape& s, const Vec3& p) { return s.eval(p).gradient; }, py::arg("p"));

    m.def(
        "closest_point_element_sdf",
        [](const std::vector<Vec3>& verts, const SdfShape& shape) {
            if (verts.empty() || verts.size() > 4) {
                throw DomainError("element needs 1 to 4 vertices");
            }
            const ElementClosest c = closest_point_element_sdf(verts, shape);
            py::dict d;
            d["bary"] = std::vector<double>(c.bary.begin(), c.bary.begin() + static_cast<long>(verts.size()));
            d["point"] = c.point;
            d["phi"] = c.phi;
            d["normal"] = c.normal;
            return d;
        },
        py::arg("verts"), py::arg("shape"));

    py::class_<MetricsRow>(m, "MetricsRow")
        .def_readonly("frame", &MetricsRow::frame)
        .def_readonly("time", &MetricsRow::time)
        .def_readonly("volume_ratio", &MetricsRow::volume_ratio)
        .def_readonly("elastic_residual", &MetricsRow::elastic_residual)
        .def_readonly("kinetic_energy", &MetricsRow::kinetic_energy)
        .def_readonly("contact_count", &MetricsRow::contact_count)
        .def_readonly("removed_mass", &MetricsRow::removed_mass)
        .def_readonly("mean_substep_us", &MetricsRow::mean_substep_us)
        .def_readonly("position_hash", &MetricsRow::position_hash);

    py::class_<Simulation>(m, "Simulation")
        .def("step_frame", [](Simulation& s) { return telemetry_dict(s.step_frame()); })
        .def("reset", &Simulation::reset)
        .def("set_tool_target", &Simulation::set_tool_target, py::arg("id"), py::arg("pose"))
        .def("set_gravity", &Simulation::set_gravity, py::arg("g"))
        .def_property_readonly("tool_ids",
                               [](const Simulation& s) {
                                   std::vector<int> ids;
                                   for (const auto& [id, tool] : s.tools()) {
                                       ids.push_back(id);
                                   }
                                   return ids;
                               })
        .def("tool_pose", [](const Simulation& s, int id) { return s.tools().at(id).pose; }, py::arg("id"))
        .def_property_readonly("positions", &positions)
        .def_property_readonly("surface", &surface)
        .def_property_readonly("frame", &Simulation::frame)
        .def_property_readonly("time", &Simulation::time)
        .def_property_readonly("initial_mass", &Simulation::initial_mass)
        .def_property_readonly("alive_mass", &Simulation::alive_mass)
        .def_property_readonly("removed_mass", &Simulation::removed_mass)
        .def_property_readonly("rest_volume", &Simulation::rest_volume);

    m.def(
        "load_scenario_simulation",
        [](const std::filesystem::path& path) { return make_simulation(load_scenario(path)); }, py::arg("path"));

    m.def(
        "run_scenario",
        [](const std::filesystem::path& path, std::optional<bool> deterministic, std::optional<int> substeps,
           std::optional<double> duration) {
            Scenario scenario = load_scenario(path);
            RunOverrides overrides;
            overrides.deterministic = deterministic;
            overrides.substeps = substeps;
            overrides.apply(scenario);
            if (duration) {
                scenario.duration = *duration;
            }
            scenario.validate();
            MetricsReport report;
            {
                py::gil_scoped_release release;
                report = fetosim::run_scenario(scenario);
            }
            py::dict d;
            d["scenario"] = report.scenario;
            d["rows"] = report.rows;
            d["ok"] = report.ok();
            if (report.failure) {
                py::dict f;
                f["frame"] = report.failure->frame;
                f["vertex"] = report.failure->vertex;
                f["message"] = report.failure->message;
                d["failure"] = f;
            } else {
                d["failure"] = py::none();
            }
            d["components"] = report.components;
            d["cuts"] = report.cuts;
            d["mass_error"] = report.mass_error();
            return d;
        },
        py::arg("path"), py::arg("deterministic") = py::none(), py::arg("substeps") = py::none(),
        py::arg("duration") = py::none());
}
