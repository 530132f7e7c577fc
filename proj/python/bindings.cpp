#include "vinesim/config.hpp"
#include "vinesim/errors.hpp"
#include "vinesim/kinematics.hpp"
#include "vinesim/planner.hpp"
#include "vinesim/pneumatics.hpp"
#include "vinesim/simulation.hpp"
#include "vinesim/units.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <utility>

namespace py = pybind11;
using namespace vinesim;

namespace {

nlohmann::json to_json(const py::object& obj)
{
    if (obj.is_none()) return nlohmann::json::object();
    const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    return nlohmann::json::parse(text);
}

py::object from_json(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<Point2> points_of(const std::vector<std::pair<double, double>>& xy)
{
    std::vector<Point2> out;
    out.reserve(xy.size());
    for (const auto& [x, y] : xy) out.push_back({x, y});
    return out;
}

py::dict scenario_summary(const ScenarioResult& r, const std::string& name)
{
    py::dict d;
    d["name"] = name;
    d["frames"] = r.frames.size();
    d["ticks"] = r.final_state.ticks;
    d["everted_mm"] = units::to_mm(r.final_state.everted_length);
    const auto& tip = r.final_backbone.tip();
    d["tip_mm"] = py::make_tuple(units::to_mm(tip.x), units::to_mm(tip.y));
    d["final_heading_deg"] = units::to_deg(tip.theta);
    d["commands"] = r.log.size();
    return d;
}

}  // namespace

PYBIND11_MODULE(_vinesim, m)
{
    m.doc() = "Vine robot kinematics, valve growth simulation and pressure planning (SI units)";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<CommandRejected>(m, "CommandRejected", PyExc_ValueError);
    py::register_exception<InfeasibleBend>(m, "InfeasibleBend", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    // keep the violated invariant reachable from Python
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            py::object err = py::module_::import("vinesim._vinesim").attr("ValidationError")(e.what());
            err.attr("invariant") = e.invariant();
            PyErr_SetObject(py::type::handle_of(err).ptr(), err.ptr());
        }
    });

    py::enum_<Side>(m, "Side").value("left", Side::left).value("right", Side::right);
    py::enum_<Mode>(m, "Mode").value("grow", Mode::grow).value("retract", Mode::retract).value("hold", Mode::hold);

    py::class_<RobotGeometry>(m, "RobotGeometry")
        .def(py::init<>())
        .def_static("prototype", &RobotGeometry::prototype)
        .def_readwrite("d_vine", &RobotGeometry::d_vine)
        .def_readwrite("l_cpam", &RobotGeometry::l_cpam)
        .def_readwrite("w_cpam", &RobotGeometry::w_cpam)
        .def_readwrite("f_cpam", &RobotGeometry::f_cpam)
        .def_readwrite("cells_per_side", &RobotGeometry::cells_per_side)
        .def_readwrite("cpams_per_valve", &RobotGeometry::cpams_per_valve)
        .def_readwrite("length_correction", &RobotGeometry::length_correction)
        .def("validate", &RobotGeometry::validate)
        .def_property_readonly("groups_per_side", &RobotGeometry::groups_per_side)
        .def_property_readonly("total_length", &RobotGeometry::total_length);

    py::class_<CalibrationCurve>(m, "CalibrationCurve")
        .def(py::init<>())
        .def(py::init([](const std::vector<std::pair<double, double>>& pts) {
                 std::vector<CalibrationPoint> v;
                 for (const auto& [p, b] : pts) v.push_back({p, b});
                 return CalibrationCurve(std::move(v));
             }),
             py::arg("points"), "(pressure Pa, bend rad/m) pairs, strictly increasing pressure")
        .def_static("read_csv", &read_calibration_csv, py::arg("path"))
        .def_property_readonly("points",
                               [](const CalibrationCurve& c) {
                                   std::vector<std::pair<double, double>> out;
                                   for (const auto& p : c.points()) out.emplace_back(p.pressure, p.bend_per_length);
                                   return out;
                               })
        .def_property_readonly("max_pressure", &CalibrationCurve::max_pressure)
        .def_property_readonly("max_bend", &CalibrationCurve::max_bend)
        .def("bend_from_pressure", &CalibrationCurve::bend_from_pressure, py::arg("pressure"))
        .def("pressure_from_bend", &CalibrationCurve::pressure_from_bend, py::arg("bend"));

    py::class_<PlanarPose>(m, "PlanarPose")
        .def_readonly("x", &PlanarPose::x)
        .def_readonly("y", &PlanarPose::y)
        .def_readonly("theta", &PlanarPose::theta)
        .def("__repr__", [](const PlanarPose& p) {
            return py::str("PlanarPose(x={}, y={}, theta={})").format(p.x, p.y, p.theta);
        });

    py::class_<Backbone>(m, "Backbone")
        .def_readonly("poses", &Backbone::poses)
        .def_property_readonly("tip", &Backbone::tip)
        .def_property_readonly("samples",
                               [](const Backbone& b) -> py::object {
                                   if (!b.samples) return py::none();
                                   py::list out;
                                   for (const auto& s : *b.samples) out.append(py::make_tuple(s.s, s.x, s.y, s.theta));
                                   return out;
                               })
        .def("sampled", &sample_backbone, py::arg("points_per_segment") = 16);

    m.def("fold_width", &fold_width, py::arg("l_cpam"));
    m.def("theoretical_bend_per_length", &theoretical_bend_per_length, py::arg("epsilon"), py::arg("d_vine"));
    m.def(
        "segment_transform",
        [](double q, double l, double d_vine, Side side) { return segment_transform({q, l}, d_vine, side); },
        py::arg("q"), py::arg("l"), py::arg("d_vine"), py::arg("side") = Side::left,
        "3x3 homogeneous transform of one offset constant-curvature segment");
    m.def(
        "chain_pose",
        [](const std::vector<double>& bends, double l, double d_vine) {
            std::vector<Segment> segs;
            for (double q : bends) segs.push_back(make_segment(q, l));
            return chain_pose(segs, d_vine);
        },
        py::arg("bends"), py::arg("l"), py::arg("d_vine"), "Backbone of segments bent by `bends` (rad), each of length `l`");

    m.def(
        "predict_path",
        [](const std::vector<double>& left, const std::vector<double>& right, const RobotGeometry& geometry,
           const CalibrationCurve& calibration) {
            return predict_path(PressureSchedule::from_groups(left, right), geometry, calibration);
        },
        py::arg("left"), py::arg("right"), py::arg("geometry") = RobotGeometry::prototype(),
        py::arg("calibration") = CalibrationCurve{}, "Fully everted shape for per-group pressures in Pa");

    py::class_<PathScore>(m, "PathScore")
        .def_readonly("mean_error", &PathScore::mean_error)
        .def_readonly("max_error", &PathScore::max_error)
        .def_readonly("tip_error", &PathScore::tip_error);

    m.def(
        "score_path",
        [](const Backbone& predicted, const std::vector<std::pair<double, double>>& reference, int pps) {
            return score_path(predicted, points_of(reference), pps);
        },
        py::arg("predicted"), py::arg("reference"), py::arg("points_per_segment") = 16);

    py::class_<PlanResult>(m, "PlanResult")
        .def_property_readonly("left", [](const PlanResult& r) { return r.schedule.pressures(Side::left); })
        .def_property_readonly("right", [](const PlanResult& r) { return r.schedule.pressures(Side::right); })
        .def_readonly("score", &PlanResult::score)
        .def_readonly("group_bends", &PlanResult::group_bends)
        .def_readonly("saturated_groups", &PlanResult::saturated_groups)
        .def_readonly("objective_history", &PlanResult::objective_history)
        .def_readonly("iterations", &PlanResult::iterations)
        .def_property_readonly("infeasible", &PlanResult::infeasible);

    m.def(
        "plan_pressures",
        [](const std::vector<std::pair<double, double>>& waypoints, const RobotGeometry& geometry,
           const CalibrationCurve& calibration, int n_groups, double p_max, double objective_tolerance) {
            TargetPath t;
            t.waypoints = points_of(waypoints);
            PlanOptions o;
            o.p_max = p_max;
            o.objective_tolerance = objective_tolerance;
            py::gil_scoped_release release;
            return plan_pressures(t, geometry, calibration, n_groups, o);
        },
        py::arg("waypoints"), py::arg("geometry") = RobotGeometry::prototype(),
        py::arg("calibration") = CalibrationCurve{}, py::arg("n_groups") = 4, py::arg("p_max") = 40e3,
        py::arg("objective_tolerance") = 1e-6, "Per-group pressures (Pa) whose shape best follows `waypoints` (m)");

    m.def(
        "validate_config", [](const py::object& doc) { parse_session_config(to_json(doc)); }, py::arg("doc") = py::none(),
        "Raises ValidationError naming the first violated invariant");

    py::class_<Simulation>(m, "Simulation")
        .def(py::init([](const py::object& doc) {
                 auto c = parse_session_config(to_json(doc));
                 return std::make_unique<Simulation>(c.vine, c.sim);
             }),
             py::arg("config") = py::none(), "Session config in the JSON schema, as a dict")
        .def(
            "enqueue",
            [](Simulation& sim, std::optional<std::string> mode, std::optional<double> supply_left_kpa,
               std::optional<double> supply_right_kpa, std::optional<double> speed_mm_s) {
                CommandRecord r;
                if (mode) r.mode = mode_from_string(*mode);
                r.supply_left_kpa = supply_left_kpa;
                r.supply_right_kpa = supply_right_kpa;
                r.speed_mm_s = speed_mm_s;
                return sim.enqueue(r);
            },
            py::kw_only(), py::arg("mode") = py::none(), py::arg("supply_left_kpa") = py::none(),
            py::arg("supply_right_kpa") = py::none(), py::arg("speed_mm_s") = py::none(),
            "Queue a command for the next tick; returns its timestamp in s")
        .def(
            "tick",
            [](Simulation& sim) -> py::object {
                auto f = sim.tick();
                if (!f) return py::none();
                return from_json(frame_to_json(*f, "python"));
            },
            "Advance one step; returns a state frame dict when one is due")
        .def(
            "run",
            [](Simulation& sim, std::int64_t ticks) {
                py::list frames;
                for (std::int64_t i = 0; i < ticks; ++i) {
                    if (auto f = sim.tick()) frames.append(from_json(frame_to_json(*f, "python")));
                }
                return frames;
            },
            py::arg("ticks"))
        .def("frame", [](Simulation& sim) { return from_json(frame_to_json(sim.frame_now(), "python")); })
        .def_property_readonly("ticks", &Simulation::ticks)
        .def_property_readonly("everted_length", [](const Simulation& sim) { return sim.snapshot().everted_length; })
        .def_property_readonly("held_pressures", [](const Simulation& sim) {
            const auto s = sim.snapshot();
            std::vector<double> l, r;
            for (const auto& v : s.left) l.push_back(v.held_pressure);
            for (const auto& v : s.right) r.push_back(v.held_pressure);
            return std::make_pair(l, r);
        })
        .def("shape", [](const Simulation& sim) { return shape(sim.snapshot(), sim.config()); })
        .def("command_log", [](const Simulation& sim) {
            std::vector<std::string> out;
            for (const auto& r : sim.command_log()) out.push_back(format_command_record(r));
            return out;
        });

    m.def(
        "run_scenario",
        [](const std::filesystem::path& path) {
            const Scenario sc = load_scenario(path);
            return scenario_summary(run_scenario(sc), sc.name);
        },
        py::arg("path"), "Run a scenario file and summarise the final state");
}
