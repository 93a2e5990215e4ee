#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "phdc/audit.hpp"
#include "phdc/controllers.hpp"
#include "phdc/errors.hpp"
#include "phdc/scenario_io.hpp"

namespace py = pybind11;
using namespace phdc;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::object optional_float(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict summary_dict(const RunResult& r) {
  const auto& s = r.summary;
  py::dict d;
  d["max_deviation_pu"] = s.regulation.max_deviation_pu;
  d["undershoot_pu"] = s.regulation.undershoot_pu;
  d["overshoot_pu"] = s.regulation.overshoot_pu;
  d["recovery_band_pu"] = s.regulation.band_pu;
  d["recovery_time_s"] = optional_float(s.regulation.recovery_time_s);
  d["energy_mismatch_rel"] = s.consistency.max_relative_mismatch;
  d["passivity_violations"] = s.passivity_violations;
  d["max_supply_excess_w"] = s.max_supply_excess;
  d["flags"] = s.flags_seen;
  return d;
}

Scenario with_overrides(Scenario s, const std::optional<std::string>& controller,
                        const std::optional<double>& duration_s) {
  if (controller) s.controller.kind = controller_kind_from_string(*controller);
  if (duration_s) s.duration_s = *duration_s;
  s.validate();
  return s;
}

RunResult run_released(const Scenario& s) {
  py::gil_scoped_release release;
  return run_scenario(s);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Grid-tied AC/DC converter simulator with energy audit";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", error.ptr());
  py::register_exception<SingularityError>(m, "SingularityError", error.ptr());
  py::register_exception<ScenarioError>(m, "ScenarioError", error.ptr());
  py::register_exception<LoadError>(m, "LoadError", error.ptr());
  py::register_exception<ComparisonError>(m, "ComparisonError", error.ptr());

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("scenario", &RunResult::scenario)
      .def_readonly("controller", &RunResult::controller)
      .def_readonly("step_s", &RunResult::step_s)
      .def_readonly("nominal_v_dc", &RunResult::nominal_v_dc)
      .def_readonly("failure", &RunResult::failure)
      .def_readonly("notices", &RunResult::notices)
      .def_readonly("events", &RunResult::events)
      .def_readonly("wall_time_s", &RunResult::wall_time_s)
      .def_property_readonly("ok", &RunResult::ok)
      .def_property_readonly("summary", &summary_dict)
      .def_property_readonly("series",
                             [](const RunResult& r) {
                               py::dict d;
                               d["t"] = to_array(r.series.t);
                               d["v_dc"] = to_array(r.series.v_dc);
                               d["h_cl"] = to_array(r.series.h_cl);
                               d["hdot_cl"] = to_array(r.series.hdot_cl);
                               d["hdot_tot"] = to_array(r.series.hdot_tot);
                               d["supply"] = to_array(r.series.supply);
                               return d;
                             },
                             "Full-resolution energy series (one entry per step).")
      .def("trajectory_csv", [](const RunResult& r) { return trajectory_csv(r.trajectory); })
      .def("summary_csv", [](const RunResult& r) { return summary_csv(r); })
      .def("check",
           [](const RunResult& r, double band_pu, double recovery_window_s) {
             std::vector<std::tuple<std::string, bool, std::string>> out;
             for (const auto& l : check_run(r, band_pu, recovery_window_s)) {
               out.emplace_back(l.name, l.passed, l.detail);
             }
             return out;
           },
           py::arg("band_pu") = 0.02, py::arg("recovery_window_s") = 0.2)
      .def("__repr__", [](const RunResult& r) {
        return "<RunResult " + r.scenario + "/" + r.controller + (r.ok() ? " ok>" : " failed>");
      });

  m.def("demo_names", &demo_names);
  m.def(
      "demo_config", [](const std::string& name) { return serialize_config(demo_scenario(name)); },
      py::arg("name"), "Full INI text of a built-in scenario.");
  m.def(
      "check_config",
      [](const std::string& text) { return parse_config_text(text, "<config>").notices; },
      py::arg("text"), "Validates INI text; returns the defaulted-key notices.");

  m.def(
      "run_demo",
      [](const std::string& name, std::optional<std::string> controller,
         std::optional<double> duration_s) {
        return run_released(with_overrides(demo_scenario(name), controller, duration_s));
      },
      py::arg("name"), py::arg("controller") = py::none(), py::arg("duration_s") = py::none());
  m.def(
      "run_config",
      [](const std::string& text, const std::filesystem::path& base_dir,
         std::optional<std::string> controller, std::optional<double> duration_s) {
        auto parsed = parse_config_text(text, "<config>", base_dir);
        auto r = run_released(with_overrides(parsed.scenario, controller, duration_s));
        r.notices.insert(r.notices.begin(), parsed.notices.begin(), parsed.notices.end());
        return r;
      },
      py::arg("text"), py::arg("base_dir") = ".", py::arg("controller") = py::none(),
      py::arg("duration_s") = py::none());
  m.def(
      "write_outputs",
      [](const RunResult& r, const std::string& config_text, const std::filesystem::path& dir) {
        const auto s = parse_config_text(config_text).scenario;
        std::vector<std::string> out;
        for (const auto& p : write_run_outputs(r, s, dir)) out.push_back(p.string());
        return out;
      },
      py::arg("result"), py::arg("config_text"), py::arg("dir"));
  m.def(
      "compare",
      [](const RunResult& a, const RunResult& b) { return compare_runs(a, b).to_csv(); },
      py::arg("first"), py::arg("second"));

  m.def(
      "audit_trajectory_csv",
      [](const std::string& csv_text, const std::string& config_text, double tol_rel) {
        const auto s = parse_config_text(config_text).scenario;
        auto traj = parse_trajectory_csv(csv_text);
        recompute_energy(traj, s.plant, s.controller.ph, s.controller.kind,
                         s.controller.v_dc_star);
        const auto series = energy_series(traj);
        const auto events = s.event_times();
        const auto c = energy_consistency_check(series, events, tol_rel);
        const auto p = passivity_check(series, events, default_passivity_tol(s.plant),
                                       s.controller.kind == ControllerKind::ph);
        py::dict d;
        d["max_relative_mismatch"] = c.max_relative_mismatch;
        d["flagged"] = c.flagged;
        d["points_checked"] = c.points_checked;
        d["passivity_violations"] = p.violations;
        d["max_supply_excess_w"] = p.max_excess;
        return d;
      },
      py::arg("csv_text"), py::arg("config_text"), py::arg("tol_rel") = 1e-4);

  m.def("trajectory_columns", &trajectory_columns);
  m.def(
      "dvoc_current_reference",
      [](double p_star, double q_star, const Vec2& v_ac, double v_ac_min) {
        return dvoc_current_reference(p_star, q_star, v_ac, v_ac_min);
      },
      py::arg("p_star"), py::arg("q_star"), py::arg("v_ac"), py::arg("v_ac_min"));
  m.def("outer_voltage_loop", &outer_voltage_loop, py::arg("v_dc"), py::arg("v_dc_star"),
        py::arg("i_load"), py::arg("k_v"), py::arg("v_dc_min"), py::arg("a_v") = 0.0, py::arg("zeta_v") = 0.0);
}
