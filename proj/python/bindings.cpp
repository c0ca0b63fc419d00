// Python bindings: netlists, parameters, thermal input, IR solve, immortality
// filter, the coupled run and report writing.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "emgrid/coupling.hpp"
#include "emgrid/errors.hpp"
#include "emgrid/grid_model.hpp"
#include "emgrid/ir_solver.hpp"
#include "emgrid/params.hpp"
#include "emgrid/report.hpp"
#include "emgrid/thermal.hpp"

namespace py = pybind11;
using namespace emgrid;

namespace {

py::dict tree_dict(const InterconnectTree& t) {
  py::dict d;
  d["id"] = t.id;
  d["layer"] = t.layer;
  d["net"] = t.net;
  d["segments"] = t.segments;
  d["nodes"] = t.nodes;
  d["terminals"] = t.terminals;
  return d;
}

py::dict ir_solve(const PowerGrid& grid, const std::optional<std::vector<double>>& resistances) {
  ConductanceSystem sys(grid, resistances ? *resistances : nominal_resistances(grid));
  py::dict d;
  d["voltage"] = sys.solve();
  const auto bc = branch_currents(sys, grid);
  d["current"] = bc.current;
  d["density"] = bc.density;
  d["drop"] = ir_drop_map(sys, grid);
  d["residual"] = sys.last_residual();
  return d;
}

std::string result_json(const SimulationResult& result, const PowerGrid& grid) {
  ReportBundle bundle;
  bundle.result = result;
  bundle.layout = Layout::of(grid);
  return to_json(bundle).dump();
}

void write_result(const SimulationResult& result, const PowerGrid& grid, const SimulationConfig& cfg,
                  const ThermalInput& thermal, const std::filesystem::path& dir) {
  ReportBundle bundle;
  bundle.result = result;
  bundle.layout = Layout::of(grid);
  bundle.manifest.parameters = cfg.resolved();
  bundle.manifest.thermal_mode = thermal.map ? "map" : "joule_only";
  bundle.manifest.map_includes_joule = thermal.map_includes_joule;
  bundle.manifest.ambient = thermal.ambient;
  std::filesystem::create_directories(dir);
  write_reports(bundle, dir);
}

}  // namespace

PYBIND11_MODULE(_emgrid, m) {
  m.doc() = "Coupled electromigration / thermomigration / IR-drop analysis of power grids";
  m.attr("__version__") = kToolVersion;
  m.attr("SCHEMA_VERSION") = kSchemaVersion;

  auto input_error = py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  (void)input_error;

  py::class_<PowerGrid>(m, "PowerGrid")
      .def_property_readonly("node_count", [](const PowerGrid& g) { return g.nodes.size(); })
      .def_property_readonly("segment_count", [](const PowerGrid& g) { return g.segments.size(); })
      .def_property_readonly("via_count", [](const PowerGrid& g) { return g.vias.size(); })
      .def_property_readonly("pad_count", [](const PowerGrid& g) { return g.pads.size(); })
      .def_property_readonly("load_count", [](const PowerGrid& g) { return g.loads.size(); })
      .def_property_readonly("tree_count", [](const PowerGrid& g) { return g.trees.size(); })
      .def_readonly("warnings", &PowerGrid::warnings)
      .def_property_readonly("node_names",
                             [](const PowerGrid& g) {
                               std::vector<std::string> names;
                               for (const auto& n : g.nodes) names.push_back(n.name);
                               return names;
                             })
      .def_property_readonly("segment_names",
                             [](const PowerGrid& g) {
                               std::vector<std::string> names;
                               for (const auto& s : g.segments) names.push_back(s.name);
                               return names;
                             })
      .def_property_readonly("trees",
                             [](const PowerGrid& g) {
                               py::list out;
                               for (const auto& t : g.trees) out.append(tree_dict(t));
                               return out;
                             })
      .def("nets", &PowerGrid::nets)
      .def("total_load_current", &PowerGrid::total_load_current)
      .def("nominal_resistances", [](const PowerGrid& g) { return nominal_resistances(g); })
      .def("to_netlist", [](const PowerGrid& g) { return write_netlist(g); });

  m.def("parse_netlist",
        [](const std::string& text, const std::string& source, double rho) {
          return parse_netlist(text, source, rho);
        },
        py::arg("text"), py::arg("source") = "<netlist>", py::arg("default_rho") = 2.2e-8);
  m.def("load_netlist", &load_netlist, py::arg("path"), py::arg("default_rho") = 2.2e-8);

  py::class_<SimulationConfig>(m, "SimulationConfig")
      .def(py::init<>())
      .def_readwrite("t_total", &SimulationConfig::t_total)
      .def_readwrite("t_start", &SimulationConfig::t_start)
      .def_readwrite("steps_per_decade", &SimulationConfig::steps_per_decade)
      .def_readwrite("checkpoints_per_decade", &SimulationConfig::checkpoints_per_decade)
      .def_readwrite("ir_fail_frac", &SimulationConfig::ir_fail_frac)
      .def_readwrite("dr_fail_frac", &SimulationConfig::dr_fail_frac)
      .def_readwrite("stop_at_failure", &SimulationConfig::stop_at_failure)
      .def("validate", &SimulationConfig::validate)
      .def("resolved",
           [](const SimulationConfig& c) {
             py::dict d;
             for (const auto& [k, v] : c.resolved()) d[py::str(k)] = v;
             return d;
           })
      .def("to_text", [](const SimulationConfig& c) { return write_params(c); });

  m.def("parse_params",
        [](const std::string& text, const std::optional<SimulationConfig>& base) {
          return parse_params(text, "<params>", base.value_or(SimulationConfig{}));
        },
        py::arg("text"), py::arg("base") = std::nullopt);
  m.def("load_params", &load_params, py::arg("path"));

  py::class_<ThermalInput>(m, "ThermalInput")
      .def_readonly("ambient", &ThermalInput::ambient)
      .def_readonly("map_includes_joule", &ThermalInput::map_includes_joule)
      .def_property_readonly("has_map", [](const ThermalInput& t) { return t.map.has_value(); })
      .def("endpoint_temperature", &ThermalInput::endpoint_temperature, py::arg("x_um"), py::arg("y_um"));

  m.def("thermal_map",
        [](const std::string& path, bool includes_joule) {
          return ThermalInput::from_map(ThermalMap::load(path), includes_joule);
        },
        py::arg("path"), py::arg("includes_joule") = false);
  m.def("joule_only", &ThermalInput::joule_only, py::arg("ambient") = 358.0);

  m.def("solve_ir", &ir_solve, py::arg("grid"), py::arg("resistances") = std::nullopt,
        "Node voltages, branch currents and densities, per-node IR drop.");

  m.def("filter_trees",
        [](const PowerGrid& g, const ThermalInput& t, const SimulationConfig& c) {
          const auto s = filter_trees(g, t, c);
          py::dict d;
          d["mortal"] = s.mortal;
          d["max_steady_stress"] = s.max_steady_stress;
          return d;
        },
        py::arg("grid"), py::arg("thermal"), py::arg("config"));

  py::class_<SimulationResult>(m, "SimulationResult")
      .def_readonly("t_total", &SimulationResult::t_total)
      .def_readonly("t_end", &SimulationResult::t_end)
      .def_readonly("steps", &SimulationResult::steps)
      .def_readonly("chip_failure", &SimulationResult::chip_failure)
      .def_readonly("nets", &SimulationResult::nets)
      .def_readonly("node_drop_initial", &SimulationResult::node_drop_initial)
      .def_readonly("node_drop_final", &SimulationResult::node_drop_final)
      .def("mortal_count", &SimulationResult::mortal_count)
      .def("chip_lifetime",
           [](const SimulationResult& r) {
             bool censored = false;
             const double life = chip_lifetime(r, &censored);
             return py::make_tuple(life, censored);
           })
      .def_property_readonly("t_nuc",
                             [](const SimulationResult& r) {
                               std::vector<std::optional<double>> out;
                               for (const auto& t : r.trees) out.push_back(t.t_nuc);
                               return out;
                             })
      .def("__eq__", [](const SimulationResult& a, const SimulationResult& b) { return a == b; });

  m.def("run",
        [](const PowerGrid& g, const ThermalInput& t, const SimulationConfig& c, int threads) {
          RunOptions opts;
          opts.threads = threads;
          py::gil_scoped_release release;
          return run(g, t, c, opts);
        },
        py::arg("grid"), py::arg("thermal"), py::arg("config"), py::arg("threads") = 1);

  m.def("result_json", &result_json, py::arg("result"), py::arg("grid"),
        "result.json document (without input file digests) as a string.");
  m.def("write_reports", &write_result, py::arg("result"), py::arg("grid"), py::arg("config"),
        py::arg("thermal"), py::arg("out_dir"));
  m.def("render", [](const std::string& result_path, const std::filesystem::path& dir) {
    const auto bundle = read_result_file(result_path);
    std::filesystem::create_directories(dir);
    write_heatmaps(bundle, dir);
  }, py::arg("result_path"), py::arg("out_dir"));
  m.def("sha256_hex", [](const py::bytes& b) { return sha256_hex(std::string(b)); });
}
