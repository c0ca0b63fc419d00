// emgrid command-line front end.
//
//   emgrid check  --netlist F --params F (--thermal-map F | --joule-only [--ambient K])
//   emgrid run    ... --out DIR [--t-total S] [--ir-fail-frac F] [--dr-fail-frac F]
//                               [--checkpoints-per-decade N]
//   emgrid render --result DIR/result.json --out DIR
//
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "emgrid/coupling.hpp"
#include "emgrid/errors.hpp"
#include "emgrid/grid_model.hpp"
#include "emgrid/params.hpp"
#include "emgrid/report.hpp"
#include "emgrid/thermal.hpp"

namespace {

struct Inputs {
  std::string netlist;
  std::string params;
  std::string thermal_map;
  bool joule_only = false;
  std::optional<double> ambient;
  bool map_includes_joule = false;
  std::string out;
  std::string result;
  std::optional<double> t_total, ir_fail_frac, dr_fail_frac;
  std::optional<int> checkpoints_per_decade;
};

void add_input_options(CLI::App* cmd, Inputs& in) {
  cmd->add_option("--netlist", in.netlist, "power-grid netlist")->required()->check(CLI::ExistingFile);
  cmd->add_option("--params", in.params, "parameters file")->required()->check(CLI::ExistingFile);
  auto* map = cmd->add_option("--thermal-map", in.thermal_map, "thermal map (header + CSV)")
                  ->check(CLI::ExistingFile);
  auto* joule = cmd->add_flag("--joule-only", in.joule_only, "uniform ambient plus Joule heating");
  map->excludes(joule);
  cmd->add_option("--ambient", in.ambient, "ambient temperature for --joule-only, K")->needs(joule);
  cmd->add_flag("--map-includes-joule", in.map_includes_joule,
                "the thermal map already contains wire self-heating")
      ->needs(map);
}

emgrid::SimulationConfig load_config(const Inputs& in) {
  auto cfg = emgrid::load_params(in.params);
  if (in.t_total) cfg.t_total = *in.t_total;
  if (in.ir_fail_frac) cfg.ir_fail_frac = *in.ir_fail_frac;
  if (in.dr_fail_frac) cfg.dr_fail_frac = *in.dr_fail_frac;
  if (in.checkpoints_per_decade) cfg.checkpoints_per_decade = *in.checkpoints_per_decade;
  cfg.validate();
  return cfg;
}

emgrid::ThermalInput load_thermal(const Inputs& in, const emgrid::SimulationConfig& cfg) {
  if (!in.thermal_map.empty())
    return emgrid::ThermalInput::from_map(emgrid::ThermalMap::load(in.thermal_map), in.map_includes_joule);
  if (in.joule_only) return emgrid::ThermalInput::joule_only(in.ambient.value_or(cfg.thermal.t_ambient));
  throw emgrid::InputError("no thermal input: pass --thermal-map <file> or --joule-only [--ambient <K>]");
}

emgrid::PowerGrid load_grid(const Inputs& in, const emgrid::SimulationConfig& cfg) {
  auto grid = emgrid::load_netlist(in.netlist, cfg.material.rho_cu);
  for (const auto& w : grid.warnings) std::cerr << "warning: " << w << '\n';
  return grid;
}

int cmd_check(const Inputs& in) {
  const auto cfg = load_config(in);
  const auto grid = load_grid(in, cfg);
  const auto thermal = load_thermal(in, cfg);
  const auto summary = emgrid::filter_trees(grid, thermal, cfg);
  std::printf("%zu nodes, %zu segments, %zu vias, %zu pads, %zu loads\n", grid.nodes.size(),
              grid.segments.size(), grid.vias.size(), grid.pads.size(), grid.loads.size());
  std::printf("%zu trees, %d mortal\n", grid.trees.size(), summary.mortal_count());
  return 0;
}

int cmd_run(const Inputs& in) {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = load_config(in);
  const auto grid = load_grid(in, cfg);
  const auto thermal = load_thermal(in, cfg);
  const std::filesystem::path out(in.out);
  std::filesystem::create_directories(out);

  emgrid::RunOptions opts;
  opts.threads = emgrid::threads_from_env();
  opts.dump_path = (out / "failure_state.json").string();

  emgrid::ReportBundle bundle;
  bundle.result = emgrid::run(grid, thermal, cfg, opts);
  bundle.layout = emgrid::Layout::of(grid);
  auto& m = bundle.manifest;
  m.inputs.push_back({"netlist", in.netlist, emgrid::sha256_file(in.netlist)});
  m.inputs.push_back({"params", in.params, emgrid::sha256_file(in.params)});
  if (!in.thermal_map.empty())
    m.inputs.push_back({"thermal_map", in.thermal_map, emgrid::sha256_file(in.thermal_map)});
  m.parameters = cfg.resolved();
  m.thermal_mode = thermal.map ? "map" : "joule_only";
  m.map_includes_joule = thermal.map_includes_joule;
  m.ambient = thermal.ambient;

  emgrid::write_reports(bundle, out);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  emgrid::write_run_info(out, elapsed);

  bool censored = false;
  const double life = emgrid::chip_lifetime(bundle.result, &censored);
  std::printf("%zu trees, %d mortal\n", grid.trees.size(), bundle.result.mortal_count());
  std::printf("chip lifetime %s%.4g s\n", censored ? ">= " : "", life);
  return 0;
}

int cmd_render(const Inputs& in) {
  const auto bundle = emgrid::read_result_file(in.result);
  const std::filesystem::path out(in.out);
  std::filesystem::create_directories(out);
  emgrid::write_heatmaps(bundle, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled electromigration / thermomigration / IR-drop analysis of power grids"};
  app.require_subcommand(1);
  Inputs in;

  auto* check = app.add_subcommand("check", "parse, validate and report tree counts");
  add_input_options(check, in);

  auto* run = app.add_subcommand("run", "full coupled simulation");
  add_input_options(run, in);
  run->add_option("--out", in.out, "output directory")->required();
  run->add_option("--t-total", in.t_total, "simulated horizon, s");
  run->add_option("--ir-fail-frac", in.ir_fail_frac, "IR-drop failure threshold, fraction of pad voltage");
  run->add_option("--dr-fail-frac", in.dr_fail_frac, "resistance failure threshold, fraction of R0");
  run->add_option("--checkpoints-per-decade", in.checkpoints_per_decade, "checkpoints per decade of time");

  auto* render = app.add_subcommand("render", "heatmaps from an existing result.json");
  render->add_option("--result", in.result, "result.json of a previous run")->required()->check(CLI::ExistingFile);
  render->add_option("--out", in.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*check) return cmd_check(in);
    if (*run) return cmd_run(in);
    return cmd_render(in);
  } catch (const emgrid::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const emgrid::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
