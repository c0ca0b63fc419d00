#pragma once

// Simulation parameters file: `key = value` lines, `#` starts a comment.
// Every key is optional; unknown keys are errors. All values are SI.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emgrid/em_core.hpp"
#include "emgrid/thermal.hpp"

namespace emgrid {

struct SimulationConfig {
  MaterialParams material;
  ThermalParams thermal;
  MeshOptions mesh;

  double t_total = 1.0e9;       // s
  double t_start = 1.0;         // s, end of the first step
  int steps_per_decade = 50;
  int checkpoints_per_decade = 10;
  double ir_fail_frac = 0.10;   // of the net's pad voltage
  double dr_fail_frac = 10.0;   // of the nucleated segment's R0
  double j_refresh_frac = 0.01; // profile refresh trigger, of the tree's max |j|
  double refactor_tol = 1e-4;   // relative resistance change forcing an IR refactorization
  bool stop_at_failure = false;
  std::uint64_t seed = 1;

  void validate() const;

  /// Every key with its resolved value, in file order.
  std::vector<std::pair<std::string, double>> resolved() const;
};

/// Apply `key = value` lines on top of `base`.
SimulationConfig parse_params(std::string_view text, std::string_view source_name = "<params>",
                              SimulationConfig base = {});
SimulationConfig load_params(const std::string& path);

/// Serialize as a parameters file that parses back to the same config.
std::string write_params(const SimulationConfig& cfg);

}  // namespace emgrid
