#pragma once

// Coupled EM/TM/IR loop. Each step lags the branch currents by one step:
// the IR solve at t_k drives every mortal tree from t_k to t_{k+1}, then void
// growth is turned into resistance changes and the grid is re-solved.

#include <optional>
#include <string>
#include <vector>

#include "emgrid/grid_model.hpp"
#include "emgrid/params.hpp"
#include "emgrid/thermal.hpp"

namespace emgrid {

struct Checkpoint {
  double time = 0.0;                      // s
  std::vector<double> net_max_drop;       // V, per net
  std::vector<double> net_p95_drop;       // V, per net
  std::vector<double> resistance;         // ohm, per segment
  std::vector<std::optional<double>> tree_max_stress;  // Pa, per tree; empty for immortal trees
  std::vector<double> tree_void_volume;   // m^3, per tree

  bool operator==(const Checkpoint&) const = default;
};

struct TreeOutcome {
  int tree_id = 0;
  bool mortal = false;
  double max_steady_stress = 0.0;  // Pa
  std::string phase = "nucleation";
  std::optional<double> t_nuc;     // s
  std::optional<double> t_vcrit;   // s, void volume first exceeds V_crit
  std::optional<double> t_fail;    // s, dR or chip IR threshold reached
  int nuc_segment = -1;
  double nuc_x = 0.0;              // um, layout position of the void
  double nuc_y = 0.0;
  double void_volume = 0.0;        // m^3, final
  double critical_volume = 0.0;    // m^3
  double delta_r = 0.0;            // ohm, final
  int negative_void_clamps = 0;

  bool operator==(const TreeOutcome&) const = default;
};

struct TtfComponents {
  double t_nuc = 0.0;
  double t_inc = 0.0;
  double t_growth = 0.0;
  double t_life = 0.0;
  bool censored = true;  // t_life is then a lower bound

  bool operator==(const TtfComponents&) const = default;
};

/// Per-segment fields for reports and heatmaps.
struct SegmentField {
  double current_density = 0.0;  // A/m^2 at t = 0
  double t1 = 0.0;               // K at n1
  double t_mid = 0.0;            // K at the midpoint
  double t2 = 0.0;               // K at n2
  std::vector<double> stress;    // Pa at the segment's FD nodes (n1 -> n2), final time; empty if immortal

  bool operator==(const SegmentField&) const = default;
};

struct SimulationResult {
  std::vector<std::string> nets;
  std::vector<double> net_supply;  // V, highest pad voltage per net
  std::vector<Checkpoint> checkpoints;
  std::vector<TreeOutcome> trees;
  std::vector<SegmentField> segments;
  std::vector<double> node_drop_initial;  // V, per node
  std::vector<double> node_drop_final;    // V, per node
  std::optional<double> chip_failure;     // s, first IR threshold crossing
  double t_total = 0.0;  // configured horizon
  double t_end = 0.0;    // last simulated time
  int steps = 0;
  int ir_factorizations = 0;
  int stress_factorizations = 0;
  int profile_refreshes = 0;

  int mortal_count() const;
  bool operator==(const SimulationResult&) const = default;
};

struct RunOptions {
  int threads = 1;        // 0: hardware concurrency
  std::string dump_path;  // state dump written before a NumericalError propagates
};

/// Time points of the simulation: 0, t_start, then steps_per_decade
/// log-uniform points per decade, merged with the checkpoint times, ending
/// at t_total.
std::vector<double> step_schedule(const SimulationConfig& cfg);
/// 0, t_start * 10^(k / checkpoints_per_decade) below t_total, and t_total.
std::vector<double> checkpoint_schedule(const SimulationConfig& cfg);

SimulationResult run(const PowerGrid& grid, const ThermalInput& thermal,
                     const SimulationConfig& cfg, const RunOptions& options = {});

/// TTF decomposition; censored components end at the last simulated time.
TtfComponents compute_ttf(const TreeOutcome& tree, const SimulationResult& result);

/// First IR threshold crossing, or the last simulated time when censored.
double chip_lifetime(const SimulationResult& result, bool* censored = nullptr);

/// Per-tree immortality verdicts at t = 0 without time stepping.
struct FilterSummary {
  std::vector<bool> mortal;                // per tree
  std::vector<double> max_steady_stress;   // Pa, per tree
  int mortal_count() const;
};
FilterSummary filter_trees(const PowerGrid& grid, const ThermalInput& thermal,
                           const SimulationConfig& cfg);

/// Threads from EMGRID_THREADS (0 or unset: hardware concurrency).
int threads_from_env();

}  // namespace emgrid
