#include "emgrid/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "emgrid/em_core.hpp"
#include "emgrid/errors.hpp"
#include "emgrid/ir_solver.hpp"

namespace emgrid {

namespace {

constexpr double kResistanceCap = 1e6;  // effective R never exceeds this multiple of R0

std::vector<double> log_points(double t_start, double t_total, int per_decade) {
  std::vector<double> t;
  for (int k = 0;; ++k) {
    const double v = t_start * std::pow(10.0, static_cast<double>(k) / per_decade);
    if (v >= t_total * (1.0 - 1e-12)) break;
    t.push_back(v);
  }
  return t;
}

struct NetIndex {
  std::vector<std::string> names;
  std::vector<double> supply;
  std::vector<int> of_node;
};

NetIndex index_nets(const PowerGrid& grid) {
  NetIndex idx;
  idx.names = grid.nets();
  std::map<std::string, int> pos;
  for (std::size_t i = 0; i < idx.names.size(); ++i) pos[idx.names[i]] = static_cast<int>(i);
  idx.of_node.resize(grid.nodes.size());
  for (const auto& n : grid.nodes) idx.of_node[static_cast<std::size_t>(n.id)] = pos.at(n.net);
  const auto supply = net_supply_voltages(grid);
  idx.supply.assign(idx.names.size(), 0.0);
  for (const auto& n : grid.nodes)
    idx.supply[static_cast<std::size_t>(idx.of_node[static_cast<std::size_t>(n.id)])] =
        supply[static_cast<std::size_t>(n.id)];
  return idx;
}

void net_stats(const NetIndex& nets, const std::vector<double>& drop, std::vector<double>& max_drop,
               std::vector<double>& p95) {
  std::vector<std::vector<double>> per(nets.names.size());
  for (std::size_t i = 0; i < drop.size(); ++i)
    per[static_cast<std::size_t>(nets.of_node[i])].push_back(drop[i]);
  max_drop.assign(per.size(), 0.0);
  p95.assign(per.size(), 0.0);
  for (std::size_t k = 0; k < per.size(); ++k) {
    auto& v = per[k];
    std::sort(v.begin(), v.end());
    max_drop[k] = v.back();
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
    p95[k] = v[std::max<std::size_t>(rank, 1) - 1];
  }
}

std::vector<BranchDrive> tree_drives(const PowerGrid& grid, const InterconnectTree& tree,
                                     const std::vector<double>& j, const ThermalInput& thermal,
                                     const ThermalParams& tp) {
  std::vector<BranchDrive> drives;
  drives.reserve(tree.segments.size());
  for (int sid : tree.segments) {
    const auto& seg = grid.segment(sid);
    const double js = j[static_cast<std::size_t>(sid)];
    drives.push_back({js, seg.rho, segment_profile(grid, seg, js, thermal, tp)});
  }
  return drives;
}

// Everything known at t = 0: the nominal IR solution and per-tree verdicts.
struct Setup {
  std::vector<double> resistance;
  std::optional<ConductanceSystem> sys;
  BranchCurrents currents;
  std::vector<TreeMesh> meshes;
  std::vector<std::vector<BranchDrive>> drives;
  std::vector<ImmortalityVerdict> verdicts;
};

Setup prepare(const PowerGrid& grid, const ThermalInput& thermal, const SimulationConfig& cfg) {
  cfg.validate();
  for (const auto& seg : grid.segments) cfg.material.validate_barrier(seg.width_m(), seg.thickness_m());
  Setup s;
  s.resistance = nominal_resistances(grid);
  s.sys.emplace(grid, s.resistance);
  s.sys->refactor_tolerance = cfg.refactor_tol;
  s.sys->solve();
  s.currents = branch_currents(*s.sys, grid);
  for (const auto& tree : grid.trees) {
    s.meshes.push_back(build_mesh(grid, tree, cfg.mesh));
    s.drives.push_back(tree_drives(grid, tree, s.currents.density, thermal, cfg.thermal));
    s.verdicts.push_back(filter_immortal(s.meshes.back(), s.drives.back(), cfg.material));
  }
  return s;
}

template <class F>
void parallel_for(const std::vector<int>& items, int threads, F&& fn) {
  if (threads <= 1 || items.size() <= 1) {
    for (int i : items) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), items.size());
  std::vector<std::exception_ptr> errors(items.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t k = w; k < items.size(); k += workers) {
        try {
          fn(items[k]);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double crossing(double t0, double t1, double v0, double v1, double level) {
  if (v1 <= v0 || v0 >= level) return t1;
  return t0 + (level - v0) / (v1 - v0) * (t1 - t0);
}

}  // namespace

int SimulationResult::mortal_count() const {
  return static_cast<int>(std::count_if(trees.begin(), trees.end(), [](const auto& t) { return t.mortal; }));
}

int FilterSummary::mortal_count() const {
  return static_cast<int>(std::count(mortal.begin(), mortal.end(), true));
}

std::vector<double> checkpoint_schedule(const SimulationConfig& cfg) {
  std::vector<double> t{0.0};
  for (double v : log_points(cfg.t_start, cfg.t_total, cfg.checkpoints_per_decade)) t.push_back(v);
  t.push_back(cfg.t_total);
  return t;
}

std::vector<double> step_schedule(const SimulationConfig& cfg) {
  std::vector<double> t = log_points(cfg.t_start, cfg.t_total, cfg.steps_per_decade);
  const auto cps = checkpoint_schedule(cfg);
  t.insert(t.end(), cps.begin(), cps.end());
  std::sort(t.begin(), t.end());
  std::vector<double> out;
  for (double v : t)
    if (out.empty() || v - out.back() > 1e-9 * v) out.push_back(v);
  out.back() = cfg.t_total;
  return out;
}

FilterSummary filter_trees(const PowerGrid& grid, const ThermalInput& thermal,
                           const SimulationConfig& cfg) {
  const Setup s = prepare(grid, thermal, cfg);
  FilterSummary f;
  for (const auto& v : s.verdicts) {
    f.mortal.push_back(!v.immortal);
    f.max_steady_stress.push_back(v.max_steady_stress);
  }
  return f;
}

SimulationResult run(const PowerGrid& grid, const ThermalInput& thermal,
                     const SimulationConfig& cfg, const RunOptions& options) {
  Setup s = prepare(grid, thermal, cfg);
  ConductanceSystem& sys = *s.sys;
  const NetIndex nets = index_nets(grid);
  const std::size_t ntree = grid.trees.size();

  SimulationResult res;
  res.nets = nets.names;
  res.net_supply = nets.supply;
  res.t_total = cfg.t_total;

  std::vector<double> drop = ir_drop_map(sys, grid);
  res.node_drop_initial = drop;
  std::vector<double> max_drop, p95;
  net_stats(nets, drop, max_drop, p95);
  for (std::size_t k = 0; k < max_drop.size(); ++k)
    if (nets.supply[k] > 0 && max_drop[k] >= cfg.ir_fail_frac * nets.supply[k])
      throw InputError("net '" + nets.names[k] + "' already exceeds the IR-drop threshold at t = 0");

  std::vector<std::optional<TreeSimulator>> sims(ntree);
  std::vector<std::vector<double>> j_profiled(ntree);
  std::vector<int> mortal;
  res.trees.resize(ntree);
  for (std::size_t t = 0; t < ntree; ++t) {
    auto& out = res.trees[t];
    out.tree_id = grid.trees[t].id;
    out.max_steady_stress = s.verdicts[t].max_steady_stress;
    out.mortal = !s.verdicts[t].immortal;
    if (!out.mortal) continue;
    for (int sid : grid.trees[t].segments) j_profiled[t].push_back(s.currents.density[static_cast<std::size_t>(sid)]);
    sims[t].emplace(s.meshes[t], s.drives[t], cfg.material);
    mortal.push_back(static_cast<int>(t));
  }

  res.segments.resize(grid.segments.size());
  for (std::size_t t = 0; t < ntree; ++t)
    for (std::size_t b = 0; b < grid.trees[t].segments.size(); ++b) {
      auto& f = res.segments[static_cast<std::size_t>(grid.trees[t].segments[b])];
      const auto& d = s.drives[t][b];
      f.current_density = d.j;
      f.t1 = d.profile.t1;
      f.t2 = d.profile.t2;
      f.t_mid = d.profile.mid();
    }

  auto record = [&](double time) {
    Checkpoint cp;
    cp.time = time;
    cp.net_max_drop = max_drop;
    cp.net_p95_drop = p95;
    cp.resistance = s.resistance;
    cp.tree_max_stress.resize(ntree);
    cp.tree_void_volume.assign(ntree, 0.0);
    for (int t : mortal) {
      const auto& st = sims[static_cast<std::size_t>(t)]->state();
      cp.tree_max_stress[static_cast<std::size_t>(t)] = st.sigma.maxCoeff();
      cp.tree_void_volume[static_cast<std::size_t>(t)] = st.void_volume;
    }
    res.checkpoints.push_back(std::move(cp));
  };
  record(0.0);

  const auto times = step_schedule(cfg);
  const auto cps = checkpoint_schedule(cfg);
  const std::set<double> checkpoint_set(cps.begin(), cps.end());
  const int threads = options.threads > 0 ? options.threads
                                          : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<int> refreshes(ntree, 0);
  std::vector<double> prev_void(ntree, 0.0), prev_dr(ntree, 0.0);
  double t_now = 0.0;

  try {
    for (std::size_t step = 1; step < times.size(); ++step) {
      const double t0 = times[step - 1], t1 = times[step];
      const auto& j = s.currents.density;

      parallel_for(mortal, threads, [&](int ti) {
        const auto t = static_cast<std::size_t>(ti);
        auto& sim = *sims[t];
        const auto& tree = grid.trees[t];
        std::vector<double> jt;
        double jmax = 0.0, change = 0.0;
        for (std::size_t b = 0; b < tree.segments.size(); ++b) {
          jt.push_back(j[static_cast<std::size_t>(tree.segments[b])]);
          jmax = std::max(jmax, std::abs(j_profiled[t][b]));
          change = std::max(change, std::abs(jt[b] - j_profiled[t][b]));
        }
        const bool joule = !(thermal.map && thermal.map_includes_joule);
        if (joule && change > cfg.j_refresh_frac * jmax) {
          sim.set_drives(tree_drives(grid, tree, j, thermal, cfg.thermal));
          j_profiled[t] = jt;
          ++refreshes[t];
        }
        sim.set_current_densities(jt);
        prev_void[t] = sim.state().void_volume;
        prev_dr[t] = sim.state().delta_r;
        sim.advance(t0, t1);
      });

      for (int ti : mortal) {
        const auto t = static_cast<std::size_t>(ti);
        const auto& sim = *sims[t];
        const auto& st = sim.state();
        auto& out = res.trees[t];
        if (!st.t_nuc) continue;
        if (!out.t_nuc) {
          out.t_nuc = st.t_nuc;
          out.nuc_segment = sim.nucleated_segment();
          out.critical_volume = sim.critical_volume();
          const auto& mesh = sim.mesh();
          const int v = *st.nuc_node;
          const auto& seg = grid.segment(out.nuc_segment);
          if (mesh.grid_node[static_cast<std::size_t>(v)] >= 0) {
            const auto& n = grid.node(mesh.grid_node[static_cast<std::size_t>(v)]);
            out.nuc_x = n.x;
            out.nuc_y = n.y;
          } else {
            const auto [b, k] = mesh.owner[static_cast<std::size_t>(v)];
            const double f = static_cast<double>(k) / mesh.branches[static_cast<std::size_t>(b)].intervals();
            const auto& a = grid.node(seg.n1);
            const auto& c = grid.node(seg.n2);
            out.nuc_x = a.x + f * (c.x - a.x);
            out.nuc_y = a.y + f * (c.y - a.y);
          }
        }
        const double from = std::max(t0, *out.t_nuc);
        if (!out.t_vcrit && st.void_volume > out.critical_volume)
          out.t_vcrit = crossing(from, t1, prev_void[t], st.void_volume, out.critical_volume);
        const auto seg_id = static_cast<std::size_t>(out.nuc_segment);
        const double r0 = grid.segments[seg_id].r0;
        const double dr_limit = cfg.dr_fail_frac * r0;
        if (!out.t_fail && st.delta_r >= dr_limit) {
          out.t_fail = crossing(from, t1, prev_dr[t], st.delta_r, dr_limit);
          out.phase = to_string(Phase::failed_open_check);
        }
        s.resistance[seg_id] = std::min(r0 + st.delta_r, kResistanceCap * r0);
      }

      std::vector<double> prev_max = max_drop;
      sys.update_resistances(s.resistance);
      sys.solve();
      s.currents = branch_currents(sys, grid);
      drop = ir_drop_map(sys, grid);
      net_stats(nets, drop, max_drop, p95);
      t_now = t1;
      res.steps = static_cast<int>(step);

      if (!res.chip_failure) {
        for (std::size_t k = 0; k < max_drop.size(); ++k) {
          const double level = cfg.ir_fail_frac * nets.supply[k];
          if (!(nets.supply[k] > 0) || max_drop[k] < level) continue;
          const double tc = crossing(t0, t1, prev_max[k], max_drop[k], level);
          if (!res.chip_failure || tc < *res.chip_failure) res.chip_failure = tc;
        }
        if (res.chip_failure)
          for (int ti : mortal) {
            auto& out = res.trees[static_cast<std::size_t>(ti)];
            if (out.t_vcrit && !out.t_fail && *res.chip_failure >= *out.t_vcrit) {
              out.t_fail = res.chip_failure;
              out.phase = to_string(Phase::failed_open_check);
            }
          }
      }

      const bool stop = res.chip_failure && cfg.stop_at_failure;
      if (checkpoint_set.count(t1) || stop || step + 1 == times.size()) record(t1);
      if (stop) break;
    }
  } catch (const NumericalError& e) {
    if (!options.dump_path.empty()) {
      nlohmann::json dump;
      dump["error"] = e.what();
      dump["time"] = t_now;
      dump["resistance"] = s.resistance;
      for (int ti : mortal) {
        const auto& st = sims[static_cast<std::size_t>(ti)]->state();
        dump["trees"].push_back({{"tree_id", ti},
                                 {"phase", to_string(st.phase)},
                                 {"sigma", std::vector<double>(st.sigma.begin(), st.sigma.end())}});
      }
      std::ofstream(options.dump_path) << dump.dump(1) << '\n';
    }
    throw;
  }

  res.t_end = t_now;
  res.node_drop_final = drop;
  res.ir_factorizations = sys.factorizations();
  for (int ti : mortal) {
    const auto t = static_cast<std::size_t>(ti);
    const auto& sim = *sims[t];
    const auto& st = sim.state();
    auto& out = res.trees[t];
    out.void_volume = st.void_volume;
    out.delta_r = st.delta_r;
    out.negative_void_clamps = st.negative_void_clamps;
    if (out.phase != to_string(Phase::failed_open_check)) out.phase = to_string(st.phase);
    res.stress_factorizations += sim.factorizations();
    res.profile_refreshes += refreshes[t];
    for (const auto& br : sim.mesh().branches) {
      auto& stress = res.segments[static_cast<std::size_t>(br.segment)].stress;
      for (int n : br.nodes) stress.push_back(st.sigma[n]);
    }
  }
  return res;
}

TtfComponents compute_ttf(const TreeOutcome& tree, const SimulationResult& result) {
  const double horizon = result.t_end;
  TtfComponents c;
  if (!tree.t_nuc) {
    c.t_nuc = horizon;
  } else if (!tree.t_vcrit) {
    c.t_nuc = *tree.t_nuc;
    c.t_inc = horizon - c.t_nuc;
  } else {
    c.t_nuc = *tree.t_nuc;
    c.t_inc = *tree.t_vcrit - c.t_nuc;
    c.t_growth = (tree.t_fail ? *tree.t_fail : horizon) - *tree.t_vcrit;
    c.censored = !tree.t_fail;
  }
  c.t_life = c.t_nuc + c.t_inc + c.t_growth;
  return c;
}

double chip_lifetime(const SimulationResult& result, bool* censored) {
  if (censored) *censored = !result.chip_failure;
  return result.chip_failure ? *result.chip_failure : result.t_end;
}

int threads_from_env() {
  const char* v = std::getenv("EMGRID_THREADS");
  int n = 0;
  if (v && *v) {
    char* end = nullptr;
    const long parsed = std::strtol(v, &end, 10);
    if (*end != '\0' || parsed < 0 || parsed > 4096)
      throw InputError("EMGRID_THREADS must be a non-negative integer");
    n = static_cast<int>(parsed);
  }
  if (n == 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}

}  // namespace emgrid
