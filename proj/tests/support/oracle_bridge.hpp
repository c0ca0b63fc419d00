#pragma once

// Builds oracle inputs from a parsed grid. Temperatures and Joule rises are
// computed here from the raw parameters rather than through the library.

#include <cmath>
#include <map>

#include "emgrid/em_core.hpp"
#include "emgrid/grid_model.hpp"
#include "emgrid/params.hpp"
#include "stress_oracle.hpp"

namespace testing_support {

inline oracle::Material oracle_material(const emgrid::MaterialParams& m) {
  return {m.ez, m.omega, m.bulk_modulus, m.d0, m.ea, m.kb, m.q_heat, m.delta, m.sigma_crit, m.sigma_t, m.polarity};
}

/// `density` and `end_temp` are indexed by segment id and node id.
template <class EndTemp>
oracle::Tree oracle_tree(const emgrid::PowerGrid& grid, const emgrid::InterconnectTree& tree,
                         const std::vector<double>& density, EndTemp end_temp,
                         const emgrid::SimulationConfig& cfg, bool joule = true,
                         const emgrid::TreeMesh* mesh = nullptr) {
  oracle::Tree out;
  std::map<int, int> junction;
  for (int sid : tree.segments) {
    const auto& s = grid.segment(sid);
    for (int n : {s.n1, s.n2})
      if (!junction.count(n)) junction.emplace(n, out.junctions++);
  }
  for (std::size_t i = 0; i < tree.segments.size(); ++i) {
    const auto& s = grid.segment(tree.segments[i]);
    oracle::Branch b;
    b.n1 = junction.at(s.n1);
    b.n2 = junction.at(s.n2);
    b.length = s.length * 1e-6;
    b.j = density.at(static_cast<std::size_t>(s.id));
    b.rho = s.rho;
    b.t1 = end_temp(s.n1);
    b.t2 = end_temp(s.n2);
    const auto& th = cfg.thermal;
    b.gamma = std::sqrt(s.thickness * 1e-6 * th.t_ild * th.k_cu / th.k_ild);
    b.joule = joule ? s.rho * b.j * b.j * b.gamma * b.gamma / th.k_cu : 0.0;
    b.intervals = mesh ? mesh->branches[i].intervals() : 1;
    out.branches.push_back(b);
  }
  return out;
}

}  // namespace testing_support
