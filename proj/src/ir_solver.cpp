#include "emgrid/ir_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>

#include "emgrid/errors.hpp"

namespace emgrid {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int find_root(std::vector<int>& parent, int x) {
  while (parent[static_cast<std::size_t>(x)] != x) {
    auto& p = parent[static_cast<std::size_t>(x)];
    p = parent[static_cast<std::size_t>(p)];
    x = p;
  }
  return x;
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

ConductanceSystem::ConductanceSystem(const PowerGrid& grid, const std::vector<double>& resistances)
    : grid_(&grid) {
  const std::size_t n = grid.nodes.size();
  if (resistances.size() != grid.segments.size())
    throw InputError("resistance vector does not match the segment count");

  // Collapse zero-resistance vias.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& v : grid.vias) {
    if (v.resistance != 0.0) continue;
    int a = find_root(parent, v.lower), b = find_root(parent, v.upper);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }

  std::vector<double> root_voltage(n, kNaN);
  for (const auto& p : grid.pads) {
    int r = find_root(parent, p.node);
    double& v = root_voltage[static_cast<std::size_t>(r)];
    if (!std::isnan(v) && v != p.value)
      throw InputError("pads with different voltages are shorted together at node '" +
                       grid.node(p.node).name + "'");
    v = p.value;
  }

  // Floating check: every node must reach a pad through conductive elements.
  {
    std::vector<std::vector<int>> adj(n);
    for (const auto& s : grid.segments) {
      adj[static_cast<std::size_t>(s.n1)].push_back(s.n2);
      adj[static_cast<std::size_t>(s.n2)].push_back(s.n1);
    }
    for (const auto& v : grid.vias) {
      adj[static_cast<std::size_t>(v.lower)].push_back(v.upper);
      adj[static_cast<std::size_t>(v.upper)].push_back(v.lower);
    }
    std::vector<bool> seen(n, false);
    std::queue<int> q;
    for (const auto& p : grid.pads)
      if (!seen[static_cast<std::size_t>(p.node)]) {
        seen[static_cast<std::size_t>(p.node)] = true;
        q.push(p.node);
      }
    while (!q.empty()) {
      int x = q.front();
      q.pop();
      for (int y : adj[static_cast<std::size_t>(x)])
        if (!seen[static_cast<std::size_t>(y)]) {
          seen[static_cast<std::size_t>(y)] = true;
          q.push(y);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!seen[i])
        throw InputError("floating subnetwork: node '" + grid.nodes[i].name +
                         "' has no conductive path to a pad");
  }

  row_of_node_.assign(n, -1);
  fixed_voltage_.assign(n, kNaN);
  std::map<int, int> row_of_root;
  for (std::size_t i = 0; i < n; ++i) {
    int r = find_root(parent, static_cast<int>(i));
    if (!std::isnan(root_voltage[static_cast<std::size_t>(r)])) {
      fixed_voltage_[i] = root_voltage[static_cast<std::size_t>(r)];
      continue;
    }
    auto [it, fresh] = row_of_root.emplace(r, static_cast<int>(node_of_row_.size()));
    if (fresh) node_of_row_.push_back(static_cast<int>(i));
    row_of_node_[i] = it->second;
  }
  resistance_ = resistances;
  stamp();
  u_.assign(n, 0.0);
}

ConductanceSystem::~ConductanceSystem() = default;
ConductanceSystem::ConductanceSystem(ConductanceSystem&&) noexcept = default;
ConductanceSystem& ConductanceSystem::operator=(ConductanceSystem&&) noexcept = default;

void ConductanceSystem::stamp() {
  const auto& grid = *grid_;
  const int m = static_cast<int>(node_of_row_.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * (grid.segments.size() + grid.vias.size()));
  rhs_ = Eigen::VectorXd::Zero(m);

  auto stamp_edge = [&](int a, int b, double g) {
    int ra = row_of_node_[static_cast<std::size_t>(a)];
    int rb = row_of_node_[static_cast<std::size_t>(b)];
    if (ra >= 0 && rb >= 0) {
      if (ra == rb) return;
      triplets.emplace_back(ra, ra, g);
      triplets.emplace_back(rb, rb, g);
      triplets.emplace_back(ra, rb, -g);
      triplets.emplace_back(rb, ra, -g);
    } else if (ra >= 0) {
      triplets.emplace_back(ra, ra, g);
      rhs_[ra] += g * fixed_voltage_[static_cast<std::size_t>(b)];
    } else if (rb >= 0) {
      triplets.emplace_back(rb, rb, g);
      rhs_[rb] += g * fixed_voltage_[static_cast<std::size_t>(a)];
    }
  };

  for (const auto& s : grid.segments) {
    double r = resistance_[static_cast<std::size_t>(s.id)];
    if (!(r > 0.0) || !std::isfinite(r))
      throw InputError("segment '" + s.name + "' has non-positive resistance");
    stamp_edge(s.n1, s.n2, 1.0 / r);
  }
  for (const auto& v : grid.vias)
    if (v.resistance > 0.0) stamp_edge(v.lower, v.upper, 1.0 / v.resistance);
  for (const auto& l : grid.loads) {
    int r = row_of_node_[static_cast<std::size_t>(l.node)];
    if (r >= 0) rhs_[r] -= l.value;
  }

  g_.resize(m, m);
  g_.setFromTriplets(triplets.begin(), triplets.end());
  g_.makeCompressed();
}

void ConductanceSystem::update_resistances(const std::vector<double>& resistances) {
  if (resistances.size() != resistance_.size())
    throw InputError("resistance vector does not match the segment count");
  resistance_ = resistances;
  stamp();
  if (!factor_valid_) return;
  for (std::size_t i = 0; i < resistance_.size(); ++i) {
    double rel = std::abs(resistance_[i] - factored_resistance_[i]) / factored_resistance_[i];
    if (rel > refactor_tolerance) {
      factor_valid_ = false;
      return;
    }
  }
}

void ConductanceSystem::factorize() {
  if (!ldlt_) {
    ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    ldlt_->analyzePattern(g_);
  }
  ldlt_->factorize(g_);
  ++factorizations_;
  auto worst_pivot = [&]() {
    const auto d = ldlt_->vectorD();
    Eigen::Index worst = 0;
    for (Eigen::Index i = 1; i < d.size(); ++i)
      if (std::abs(d[i]) < std::abs(d[worst])) worst = i;
    // vectorD is in the permuted ordering.
    Eigen::Index row = ldlt_->permutationPinv().indices()(worst);
    return grid_->node(node_of_row_[static_cast<std::size_t>(row)]).name;
  };
  if (ldlt_->info() != Eigen::Success)
    throw NumericalError("conductance matrix factorization failed near node '" + worst_pivot() + "'");
  const auto d = ldlt_->vectorD();
  const double scale = g_.rows() ? g_.diagonal().cwiseAbs().maxCoeff() : 1.0;
  if (d.size() && d.minCoeff() <= 1e-14 * scale)
    throw NumericalError("conductance matrix is numerically singular near node '" + worst_pivot() +
                         "'");
  factored_resistance_ = resistance_;
  factor_valid_ = true;
}

const std::vector<double>& ConductanceSystem::solve() {
  Eigen::VectorXd x;
  if (g_.rows() > 0) {
    const double rhs_norm = std::max(inf_norm(rhs_), std::numeric_limits<double>::min());
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (!factor_valid_) factorize();
      x = ldlt_->solve(rhs_);
      Eigen::VectorXd r = rhs_ - g_ * x;
      last_residual_ = inf_norm(r) / rhs_norm;
      for (int it = 0; it < 50 && last_residual_ > 1e-13; ++it) {
        x += ldlt_->solve(r);
        r = rhs_ - g_ * x;
        last_residual_ = inf_norm(r) / rhs_norm;
        ++refinement_steps_;
      }
      if (last_residual_ < 1e-10) break;
      factor_valid_ = false;
    }
    if (!(last_residual_ < 1e-10))
      throw NumericalError("IR solve did not reach the residual bound (" +
                           std::to_string(last_residual_) + ")");
  } else {
    last_residual_ = 0.0;
  }
  for (std::size_t i = 0; i < u_.size(); ++i) {
    int r = row_of_node_[i];
    u_[i] = r >= 0 ? x[r] : fixed_voltage_[i];
  }
  return u_;
}

ConductanceSystem assemble(const PowerGrid& grid, const std::vector<double>& resistances) {
  return ConductanceSystem(grid, resistances);
}

std::vector<double> nominal_resistances(const PowerGrid& grid) {
  std::vector<double> r(grid.segments.size());
  for (const auto& s : grid.segments) r[static_cast<std::size_t>(s.id)] = s.r0;
  return r;
}

BranchCurrents branch_currents(const ConductanceSystem& sys, const PowerGrid& grid) {
  BranchCurrents out;
  out.current.resize(grid.segments.size());
  out.density.resize(grid.segments.size());
  const auto& u = sys.voltages();
  const auto& r = sys.resistances();
  for (const auto& s : grid.segments) {
    const auto i = static_cast<std::size_t>(s.id);
    out.current[i] = (u[static_cast<std::size_t>(s.n1)] - u[static_cast<std::size_t>(s.n2)]) / r[i];
    out.density[i] = s.current_density(out.current[i]);
  }
  return out;
}

std::vector<double> net_supply_voltages(const PowerGrid& grid) {
  std::map<std::string, double> supply;
  for (const auto& p : grid.pads) {
    const auto& net = grid.node(p.node).net;
    auto [it, fresh] = supply.emplace(net, p.value);
    if (!fresh) it->second = std::max(it->second, p.value);
  }
  std::vector<double> out(grid.nodes.size(), kNaN);
  for (const auto& n : grid.nodes) {
    auto it = supply.find(n.net);
    if (it != supply.end()) out[static_cast<std::size_t>(n.id)] = it->second;
  }
  return out;
}

std::vector<double> ir_drop_map(const ConductanceSystem& sys, const PowerGrid& grid) {
  const auto supply = net_supply_voltages(grid);
  const auto& u = sys.voltages();
  std::vector<double> drop(grid.nodes.size());
  for (std::size_t i = 0; i < drop.size(); ++i) drop[i] = supply[i] - u[i];
  return drop;
}

}  // namespace emgrid
