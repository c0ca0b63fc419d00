#pragma once

// Nodal analysis of the resistive grid. Pads are grounded ideal voltage
// sources and are eliminated as Dirichlet values, so the reduced conductance
// matrix stays symmetric positive definite and is factorized with a sparse
// LDL^T. Nodes joined by zero-resistance vias share one matrix row.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <vector>

#include "emgrid/grid_model.hpp"

namespace emgrid {

struct BranchCurrents {
  std::vector<double> current;  // A, signed n1 -> n2, indexed by segment id
  std::vector<double> density;  // A/m^2
};

class ConductanceSystem {
 public:
  /// Stamps every segment (with `resistances`, indexed by segment id) and via.
  ConductanceSystem(const PowerGrid& grid, const std::vector<double>& resistances);
  ~ConductanceSystem();
  ConductanceSystem(ConductanceSystem&&) noexcept;
  ConductanceSystem& operator=(ConductanceSystem&&) noexcept;

  /// Re-stamp with aged resistances. The factorization is kept when no
  /// resistance moved by more than `refactor_tolerance` (relative) since it
  /// was computed; solves then use iterative refinement against the new G.
  void update_resistances(const std::vector<double>& resistances);

  /// Solve G u = rhs; returns voltages for every grid node.
  const std::vector<double>& solve();

  const Eigen::SparseMatrix<double>& matrix() const { return g_; }
  const Eigen::VectorXd& rhs() const { return rhs_; }
  /// Matrix row of a grid node, -1 for pad-held nodes.
  int row_of(int node) const { return row_of_node_[static_cast<std::size_t>(node)]; }
  int rows() const { return static_cast<int>(g_.rows()); }
  const std::vector<double>& voltages() const { return u_; }
  const std::vector<double>& resistances() const { return resistance_; }

  /// max |G u - rhs| / max |rhs| of the last solve.
  double last_residual() const { return last_residual_; }
  int factorizations() const { return factorizations_; }
  int refinement_steps() const { return refinement_steps_; }

  double refactor_tolerance = 1e-4;

 private:
  void stamp();
  void factorize();

  const PowerGrid* grid_;
  std::vector<int> row_of_node_;
  std::vector<double> fixed_voltage_;  // per node, NaN unless pad-held
  std::vector<int> node_of_row_;
  std::vector<double> resistance_;
  std::vector<double> factored_resistance_;
  Eigen::SparseMatrix<double> g_;
  Eigen::VectorXd rhs_;
  std::vector<double> u_;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
  bool factor_valid_ = false;
  double last_residual_ = 0.0;
  int factorizations_ = 0;
  int refinement_steps_ = 0;
};

ConductanceSystem assemble(const PowerGrid& grid, const std::vector<double>& resistances);

/// Initial resistances R0 by segment id.
std::vector<double> nominal_resistances(const PowerGrid& grid);

BranchCurrents branch_currents(const ConductanceSystem& sys, const PowerGrid& grid);

/// Supply voltage of each node's net: the highest pad voltage on that net.
std::vector<double> net_supply_voltages(const PowerGrid& grid);

/// Pad voltage of the node's net minus the node voltage, by node id.
std::vector<double> ir_drop_map(const ConductanceSystem& sys, const PowerGrid& grid);

}  // namespace emgrid
