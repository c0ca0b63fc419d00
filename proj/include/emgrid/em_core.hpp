#pragma once

// Korhonen stress evolution on interconnect trees with electromigration,
// stress migration and thermomigration fluxes.
//
// Each tree is meshed branch by branch with a uniform spacing per branch;
// FD nodes at tree nodes are shared by all incident branches. The
// finite-volume form of
//
//   d(sigma)/dt = d/dx [ kappa(x) (d(sigma)/dx - S - M) ]
//
// gives the LTI system C sigma' = A sigma + B j - D, where C holds control
// volume lengths, A is the (symmetric, zero row sum) kappa-weighted Laplacian,
// B maps branch current densities to the divergence of the EM flux and D is
// the divergence of the TM flux. Blocked terminals contribute no boundary
// flux. After void nucleation, the void node additionally carries the
// surface condition d(sigma)/dx = sigma/delta on each incident face.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <map>
#include <optional>
#include <vector>

#include "emgrid/grid_model.hpp"
#include "emgrid/thermal.hpp"

namespace emgrid {

inline constexpr double kElementaryCharge = 1.602176634e-19;  // C, also J per eV

struct MaterialParams {
  double ez = 10.0 * kElementaryCharge;  // effective charge |Z*| e, C
  double omega = 1.182e-29;              // atomic volume, m^3
  double bulk_modulus = 1.0e11;          // Pa
  double d0 = 1.3e-9;                    // m^2/s
  double ea = 0.8;                       // eV
  double kb = 8.617333262e-5;            // eV/K
  double q_heat = 0.1;                   // heat of transport, eV
  double delta = 1.0e-9;                 // void surface thickness, m
  double sigma_crit = 5.0e8;             // Pa
  double sigma_t = 0.0;                  // residual stress, Pa
  double rho_cu = 2.2e-8;                // ohm*m
  double rho_ta = 2.0e-6;                // ohm*m
  double h_ta = 5.0e-9;                  // barrier thickness, m
  double void_crit_frac = 0.01;          // critical void length / segment length
  int polarity = 1;                      // +1: tensile where electrons enter

  void validate() const;
  /// Throws InputError when the Ta/Cu bracket of the resistance-change model
  /// is not positive for a cross-section W x H (metres).
  void validate_barrier(double width_m, double thickness_m) const;
};

/// kappa(T) = D0 exp(-Ea/(kb T)) * B * Omega / (kb T), in m^2/s.
double effective_diffusivity(double temperature, const MaterialParams& mat);

struct MeshOptions {
  double dx_frac = 1.0 / 50.0;  // target spacing as a fraction of branch length
  double dx_min = 0.05e-6;      // m
  double dx_max = 1.0e-6;       // m
  int refine = 1;               // multiplies the interval count of every branch
};

struct MeshBranch {
  int segment = 0;
  std::vector<int> nodes;  // FD nodes from the segment's n1 to n2
  double length = 0.0;     // m
  double h = 0.0;          // m
  double width = 0.0;      // m
  double thickness = 0.0;  // m
  double r0 = 0.0;         // ohm

  int intervals() const { return static_cast<int>(nodes.size()) - 1; }
  /// Local coordinate of the k-th FD node, in [-L/2, L/2].
  double position(int k) const { return -0.5 * length + k * h; }
  double area() const { return width * thickness; }
};

struct MeshInterval {
  int a = 0;  // FD node at the lower local coordinate
  int b = 0;
  int branch = 0;
  int k = 0;  // a is nodes[k] of the branch
};

struct TreeMesh {
  int tree_id = 0;
  std::vector<MeshBranch> branches;
  std::vector<MeshInterval> intervals;
  std::vector<double> weight;          // control-volume length per FD node, m
  std::vector<int> grid_node;          // grid node id per FD node, -1 inside a branch
  std::map<int, int> fd_of_grid_node;  // grid node id -> FD node
  std::vector<std::pair<int, int>> owner;  // FD node -> (branch, k) of one owning branch

  int size() const { return static_cast<int>(weight.size()); }
  double total_length() const;
};

TreeMesh build_mesh(const PowerGrid& grid, const InterconnectTree& tree,
                    const MeshOptions& options = {});

/// Per-branch electrical and thermal drive.
struct BranchDrive {
  double j = 0.0;    // A/m^2, signed n1 -> n2
  double rho = 0.0;  // ohm*m
  TemperatureProfile profile;
};

struct DiscretizedTree {
  Eigen::VectorXd capacity;         // C diagonal, m
  Eigen::SparseMatrix<double> a;    // n x n
  Eigen::SparseMatrix<double> b_in; // n x branches
  Eigen::VectorXd d_tm;             // n
  std::vector<double> kappa;        // per interval, m^2/s
  std::vector<double> tm_drop;      // per interval, (Q/Omega) ln(T_b/T_a), Pa
  std::vector<double> em_coef;      // per branch, polarity * eZ rho / Omega; S = em_coef * j
  std::optional<int> void_node;

  /// B j - D for the given branch current densities.
  Eigen::VectorXd drive(const Eigen::VectorXd& j) const { return b_in * j - d_tm; }
};

DiscretizedTree discretize(const TreeMesh& mesh, const std::vector<BranchDrive>& drives,
                           const MaterialParams& mat, std::optional<int> void_node = std::nullopt);

/// Zero-flux steady state: sigma = C0 + path integral of S + (Q/Omega) ln(T/T_ref),
/// with C0 chosen so the length-weighted mean equals sigma_T. Evaluated at
/// the mesh's FD nodes.
Eigen::VectorXd steady_state_stress(const TreeMesh& mesh, const std::vector<BranchDrive>& drives,
                                    const MaterialParams& mat);

struct ImmortalityVerdict {
  bool immortal = true;
  double max_steady_stress = 0.0;
  int critical_node = 0;
};

ImmortalityVerdict filter_immortal(const TreeMesh& mesh, const std::vector<BranchDrive>& drives,
                                   const MaterialParams& mat);

/// Backward-Euler integrator (C - dt A) sigma' = C sigma + dt (B j - D).
/// The factorization is kept until dt or the system changes. When the FD
/// graph is acyclic (the usual case) the matrix is factorized by eliminating
/// leaves toward a root, which produces no fill; otherwise a sparse LDL^T is
/// used.
class ImplicitStepper {
 public:
  /// Call whenever the DiscretizedTree passed to step() was rebuilt.
  void invalidate() { dirty_ = true; }
  Eigen::VectorXd step(const DiscretizedTree& disc, const Eigen::VectorXd& sigma,
                       const Eigen::VectorXd& j, double dt);
  int factorizations() const { return factorizations_; }
  bool uses_tree_elimination() const { return tree_; }

 private:
  void analyze(const Eigen::SparseMatrix<double>& a);
  void load(const DiscretizedTree& disc);
  void factorize(const DiscretizedTree& disc, double dt);
  void solve_in_place(Eigen::VectorXd& x) const;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  bool analyzed_ = false;
  bool tree_ = false;
  bool dirty_ = true;
  double dt_ = -1.0;
  int factorizations_ = 0;
  // Leaf-to-root elimination: order_[0] is the root, parent_ precedes child.
  std::vector<int> order_, parent_;
  std::vector<double> a_diag_, a_up_;  // A(u, u) and A(u, parent u)
  std::vector<double> off_;            // multiplier (C - dt A)(u, parent u) / pivot
  std::vector<double> pivot_;          // reciprocal eliminated diagonal
  Eigen::VectorXd j_, drive_;          // cached B j - D
  bool drive_valid_ = false;
};

enum class Phase { nucleation, post_void, failed_open_check };

const char* to_string(Phase phase);

struct TreeStressState {
  Eigen::VectorXd sigma;
  Phase phase = Phase::nucleation;
  std::optional<double> t_nuc;
  std::optional<int> nuc_node;  // FD node of the void
  int nuc_branch = -1;          // mesh branch whose resistance grows
  double void_volume = 0.0;     // m^3
  double delta_r = 0.0;         // ohm, applied to the nucleated segment
  int negative_void_clamps = 0;
};

struct NucleationEvent {
  int node = 0;
  double time = 0.0;
};

/// First FD node at or above sigma_crit after a step (argmax, lowest index on
/// ties) with the crossing time interpolated linearly within the step.
std::optional<NucleationEvent> detect_nucleation(const Eigen::VectorXd& before,
                                                 const Eigen::VectorXd& after, double t_before,
                                                 double t_after, const MaterialParams& mat);

/// Void volume from the stress deficit relative to sigma_T over the wire that
/// remains outside the void span, clamped at zero.
double void_volume(const TreeStressState& state, const TreeMesh& mesh, const MaterialParams& mat);

/// Resistance increase once the void exceeds v_crit (0 below it).
double delta_resistance(double void_volume, double v_crit, double width_m, double thickness_m,
                        const MaterialParams& mat);
double delta_resistance(double void_volume, const WireSegment& seg, const MaterialParams& mat);

/// Critical void volume W * H * (void_crit_frac * L).
double critical_void_volume(double width_m, double thickness_m, double length_m,
                            const MaterialParams& mat);

/// Per-tree driver used by the coupled loop: owns the mesh, the current
/// discretization, the integrator and the stress state.
class TreeSimulator {
 public:
  TreeSimulator(TreeMesh mesh, std::vector<BranchDrive> drives, const MaterialParams& mat);

  /// New temperature profiles (and the densities they were computed with);
  /// rebuilds the discretization.
  void set_drives(std::vector<BranchDrive> drives);
  /// Current densities used for the EM term of the next step.
  void set_current_densities(const std::vector<double>& j);

  /// Advance from t_from to t_to, switching to the post-void system at the
  /// nucleation time when it falls inside the step.
  void advance(double t_from, double t_to);

  const TreeMesh& mesh() const { return mesh_; }
  const std::vector<BranchDrive>& drives() const { return drives_; }
  const TreeStressState& state() const { return state_; }
  const DiscretizedTree& system() const { return disc_; }
  /// Segment id carrying the void, or -1.
  int nucleated_segment() const;
  double critical_volume() const;
  int factorizations() const { return stepper_.factorizations(); }

 private:
  void update_void();

  TreeMesh mesh_;
  std::vector<BranchDrive> drives_;
  MaterialParams mat_;
  DiscretizedTree disc_;
  ImplicitStepper stepper_;
  Eigen::VectorXd j_;
  TreeStressState state_;
};

}  // namespace emgrid
