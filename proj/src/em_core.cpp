#include "emgrid/em_core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "emgrid/errors.hpp"

namespace emgrid {

void MaterialParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw InputError(std::string("material parameter '") + name + "' must be > 0");
  };
  positive(ez, "ez");
  positive(omega, "omega");
  positive(bulk_modulus, "bulk_modulus");
  positive(d0, "d0");
  positive(ea, "ea");
  positive(kb, "kb");
  positive(delta, "delta");
  positive(sigma_crit, "sigma_crit");
  positive(rho_cu, "rho_cu");
  positive(rho_ta, "rho_ta");
  positive(h_ta, "h_ta");
  positive(void_crit_frac, "void_crit_frac");
  if (!std::isfinite(q_heat)) throw InputError("material parameter 'q_heat' must be finite");
  if (!std::isfinite(sigma_t)) throw InputError("material parameter 'sigma_t' must be finite");
  if (!(sigma_crit > sigma_t))
    throw InputError("sigma_crit must exceed sigma_t for a nucleation phase to exist");
  if (polarity != 1 && polarity != -1) throw InputError("polarity must be +1 or -1");
}

void MaterialParams::validate_barrier(double w, double h) const {
  const double bracket = rho_ta / (h_ta * (2.0 * h + w)) - rho_cu / (h * w);
  if (!(bracket > 0.0))
    throw InputError("barrier resistance model is non-positive for a " + std::to_string(w * 1e6) +
                     " x " + std::to_string(h * 1e6) +
                     " um cross-section (rho_ta/h_ta too small relative to rho_cu)");
}

double effective_diffusivity(double temperature, const MaterialParams& mat) {
  const double kt_ev = mat.kb * temperature;
  const double da = mat.d0 * std::exp(-mat.ea / kt_ev);
  return da * mat.bulk_modulus * mat.omega / (kt_ev * kElementaryCharge);
}

double TreeMesh::total_length() const { return std::accumulate(weight.begin(), weight.end(), 0.0); }

TreeMesh build_mesh(const PowerGrid& grid, const InterconnectTree& tree, const MeshOptions& opt) {
  if (opt.refine < 1) throw InputError("mesh refinement must be >= 1");
  TreeMesh mesh;
  mesh.tree_id = tree.id;
  auto new_node = [&](int grid_node) {
    int id = mesh.size();
    mesh.weight.push_back(0.0);
    mesh.grid_node.push_back(grid_node);
    mesh.owner.emplace_back(-1, -1);
    return id;
  };
  auto fd_of = [&](int grid_node) {
    auto it = mesh.fd_of_grid_node.find(grid_node);
    if (it != mesh.fd_of_grid_node.end()) return it->second;
    int id = new_node(grid_node);
    mesh.fd_of_grid_node.emplace(grid_node, id);
    return id;
  };

  for (int sid : tree.segments) {
    const auto& seg = grid.segment(sid);
    MeshBranch br;
    br.segment = sid;
    br.length = seg.length_m();
    br.width = seg.width_m();
    br.thickness = seg.thickness_m();
    br.r0 = seg.r0;
    if (br.length < opt.dx_min)
      throw InputError("segment '" + seg.name + "' is shorter than the minimum mesh spacing");
    const double target = std::clamp(br.length * opt.dx_frac, opt.dx_min, opt.dx_max);
    int m = std::max(2, static_cast<int>(std::lround(br.length / target))) * opt.refine;
    br.h = br.length / m;
    const int branch_index = static_cast<int>(mesh.branches.size());
    br.nodes.push_back(fd_of(seg.n1));
    for (int k = 1; k < m; ++k) br.nodes.push_back(new_node(-1));
    br.nodes.push_back(fd_of(seg.n2));
    for (int k = 0; k <= m; ++k) {
      auto& own = mesh.owner[static_cast<std::size_t>(br.nodes[static_cast<std::size_t>(k)])];
      if (own.first < 0) own = {branch_index, k};
    }
    for (int k = 0; k < m; ++k) {
      MeshInterval iv{br.nodes[static_cast<std::size_t>(k)], br.nodes[static_cast<std::size_t>(k + 1)],
                      branch_index, k};
      mesh.weight[static_cast<std::size_t>(iv.a)] += 0.5 * br.h;
      mesh.weight[static_cast<std::size_t>(iv.b)] += 0.5 * br.h;
      mesh.intervals.push_back(iv);
    }
    mesh.branches.push_back(std::move(br));
  }
  return mesh;
}

namespace {

double tm_coefficient(const MaterialParams& mat) {
  return mat.q_heat * kElementaryCharge / mat.omega;  // Pa
}

}  // namespace

DiscretizedTree discretize(const TreeMesh& mesh, const std::vector<BranchDrive>& drives,
                           const MaterialParams& mat, std::optional<int> void_node) {
  if (drives.size() != mesh.branches.size())
    throw InputError("discretize: one drive per branch is required");
  const int n = mesh.size();
  const int p = static_cast<int>(mesh.branches.size());
  const double q_over_omega = tm_coefficient(mat);

  DiscretizedTree d;
  d.capacity = Eigen::Map<const Eigen::VectorXd>(mesh.weight.data(), n);
  d.d_tm = Eigen::VectorXd::Zero(n);
  d.kappa.resize(mesh.intervals.size());
  d.tm_drop.resize(mesh.intervals.size());
  d.em_coef.resize(static_cast<std::size_t>(p));
  d.void_node = void_node;
  for (int b = 0; b < p; ++b)
    d.em_coef[static_cast<std::size_t>(b)] =
        mat.polarity * mat.ez * drives[static_cast<std::size_t>(b)].rho / mat.omega;

  std::vector<Eigen::Triplet<double>> a_trip, b_trip;
  a_trip.reserve(4 * mesh.intervals.size());
  b_trip.reserve(2 * mesh.intervals.size());
  for (std::size_t e = 0; e < mesh.intervals.size(); ++e) {
    const auto& iv = mesh.intervals[e];
    const auto& br = mesh.branches[static_cast<std::size_t>(iv.branch)];
    const auto& prof = drives[static_cast<std::size_t>(iv.branch)].profile;
    const double xa = br.position(iv.k), xb = br.position(iv.k + 1);
    const double kappa = effective_diffusivity(prof.at(0.5 * (xa + xb)), mat);
    if (!(kappa > 0.0) || !std::isfinite(kappa))
      throw NumericalError("non-positive diffusivity on tree " + std::to_string(mesh.tree_id));
    const double tm = q_over_omega * std::log(prof.at(xb) / prof.at(xa));
    d.kappa[e] = kappa;
    d.tm_drop[e] = tm;
    const double g = kappa / br.h;
    a_trip.emplace_back(iv.a, iv.a, -g);
    a_trip.emplace_back(iv.b, iv.b, -g);
    a_trip.emplace_back(iv.a, iv.b, g);
    a_trip.emplace_back(iv.b, iv.a, g);
    const double em = kappa * d.em_coef[static_cast<std::size_t>(iv.branch)];
    b_trip.emplace_back(iv.a, iv.branch, -em);
    b_trip.emplace_back(iv.b, iv.branch, em);
    d.d_tm[iv.a] += g * tm;
    d.d_tm[iv.b] -= g * tm;

    if (void_node && (*void_node == iv.a || *void_node == iv.b)) {
      // Surface condition on this face: the gradient into the wire equals
      // sigma/delta, replacing the blocked-flux condition.
      const int v = *void_node;
      const double side = (v == iv.a) ? 1.0 : -1.0;
      a_trip.emplace_back(v, v, -kappa / mat.delta);
      b_trip.emplace_back(v, iv.branch, side * em);
      d.d_tm[v] -= side * g * tm;
    }
  }
  d.a.resize(n, n);
  d.a.setFromTriplets(a_trip.begin(), a_trip.end());
  d.a.makeCompressed();
  d.b_in.resize(n, p);
  d.b_in.setFromTriplets(b_trip.begin(), b_trip.end());
  d.b_in.makeCompressed();
  return d;
}

Eigen::VectorXd steady_state_stress(const TreeMesh& mesh, const std::vector<BranchDrive>& drives,
                                    const MaterialParams& mat) {
  if (drives.size() != mesh.branches.size())
    throw InputError("steady_state_stress: one drive per branch is required");
  const int n = mesh.size();
  const double q_over_omega = tm_coefficient(mat);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
  std::vector<bool> known(static_cast<std::size_t>(n), false);
  std::vector<bool> branch_done(mesh.branches.size(), false);

  // Branch incidence on end nodes.
  std::map<int, std::vector<int>> incident;
  for (std::size_t b = 0; b < mesh.branches.size(); ++b) {
    incident[mesh.branches[b].nodes.front()].push_back(static_cast<int>(b));
    incident[mesh.branches[b].nodes.back()].push_back(static_cast<int>(b));
  }

  // Potential along a branch relative to its n1 end.
  auto rise = [&](const MeshBranch& br, const BranchDrive& dr, int k) {
    const double s = mat.polarity * mat.ez * dr.rho * dr.j / mat.omega;
    const double x0 = br.position(0), x = br.position(k);
    return s * (x - x0) + q_over_omega * std::log(dr.profile.at(x) / dr.profile.at(x0));
  };

  double scale = 0.0;
  for (std::size_t root_branch = 0; root_branch < mesh.branches.size(); ++root_branch) {
    if (branch_done[root_branch]) continue;
    const int root = mesh.branches[root_branch].nodes.front();
    known[static_cast<std::size_t>(root)] = true;
    std::deque<int> queue{root};
    while (!queue.empty()) {
      const int node = queue.front();
      queue.pop_front();
      for (int b : incident[node]) {
        if (branch_done[static_cast<std::size_t>(b)]) continue;
        branch_done[static_cast<std::size_t>(b)] = true;
        const auto& br = mesh.branches[static_cast<std::size_t>(b)];
        const auto& dr = drives[static_cast<std::size_t>(b)];
        const int m = br.intervals();
        const bool from_n1 = (br.nodes.front() == node);
        const double base = from_n1 ? phi[node] : phi[node] - rise(br, dr, m);
        for (int k = 1; k < m; ++k) phi[br.nodes[static_cast<std::size_t>(k)]] = base + rise(br, dr, k);
        const int far = from_n1 ? br.nodes.back() : br.nodes.front();
        const double far_value = base + (from_n1 ? rise(br, dr, m) : 0.0);
        scale = std::max(scale, std::abs(far_value));
        if (known[static_cast<std::size_t>(far)]) {
          if (std::abs(phi[far] - far_value) > 1e-9 * std::max(scale, 1.0))
            throw NumericalError("inconsistent steady-state path integrals on cyclic tree " +
                                 std::to_string(mesh.tree_id));
          continue;
        }
        phi[far] = far_value;
        known[static_cast<std::size_t>(far)] = true;
        queue.push_back(far);
      }
    }
  }

  const Eigen::Map<const Eigen::VectorXd> w(mesh.weight.data(), n);
  const double c0 = mat.sigma_t - w.dot(phi) / w.sum();
  return phi.array() + c0;
}

ImmortalityVerdict filter_immortal(const TreeMesh& mesh, const std::vector<BranchDrive>& drives,
                                   const MaterialParams& mat) {
  const Eigen::VectorXd s = steady_state_stress(mesh, drives, mat);
  ImmortalityVerdict v;
  Eigen::Index idx = 0;
  v.max_steady_stress = s.maxCoeff(&idx);
  v.critical_node = static_cast<int>(idx);
  v.immortal = v.max_steady_stress < mat.sigma_crit;
  return v;
}

void ImplicitStepper::analyze(const Eigen::SparseMatrix<double>& a) {
  analyzed_ = true;
  const auto n = static_cast<std::size_t>(a.rows());
  std::vector<std::vector<int>> adj(n);
  std::size_t edges = 0;
  for (int c = 0; c < a.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, c); it; ++it)
      if (it.row() > c) {
        adj[static_cast<std::size_t>(c)].push_back(static_cast<int>(it.row()));
        adj[static_cast<std::size_t>(it.row())].push_back(c);
        ++edges;
      }
  tree_ = false;
  if (n == 0 || edges + 1 != n) return;
  order_.assign(1, 0);
  parent_.assign(n, -1);
  std::vector<bool> seen(n, false);
  seen[0] = true;
  for (std::size_t i = 0; i < order_.size(); ++i)
    for (int v : adj[static_cast<std::size_t>(order_[i])])
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        parent_[static_cast<std::size_t>(v)] = order_[i];
        order_.push_back(v);
      }
  tree_ = order_.size() == n;
}

void ImplicitStepper::load(const DiscretizedTree& disc) {
  drive_valid_ = false;
  if (!tree_) return;
  const auto n = static_cast<std::size_t>(disc.a.rows());
  a_diag_.assign(n, 0.0);
  a_up_.assign(n, 0.0);
  for (int c = 0; c < disc.a.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(disc.a, c); it; ++it) {
      const auto r = static_cast<std::size_t>(it.row());
      if (it.row() == c)
        a_diag_[r] += it.value();
      else if (parent_[r] == c)
        a_up_[r] = it.value();
    }
}

void ImplicitStepper::factorize(const DiscretizedTree& disc, double dt) {
  if (!tree_) {
    Eigen::SparseMatrix<double> m = -dt * disc.a;
    m.diagonal() += disc.capacity;
    if (factorizations_ == 0) solver_.analyzePattern(m);
    solver_.factorize(m);
    if (solver_.info() != Eigen::Success) throw NumericalError("stress system factorization failed");
    return;
  }
  const std::size_t n = a_diag_.size();
  pivot_.resize(n);
  off_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    pivot_[i] = disc.capacity[static_cast<Eigen::Index>(i)] - dt * a_diag_[i];
    off_[i] = -dt * a_up_[i];
  }
  for (std::size_t i = order_.size() - 1; i > 0; --i) {
    const auto u = static_cast<std::size_t>(order_[i]);
    if (!(pivot_[u] > 0.0)) throw NumericalError("stress system factorization failed");
    pivot_[static_cast<std::size_t>(parent_[u])] -= off_[u] * off_[u] / pivot_[u];
  }
  if (!(pivot_[static_cast<std::size_t>(order_[0])] > 0.0))
    throw NumericalError("stress system factorization failed");
  // keep multipliers and reciprocal pivots for the solves
  for (std::size_t i = 0; i < n; ++i) {
    off_[i] /= pivot_[i];
    pivot_[i] = 1.0 / pivot_[i];
  }
}

void ImplicitStepper::solve_in_place(Eigen::VectorXd& x) const {
  if (!tree_) {
    x = solver_.solve(x);
    return;
  }
  for (std::size_t i = order_.size() - 1; i > 0; --i) {
    const auto u = static_cast<std::size_t>(order_[i]);
    x[parent_[u]] -= off_[u] * x[static_cast<Eigen::Index>(u)];
  }
  const auto root = order_[0];
  x[root] *= pivot_[static_cast<std::size_t>(root)];
  for (std::size_t i = 1; i < order_.size(); ++i) {
    const auto u = static_cast<std::size_t>(order_[i]);
    const auto ui = static_cast<Eigen::Index>(u);
    x[ui] = x[ui] * pivot_[u] - off_[u] * x[parent_[u]];
  }
}

Eigen::VectorXd ImplicitStepper::step(const DiscretizedTree& disc, const Eigen::VectorXd& sigma,
                                      const Eigen::VectorXd& j, double dt) {
  if (!(dt > 0.0)) throw NumericalError("time step must be positive");
  if (!analyzed_) analyze(disc.a);
  if (dirty_) load(disc);
  if (dirty_ || dt != dt_) {
    factorize(disc, dt);
    ++factorizations_;
    dirty_ = false;
    dt_ = dt;
  }
  if (!drive_valid_ || j_.size() != j.size() || j_ != j) {
    drive_ = disc.drive(j);
    j_ = j;
    drive_valid_ = true;
  }
  Eigen::VectorXd next = disc.capacity.cwiseProduct(sigma) + dt * drive_;
  solve_in_place(next);
  if (!next.allFinite()) throw NumericalError("non-finite stress after implicit step");
  return next;
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::nucleation: return "nucleation";
    case Phase::post_void: return "post_void";
    case Phase::failed_open_check: return "failed_open_check";
  }
  return "unknown";
}

std::optional<NucleationEvent> detect_nucleation(const Eigen::VectorXd& before,
                                                 const Eigen::VectorXd& after, double t_before,
                                                 double t_after, const MaterialParams& mat) {
  int best = -1;
  for (Eigen::Index i = 0; i < after.size(); ++i)
    if (after[i] >= mat.sigma_crit && (best < 0 || after[i] > after[best])) best = static_cast<int>(i);
  if (best < 0) return std::nullopt;
  const double s0 = before[best], s1 = after[best];
  double t = t_before;
  if (s0 < mat.sigma_crit && s1 > s0) t = t_before + (mat.sigma_crit - s0) / (s1 - s0) * (t_after - t_before);
  return NucleationEvent{best, t};
}

namespace {

double signed_void_volume(const TreeStressState& state, const TreeMesh& mesh,
                          const MaterialParams& mat) {
  double span_lo = 0.0, span_hi = 0.0;
  int span_branch = -1;
  if (state.nuc_node && state.nuc_branch >= 0) {
    span_branch = state.nuc_branch;
    const auto& br = mesh.branches[static_cast<std::size_t>(span_branch)];
    const double span = std::min(state.void_volume / br.area(), br.length);
    const int v = *state.nuc_node;
    if (v == br.nodes.front()) {
      span_lo = br.position(0);
      span_hi = span_lo + span;
    } else if (v == br.nodes.back()) {
      span_hi = br.position(br.intervals());
      span_lo = span_hi - span;
    } else {
      const auto it = std::find(br.nodes.begin(), br.nodes.end(), v);
      const double xv = br.position(static_cast<int>(it - br.nodes.begin()));
      span_lo = std::max(br.position(0), xv - 0.5 * span);
      span_hi = std::min(br.position(br.intervals()), xv + 0.5 * span);
    }
  }

  double total = 0.0;
  for (const auto& iv : mesh.intervals) {
    const auto& br = mesh.branches[static_cast<std::size_t>(iv.branch)];
    const double xa = br.position(iv.k), xb = br.position(iv.k + 1);
    const double fa = (mat.sigma_t - state.sigma[iv.a]) * br.area();
    const double fb = (mat.sigma_t - state.sigma[iv.b]) * br.area();
    double part = 0.5 * (fa + fb) * (xb - xa);
    if (iv.branch == span_branch) {
      const double lo = std::max(xa, span_lo), hi = std::min(xb, span_hi);
      if (hi > lo) {
        auto f = [&](double x) { return fa + (fb - fa) * (x - xa) / (xb - xa); };
        part -= 0.5 * (f(lo) + f(hi)) * (hi - lo);
      }
    }
    total += part;
  }
  return total / mat.bulk_modulus;
}

}  // namespace

double void_volume(const TreeStressState& state, const TreeMesh& mesh, const MaterialParams& mat) {
  return std::max(0.0, signed_void_volume(state, mesh, mat));
}

double critical_void_volume(double width_m, double thickness_m, double length_m,
                            const MaterialParams& mat) {
  return width_m * thickness_m * mat.void_crit_frac * length_m;
}

double delta_resistance(double vv, double v_crit, double w, double h, const MaterialParams& mat) {
  if (vv <= v_crit) return 0.0;
  const double bracket = mat.rho_ta / (mat.h_ta * (2.0 * h + w)) - mat.rho_cu / (h * w);
  return std::max(0.0, (vv - v_crit) / (w * h) * bracket);
}

double delta_resistance(double vv, const WireSegment& seg, const MaterialParams& mat) {
  const double v_crit = critical_void_volume(seg.width_m(), seg.thickness_m(), seg.length_m(), mat);
  return delta_resistance(vv, v_crit, seg.width_m(), seg.thickness_m(), mat);
}

TreeSimulator::TreeSimulator(TreeMesh mesh, std::vector<BranchDrive> drives,
                             const MaterialParams& mat)
    : mesh_(std::move(mesh)), drives_(std::move(drives)), mat_(mat) {
  disc_ = discretize(mesh_, drives_, mat_);
  j_.resize(static_cast<Eigen::Index>(drives_.size()));
  for (std::size_t b = 0; b < drives_.size(); ++b) j_[static_cast<Eigen::Index>(b)] = drives_[b].j;
  state_.sigma = Eigen::VectorXd::Constant(mesh_.size(), mat_.sigma_t);
}

void TreeSimulator::set_drives(std::vector<BranchDrive> drives) {
  drives_ = std::move(drives);
  disc_ = discretize(mesh_, drives_, mat_, state_.nuc_node);
  stepper_.invalidate();
}

void TreeSimulator::set_current_densities(const std::vector<double>& j) {
  if (j.size() != drives_.size()) throw InputError("current density vector size mismatch");
  for (std::size_t b = 0; b < j.size(); ++b) j_[static_cast<Eigen::Index>(b)] = j[b];
}

int TreeSimulator::nucleated_segment() const {
  return state_.nuc_branch >= 0 ? mesh_.branches[static_cast<std::size_t>(state_.nuc_branch)].segment
                                : -1;
}

double TreeSimulator::critical_volume() const {
  if (state_.nuc_branch < 0) return 0.0;
  const auto& br = mesh_.branches[static_cast<std::size_t>(state_.nuc_branch)];
  return critical_void_volume(br.width, br.thickness, br.length, mat_);
}

void TreeSimulator::advance(double t_from, double t_to) {
  const double dt = t_to - t_from;
  if (state_.phase != Phase::nucleation) {
    state_.sigma = stepper_.step(disc_, state_.sigma, j_, dt);
    update_void();
    return;
  }
  Eigen::VectorXd next = stepper_.step(disc_, state_.sigma, j_, dt);
  const auto event = detect_nucleation(state_.sigma, next, t_from, t_to, mat_);
  if (!event) {
    state_.sigma = std::move(next);
    return;
  }
  const double frac = (event->time - t_from) / dt;
  state_.sigma += frac * (next - state_.sigma);
  state_.t_nuc = event->time;
  state_.nuc_node = event->node;
  state_.phase = Phase::post_void;

  // The void grows on the owning branch; at a junction, on the incident
  // branch with the largest |j| (lowest index on ties).
  const int v = event->node;
  if (mesh_.grid_node[static_cast<std::size_t>(v)] < 0) {
    state_.nuc_branch = mesh_.owner[static_cast<std::size_t>(v)].first;
  } else {
    double best = -1.0;
    for (std::size_t b = 0; b < mesh_.branches.size(); ++b) {
      const auto& br = mesh_.branches[b];
      if (br.nodes.front() != v && br.nodes.back() != v) continue;
      const double mag = std::abs(j_[static_cast<Eigen::Index>(b)]);
      if (mag > best) {
        best = mag;
        state_.nuc_branch = static_cast<int>(b);
      }
    }
  }

  disc_ = discretize(mesh_, drives_, mat_, state_.nuc_node);
  stepper_.invalidate();
  const double rest = t_to - event->time;
  if (rest > 0.0) {
    state_.sigma = stepper_.step(disc_, state_.sigma, j_, rest);
    stepper_.invalidate();
  }
  update_void();
}

void TreeSimulator::update_void() {
  const double raw = signed_void_volume(state_, mesh_, mat_);
  if (raw < 0.0) ++state_.negative_void_clamps;
  state_.void_volume = std::max(0.0, raw);
  const auto& br = mesh_.branches[static_cast<std::size_t>(state_.nuc_branch)];
  const double dr = delta_resistance(state_.void_volume, critical_volume(), br.width, br.thickness, mat_);
  state_.delta_r = std::max(state_.delta_r, dr);
}

}  // namespace emgrid
