#include "stress_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracle {

namespace {

constexpr double kCharge = 1.602176634e-19;

struct Edge {
  int a, b;
  double kappa;
  double h;
  double drive;  // S + M at the midpoint
};

}  // namespace

double temperature(const Branch& b, double x) {
  const double h = b.length / (2 * b.gamma);
  const double t0 = 0.5 * (b.t1 + b.t2), tn = 0.5 * (b.t1 - b.t2);
  return t0 + b.joule * (1 - std::cosh(x / b.gamma) / std::cosh(h)) -
         tn * std::sinh(x / b.gamma) / std::sinh(h);
}

double temperature_slope(const Branch& b, double x) {
  const double h = b.length / (2 * b.gamma);
  const double tn = 0.5 * (b.t1 - b.t2);
  return (-b.joule * std::sinh(x / b.gamma) / std::cosh(h) - tn * std::cosh(x / b.gamma) / std::sinh(h)) /
         b.gamma;
}

Solution solve(const Tree& tree, const Material& mat, const Options& opt) {
  // Fine node numbering: junctions first, then branch interiors.
  std::vector<std::vector<int>> nodes(tree.branches.size());
  int count = tree.junctions;
  for (std::size_t bi = 0; bi < tree.branches.size(); ++bi) {
    const auto& br = tree.branches[bi];
    const int m = br.intervals * opt.refine;
    nodes[bi].push_back(br.n1);
    for (int k = 1; k < m; ++k) nodes[bi].push_back(count++);
    nodes[bi].push_back(br.n2);
  }
  const auto n = static_cast<std::size_t>(count);

  std::vector<double> cap(n, 0.0);
  std::vector<Edge> edges;
  for (std::size_t bi = 0; bi < tree.branches.size(); ++bi) {
    const auto& br = tree.branches[bi];
    const int m = br.intervals * opt.refine;
    const double h = br.length / m;
    const double s = mat.polarity * mat.ez * br.rho * br.j / mat.omega;
    for (int k = 0; k < m; ++k) {
      const double xm = -0.5 * br.length + (k + 0.5) * h;
      const double t = temperature(br, xm);
      const double kt = mat.kb * t;
      const double kappa = mat.d0 * std::exp(-mat.ea / kt) * mat.bulk * mat.omega / (kt * kCharge);
      const double mterm = mat.q * kCharge / (mat.omega * t) * temperature_slope(br, xm);
      const int a = nodes[bi][static_cast<std::size_t>(k)], b = nodes[bi][static_cast<std::size_t>(k + 1)];
      edges.push_back({a, b, kappa, h, s + mterm});
      cap[static_cast<std::size_t>(a)] += 0.5 * h;
      cap[static_cast<std::size_t>(b)] += 0.5 * h;
    }
  }
  if (edges.size() + 1 != n) throw std::runtime_error("oracle: tree must be acyclic and connected");

  // Rooted ordering for leaf-to-root elimination.
  std::vector<std::vector<std::pair<int, std::size_t>>> adj(n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[static_cast<std::size_t>(edges[e].a)].push_back({edges[e].b, e});
    adj[static_cast<std::size_t>(edges[e].b)].push_back({edges[e].a, e});
  }
  std::vector<int> order{0}, parent(n, -1);
  std::vector<std::size_t> parent_edge(n, 0);
  std::vector<bool> seen(n, false);
  seen[0] = true;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int u = order[i];
    for (auto [v, e] : adj[static_cast<std::size_t>(u)])
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        parent[static_cast<std::size_t>(v)] = u;
        parent_edge[static_cast<std::size_t>(v)] = e;
        order.push_back(v);
      }
  }
  if (order.size() != n) throw std::runtime_error("oracle: tree is disconnected");

  std::optional<int> void_node;

  // One backward-Euler step of C s' = sum of face fluxes, where the flux
  // into node a through edge (a, b) is kappa ((s_b - s_a) / h - drive).
  auto step = [&](const std::vector<double>& old, double dt) {
    std::vector<double> d(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = cap[i] / dt;
      r[i] = cap[i] / dt * old[i];
    }
    for (const auto& e : edges) {
      const double g = e.kappa / e.h;
      const auto a = static_cast<std::size_t>(e.a), b = static_cast<std::size_t>(e.b);
      d[a] += g;
      d[b] += g;
      r[a] -= e.kappa * e.drive;
      r[b] += e.kappa * e.drive;
      if (void_node && (*void_node == e.a || *void_node == e.b)) {
        // Face at the void: gradient into the wire is s_v / delta.
        const auto v = static_cast<std::size_t>(*void_node);
        d[v] += e.kappa / mat.delta;
        r[v] += (*void_node == e.a ? 1.0 : -1.0) * e.kappa * e.drive;
      }
    }
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto u = static_cast<std::size_t>(order[i]);
      const auto p = static_cast<std::size_t>(parent[u]);
      const auto& e = edges[parent_edge[u]];
      const double off = -e.kappa / e.h;
      const double f = off / d[u];
      d[p] -= f * off;
      r[p] -= f * r[u];
    }
    std::vector<double> x(n);
    const auto root = static_cast<std::size_t>(order[0]);
    x[root] = r[root] / d[root];
    for (std::size_t i = 1; i < order.size(); ++i) {
      const auto u = static_cast<std::size_t>(order[i]);
      const auto& e = edges[parent_edge[u]];
      x[u] = (r[u] + e.kappa / e.h * x[static_cast<std::size_t>(parent[u])]) / d[u];
    }
    return x;
  };

  Solution sol;
  sol.refine = opt.refine;
  std::vector<double> sigma(n, mat.sigma_t);
  std::vector<double> times{0.0};
  for (int k = 0;; ++k) {
    const double t = opt.t_start * std::pow(10.0, static_cast<double>(k) / opt.steps_per_decade);
    if (t >= opt.t_end * (1 - 1e-12)) break;
    times.push_back(t);
  }
  times.push_back(opt.t_end);

  for (std::size_t s = 1; s < times.size(); ++s) {
    const double t0 = times[s - 1], t1 = times[s];
    std::vector<double> next = step(sigma, t1 - t0);
    if (!void_node) {
      std::size_t hot = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (next[i] > next[hot]) hot = i;
      if (next[hot] >= mat.sigma_crit) {
        const double f = next[hot] > sigma[hot] && sigma[hot] < mat.sigma_crit
                             ? (mat.sigma_crit - sigma[hot]) / (next[hot] - sigma[hot])
                             : 0.0;
        const double tn = t0 + f * (t1 - t0);
        for (std::size_t i = 0; i < n; ++i) sigma[i] += f * (next[i] - sigma[i]);
        sol.t_nuc = tn;
        void_node = static_cast<int>(hot);
        if (t1 > tn) next = step(sigma, t1 - tn);
        else next = sigma;
      }
    }
    sigma = std::move(next);
    ++sol.steps;
  }

  sol.sigma.resize(tree.branches.size());
  for (std::size_t bi = 0; bi < tree.branches.size(); ++bi)
    for (int id : nodes[bi]) sol.sigma[bi].push_back(sigma[static_cast<std::size_t>(id)]);
  return sol;
}

double steady_max(const Tree& tree, const Material& mat, int samples) {
  // Walk branches outward from junction 0, carrying junction stresses.
  std::vector<std::optional<double>> at(static_cast<std::size_t>(tree.junctions));
  at[0] = 0.0;
  std::vector<std::vector<double>> prof(tree.branches.size());
  std::vector<bool> done(tree.branches.size(), false);
  for (bool progress = true; progress;) {
    progress = false;
    for (std::size_t bi = 0; bi < tree.branches.size(); ++bi) {
      if (done[bi]) continue;
      const auto& br = tree.branches[bi];
      const auto a = static_cast<std::size_t>(br.n1), b = static_cast<std::size_t>(br.n2);
      if (!at[a] && !at[b]) continue;
      const double s = mat.polarity * mat.ez * br.rho * br.j / mat.omega;
      const double h = br.length / samples;
      // trapezoid of the force S + (Q/(Omega T)) dT/dx from the n1 end
      std::vector<double> rel(static_cast<std::size_t>(samples) + 1, 0.0);
      auto force = [&](double x) {
        return s + mat.q * kCharge / mat.omega * temperature_slope(br, x) / temperature(br, x);
      };
      for (int k = 1; k <= samples; ++k) {
        const double x0 = -0.5 * br.length + (k - 1) * h;
        rel[static_cast<std::size_t>(k)] = rel[static_cast<std::size_t>(k - 1)] + 0.5 * h * (force(x0) + force(x0 + h));
      }
      const double base = at[a] ? *at[a] : *at[b] - rel.back();
      for (auto& v : rel) v += base;
      if (!at[a]) at[a] = rel.front();
      if (!at[b]) at[b] = rel.back();
      prof[bi] = std::move(rel);
      done[bi] = true;
      progress = true;
    }
  }
  double integral = 0.0, length = 0.0;
  for (std::size_t bi = 0; bi < tree.branches.size(); ++bi) {
    const double h = tree.branches[bi].length / samples;
    for (std::size_t k = 0; k + 1 < prof[bi].size(); ++k) integral += 0.5 * h * (prof[bi][k] + prof[bi][k + 1]);
    length += tree.branches[bi].length;
  }
  const double shift = mat.sigma_t - integral / length;
  double best = -1e300;
  for (const auto& p : prof)
    for (double v : p) best = std::max(best, v + shift);
  return best;
}

}  // namespace oracle
