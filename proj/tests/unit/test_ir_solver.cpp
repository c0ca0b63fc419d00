#include <cmath>
#include <random>

#include "doctest.h"
#include "emgrid/errors.hpp"
#include "emgrid/ir_solver.hpp"
#include "netlist_oracle.hpp"
#include "test_support.hpp"

using namespace emgrid;
using testing_support::fixture;

namespace {

// 100 ohm series chain a - b - c, 1 V pad at a, 1 mA sink at c.
const std::string kDivider =
    "Na x=0 y=0 layer=1\nNb x=10 y=0 layer=1\nNc x=20 y=0 layer=1\n"
    "R1 a b 100 ; W=0.1 H=0.2 L=10 layer=1\n"
    "R2 b c 100 ; W=0.1 H=0.2 L=10 layer=1\n"
    "Vdd a 0 1\nIload c 0 1e-3\n";

// Diamond a -> {l, r} -> b with a bridge l - r; all 100 ohm.
const std::string kBridge =
    "Na x=0 y=10 layer=1\nNl x=-10 y=0 layer=1\nNr x=10 y=0 layer=1\nNb x=0 y=-10 layer=1\n"
    "R1 a l 100 ; W=0.1 H=0.2 L=10 layer=1\n"
    "R2 a r 100 ; W=0.1 H=0.2 L=10 layer=1\n"
    "R3 l b 100 ; W=0.1 H=0.2 L=10 layer=1\n"
    "R4 r b 100 ; W=0.1 H=0.2 L=10 layer=1\n"
    "R5 l r 100 ; W=0.1 H=0.2 L=20 layer=1\n"
    "Vdd a 0 1\nIload b 0 1e-3\n";

/// Worst |sum of currents out of node - load| over non-pad nodes.
double kcl_residual(const PowerGrid& g, const ConductanceSystem& sys) {
  const auto& u = sys.voltages();
  std::vector<double> out(g.nodes.size(), 0.0);
  const auto bc = branch_currents(sys, g);
  for (const auto& s : g.segments) {
    out[static_cast<std::size_t>(s.n1)] += bc.current[static_cast<std::size_t>(s.id)];
    out[static_cast<std::size_t>(s.n2)] -= bc.current[static_cast<std::size_t>(s.id)];
  }
  for (const auto& v : g.vias) {
    const double i = (u[static_cast<std::size_t>(v.lower)] - u[static_cast<std::size_t>(v.upper)]) / v.resistance;
    out[static_cast<std::size_t>(v.lower)] += i;
    out[static_cast<std::size_t>(v.upper)] -= i;
  }
  for (const auto& l : g.loads) out[static_cast<std::size_t>(l.node)] -= -l.value;
  double worst = 0.0;
  for (const auto& n : g.nodes)
    if (n.kind != NodeKind::pad) worst = std::max(worst, std::abs(out[static_cast<std::size_t>(n.id)]));
  return worst;
}

}  // namespace

TEST_SUITE("ir_solver") {
  TEST_CASE("series chain reduces to the interior nodes") {
    auto g = parse_netlist(kDivider);
    auto sys = assemble(g, nominal_resistances(g));
    CHECK(sys.rows() == 2);
    CHECK(sys.row_of(0) == -1);
    CHECK(sys.matrix().coeff(sys.row_of(1), sys.row_of(1)) == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(sys.rhs()[sys.row_of(1)] == doctest::Approx(0.01).epsilon(1e-15));

    auto two = parse_netlist("Na x=0 y=0 layer=1\nNb x=10 y=0 layer=1\nNc x=20 y=0 layer=1\n"
                             "R1 a b 100 ; W=0.1 H=0.2 L=10 layer=1\nR2 b c 100 ; W=0.1 H=0.2 L=10 layer=1\n"
                             "Vdd a 0 1\nVee c 0 1\nIload b 0 1e-3\n");
    CHECK(assemble(two, nominal_resistances(two)).rows() == 1);
  }

  TEST_CASE("voltage divider is exact") {
    auto g = parse_netlist(kDivider);
    auto sys = assemble(g, nominal_resistances(g));
    const auto& u = sys.solve();
    CHECK(std::abs(u[0] - 1.0) <= 1e-12);
    CHECK(std::abs(u[1] - 0.9) <= 1e-12);
    CHECK(std::abs(u[2] - 0.8) <= 1e-12);
    auto drop = ir_drop_map(sys, g);
    CHECK(std::abs(drop[2] - 0.2) <= 1e-12);
    auto bc = branch_currents(sys, g);
    CHECK(std::abs(bc.current[0] - 1e-3) <= 1e-15);
    CHECK(std::abs(bc.current[1] - 1e-3) <= 1e-15);
    CHECK(bc.density[0] == doctest::Approx(1e-3 / (0.1e-6 * 0.2e-6)).epsilon(1e-12));
  }

  TEST_CASE("symmetric bridge is exact and balanced") {
    auto g = parse_netlist(kBridge);
    auto sys = assemble(g, nominal_resistances(g));
    const auto& u = sys.solve();
    const int l = *g.find_node("l"), r = *g.find_node("r"), b = *g.find_node("b");
    CHECK(std::abs(u[static_cast<std::size_t>(l)] - 0.95) <= 1e-12);
    CHECK(std::abs(u[static_cast<std::size_t>(r)] - 0.95) <= 1e-12);
    CHECK(std::abs(u[static_cast<std::size_t>(b)] - 0.90) <= 1e-12);
    auto bc = branch_currents(sys, g);
    CHECK(std::abs(bc.current[0] - bc.current[1]) <= 1e-15);
    CHECK(std::abs(bc.current[2] - bc.current[3]) <= 1e-15);
    CHECK(std::abs(bc.current[4]) <= 1e-15);
  }

  TEST_CASE("no loads means no drop") {
    auto text = testing_support::slurp(fixture("mesh4x4.sp"));
    std::string stripped;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
      if (line.empty() || line[0] != 'I') stripped += line + "\n";
    auto g = parse_netlist(stripped);
    auto sys = assemble(g, nominal_resistances(g));
    for (double v : sys.solve()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("floating cluster is reported") {
    auto g = parse_netlist(kDivider + "Nf x=50 y=50 layer=1\nNg x=60 y=50 layer=1\n"
                                      "R9 f g 100 ; W=0.1 H=0.2 L=10 layer=1\n");
    try {
      assemble(g, nominal_resistances(g));
      FAIL("expected an error");
    } catch (const InputError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("floating") != std::string::npos);
      CHECK((msg.find("'f'") != std::string::npos || msg.find("'g'") != std::string::npos));
    }
  }

  TEST_CASE("4x4 mesh matches independent stamping and dense solve") {
    auto g = load_netlist(fixture("mesh4x4.sp"));
    auto raw = oracle::read_raw_file(fixture("mesh4x4.sp"));
    auto sys = assemble(g, nominal_resistances(g));
    const auto ref = oracle::stamped_conductance(raw);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(sys.matrix());
    int compared = 0;
    for (const auto& a : g.nodes)
      for (const auto& b : g.nodes) {
        const int ra = sys.row_of(a.id), rb = sys.row_of(b.id);
        if (ra < 0 || rb < 0) continue;
        auto it = ref.find({a.name, b.name});
        const double expect = it == ref.end() ? 0.0 : it->second;
        CHECK(std::abs(dense(ra, rb) - expect) <= 1e-12 * std::abs(dense(ra, ra)));
        ++compared;
      }
    CHECK(compared == sys.rows() * sys.rows());

    const auto& u = sys.solve();
    const auto vref = oracle::dense_voltages(raw);
    for (const auto& n : g.nodes) CHECK(std::abs(u[static_cast<std::size_t>(n.id)] - vref.at(n.name)) <= 1e-10);
    CHECK(kcl_residual(g, sys) < 1e-12);
  }

  TEST_CASE("KCL on every fixture") {
    for (const char* name : {"single_wire.sp", "mesh4x4.sp", "m0like.sp"}) {
      auto g = load_netlist(fixture(name));
      auto sys = assemble(g, nominal_resistances(g));
      sys.solve();
      CHECK(kcl_residual(g, sys) < 1e-9 * g.total_load_current());
    }
  }

  TEST_CASE("raising one resistance never lowers the worst drop") {
    auto g = load_netlist(fixture("mesh4x4.sp"));
    const auto r0 = nominal_resistances(g);
    auto sys = assemble(g, r0);
    auto worst = [&] {
      sys.solve();
      auto d = ir_drop_map(sys, g);
      return *std::max_element(d.begin(), d.end());
    };
    const double base = worst();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> bump(1.01, 5.0);
    for (std::size_t s = 0; s < r0.size(); ++s)
      for (int k = 0; k < 3; ++k) {
        auto r = r0;
        r[s] *= bump(rng);
        sys.update_resistances(r);
        CHECK(worst() >= base * (1 - 1e-12));
        CHECK(sys.last_residual() < 1e-12);
      }
  }

  TEST_CASE("small updates reuse the factorization") {
    auto g = load_netlist(fixture("mesh4x4.sp"));
    auto r = nominal_resistances(g);
    auto sys = assemble(g, r);
    sys.solve();
    CHECK(sys.factorizations() == 1);
    r[3] *= 1 + 1e-6;
    sys.update_resistances(r);
    const auto u = sys.solve();
    CHECK(sys.factorizations() == 1);
    auto fresh = assemble(g, r);
    const auto& v = fresh.solve();
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(u[i] - v[i]) < 1e-13);
    r[3] *= 2;
    sys.update_resistances(r);
    sys.solve();
    CHECK(sys.factorizations() == 2);
  }
}
