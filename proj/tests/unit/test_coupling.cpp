#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "emgrid/coupling.hpp"
#include "emgrid/ir_solver.hpp"
#include "netlist_oracle.hpp"
#include "oracle_bridge.hpp"
#include "test_support.hpp"

using namespace emgrid;
using testing_support::fixture;

namespace {

struct SingleWireRun {
  PowerGrid grid;
  SimulationConfig cfg;
  SimulationResult result;
};

const SingleWireRun& single_wire_run() {
  static const SingleWireRun r = [] {
    SingleWireRun s;
    s.cfg = testing_support::fixture_config();
    s.grid = load_netlist(fixture("single_wire.sp"), s.cfg.material.rho_cu);
    s.result = run(s.grid, ThermalInput::joule_only(358.0), s.cfg);
    return s;
  }();
  return r;
}

}  // namespace

TEST_SUITE("coupling") {
  TEST_CASE("time schedules") {
    SimulationConfig cfg;
    cfg.t_total = 5e3;
    cfg.checkpoints_per_decade = 2;
    cfg.steps_per_decade = 5;
    auto cp = checkpoint_schedule(cfg);
    REQUIRE(cp.size() == 10);
    CHECK(cp.front() == 0.0);
    CHECK(cp[1] == 1.0);
    CHECK(cp[2] == doctest::Approx(std::sqrt(10.0)));
    CHECK(cp.back() == 5e3);
    auto steps = step_schedule(cfg);
    CHECK(steps.front() == 0.0);
    CHECK(steps.back() == 5e3);
    CHECK(std::is_sorted(steps.begin(), steps.end()));
    CHECK(std::adjacent_find(steps.begin(), steps.end()) == steps.end());
    for (double t : cp) CHECK(std::find(steps.begin(), steps.end(), t) != steps.end());
  }

  TEST_CASE("mesh fixture mortality matches the steady-state oracle") {
    auto cfg = testing_support::fixture_config();
    auto g = load_netlist(fixture("mesh4x4.sp"));
    auto sum = filter_trees(g, ThermalInput::joule_only(358.0), cfg);

    auto raw = oracle::read_raw_file(fixture("mesh4x4.sp"));
    auto v = oracle::dense_voltages(raw);
    std::vector<double> density(g.segments.size());
    for (const auto& s : g.segments)
      density[static_cast<std::size_t>(s.id)] =
          (v.at(g.node(s.n1).name) - v.at(g.node(s.n2).name)) / s.r0 / s.area_m2();
    int mortal = 0;
    for (const auto& t : g.trees) {
      auto ot = testing_support::oracle_tree(g, t, density, [](int) { return 358.0; }, cfg);
      const double smax = oracle::steady_max(ot, testing_support::oracle_material(cfg.material));
      CHECK(sum.max_steady_stress[static_cast<std::size_t>(t.id)] == doctest::Approx(smax).epsilon(1e-4));
      mortal += smax >= cfg.material.sigma_crit;
    }
    CHECK(sum.mortal_count() == mortal);
    CHECK(mortal == 0);  // the CLI test expects "8 trees, 0 mortal"
  }

  TEST_CASE("all-immortal grid") {
    auto cfg = testing_support::fixture_config();
    auto g = load_netlist(fixture("mesh4x4.sp"));
    auto r = run(g, ThermalInput::joule_only(358.0), cfg);
    CHECK(r.mortal_count() == 0);
    CHECK(r.stress_factorizations == 0);
    for (const auto& cp : r.checkpoints) CHECK(cp.net_max_drop == r.checkpoints.front().net_max_drop);
    bool censored = false;
    CHECK(chip_lifetime(r, &censored) == cfg.t_total);
    CHECK(censored);
    CHECK(r.ir_factorizations == 1);
  }

  TEST_CASE("single wire nucleation time agrees with the refined oracle") {
    const auto& s = single_wire_run();
    REQUIRE(s.result.trees.size() == 1);
    const auto& t = s.result.trees[0];
    REQUIRE(t.mortal);
    REQUIRE(t.t_nuc);

    const auto& seg = s.grid.segment(0);
    std::vector<double> density{1e-3 / seg.area_m2()};
    auto mesh = build_mesh(s.grid, s.grid.trees[0], s.cfg.mesh);
    auto ot = testing_support::oracle_tree(s.grid, s.grid.trees[0], density, [](int) { return 358.0; }, s.cfg,
                                           true, &mesh);
    oracle::Options opt;
    opt.t_end = 1e8;
    auto ref = oracle::solve(ot, testing_support::oracle_material(s.cfg.material), opt);
    REQUIRE(ref.t_nuc);
    CHECK(*t.t_nuc == doctest::Approx(*ref.t_nuc).epsilon(0.05));
  }

  TEST_CASE("TTF components follow the event times") {
    const auto& s = single_wire_run();
    const auto& t = s.result.trees[0];
    REQUIRE(t.t_vcrit);
    REQUIRE(t.t_fail);
    auto c = compute_ttf(t, s.result);
    CHECK_FALSE(c.censored);
    CHECK(c.t_nuc == *t.t_nuc);
    CHECK(c.t_inc == *t.t_vcrit - *t.t_nuc);
    CHECK(c.t_growth == *t.t_fail - *t.t_vcrit);
    CHECK(c.t_life == doctest::Approx(*t.t_fail).epsilon(1e-15));
    CHECK(t.nuc_segment == 0);
    CHECK(t.delta_r > 0);
    CHECK(t.negative_void_clamps == 0);
    // the lone wire feeds the worst-drop load, so its failure is the chip's
    REQUIRE(s.result.chip_failure);
    CHECK(chip_lifetime(s.result) <= *t.t_fail);
    const double r0 = s.grid.segment(0).r0;
    const double crossing_r = s.cfg.ir_fail_frac * 1.0 / 1e-3;
    if (r0 * (1 + s.cfg.dr_fail_frac) > crossing_r) CHECK(*s.result.chip_failure == *t.t_fail);

    TreeOutcome never;
    auto cn = compute_ttf(never, s.result);
    CHECK(cn.censored);
    CHECK(cn.t_life == s.result.t_end);
  }

  TEST_CASE("resistance only grows and the drop follows it") {
    const auto& s = single_wire_run();
    double prev_r = 0.0, prev_drop = 0.0;
    for (const auto& cp : s.result.checkpoints) {
      CHECK(cp.resistance[0] >= prev_r);
      CHECK(cp.net_max_drop[0] >= prev_drop - 1e-15);
      CHECK(cp.net_max_drop[0] == doctest::Approx(cp.resistance[0] * 1e-3).epsilon(1e-9));
      prev_r = cp.resistance[0];
      prev_drop = cp.net_max_drop[0];
    }
  }

  TEST_CASE("repeat runs and thread counts give identical results") {
    auto cfg = load_params(fixture("m0like.params"));
    auto g = load_netlist(fixture("m0like.sp"));
    auto th = ThermalInput::from_map(ThermalMap::load(fixture("m0like_hotspot.tmap")));
    RunOptions one, three;
    three.threads = 3;
    auto a = run(g, th, cfg, one);
    auto b = run(g, th, cfg, one);
    auto c = run(g, th, cfg, three);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(a.chip_failure);
  }

  TEST_CASE("halving the time step moves nucleation times by under 1%") {
    {
      const auto& s = single_wire_run();
      auto cfg = s.cfg;
      cfg.steps_per_decade *= 2;
      auto fine = run(s.grid, ThermalInput::joule_only(358.0), cfg);
      REQUIRE(fine.trees[0].t_nuc);
      CHECK(*fine.trees[0].t_nuc == doctest::Approx(*s.result.trees[0].t_nuc).epsilon(0.01));
    }
    const auto base = load_params(fixture("m0like.params"));
    auto g = load_netlist(fixture("m0like.sp"));
    for (const char* map : {"m0like_uniform.tmap", "m0like_gradient.tmap", "m0like_hotspot.tmap"}) {
      CAPTURE(map);
      auto th = ThermalInput::from_map(ThermalMap::load(fixture(map)));
      auto cfg = base;
      auto coarse = run(g, th, cfg);
      cfg.steps_per_decade *= 2;
      auto fine = run(g, th, cfg);
      int compared = 0;
      for (std::size_t t = 0; t < coarse.trees.size(); ++t) {
        const auto& a = coarse.trees[t].t_nuc;
        const auto& b = fine.trees[t].t_nuc;
        // A run that stops at chip failure may end just before a late nucleation.
        if (a && !b) CHECK(fine.t_end == doctest::Approx(*a).epsilon(0.01));
        if (b && !a) CHECK(coarse.t_end == doctest::Approx(*b).epsilon(0.01));
        if (!a || !b) continue;
        CHECK(*b == doctest::Approx(*a).epsilon(0.01));
        ++compared;
      }
      CHECK(compared > 0);
    }
  }

  TEST_CASE("a uniformly hotter die never nucleates later") {
    const auto& s = single_wire_run();
    double prev = *s.result.trees[0].t_nuc;
    for (double ambient : {363.0, 368.0, 378.0}) {
      auto r = run(s.grid, ThermalInput::joule_only(ambient), s.cfg);
      REQUIRE(r.trees[0].t_nuc);
      CHECK(*r.trees[0].t_nuc <= prev);
      prev = *r.trees[0].t_nuc;
    }
  }

  TEST_CASE("without thermomigration, doubling every load never delays nucleation") {
    auto cfg = load_params(fixture("m0like.params"));
    cfg.material.q_heat = 0.0;
    cfg.steps_per_decade = 50;
    cfg.ir_fail_frac = 0.5;
    auto g = load_netlist(fixture("m0like.sp"));
    auto th = ThermalInput::from_map(ThermalMap::load(fixture("m0like_uniform.tmap")), true);
    auto base = run(g, th, cfg);
    for (auto& l : g.loads) l.value *= 2.0;
    auto doubled = run(g, th, cfg);
    int nucleated = 0;
    for (std::size_t t = 0; t < base.trees.size(); ++t) {
      const auto& a = base.trees[t].t_nuc;
      const auto& b = doubled.trees[t].t_nuc;
      if (!a) continue;
      ++nucleated;
      if (b) CHECK(*b <= *a);
      else CHECK(doubled.t_end <= *a);
    }
    CHECK(nucleated > 0);
  }
}

