#include "doctest.h"
#include "emgrid/errors.hpp"
#include "emgrid/params.hpp"
#include "test_support.hpp"

using namespace emgrid;

TEST_SUITE("params") {
  TEST_CASE("defaults and overrides") {
    auto cfg = parse_params("# comment only\n\nea = 0.9   # trailing\nz_eff=5\nstop_at_failure = true\n");
    CHECK(cfg.material.ea == 0.9);
    CHECK(cfg.material.ez == doctest::Approx(5 * kElementaryCharge).epsilon(1e-15));
    CHECK(cfg.stop_at_failure);
    CHECK(cfg.t_total == 1e9);
    CHECK(cfg.material.sigma_crit == 5e8);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(parse_params("unknown_key = 1\n"), ParseError);
    CHECK_THROWS_AS(parse_params("ea 0.9\n"), ParseError);
    CHECK_THROWS_AS(parse_params("ea = fast\n"), ParseError);
    CHECK_THROWS_AS(parse_params("steps_per_decade = 2.5\n"), ParseError);
    CHECK_THROWS_AS(parse_params("ir_fail_frac = 1.5\n"), InputError);
    CHECK_THROWS_AS(parse_params("polarity = 0\n"), InputError);
    CHECK_THROWS_AS(parse_params("sigma_t = 6e8\n"), InputError);
    try {
      parse_params("ea = 0.8\n\nd0 =  x\n", "p.txt");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() == 7);
    }
  }

  TEST_CASE("write round-trips") {
    auto cfg = testing_support::fixture_config();
    auto again = parse_params(write_params(cfg));
    CHECK(again.resolved() == cfg.resolved());
    CHECK(cfg.material.void_crit_frac == 0.002);
  }
}
