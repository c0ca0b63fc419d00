#include <cmath>
#include <random>

#include "doctest.h"
#include "emgrid/errors.hpp"
#include "emgrid/thermal.hpp"

using namespace emgrid;

TEST_SUITE("thermal") {
  TEST_CASE("characteristic length") {
    ThermalParams p;
    p.k_cu = 1.0;
    p.k_ild = 1.0;
    p.t_ild = 0.3e-6;
    CHECK(characteristic_length(0.3e-6, p) == doctest::Approx(0.3e-6).epsilon(1e-14));

    p.k_cu = 400.0;
    p.k_ild = 1.0;
    p.t_ild = 0.2e-6;
    CHECK(characteristic_length(0.2e-6, p) == doctest::Approx(4.0e-6).epsilon(1e-12));

    const double g1 = characteristic_length(0.2e-6, p);
    p.k_ild = 2.0;
    CHECK(characteristic_length(0.2e-6, p) == doctest::Approx(g1 / std::sqrt(2.0)).epsilon(1e-14));
  }

  TEST_CASE("map sampling") {
    // two rows: y=0 -> 300, 300; y=1 -> 400, 400
    ThermalMap map(0.0, 0.0, 1.0, 1.0, 2, 2, {300, 300, 400, 400});
    CHECK(map.sample(0.0, 0.0) == 300.0);
    CHECK(map.sample(1.0, 1.0) == 400.0);
    CHECK(map.sample(0.5, 0.5) == doctest::Approx(350.0).epsilon(1e-15));
    CHECK(map.sample(-0.4, 0.0) == 300.0);  // clamped within half a pitch
    CHECK_THROWS_AS(map.sample(-2.0, 0.0), InputError);
  }

  TEST_CASE("map sampling against a nearest-four weighted average") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> val(300.0, 400.0);
    const int nx = 7, ny = 5;
    const double x0 = -3.0, y0 = 2.0, dx = 1.5, dy = 2.5;
    std::vector<double> v(nx * ny);
    for (auto& t : v) t = val(rng);
    ThermalMap map(x0, y0, dx, dy, nx, ny, v);
    std::uniform_real_distribution<double> ux(x0, x0 + (nx - 1) * dx), uy(y0, y0 + (ny - 1) * dy);
    for (int k = 0; k < 500; ++k) {
      const double x = ux(rng), y = uy(rng);
      const int c = std::min(nx - 2, static_cast<int>((x - x0) / dx));
      const int r = std::min(ny - 2, static_cast<int>((y - y0) / dy));
      const double fx = (x - (x0 + c * dx)) / dx, fy = (y - (y0 + r * dy)) / dy;
      double expect = 0.0, wsum = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const double w = (a ? fx : 1 - fx) * (b ? fy : 1 - fy);
          expect += w * v[(r + b) * nx + c + a];
          wsum += w;
        }
      CHECK(std::abs(map.sample(x, y) - expect / wsum) < 1e-12 * expect);
    }
  }

  TEST_CASE("map text round-trip and parse errors") {
    auto map = ThermalMap::parse("0 0 10 10 3 2\n350,351,352\n353,354,355.5\n");
    CHECK(map.nx() == 3);
    CHECK(map.at(2, 1) == 355.5);
    CHECK(map.mean() == doctest::Approx((350 + 351 + 352 + 353 + 354 + 355.5) / 6.0));
    auto again = ThermalMap::parse(map.write());
    CHECK(again.values() == map.values());
    CHECK_THROWS_AS(ThermalMap::parse("0 0 10 10 3 2\n350,351\n353,354,355\n"), ParseError);
    CHECK_THROWS_AS(ThermalMap::parse("0 0 10 10 2 2\n350,-4\n350,350\n"), InputError);
  }

  TEST_CASE("profile degenerate cases") {
    const double gamma = 3e-6, len = 20e-6;
    auto flat = TemperatureProfile::make(350, 350, 0.0, gamma, len);
    for (double x : {-10e-6, -3e-6, 0.0, 7e-6, 10e-6}) CHECK(flat.at(x) == doctest::Approx(350.0).epsilon(1e-15));

    const double tm = 4.0;
    auto heated = TemperatureProfile::make(350, 350, tm, gamma, len);
    CHECK(heated.mid() == doctest::Approx(350 + tm * (1 - 1 / std::cosh(len / (2 * gamma)))).epsilon(1e-14));

    auto tilted = TemperatureProfile::make(360, 340, 0.0, gamma, len);
    double prev = 1e9;
    for (int k = 0; k <= 40; ++k) {
      const double x = -0.5 * len + k * len / 40;
      const double expect = 350 - 10 * std::sinh(x / gamma) / std::sinh(len / (2 * gamma));
      CHECK(tilted.at(x) == doctest::Approx(expect).epsilon(1e-13));
      CHECK(tilted.at(x) <= prev);
      prev = tilted.at(x);
    }
  }

  TEST_CASE("profile endpoints and extrema on random draws") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> temp(300, 420), g(0.5e-6, 10e-6), l(1e-6, 200e-6), rise(0, 20);
    for (int k = 0; k < 200; ++k) {
      auto p = TemperatureProfile::make(temp(rng), temp(rng), rise(rng), g(rng), l(rng));
      CHECK(std::abs(p.at(-0.5 * p.length) - p.t1) <= 1e-9 * p.t1);
      CHECK(std::abs(p.at(0.5 * p.length) - p.t2) <= 1e-9 * p.t2);
      auto cold = TemperatureProfile::make(p.t1, p.t2, 0.0, p.gamma, p.length);
      for (int i = 0; i <= 50; ++i) {
        const double x = -0.5 * p.length + i * p.length / 50;
        CHECK(cold.at(x) <= std::max(p.t1, p.t2) * (1 + 1e-12));
        CHECK(cold.at(x) >= std::min(p.t1, p.t2) * (1 - 1e-12));
        const double hstep = 1e-4 * p.gamma;
        const double fd = (p.at(x + hstep) - p.at(x - hstep)) / (2 * hstep);
        const double typical = (std::abs(p.tn) + p.tm) / p.gamma;
        CHECK(std::abs(p.slope(x) - fd) <= 1e-6 * (std::abs(fd) + typical));
      }
    }
  }

  TEST_CASE("finite-difference solve") {
    auto flat = solve_stationary_fdm(50e-6, 3e-6, 400, 2.2e-8, 0.0, 358, 358, 358, 101);
    for (double t : flat) CHECK(t == doctest::Approx(358.0).epsilon(1e-13));

    const double len = 50e-6, gamma = 4e-6, rho = 2.2e-8, j = 5e10, k = 400;
    const auto p = TemperatureProfile::make(370, 355, joule_rise(rho, j, gamma, k), gamma, len);
    auto errors = [&](int n) {
      // ambient is the mean of the end temperatures, the closed form's reference
      auto fdm = solve_stationary_fdm(len, gamma, k, rho, j, 370, 355, p.t0, n);
      double worst = 0.0;
      for (int i = 0; i < n; ++i) {
        const double x = -0.5 * len + i * len / (n - 1);
        worst = std::max(worst, std::abs(fdm[static_cast<std::size_t>(i)] - p.at(x)) / p.at(x));
      }
      return worst;
    };
    const double e1 = errors(1001);
    CHECK(e1 < 1e-4);
    const double e0 = errors(51), e2 = errors(101);
    CHECK(e0 / e2 == doctest::Approx(4.0).epsilon(0.05));
  }

  TEST_CASE("joule-only inputs") {
    auto in = ThermalInput::joule_only(350.0);
    CHECK(in.endpoint_temperature(1e3, -1e3) == 350.0);
    ThermalParams p;
    CHECK_THROWS_AS(ThermalInput::joule_only(-1.0), InputError);
    p.k_cu = -1;
    CHECK_THROWS_AS(p.validate(), InputError);
  }
}
