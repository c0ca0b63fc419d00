#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "emgrid/grid_model.hpp"
#include "emgrid/params.hpp"

namespace testing_support {

inline std::string fixture(const std::string& name) { return std::string(EMGRID_FIXTURE_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double copper_r(double w_um, double h_um, double l_um, double rho = 2.2e-8) {
  return rho * l_um * 1e-6 / (w_um * 1e-6 * h_um * 1e-6);
}

/// Resistor card with geometry consistent with the default resistivity.
inline std::string wire(const std::string& name, const std::string& a, const std::string& b, double w,
                        double h, double l, int layer) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "R" << name << ' ' << a << ' ' << b << ' ' << copper_r(w, h, l) << " ; W=" << w << " H=" << h
     << " L=" << l << " layer=" << layer << '\n';
  return ss.str();
}

inline emgrid::SimulationConfig fixture_config() {
  return emgrid::load_params(fixture("fixture.params"));
}

}  // namespace testing_support
