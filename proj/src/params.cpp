#include "emgrid/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "emgrid/errors.hpp"

namespace emgrid {

namespace {

struct Key {
  const char* name;
  std::function<double(const SimulationConfig&)> get;
  std::function<void(SimulationConfig&, double)> set;
  bool integral = false;
};

#define EMGRID_REAL(key, field) \
  Key { key, [](const SimulationConfig& c) { return static_cast<double>(c.field); }, \
        [](SimulationConfig& c, double v) { c.field = v; } }
#define EMGRID_INT(key, field, type) \
  Key { key, [](const SimulationConfig& c) { return static_cast<double>(c.field); }, \
        [](SimulationConfig& c, double v) { c.field = static_cast<type>(v); }, true }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"z_eff", [](const SimulationConfig& c) { return c.material.ez / kElementaryCharge; },
          [](SimulationConfig& c, double v) { c.material.ez = v * kElementaryCharge; }},
      EMGRID_REAL("omega", material.omega),
      EMGRID_REAL("bulk_modulus", material.bulk_modulus),
      EMGRID_REAL("d0", material.d0),
      EMGRID_REAL("ea", material.ea),
      EMGRID_REAL("kb", material.kb),
      EMGRID_REAL("q_heat", material.q_heat),
      EMGRID_REAL("delta", material.delta),
      EMGRID_REAL("sigma_crit", material.sigma_crit),
      EMGRID_REAL("sigma_t", material.sigma_t),
      EMGRID_REAL("rho_cu", material.rho_cu),
      EMGRID_REAL("rho_ta", material.rho_ta),
      EMGRID_REAL("h_ta", material.h_ta),
      EMGRID_REAL("void_crit_frac", material.void_crit_frac),
      EMGRID_INT("polarity", material.polarity, int),
      EMGRID_REAL("k_cu", thermal.k_cu),
      EMGRID_REAL("k_ild", thermal.k_ild),
      EMGRID_REAL("t_ild", thermal.t_ild),
      EMGRID_REAL("t_ambient", thermal.t_ambient),
      EMGRID_REAL("dx_frac", mesh.dx_frac),
      EMGRID_REAL("dx_min", mesh.dx_min),
      EMGRID_REAL("dx_max", mesh.dx_max),
      EMGRID_INT("mesh_refine", mesh.refine, int),
      EMGRID_REAL("t_total", t_total),
      EMGRID_REAL("t_start", t_start),
      EMGRID_INT("steps_per_decade", steps_per_decade, int),
      EMGRID_INT("checkpoints_per_decade", checkpoints_per_decade, int),
      EMGRID_REAL("ir_fail_frac", ir_fail_frac),
      EMGRID_REAL("dr_fail_frac", dr_fail_frac),
      EMGRID_REAL("j_refresh_frac", j_refresh_frac),
      EMGRID_REAL("refactor_tol", refactor_tol),
      EMGRID_INT("stop_at_failure", stop_at_failure, bool),
      EMGRID_INT("seed", seed, std::uint64_t),
  };
  return table;
}

#undef EMGRID_REAL
#undef EMGRID_INT

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void SimulationConfig::validate() const {
  material.validate();
  thermal.validate();
  if (!(mesh.dx_frac > 0 && mesh.dx_min > 0 && mesh.dx_max >= mesh.dx_min))
    throw InputError("mesh spacing requires dx_frac > 0 and 0 < dx_min <= dx_max");
  if (mesh.refine < 1) throw InputError("mesh_refine must be >= 1");
  if (!(t_total > 0)) throw InputError("t_total must be > 0");
  if (!(t_start > 0 && t_start <= t_total)) throw InputError("t_start must lie in (0, t_total]");
  if (steps_per_decade < 1) throw InputError("steps_per_decade must be >= 1");
  if (checkpoints_per_decade < 1) throw InputError("checkpoints_per_decade must be >= 1");
  if (!(ir_fail_frac > 0 && ir_fail_frac < 1)) throw InputError("ir_fail_frac must lie in (0, 1)");
  if (!(dr_fail_frac > 0)) throw InputError("dr_fail_frac must be > 0");
  if (!(j_refresh_frac >= 0)) throw InputError("j_refresh_frac must be >= 0");
  if (!(refactor_tol >= 0)) throw InputError("refactor_tol must be >= 0");
}

std::vector<std::pair<std::string, double>> SimulationConfig::resolved() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(*this));
  return out;
}

SimulationConfig parse_params(std::string_view text, std::string_view source_name,
                              SimulationConfig cfg) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(std::string(source_name), lineno, 1, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const int value_col = static_cast<int>(line.find_first_not_of(" \t", eq + 1)) + 1;
    const Key* match = nullptr;
    for (const auto& k : keys())
      if (key == k.name) match = &k;
    if (!match)
      throw ParseError(std::string(source_name), lineno, 1, "unknown parameter '" + key + "'");
    double v;
    if (value == "true") {
      v = 1;
    } else if (value == "false") {
      v = 0;
    } else {
      char* end = nullptr;
      v = std::strtod(value.c_str(), &end);
      if (value.empty() || *end != '\0' || !std::isfinite(v))
        throw ParseError(std::string(source_name), lineno, value_col,
                         "invalid value for '" + key + "'");
    }
    if (match->integral && v != std::floor(v))
      throw ParseError(std::string(source_name), lineno, value_col,
                       "'" + key + "' must be an integer");
    match->set(cfg, v);
  }
  cfg.validate();
  return cfg;
}

SimulationConfig load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open parameters file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_params(ss.str(), path);
}

std::string write_params(const SimulationConfig& cfg) {
  std::string out;
  char buf[96];
  for (const auto& [name, value] : cfg.resolved()) {
    std::snprintf(buf, sizeof buf, "%s = %.17g\n", name.c_str(), value);
    out += buf;
  }
  return out;
}

}  // namespace emgrid
