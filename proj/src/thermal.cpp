#include "emgrid/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "emgrid/errors.hpp"

namespace emgrid {

void ThermalParams::validate() const {
  if (!(k_cu > 0 && k_ild > 0 && t_ild > 0 && t_ambient > 0))
    throw InputError("thermal parameters k_cu, k_ild, t_ild, t_ambient must be positive");
}

ThermalMap::ThermalMap(double x0, double y0, double dx, double dy, int nx, int ny,
                       std::vector<double> values)
    : x0_(x0), y0_(y0), dx_(dx), dy_(dy), nx_(nx), ny_(ny), values_(std::move(values)) {
  if (nx_ < 2 || ny_ < 2) throw InputError("thermal map needs nx, ny >= 2");
  if (!(dx_ > 0 && dy_ > 0)) throw InputError("thermal map pitch must be positive");
  if (values_.size() != static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_))
    throw InputError("thermal map has " + std::to_string(values_.size()) + " values, expected " +
                     std::to_string(nx_ * ny_));
  for (double t : values_)
    if (!(t > 0.0) || !std::isfinite(t)) throw InputError("thermal map temperatures must be > 0 K");
}

ThermalMap ThermalMap::parse(std::string_view text, std::string_view source_name) {
  std::vector<std::string> lines;
  {
    std::string buf(text);
    std::istringstream in(buf);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  auto fail = [&](int line, const std::string& what) -> ThermalMap {
    throw ParseError(std::string(source_name), line, 1, what);
  };
  if (lines.empty()) return fail(1, "empty thermal map");
  double x0, y0, dx, dy;
  int nx, ny;
  {
    std::istringstream hdr(lines[0]);
    if (!(hdr >> x0 >> y0 >> dx >> dy >> nx >> ny))
      return fail(1, "header must be 'x0 y0 dx dy nx ny'");
  }
  std::vector<double> values;
  int rows = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    ++rows;
    std::string row = lines[i];
    std::replace(row.begin(), row.end(), ',', ' ');
    std::istringstream in(row);
    int count = 0;
    double v;
    while (in >> v) {
      values.push_back(v);
      ++count;
    }
    if (!in.eof()) return fail(static_cast<int>(i) + 1, "non-numeric temperature");
    if (count != nx)
      return fail(static_cast<int>(i) + 1, "expected " + std::to_string(nx) + " values, got " +
                                               std::to_string(count));
  }
  if (rows != ny)
    return fail(static_cast<int>(lines.size()),
                "expected " + std::to_string(ny) + " rows, got " + std::to_string(rows));
  return ThermalMap(x0, y0, dx, dy, nx, ny, std::move(values));
}

ThermalMap ThermalMap::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open thermal map '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::string ThermalMap::write() const {
  std::ostringstream out;
  char buf[40];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << fmt(x0_) << ' ' << fmt(y0_) << ' ' << fmt(dx_) << ' ' << fmt(dy_) << ' ' << nx_ << ' '
      << ny_ << '\n';
  for (int r = 0; r < ny_; ++r) {
    for (int c = 0; c < nx_; ++c) out << (c ? "," : "") << fmt(at(c, r));
    out << '\n';
  }
  return out.str();
}

double ThermalMap::sample(double x_um, double y_um) const {
  double fx = (x_um - x0_) / dx_;
  double fy = (y_um - y0_) / dy_;
  const double last_x = nx_ - 1, last_y = ny_ - 1;
  if (fx < -0.5 || fx > last_x + 0.5 || fy < -0.5 || fy > last_y + 0.5) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "point (%g, %g) um lies outside the thermal map", x_um, y_um);
    throw InputError(buf);
  }
  fx = std::clamp(fx, 0.0, last_x);
  fy = std::clamp(fy, 0.0, last_y);
  int c = std::min(static_cast<int>(fx), nx_ - 2);
  int r = std::min(static_cast<int>(fy), ny_ - 2);
  double u = fx - c, v = fy - r;
  return (1 - u) * (1 - v) * at(c, r) + u * (1 - v) * at(c + 1, r) + (1 - u) * v * at(c, r + 1) +
         u * v * at(c + 1, r + 1);
}

double ThermalMap::mean() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}
double ThermalMap::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ThermalMap::max() const { return *std::max_element(values_.begin(), values_.end()); }

TemperatureProfile TemperatureProfile::make(double t1, double t2, double joule, double gamma,
                                            double length) {
  TemperatureProfile p;
  p.t1 = t1;
  p.t2 = t2;
  p.t0 = 0.5 * (t1 + t2);
  p.tm = joule;
  p.tn = 0.5 * (t1 - t2);
  p.gamma = gamma;
  p.length = length;
  return p;
}

namespace {

// Ratios of hyperbolic functions evaluated as exp(|s| - h) * (...) so that
// long wires (L >> gamma) do not overflow.
double cosh_ratio(double s, double h) {  // cosh(s)/cosh(h)
  const double a = std::abs(s);
  return std::exp(a - h) * (1.0 + std::exp(-2.0 * a)) / (1.0 + std::exp(-2.0 * h));
}
double sinh_ratio(double s, double h) {  // sinh(s)/sinh(h)
  const double a = std::abs(s);
  return std::copysign(std::exp(a - h) * -std::expm1(-2.0 * a) / -std::expm1(-2.0 * h), s);
}
double sinh_cosh_ratio(double s, double h) {  // sinh(s)/cosh(h)
  const double a = std::abs(s);
  return std::copysign(std::exp(a - h) * -std::expm1(-2.0 * a) / (1.0 + std::exp(-2.0 * h)), s);
}
double cosh_sinh_ratio(double s, double h) {  // cosh(s)/sinh(h)
  const double a = std::abs(s);
  return std::exp(a - h) * (1.0 + std::exp(-2.0 * a)) / -std::expm1(-2.0 * h);
}

}  // namespace

// The sinh term carries a minus sign so that T(-L/2) = t1 and T(+L/2) = t2.
double TemperatureProfile::at(double x) const {
  const double half = 0.5 * length / gamma;
  const double s = x / gamma;
  return t0 + tm * (1.0 - cosh_ratio(s, half)) - tn * sinh_ratio(s, half);
}

double TemperatureProfile::slope(double x) const {
  const double half = 0.5 * length / gamma;
  const double s = x / gamma;
  return (-tm * sinh_cosh_ratio(s, half) - tn * cosh_sinh_ratio(s, half)) / gamma;
}

double characteristic_length(double thickness_m, const ThermalParams& p) {
  return std::sqrt(thickness_m * p.t_ild * p.k_cu / p.k_ild);
}

double characteristic_length(const WireSegment& seg, const ThermalParams& p) {
  return characteristic_length(seg.thickness_m(), p);
}

double joule_rise(double rho, double j, double gamma, double k_cu) {
  return rho * j * j * gamma * gamma / k_cu;
}

ThermalInput ThermalInput::from_map(ThermalMap map, bool includes_joule) {
  ThermalInput in;
  in.ambient = map.mean();
  in.map = std::move(map);
  in.map_includes_joule = includes_joule;
  return in;
}

ThermalInput ThermalInput::joule_only(double ambient) {
  if (!(ambient > 0)) throw InputError("ambient temperature must be > 0 K");
  ThermalInput in;
  in.ambient = ambient;
  return in;
}

double ThermalInput::endpoint_temperature(double x_um, double y_um) const {
  return map ? map->sample(x_um, y_um) : ambient;
}

TemperatureProfile segment_profile(const PowerGrid& grid, const WireSegment& seg,
                                   double current_density, const ThermalInput& input,
                                   const ThermalParams& p) {
  const Node& a = grid.node(seg.n1);
  const Node& b = grid.node(seg.n2);
  const double gamma = characteristic_length(seg, p);
  const double t1 = input.endpoint_temperature(a.x, a.y);
  const double t2 = input.endpoint_temperature(b.x, b.y);
  const bool joule = !(input.map && input.map_includes_joule);
  const double tm = joule ? joule_rise(seg.rho, current_density, gamma, p.k_cu) : 0.0;
  return TemperatureProfile::make(t1, t2, tm, gamma, seg.length_m());
}

std::vector<TemperatureProfile> joule_only_profiles(const PowerGrid& grid,
                                                    const std::vector<double>& current_density,
                                                    const ThermalParams& p) {
  const auto input = ThermalInput::joule_only(p.t_ambient);
  std::vector<TemperatureProfile> out;
  out.reserve(grid.segments.size());
  for (const auto& seg : grid.segments)
    out.push_back(segment_profile(grid, seg, current_density.at(static_cast<std::size_t>(seg.id)),
                                  input, p));
  return out;
}

std::vector<double> solve_stationary_fdm(double length, double gamma, double k_cu, double rho,
                                         double j, double t_left, double t_right,
                                         double t_ambient, int nodes) {
  if (nodes < 3) throw InputError("stationary FDM needs at least 3 nodes");
  if (!(gamma > 0 && length > 0 && k_cu > 0))
    throw NumericalError("stationary FDM: singular system (gamma, length, k_cu must be > 0)");
  // Unknowns are theta = T - T_amb on interior nodes; tridiagonal system
  // -theta[i-1] + (2 + h^2/gamma^2) theta[i] - theta[i+1] = h^2 rho j^2 / k.
  const int n = nodes - 2;
  const double h = length / (nodes - 1);
  const double diag = 2.0 + h * h / (gamma * gamma);
  const double src = h * h * rho * j * j / k_cu;
  const double left = t_left - t_ambient, right = t_right - t_ambient;

  std::vector<double> c(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double rhs = src;
    if (i == 0) rhs += left;
    if (i == n - 1) rhs += right;
    const double denom = diag - (i ? c[static_cast<std::size_t>(i - 1)] : 0.0);
    if (denom == 0.0) throw NumericalError("stationary FDM: zero pivot");
    c[static_cast<std::size_t>(i)] = 1.0 / denom;
    d[static_cast<std::size_t>(i)] = (rhs + (i ? d[static_cast<std::size_t>(i - 1)] : 0.0)) / denom;
  }
  std::vector<double> theta(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    double next = (i == n - 1) ? 0.0 : theta[static_cast<std::size_t>(i + 1)];
    theta[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)] + c[static_cast<std::size_t>(i)] * next;
  }
  std::vector<double> out(static_cast<std::size_t>(nodes));
  out.front() = t_left;
  out.back() = t_right;
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i + 1)] = t_ambient + theta[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace emgrid
