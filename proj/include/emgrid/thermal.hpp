#pragma once

// Wire temperature models: gridded thermal maps, the closed-form single-wire
// profile with Joule heating, and a finite-difference solve of the stationary
// heat balance used to cross-check it.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emgrid/grid_model.hpp"

namespace emgrid {

struct ThermalParams {
  double k_cu = 400.0;       // W/(m*K)
  double k_ild = 0.5;        // W/(m*K)
  double t_ild = 1.0e-6;     // m
  double t_ambient = 358.0;  // K

  void validate() const;
};

/// Regular grid of temperatures (K). Row r holds y = y0 + r*dy, column c
/// holds x = x0 + c*dx; coordinates are micrometres.
class ThermalMap {
 public:
  ThermalMap(double x0, double y0, double dx, double dy, int nx, int ny, std::vector<double> values);

  static ThermalMap parse(std::string_view text, std::string_view source_name = "<thermal map>");
  static ThermalMap load(const std::string& path);
  std::string write() const;

  /// Bilinear interpolation. Points up to half a pitch outside the grid are
  /// clamped onto it; anything further out throws InputError.
  double sample(double x_um, double y_um) const;

  double at(int col, int row) const { return values_[static_cast<std::size_t>(row * nx_ + col)]; }
  double mean() const;
  double min() const;
  double max() const;

  double x0() const { return x0_; }
  double y0() const { return y0_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const std::vector<double>& values() const { return values_; }

 private:
  double x0_, y0_, dx_, dy_;
  int nx_, ny_;
  std::vector<double> values_;
};

/// Closed-form steady temperature along one wire, x in [-L/2, +L/2] (metres),
/// x = -L/2 at the segment's n1 end.
struct TemperatureProfile {
  double t1 = 0.0;      // K at x = -L/2
  double t2 = 0.0;      // K at x = +L/2
  double t0 = 0.0;      // (t1 + t2) / 2
  double tm = 0.0;      // Joule rise rho*j^2*gamma^2/k_cu
  double tn = 0.0;      // (t1 - t2) / 2
  double gamma = 0.0;   // characteristic length, m
  double length = 0.0;  // m

  static TemperatureProfile make(double t1, double t2, double joule_rise, double gamma,
                                 double length);

  double at(double x) const;
  /// Analytic dT/dx.
  double slope(double x) const;
  /// Temperature at the wire midpoint.
  double mid() const { return at(0.0); }
};

/// Thermal characteristic length sqrt(t_cu * t_ILD * k_cu / k_ILD), metres.
double characteristic_length(double thickness_m, const ThermalParams& p);
double characteristic_length(const WireSegment& seg, const ThermalParams& p);

/// Joule temperature rise rho*j^2*gamma^2/k_cu.
double joule_rise(double rho, double current_density, double gamma, double k_cu);

/// Where wire-end temperatures come from: a map, or a uniform ambient
/// (Joule-only mode). `map_includes_joule` suppresses the Joule term.
struct ThermalInput {
  std::optional<ThermalMap> map;
  double ambient = 358.0;
  bool map_includes_joule = false;

  static ThermalInput from_map(ThermalMap map, bool includes_joule = false);
  static ThermalInput joule_only(double ambient);

  double endpoint_temperature(double x_um, double y_um) const;
};

TemperatureProfile segment_profile(const PowerGrid& grid, const WireSegment& seg,
                                   double current_density, const ThermalInput& input,
                                   const ThermalParams& p);

/// Profiles for every segment given per-segment current densities.
std::vector<TemperatureProfile> joule_only_profiles(const PowerGrid& grid,
                                                    const std::vector<double>& current_density,
                                                    const ThermalParams& p);

/// Central-difference solve of k*T'' - k*(T - T_amb)/gamma^2 + rho*j^2 = 0 on
/// [0, length] with T(0)=t_left, T(length)=t_right. Returns `nodes` samples.
std::vector<double> solve_stationary_fdm(double length, double gamma, double k_cu, double rho,
                                         double current_density, double t_left, double t_right,
                                         double t_ambient, int nodes);

}  // namespace emgrid
