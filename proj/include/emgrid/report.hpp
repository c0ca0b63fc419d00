#pragma once

// Report files: result.json (versioned), CSV tables and SVG heatmaps.
//
// result.json carries the manifest, the layout and every field heatmaps are
// drawn from, so `render` never needs the netlist or a new simulation.
// Floats are written rounded to 9 significant digits.

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "emgrid/coupling.hpp"
#include "emgrid/grid_model.hpp"

namespace emgrid {

inline constexpr const char* kSchemaVersion = "1.0";
inline constexpr const char* kToolVersion = "0.1.0";

struct InputFile {
  std::string role;  // netlist, params, thermal_map
  std::string path;
  std::string sha256;

  bool operator==(const InputFile&) const = default;
};

/// Everything needed to reproduce a run. Wall-clock time is kept out of it
/// (see write_run_info) so reports stay byte-identical across runs.
struct RunManifest {
  std::vector<InputFile> inputs;
  std::vector<std::pair<std::string, double>> parameters;
  std::string thermal_mode;  // "map" or "joule_only"
  bool map_includes_joule = false;
  double ambient = 0.0;      // K
  std::string tool_version = kToolVersion;

  bool operator==(const RunManifest&) const = default;
};

struct Layout {
  struct Point {
    std::string name;
    double x = 0.0;  // um
    double y = 0.0;
    int layer = 0;
    bool operator==(const Point&) const = default;
  };
  struct Wire {
    std::string name;
    int n1 = 0;
    int n2 = 0;
    int layer = 0;
    double width = 0.0;  // um
    bool operator==(const Wire&) const = default;
  };
  std::vector<Point> nodes;
  std::vector<Wire> segments;

  static Layout of(const PowerGrid& grid);
  bool operator==(const Layout&) const = default;
};

struct ReportBundle {
  SimulationResult result;
  RunManifest manifest;
  Layout layout;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

/// Round to 9 significant digits, the precision of every report float.
double round_sig9(double v);

nlohmann::json to_json(const ReportBundle& bundle);
/// Throws InputError on a missing field or an unsupported schema major.
ReportBundle from_json(const nlohmann::json& j);
ReportBundle read_result_file(const std::string& path);

std::string mortal_wires_csv(const SimulationResult& result);
std::string ir_timeseries_csv(const SimulationResult& result);

/// Layout-to-viewBox map: X = m + (x - xmin) s, Y = m + (ymax - y) s with
/// s = (width - 2m) / max(x span, y span).
struct SvgTransform {
  double xmin = 0.0, ymax = 0.0, scale = 1.0, margin = 20.0, width = 800.0, height = 800.0;
  static SvgTransform fit(const Layout& layout, double width = 800.0, double margin = 20.0);
  std::pair<double, double> apply(double x_um, double y_um) const;
};

/// Segments coloured by samples spread evenly from n1 to n2; an empty
/// sample list draws the segment grey.
std::string segment_heatmap_svg(const Layout& layout, const std::string& title,
                                const std::string& unit,
                                const std::vector<std::vector<double>>& samples);
/// Node values drawn as discs over a grey wire outline.
std::string node_heatmap_svg(const Layout& layout, const std::string& title,
                             const std::string& unit, const std::vector<double>& values);

/// heatmap_current_density.svg, heatmap_temperature.svg, heatmap_stress.svg,
/// heatmap_ir_drop.svg.
void write_heatmaps(const ReportBundle& bundle, const std::filesystem::path& dir);

/// result.json, mortal_wires.csv, ir_timeseries.csv and the heatmaps.
void write_reports(const ReportBundle& bundle, const std::filesystem::path& dir);

/// run_info.json with the wall-clock timestamp and the result.json digest.
void write_run_info(const std::filesystem::path& dir, double elapsed_s);

}  // namespace emgrid
