#include "emgrid/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "emgrid/errors.hpp"

namespace emgrid {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

json r9(double v) { return round_sig9(v); }

json r9(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(round_sig9(x));
  return a;
}

json r9(const std::optional<double>& v) { return v ? json(round_sig9(*v)) : json(nullptr); }

std::optional<double> opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string csv_num(double v) { return fmt("%.9g", v); }

}  // namespace

double round_sig9(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

Layout Layout::of(const PowerGrid& grid) {
  Layout l;
  for (const auto& n : grid.nodes) l.nodes.push_back({n.name, n.x, n.y, n.layer});
  for (const auto& s : grid.segments) l.segments.push_back({s.name, s.n1, s.n2, s.layer, s.width});
  return l;
}

json to_json(const ReportBundle& b) {
  const auto& r = b.result;
  json j;
  j["schema_version"] = kSchemaVersion;

  json m;
  m["tool_version"] = b.manifest.tool_version;
  m["thermal_mode"] = b.manifest.thermal_mode;
  m["map_includes_joule"] = b.manifest.map_includes_joule;
  m["ambient_K"] = r9(b.manifest.ambient);
  m["inputs"] = json::array();
  for (const auto& f : b.manifest.inputs)
    m["inputs"].push_back({{"role", f.role}, {"path", f.path}, {"sha256", f.sha256}});
  m["parameters"] = json::array();
  for (const auto& [k, v] : b.manifest.parameters) m["parameters"].push_back({k, r9(v)});
  j["manifest"] = m;

  json layout;
  layout["nodes"] = json::array();
  for (const auto& n : b.layout.nodes)
    layout["nodes"].push_back({{"name", n.name}, {"x_um", r9(n.x)}, {"y_um", r9(n.y)}, {"layer", n.layer}});
  layout["segments"] = json::array();
  for (const auto& s : b.layout.segments)
    layout["segments"].push_back(
        {{"name", s.name}, {"n1", s.n1}, {"n2", s.n2}, {"layer", s.layer}, {"width_um", r9(s.width)}});
  j["layout"] = layout;

  bool censored = false;
  const double life = chip_lifetime(r, &censored);
  j["summary"] = {{"t_total_s", r9(r.t_total)},
                  {"t_end_s", r9(r.t_end)},
                  {"steps", r.steps},
                  {"tree_count", r.trees.size()},
                  {"mortal_trees", r.mortal_count()},
                  {"chip_failure_s", r9(r.chip_failure)},
                  {"chip_lifetime_s", r9(life)},
                  {"chip_lifetime_censored", censored},
                  {"ir_factorizations", r.ir_factorizations},
                  {"stress_factorizations", r.stress_factorizations},
                  {"profile_refreshes", r.profile_refreshes}};

  j["nets"] = json::array();
  for (std::size_t k = 0; k < r.nets.size(); ++k)
    j["nets"].push_back({{"name", r.nets[k]}, {"supply_V", r9(r.net_supply[k])}});

  j["checkpoints"] = json::array();
  for (const auto& c : r.checkpoints) {
    json stress = json::array();
    for (const auto& s : c.tree_max_stress) stress.push_back(r9(s));
    j["checkpoints"].push_back({{"time_s", r9(c.time)},
                                {"net_max_drop_V", r9(c.net_max_drop)},
                                {"net_p95_drop_V", r9(c.net_p95_drop)},
                                {"resistance_ohm", r9(c.resistance)},
                                {"tree_max_stress_Pa", stress},
                                {"tree_void_volume_m3", r9(c.tree_void_volume)}});
  }

  j["trees"] = json::array();
  for (const auto& t : r.trees) {
    const auto ttf = compute_ttf(t, r);
    j["trees"].push_back({{"tree_id", t.tree_id},
                          {"mortal", t.mortal},
                          {"max_steady_stress_Pa", r9(t.max_steady_stress)},
                          {"phase", t.phase},
                          {"t_nuc_s", r9(t.t_nuc)},
                          {"t_vcrit_s", r9(t.t_vcrit)},
                          {"t_fail_s", r9(t.t_fail)},
                          {"nuc_segment", t.nuc_segment},
                          {"nuc_x_um", r9(t.nuc_x)},
                          {"nuc_y_um", r9(t.nuc_y)},
                          {"void_volume_m3", r9(t.void_volume)},
                          {"critical_volume_m3", r9(t.critical_volume)},
                          {"delta_r_ohm", r9(t.delta_r)},
                          {"negative_void_clamps", t.negative_void_clamps},
                          {"ttf",
                           {{"t_nuc_s", r9(ttf.t_nuc)},
                            {"t_inc_s", r9(ttf.t_inc)},
                            {"t_growth_s", r9(ttf.t_growth)},
                            {"t_life_s", r9(ttf.t_life)},
                            {"censored", ttf.censored}}}});
  }

  j["segments"] = json::array();
  for (const auto& s : r.segments)
    j["segments"].push_back({{"current_density_A_m2", r9(s.current_density)},
                             {"t1_K", r9(s.t1)},
                             {"t_mid_K", r9(s.t_mid)},
                             {"t2_K", r9(s.t2)},
                             {"stress_Pa", r9(s.stress)}});
  j["node_drop_initial_V"] = r9(r.node_drop_initial);
  j["node_drop_final_V"] = r9(r.node_drop_final);
  return j;
}

ReportBundle from_json(const json& j) {
  ReportBundle b;
  try {
    const std::string version = j.at("schema_version").get<std::string>();
    if (version.substr(0, version.find('.')) != std::string(kSchemaVersion).substr(0, 1))
      throw InputError("unsupported result schema version '" + version + "'");

    const auto& m = j.at("manifest");
    b.manifest.tool_version = m.at("tool_version").get<std::string>();
    b.manifest.thermal_mode = m.at("thermal_mode").get<std::string>();
    b.manifest.map_includes_joule = m.at("map_includes_joule").get<bool>();
    b.manifest.ambient = m.at("ambient_K").get<double>();
    for (const auto& f : m.at("inputs"))
      b.manifest.inputs.push_back({f.at("role").get<std::string>(), f.at("path").get<std::string>(),
                                   f.at("sha256").get<std::string>()});
    for (const auto& p : m.at("parameters"))
      b.manifest.parameters.emplace_back(p.at(0).get<std::string>(), p.at(1).get<double>());

    for (const auto& n : j.at("layout").at("nodes"))
      b.layout.nodes.push_back({n.at("name").get<std::string>(), n.at("x_um").get<double>(),
                                n.at("y_um").get<double>(), n.at("layer").get<int>()});
    for (const auto& s : j.at("layout").at("segments"))
      b.layout.segments.push_back({s.at("name").get<std::string>(), s.at("n1").get<int>(),
                                   s.at("n2").get<int>(), s.at("layer").get<int>(),
                                   s.at("width_um").get<double>()});

    auto& r = b.result;
    const auto& sum = j.at("summary");
    r.t_total = sum.at("t_total_s").get<double>();
    r.t_end = sum.at("t_end_s").get<double>();
    r.steps = sum.at("steps").get<int>();
    r.chip_failure = opt(sum.at("chip_failure_s"));
    r.ir_factorizations = sum.at("ir_factorizations").get<int>();
    r.stress_factorizations = sum.at("stress_factorizations").get<int>();
    r.profile_refreshes = sum.at("profile_refreshes").get<int>();
    for (const auto& n : j.at("nets")) {
      r.nets.push_back(n.at("name").get<std::string>());
      r.net_supply.push_back(n.at("supply_V").get<double>());
    }
    for (const auto& c : j.at("checkpoints")) {
      Checkpoint cp;
      cp.time = c.at("time_s").get<double>();
      cp.net_max_drop = c.at("net_max_drop_V").get<std::vector<double>>();
      cp.net_p95_drop = c.at("net_p95_drop_V").get<std::vector<double>>();
      cp.resistance = c.at("resistance_ohm").get<std::vector<double>>();
      for (const auto& s : c.at("tree_max_stress_Pa")) cp.tree_max_stress.push_back(opt(s));
      cp.tree_void_volume = c.at("tree_void_volume_m3").get<std::vector<double>>();
      r.checkpoints.push_back(std::move(cp));
    }
    for (const auto& t : j.at("trees")) {
      TreeOutcome o;
      o.tree_id = t.at("tree_id").get<int>();
      o.mortal = t.at("mortal").get<bool>();
      o.max_steady_stress = t.at("max_steady_stress_Pa").get<double>();
      o.phase = t.at("phase").get<std::string>();
      o.t_nuc = opt(t.at("t_nuc_s"));
      o.t_vcrit = opt(t.at("t_vcrit_s"));
      o.t_fail = opt(t.at("t_fail_s"));
      o.nuc_segment = t.at("nuc_segment").get<int>();
      o.nuc_x = t.at("nuc_x_um").get<double>();
      o.nuc_y = t.at("nuc_y_um").get<double>();
      o.void_volume = t.at("void_volume_m3").get<double>();
      o.critical_volume = t.at("critical_volume_m3").get<double>();
      o.delta_r = t.at("delta_r_ohm").get<double>();
      o.negative_void_clamps = t.at("negative_void_clamps").get<int>();
      r.trees.push_back(std::move(o));
    }
    for (const auto& s : j.at("segments")) {
      SegmentField f;
      f.current_density = s.at("current_density_A_m2").get<double>();
      f.t1 = s.at("t1_K").get<double>();
      f.t_mid = s.at("t_mid_K").get<double>();
      f.t2 = s.at("t2_K").get<double>();
      f.stress = s.at("stress_Pa").get<std::vector<double>>();
      r.segments.push_back(std::move(f));
    }
    r.node_drop_initial = j.at("node_drop_initial_V").get<std::vector<double>>();
    r.node_drop_final = j.at("node_drop_final_V").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed result file: ") + e.what());
  }
  return b;
}

ReportBundle read_result_file(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::string mortal_wires_csv(const SimulationResult& r) {
  std::string out = "tree_id,segment_id,t_nuc_s,t_inc_s,t_growth_s,t_life_s,censored\n";
  for (const auto& t : r.trees) {
    if (!t.mortal) continue;
    const auto c = compute_ttf(t, r);
    out += std::to_string(t.tree_id) + ',' + (t.nuc_segment >= 0 ? std::to_string(t.nuc_segment) : "") +
           ',' + csv_num(c.t_nuc) + ',' + csv_num(c.t_inc) + ',' + csv_num(c.t_growth) + ',' +
           csv_num(c.t_life) + ',' + (c.censored ? "1" : "0") + '\n';
  }
  return out;
}

std::string ir_timeseries_csv(const SimulationResult& r) {
  std::string out = "time_s,net,max_drop_V,p95_drop_V\n";
  for (const auto& c : r.checkpoints)
    for (std::size_t k = 0; k < r.nets.size(); ++k)
      out += csv_num(c.time) + ',' + r.nets[k] + ',' + csv_num(c.net_max_drop[k]) + ',' +
             csv_num(c.net_p95_drop[k]) + '\n';
  return out;
}

SvgTransform SvgTransform::fit(const Layout& layout, double width, double margin) {
  SvgTransform t;
  t.width = width;
  t.margin = margin;
  if (layout.nodes.empty()) return t;
  double xmin = layout.nodes[0].x, xmax = xmin, ymin = layout.nodes[0].y, ymax = ymin;
  for (const auto& n : layout.nodes) {
    xmin = std::min(xmin, n.x);
    xmax = std::max(xmax, n.x);
    ymin = std::min(ymin, n.y);
    ymax = std::max(ymax, n.y);
  }
  double span = std::max(xmax - xmin, ymax - ymin);
  if (!(span > 0)) span = 1.0;
  t.xmin = xmin;
  t.ymax = ymax;
  t.scale = (width - 2 * margin) / span;
  t.height = 2 * margin + (ymax - ymin) * t.scale;
  return t;
}

std::pair<double, double> SvgTransform::apply(double x, double y) const {
  return {margin + (x - xmin) * scale, margin + (ymax - y) * scale};
}

namespace {

constexpr double kLegendHeight = 44.0;

std::string colour(double f) {
  static const double stops[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  f = std::clamp(std::isfinite(f) ? f : 0.0, 0.0, 1.0) * 4.0;
  const int i = std::min(static_cast<int>(f), 3);
  const double u = f - i;
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[i][0] + u * (stops[i + 1][0] - stops[i][0]))),
                static_cast<int>(std::lround(stops[i][1] + u * (stops[i + 1][1] - stops[i][1]))),
                static_cast<int>(std::lround(stops[i][2] + u * (stops[i + 1][2] - stops[i][2]))));
  return buf;
}

struct SvgWriter {
  const Layout& layout;
  SvgTransform tf;
  std::ostringstream out;
  double lo = 0.0, hi = 1.0;

  SvgWriter(const Layout& l, const std::string& title) : layout(l), tf(SvgTransform::fit(l)) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", tf.width) << "\" height=\""
        << fmt("%.0f", tf.height + kLegendHeight) << "\" viewBox=\"0 0 " << fmt("%.3f", tf.width) << ' '
        << fmt("%.3f", tf.height + kLegendHeight) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
        << "<text x=\"" << fmt("%.3f", tf.margin) << "\" y=\"14\" font-family=\"sans-serif\" font-size=\"12\">"
        << title << "</text>\n";
  }

  void range(const std::vector<double>& values) {
    bool any = false;
    for (double v : values) {
      if (!std::isfinite(v)) continue;
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
    if (!any) lo = 0.0, hi = 1.0;
  }

  double norm(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.5; }

  double stroke(const Layout::Wire& w) const { return std::max(2.0, w.width * tf.scale); }

  void line(double x1, double y1, double x2, double y2, const std::string& c, double width) {
    const auto [a, b] = tf.apply(x1, y1);
    const auto [p, q] = tf.apply(x2, y2);
    out << "<line x1=\"" << fmt("%.3f", a) << "\" y1=\"" << fmt("%.3f", b) << "\" x2=\"" << fmt("%.3f", p)
        << "\" y2=\"" << fmt("%.3f", q) << "\" stroke=\"" << c << "\" stroke-width=\"" << fmt("%.3f", width)
        << "\" stroke-linecap=\"round\"/>\n";
  }

  std::string finish(const std::string& unit) {
    const double y = tf.height + 8.0, w = tf.width - 2 * tf.margin;
    out << "<defs><linearGradient id=\"scale\">";
    for (int k = 0; k <= 4; ++k)
      out << "<stop offset=\"" << k * 25 << "%\" stop-color=\"" << colour(k / 4.0) << "\"/>";
    out << "</linearGradient></defs>\n"
        << "<rect x=\"" << fmt("%.3f", tf.margin) << "\" y=\"" << fmt("%.3f", y) << "\" width=\"" << fmt("%.3f", w)
        << "\" height=\"12\" fill=\"url(#scale)\"/>\n"
        << "<text x=\"" << fmt("%.3f", tf.margin) << "\" y=\"" << fmt("%.3f", y + 28)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt("%.4g", lo) << ' ' << unit << "</text>\n"
        << "<text x=\"" << fmt("%.3f", tf.margin + w) << "\" y=\"" << fmt("%.3f", y + 28)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt("%.4g", hi) << ' ' << unit
        << "</text>\n</svg>\n";
    return out.str();
  }
};

}  // namespace

std::string segment_heatmap_svg(const Layout& layout, const std::string& title, const std::string& unit,
                                const std::vector<std::vector<double>>& samples) {
  SvgWriter svg(layout, title);
  std::vector<double> all;
  for (const auto& s : samples) all.insert(all.end(), s.begin(), s.end());
  svg.range(all);
  for (std::size_t i = 0; i < layout.segments.size(); ++i) {
    const auto& w = layout.segments[i];
    const auto& a = layout.nodes[static_cast<std::size_t>(w.n1)];
    const auto& b = layout.nodes[static_cast<std::size_t>(w.n2)];
    const auto& v = i < samples.size() ? samples[i] : std::vector<double>{};
    if (v.empty()) {
      svg.line(a.x, a.y, b.x, b.y, "#c8c8c8", svg.stroke(w));
      continue;
    }
    // At most 24 coloured pieces per segment; each takes its midpoint sample.
    const std::size_t pieces = std::min<std::size_t>(v.size(), 24);
    for (std::size_t k = 0; k < pieces; ++k) {
      const double f0 = static_cast<double>(k) / pieces, f1 = static_cast<double>(k + 1) / pieces;
      const double fm = 0.5 * (f0 + f1) * static_cast<double>(v.size() - 1);
      const auto idx = static_cast<std::size_t>(std::lround(fm));
      svg.line(a.x + f0 * (b.x - a.x), a.y + f0 * (b.y - a.y), a.x + f1 * (b.x - a.x), a.y + f1 * (b.y - a.y),
               colour(svg.norm(v[idx])), svg.stroke(w));
    }
  }
  return svg.finish(unit);
}

std::string node_heatmap_svg(const Layout& layout, const std::string& title, const std::string& unit,
                             const std::vector<double>& values) {
  SvgWriter svg(layout, title);
  svg.range(values);
  for (const auto& w : layout.segments) {
    const auto& a = layout.nodes[static_cast<std::size_t>(w.n1)];
    const auto& b = layout.nodes[static_cast<std::size_t>(w.n2)];
    svg.line(a.x, a.y, b.x, b.y, "#c8c8c8", svg.stroke(w));
  }
  for (std::size_t i = 0; i < layout.nodes.size() && i < values.size(); ++i) {
    const auto [x, y] = svg.tf.apply(layout.nodes[i].x, layout.nodes[i].y);
    svg.out << "<circle cx=\"" << fmt("%.3f", x) << "\" cy=\"" << fmt("%.3f", y) << "\" r=\"5\" fill=\""
            << colour(svg.norm(values[i])) << "\"/>\n";
  }
  return svg.finish(unit);
}

void write_heatmaps(const ReportBundle& b, const std::filesystem::path& dir) {
  const auto& segs = b.result.segments;
  std::vector<std::vector<double>> j, temp, stress;
  for (const auto& s : segs) {
    j.push_back({std::abs(s.current_density)});
    temp.push_back({s.t1, s.t_mid, s.t2});
    stress.push_back(s.stress);
  }
  write_file(dir / "heatmap_current_density.svg",
             segment_heatmap_svg(b.layout, "Current density |j|", "A/m^2", j));
  write_file(dir / "heatmap_temperature.svg", segment_heatmap_svg(b.layout, "Wire temperature", "K", temp));
  write_file(dir / "heatmap_stress.svg",
             segment_heatmap_svg(b.layout, "Hydrostatic stress at t_end (grey: immortal)", "Pa", stress));
  write_file(dir / "heatmap_ir_drop.svg",
             node_heatmap_svg(b.layout, "IR drop at t_end", "V", b.result.node_drop_final));
}

void write_reports(const ReportBundle& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_file(dir / "result.json", to_json(b).dump(1) + "\n");
  write_file(dir / "mortal_wires.csv", mortal_wires_csv(b.result));
  write_file(dir / "ir_timeseries.csv", ir_timeseries_csv(b.result));
  write_heatmaps(b, dir);
}

void write_run_info(const std::filesystem::path& dir, double elapsed_s) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  json info = {{"timestamp", stamp},
               {"elapsed_s", elapsed_s},
               {"tool_version", kToolVersion},
               {"result_sha256", sha256_file((dir / "result.json").string())}};
  write_file(dir / "run_info.json", info.dump(1) + "\n");
}

}  // namespace emgrid
