#pragma once

// Power-grid netlist model: nodes with layout coordinates, wire segments with
// geometry, vias, pads and loads, plus the EM interconnect trees extracted
// from them. Geometry is stored in micrometres as written in the netlist;
// the *_m() helpers give SI values for the numerical modules.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace emgrid {

inline constexpr double kMicron = 1e-6;

enum class NodeKind { internal, pad, load };

struct Node {
  int id = 0;
  std::string name;
  std::string net;
  double x = 0.0;  // um
  double y = 0.0;  // um
  int layer = 0;
  NodeKind kind = NodeKind::internal;

  bool operator==(const Node&) const = default;
};

struct WireSegment {
  int id = 0;
  std::string name;
  int n1 = 0;
  int n2 = 0;
  int layer = 0;
  double width = 0.0;      // um
  double thickness = 0.0;  // um
  double length = 0.0;     // um
  double rho = 0.0;        // ohm*m
  bool rho_explicit = false;
  double r0 = 0.0;  // ohm

  double width_m() const { return width * kMicron; }
  double thickness_m() const { return thickness * kMicron; }
  double length_m() const { return length * kMicron; }
  double area_m2() const { return width_m() * thickness_m(); }

  /// Current density for a branch current I (signed n1 -> n2).
  double current_density(double current) const { return current / area_m2(); }

  bool operator==(const WireSegment&) const = default;
};

struct Via {
  int id = 0;
  std::string name;
  int lower = 0;
  int upper = 0;
  double resistance = 0.0;

  bool operator==(const Via&) const = default;
};

/// Grounded ideal source card: a pad (voltage) or a load (sink current).
struct SourceCard {
  std::string name;
  int node = 0;
  double value = 0.0;

  bool operator==(const SourceCard&) const = default;
};

struct InterconnectTree {
  int id = 0;
  int layer = 0;
  std::string net;
  std::vector<int> segments;   // ascending segment ids
  std::vector<int> nodes;      // ascending node ids
  std::vector<int> terminals;  // via attachments and in-tree dead ends

  bool operator==(const InterconnectTree&) const = default;
};

class PowerGrid {
 public:
  std::vector<Node> nodes;
  std::vector<WireSegment> segments;
  std::vector<Via> vias;
  std::vector<SourceCard> pads;
  std::vector<SourceCard> loads;
  std::vector<InterconnectTree> trees;
  /// Non-fatal findings from parsing (e.g. R0 vs rho*L/A mismatch with default rho).
  std::vector<std::string> warnings;

  const Node& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  const WireSegment& segment(int id) const { return segments.at(static_cast<std::size_t>(id)); }
  std::optional<int> find_node(std::string_view name) const;

  /// node id -> pad voltage (V)
  std::map<int, double> pad_voltages() const;
  /// node id -> total sink current (A)
  std::map<int, double> load_currents() const;
  double total_load_current() const;

  /// Tree id owning each segment.
  std::vector<int> tree_of_segment() const;

  /// Distinct net names in first-appearance order of their nodes.
  std::vector<std::string> nets() const;

  /// Rebuild the name lookup after mutating `nodes`.
  void reindex();

  bool operator==(const PowerGrid& other) const {
    return nodes == other.nodes && segments == other.segments && vias == other.vias &&
           pads == other.pads && loads == other.loads && trees == other.trees;
  }

 private:
  std::unordered_map<std::string, int> node_index_;
};

/// Parse a netlist. `default_rho` applies to resistor cards without `rho=`.
/// Throws ParseError (syntax, with line/column) or InputError (semantic).
PowerGrid parse_netlist(std::string_view text, std::string_view source_name = "<netlist>",
                        double default_rho = 2.2e-8);

PowerGrid load_netlist(const std::string& path, double default_rho = 2.2e-8);

/// Serialize back to the netlist grammar; parse(write(g)) == g.
std::string write_netlist(const PowerGrid& grid);

/// Maximal same-layer connected segment groups; terminals are via
/// attachment nodes and in-tree degree-1 nodes.
std::vector<InterconnectTree> extract_trees(const PowerGrid& grid);

}  // namespace emgrid
