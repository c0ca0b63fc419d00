#include "emgrid/grid_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "emgrid/errors.hpp"

namespace emgrid {

namespace {

struct Token {
  std::string text;
  int column = 1;
};

struct Card {
  int line = 0;
  std::vector<Token> head;                 // before ';'
  std::vector<Token> attributes;           // after ';' (R cards) or key=value tokens (N cards)
};

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::vector<Token> split_tokens(std::string_view line, int column_offset) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    out.push_back({std::string(line.substr(i, j - i)), static_cast<int>(i) + 1 + column_offset});
    i = j;
  }
  return out;
}

class CardParser {
 public:
  CardParser(std::string_view source, int line) : source_(source), line_(line) {}

  [[noreturn]] void fail(const Token& t, const std::string& what) const {
    throw ParseError(std::string(source_), line_, t.column, what);
  }

  // SPICE-style number with optional engineering suffix.
  double number(const Token& t) const {
    const std::string& s = t.text;
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) fail(t, "expected a number, got '" + s + "'");
    std::string suffix = upper(std::string_view(ptr, static_cast<std::size_t>(end - ptr)));
    static const std::pair<const char*, double> scales[] = {
        {"MEG", 1e6}, {"T", 1e12}, {"G", 1e9}, {"K", 1e3}, {"M", 1e-3},
        {"U", 1e-6},  {"N", 1e-9}, {"P", 1e-12}, {"F", 1e-15}};
    if (suffix.empty()) return value;
    for (const auto& [name, scale] : scales) {
      if (suffix.rfind(name, 0) == 0) {
        // Trailing unit letters (e.g. "1kOhm") are ignored as in SPICE.
        return value * scale;
      }
    }
    fail(t, "unknown numeric suffix '" + suffix + "'");
  }

  int integer(const Token& t) const {
    int value = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size())
      fail(t, "expected an integer, got '" + t.text + "'");
    return value;
  }

  struct KeyValue {
    std::string key;  // upper-cased
    Token value;
    Token whole;
  };

  std::vector<KeyValue> key_values(const std::vector<Token>& tokens) const {
    std::vector<KeyValue> out;
    for (const auto& t : tokens) {
      auto eq = t.text.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == t.text.size())
        fail(t, "expected key=value, got '" + t.text + "'");
      KeyValue kv;
      kv.key = upper(std::string_view(t.text).substr(0, eq));
      kv.value = {t.text.substr(eq + 1), t.column + static_cast<int>(eq) + 1};
      kv.whole = t;
      for (const auto& prev : out)
        if (prev.key == kv.key) fail(t, "duplicate attribute '" + kv.key + "'");
      out.push_back(std::move(kv));
    }
    return out;
  }

 private:
  std::string_view source_;
  int line_;
};

bool is_ground(std::string_view name) {
  auto u = upper(name);
  return u == "0" || u == "GND";
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Minimal union-find used for connectivity checks and tree grouping.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
    return true;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

std::optional<int> PowerGrid::find_node(std::string_view name) const {
  auto it = node_index_.find(std::string(name));
  if (it == node_index_.end()) return std::nullopt;
  return it->second;
}

void PowerGrid::reindex() {
  node_index_.clear();
  for (const auto& n : nodes) node_index_.emplace(n.name, n.id);
}

std::map<int, double> PowerGrid::pad_voltages() const {
  std::map<int, double> out;
  for (const auto& p : pads) out[p.node] = p.value;
  return out;
}

std::map<int, double> PowerGrid::load_currents() const {
  std::map<int, double> out;
  for (const auto& l : loads) out[l.node] += l.value;
  return out;
}

double PowerGrid::total_load_current() const {
  double total = 0.0;
  for (const auto& l : loads) total += std::abs(l.value);
  return total;
}

std::vector<int> PowerGrid::tree_of_segment() const {
  std::vector<int> out(segments.size(), -1);
  for (const auto& t : trees)
    for (int s : t.segments) out[static_cast<std::size_t>(s)] = t.id;
  return out;
}

std::vector<std::string> PowerGrid::nets() const {
  std::vector<std::string> out;
  for (const auto& n : nodes)
    if (std::find(out.begin(), out.end(), n.net) == out.end()) out.push_back(n.net);
  return out;
}

PowerGrid parse_netlist(std::string_view text, std::string_view source_name, double default_rho) {
  // Pass 1: split into cards.
  std::vector<Card> cards;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    if (line[first] == '*') continue;
    Card card;
    card.line = line_no;
    auto semi = line.find(';');
    card.head = split_tokens(line.substr(0, semi), 0);
    if (semi != std::string_view::npos)
      card.attributes = split_tokens(line.substr(semi + 1), static_cast<int>(semi) + 1);
    if (card.head.empty())
      throw ParseError(std::string(source_name), line_no, static_cast<int>(first) + 1,
                       "attributes without an element card");
    if (upper(card.head.front().text) == ".END") break;
    cards.push_back(std::move(card));
  }

  PowerGrid grid;
  std::set<std::string> element_names;
  auto claim_name = [&](const CardParser& cp, const Token& t) {
    if (!element_names.insert(upper(t.text)).second)
      cp.fail(t, "duplicate element name '" + t.text + "'");
  };

  // Pass 2: node declarations.
  std::vector<std::string> explicit_net;
  std::set<std::string> node_names;
  for (const auto& card : cards) {
    const Token& name = card.head.front();
    std::string kind = upper(name.text.substr(0, 1));
    if (kind != "N") continue;
    CardParser cp(source_name, card.line);
    claim_name(cp, name);
    if (name.text.size() < 2) cp.fail(name, "node card without a node name");
    std::vector<Token> kv_tokens(card.head.begin() + 1, card.head.end());
    kv_tokens.insert(kv_tokens.end(), card.attributes.begin(), card.attributes.end());
    Node node;
    node.id = static_cast<int>(grid.nodes.size());
    node.name = name.text.substr(1);
    if (is_ground(node.name)) cp.fail(name, "the ground node cannot be declared");
    bool has_x = false, has_y = false, has_layer = false;
    std::string net;
    for (const auto& kv : cp.key_values(kv_tokens)) {
      if (kv.key == "X") {
        node.x = cp.number(kv.value);
        has_x = true;
      } else if (kv.key == "Y") {
        node.y = cp.number(kv.value);
        has_y = true;
      } else if (kv.key == "LAYER") {
        node.layer = cp.integer(kv.value);
        has_layer = true;
      } else if (kv.key == "NET") {
        net = kv.value.text;
      } else {
        cp.fail(kv.whole, "unknown node attribute '" + kv.key + "'");
      }
    }
    if (!has_x || !has_y || !has_layer)
      cp.fail(name, "node '" + node.name + "' requires x=, y= and layer=");
    if (!std::isfinite(node.x) || !std::isfinite(node.y))
      cp.fail(name, "node '" + node.name + "' has non-finite coordinates");
    if (!node_names.insert(node.name).second) cp.fail(name, "duplicate node '" + node.name + "'");
    grid.nodes.push_back(node);
    explicit_net.push_back(net);
  }
  grid.reindex();

  // Pass 3: elements.
  for (const auto& card : cards) {
    const Token& name = card.head.front();
    std::string uname = upper(name.text);
    if (uname[0] == 'N') continue;
    CardParser cp(source_name, card.line);
    auto node_ref = [&](const Token& t) {
      auto id = grid.find_node(t.text);
      if (!id) cp.fail(t, "reference to undeclared node '" + t.text + "'");
      return *id;
    };
    auto need = [&](std::size_t n, const char* usage) {
      if (card.head.size() != n) cp.fail(name, std::string("expected: ") + usage);
    };

    if (uname.rfind("VIA", 0) == 0) {
      claim_name(cp, name);
      need(4, "VIAname nlow nup value");
      if (!card.attributes.empty()) cp.fail(card.attributes.front(), "unexpected attributes on via");
      Via via;
      via.id = static_cast<int>(grid.vias.size());
      via.name = name.text;
      via.lower = node_ref(card.head[1]);
      via.upper = node_ref(card.head[2]);
      via.resistance = cp.number(card.head[3]);
      if (via.resistance < 0.0) cp.fail(card.head[3], "via resistance must be >= 0");
      int ll = grid.node(via.lower).layer, lu = grid.node(via.upper).layer;
      if (ll == lu) cp.fail(name, "via '" + via.name + "' connects nodes on the same layer");
      if (ll > lu) cp.fail(card.head[1], "via lower node is above the upper node");
      grid.vias.push_back(via);
    } else if (uname[0] == 'R') {
      claim_name(cp, name);
      need(4, "Rname n1 n2 value ; W=<um> H=<um> L=<um> layer=<int>");
      WireSegment seg;
      seg.id = static_cast<int>(grid.segments.size());
      seg.name = name.text;
      seg.n1 = node_ref(card.head[1]);
      seg.n2 = node_ref(card.head[2]);
      seg.r0 = cp.number(card.head[3]);
      if (seg.n1 == seg.n2) cp.fail(card.head[2], "resistor endpoints must differ");
      if (!(seg.r0 > 0.0)) cp.fail(card.head[3], "resistance must be > 0");
      bool has_w = false, has_h = false, has_l = false, has_layer = false;
      for (const auto& kv : cp.key_values(card.attributes)) {
        if (kv.key == "W") {
          seg.width = cp.number(kv.value);
          has_w = true;
        } else if (kv.key == "H") {
          seg.thickness = cp.number(kv.value);
          has_h = true;
        } else if (kv.key == "L") {
          seg.length = cp.number(kv.value);
          has_l = true;
        } else if (kv.key == "LAYER") {
          seg.layer = cp.integer(kv.value);
          has_layer = true;
        } else if (kv.key == "RHO") {
          seg.rho = cp.number(kv.value);
          seg.rho_explicit = true;
        } else {
          cp.fail(kv.whole, "unknown resistor attribute '" + kv.key + "'");
        }
      }
      if (!has_w || !has_h || !has_l || !has_layer)
        cp.fail(name, "resistor '" + seg.name + "' is missing geometry (W=, H=, L=, layer=)");
      if (!(seg.width > 0 && seg.thickness > 0 && seg.length > 0))
        cp.fail(name, "resistor '" + seg.name + "' geometry must be positive");
      if (grid.node(seg.n1).layer != seg.layer || grid.node(seg.n2).layer != seg.layer)
        cp.fail(name, "resistor '" + seg.name + "' endpoints are not on layer " +
                          std::to_string(seg.layer));
      if (!seg.rho_explicit) seg.rho = default_rho;
      if (!(seg.rho > 0.0)) cp.fail(name, "resistivity must be > 0");
      double r_geom = seg.rho * seg.length_m() / seg.area_m2();
      double mismatch = std::abs(r_geom - seg.r0) / seg.r0;
      if (mismatch > 0.01) {
        std::string msg = "resistor '" + seg.name + "': R0=" + format_double(seg.r0) +
                          " differs from rho*L/(W*H)=" + format_double(r_geom) + " by more than 1%";
        if (seg.rho_explicit) cp.fail(card.head[3], msg);
        grid.warnings.push_back(msg + " (default rho)");
      }
      grid.segments.push_back(seg);
    } else if (uname[0] == 'V' || uname[0] == 'I') {
      claim_name(cp, name);
      need(4, uname[0] == 'V' ? "Vname n+ 0 value" : "Iname n+ 0 value");
      if (!card.attributes.empty()) cp.fail(card.attributes.front(), "unexpected attributes");
      if (!is_ground(card.head[2].text))
        cp.fail(card.head[2], "sources must be grounded (second node '0')");
      SourceCard src{name.text, node_ref(card.head[1]), cp.number(card.head[3])};
      (uname[0] == 'V' ? grid.pads : grid.loads).push_back(src);
    } else {
      cp.fail(name, "unknown element '" + name.text + "'");
    }
  }

  // Node kinds.
  for (const auto& l : grid.loads) grid.nodes[static_cast<std::size_t>(l.node)].kind = NodeKind::load;
  std::map<int, double> pad_v;
  for (const auto& p : grid.pads) {
    auto [it, fresh] = pad_v.emplace(p.node, p.value);
    if (!fresh && it->second != p.value)
      throw InputError("node '" + grid.node(p.node).name + "' driven by conflicting pads");
    grid.nodes[static_cast<std::size_t>(p.node)].kind = NodeKind::pad;
  }

  // Electrical components: nets, load reachability, zero-resistance loops.
  DisjointSets comp(grid.nodes.size());
  for (const auto& s : grid.segments) comp.unite(s.n1, s.n2);
  {
    DisjointSets shorts(grid.nodes.size());
    for (const auto& v : grid.vias) {
      comp.unite(v.lower, v.upper);
      if (v.resistance == 0.0 && !shorts.unite(v.lower, v.upper))
        throw InputError("zero-resistance loop closed by via '" + v.name + "'");
    }
  }
  std::map<int, std::string> comp_net;
  for (const auto& n : grid.nodes) {
    const std::string& net = explicit_net[static_cast<std::size_t>(n.id)];
    if (net.empty()) continue;
    auto [it, fresh] = comp_net.emplace(comp.find(n.id), net);
    if (!fresh && it->second != net)
      throw InputError("node '" + n.name + "' declares net '" + net +
                       "' but is connected to net '" + it->second + "'");
  }
  int anonymous = 0;
  for (auto& n : grid.nodes) {
    int root = comp.find(n.id);
    auto it = comp_net.find(root);
    if (it == comp_net.end()) it = comp_net.emplace(root, "N" + std::to_string(anonymous++)).first;
    n.net = it->second;
  }
  std::set<int> powered;
  for (const auto& p : grid.pads) powered.insert(comp.find(p.node));
  for (const auto& l : grid.loads)
    if (!powered.count(comp.find(l.node)))
      throw InputError("load '" + l.name + "' at node '" + grid.node(l.node).name +
                       "' is not connected to any pad");

  grid.trees = extract_trees(grid);
  return grid;
}

PowerGrid load_netlist(const std::string& path, double default_rho) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open netlist '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_netlist(ss.str(), path, default_rho);
}

std::string write_netlist(const PowerGrid& grid) {
  std::ostringstream out;
  out << "* emgrid netlist\n";
  for (const auto& n : grid.nodes)
    out << 'N' << n.name << " x=" << format_double(n.x) << " y=" << format_double(n.y)
        << " layer=" << n.layer << " net=" << n.net << '\n';
  for (const auto& s : grid.segments) {
    out << s.name << ' ' << grid.node(s.n1).name << ' ' << grid.node(s.n2).name << ' '
        << format_double(s.r0) << " ; W=" << format_double(s.width)
        << " H=" << format_double(s.thickness) << " L=" << format_double(s.length)
        << " layer=" << s.layer;
    if (s.rho_explicit) out << " rho=" << format_double(s.rho);
    out << '\n';
  }
  for (const auto& v : grid.vias)
    out << v.name << ' ' << grid.node(v.lower).name << ' ' << grid.node(v.upper).name << ' '
        << format_double(v.resistance) << '\n';
  for (const auto& p : grid.pads)
    out << p.name << ' ' << grid.node(p.node).name << " 0 " << format_double(p.value) << '\n';
  for (const auto& l : grid.loads)
    out << l.name << ' ' << grid.node(l.node).name << " 0 " << format_double(l.value) << '\n';
  out << ".end\n";
  return out.str();
}

std::vector<InterconnectTree> extract_trees(const PowerGrid& grid) {
  DisjointSets sets(grid.nodes.size());
  for (const auto& s : grid.segments) sets.unite(s.n1, s.n2);

  std::vector<bool> has_via(grid.nodes.size(), false);
  for (const auto& v : grid.vias) {
    has_via[static_cast<std::size_t>(v.lower)] = true;
    has_via[static_cast<std::size_t>(v.upper)] = true;
  }

  std::map<int, int> tree_of_root;
  std::vector<InterconnectTree> trees;
  for (const auto& s : grid.segments) {
    int root = sets.find(s.n1);
    auto [it, fresh] = tree_of_root.emplace(root, static_cast<int>(trees.size()));
    if (fresh) {
      InterconnectTree t;
      t.id = it->second;
      t.layer = s.layer;
      t.net = grid.node(s.n1).net;
      trees.push_back(std::move(t));
    }
    trees[static_cast<std::size_t>(it->second)].segments.push_back(s.id);
  }

  for (auto& t : trees) {
    std::map<int, int> degree;
    for (int sid : t.segments) {
      const auto& s = grid.segment(sid);
      ++degree[s.n1];
      ++degree[s.n2];
    }
    for (const auto& [node, deg] : degree) {
      t.nodes.push_back(node);
      if (deg == 1 || has_via[static_cast<std::size_t>(node)]) t.terminals.push_back(node);
    }
  }
  return trees;
}

}  // namespace emgrid
