#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlopf/error.hpp"
#include "mlopf/phase.hpp"

namespace mlopf {

/// 3x3 complex matrix indexed by phase codes. Entries for phases a line
/// does not carry stay zero.
struct PhaseMatrix {
  std::array<Complex, 9> m{};

  Complex& operator()(Phase r, Phase c) { return m[static_cast<std::size_t>(3 * code(r) + code(c))]; }
  Complex operator()(Phase r, Phase c) const {
    return m[static_cast<std::size_t>(3 * code(r) + code(c))];
  }
  PhaseMatrix& operator+=(const PhaseMatrix& o) {
    for (std::size_t k = 0; k < 9; ++k) m[k] += o.m[k];
    return *this;
  }
  PhaseMatrix scaled(double s) const {
    PhaseMatrix out = *this;
    for (auto& e : out.m) e *= s;
    return out;
  }
};

struct Bus {
  int id = 0;
  PhaseSet phases;
  std::optional<int> parent;
};

struct Line {
  int from = 0;
  int to = 0;
  PhaseMatrix z;  ///< per-unit, only entries over phases(to) are meaningful
};

/// One coordinate of the flat (bus, phase) index space.
struct FlatEntry {
  int bus = 0;
  Phase phase = Phase::a;
};

/// Rooted multi-phase radial network. Immutable after construction.
///
/// Bus ids are contiguous 0..n-1 with the substation at 0. The flat index
/// space excludes the substation and is ordered bus-major, phase-minor.
class Network {
 public:
  Network(double base_v_squared, std::vector<Bus> buses, std::vector<Line> lines)
      : base_v_squared_(base_v_squared), buses_(std::move(buses)), lines_(std::move(lines)) {
    validate_and_index();
  }

  double base_v_squared() const { return base_v_squared_; }
  int bus_count() const { return static_cast<int>(buses_.size()); }
  /// N: total number of (bus, phase) coordinates excluding the substation.
  int dim() const { return static_cast<int>(flat_.size()); }

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const Bus& bus(int id) const { return buses_.at(checked(id)); }
  PhaseSet phases(int id) const { return bus(id).phases; }
  int parent(int id) const { return parent_[checked(id)]; }
  const std::vector<int>& children(int id) const { return children_[checked(id)]; }
  /// Line feeding bus `id` from its parent; undefined for the substation.
  const Line& line_into(int id) const {
    if (checked(id) == 0) throw std::out_of_range("substation has no incoming line");
    return lines_[static_cast<std::size_t>(line_into_[static_cast<std::size_t>(id)])];
  }

  const std::vector<FlatEntry>& flat_entries() const { return flat_; }
  const FlatEntry& flat_entry(int index) const { return flat_.at(static_cast<std::size_t>(index)); }
  int flat_offset(int bus_id) const { return offset_[checked(bus_id)]; }
  int flat_index(int bus_id, Phase p) const {
    const Bus& b = bus(bus_id);
    if (bus_id == 0) throw std::out_of_range("substation is not in the flat index space");
    if (!b.phases.contains(p)) {
      throw std::out_of_range("phase " + std::string(1, to_char(p)) + " not present at bus " +
                              std::to_string(bus_id));
    }
    return offset_[static_cast<std::size_t>(bus_id)] + b.phases.rank(p);
  }

  /// Buses in depth-first pre-order from the substation (children ascending).
  const std::vector<int>& preorder() const { return preorder_; }
  int depth(int id) const { return depth_[checked(id)]; }
  /// Number of buses in the subtree rooted at `id` (including it).
  int subtree_size(int id) const { return subtree_size_[checked(id)]; }

  bool is_ancestor_or_self(int ancestor, int id) const {
    checked(ancestor);
    while (depth(id) > depth(ancestor)) id = parent_[static_cast<std::size_t>(id)];
    return id == ancestor;
  }

 private:
  std::size_t checked(int id) const {
    if (id < 0 || id >= bus_count()) throw std::out_of_range("unknown bus id " + std::to_string(id));
    return static_cast<std::size_t>(id);
  }

  void validate_and_index() {
    if (!(base_v_squared_ > 0.0)) throw ValidationError("base_v_squared must be positive");
    const std::size_t n = buses_.size();
    if (n == 0) throw ValidationError("network has no buses");
    std::sort(buses_.begin(), buses_.end(), [](const Bus& x, const Bus& y) { return x.id < y.id; });
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0 && buses_[k].id == buses_[k - 1].id)
        throw ValidationError("duplicate bus id " + std::to_string(buses_[k].id));
      if (buses_[k].id != static_cast<int>(k))
        throw ValidationError("bus ids must be contiguous 0..n-1; missing id " + std::to_string(k));
      if (buses_[k].phases.empty())
        throw ValidationError("bus " + std::to_string(k) + " has no phases");
    }
    if (buses_[0].parent) throw ValidationError("substation bus 0 must not have a parent");
    if (buses_[0].phases != PhaseSet::all()) throw ValidationError("substation bus 0 must carry phases abc");

    if (lines_.size() != n - 1) throw ValidationError("not a tree: expected " + std::to_string(n - 1) +
                                                       " lines, got " + std::to_string(lines_.size()));
    parent_.assign(n, -1);
    line_into_.assign(n, -1);
    for (std::size_t l = 0; l < lines_.size(); ++l) {
      const Line& line = lines_[l];
      if (line.from < 0 || line.to < 0 || line.from >= static_cast<int>(n) || line.to >= static_cast<int>(n))
        throw ValidationError("line references unknown bus");
      if (line.to == 0) throw ValidationError("not a tree: line into the substation");
      if (line.from == line.to) throw ValidationError("not a tree: self loop at bus " + std::to_string(line.to));
      auto& slot = line_into_[static_cast<std::size_t>(line.to)];
      if (slot >= 0) throw ValidationError("not a tree: bus " + std::to_string(line.to) + " has two incoming lines");
      slot = static_cast<int>(l);
      parent_[static_cast<std::size_t>(line.to)] = line.from;
    }
    for (std::size_t k = 1; k < n; ++k) {
      const auto& b = buses_[k];
      if (!b.parent) throw ValidationError("bus " + std::to_string(k) + " has no parent");
      if (*b.parent != parent_[k])
        throw ValidationError("line into bus " + std::to_string(k) + " does not start at its declared parent");
    }

    children_.assign(n, {});
    for (std::size_t k = 1; k < n; ++k) children_[static_cast<std::size_t>(parent_[k])].push_back(static_cast<int>(k));

    // Walk from the root; anything unreached sits on a cycle detached from bus 0.
    depth_.assign(n, -1);
    preorder_.clear();
    preorder_.reserve(n);
    std::vector<int> stack{0};
    depth_[0] = 0;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      preorder_.push_back(u);
      const auto& ch = children_[static_cast<std::size_t>(u)];
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) {
        depth_[static_cast<std::size_t>(*it)] = depth_[static_cast<std::size_t>(u)] + 1;
        stack.push_back(*it);
      }
    }
    if (preorder_.size() != n) throw ValidationError("not a tree: some buses are not connected to bus 0");

    subtree_size_.assign(n, 1);
    for (auto it = preorder_.rbegin(); it != preorder_.rend(); ++it)
      if (*it != 0) subtree_size_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(*it)])] += subtree_size_[static_cast<std::size_t>(*it)];

    for (std::size_t k = 1; k < n; ++k) {
      const PhaseSet mine = buses_[k].phases;
      const PhaseSet up = buses_[static_cast<std::size_t>(parent_[k])].phases;
      if (!mine.subset_of(up)) {
        throw ValidationError("phase not present on parent: bus " + std::to_string(k) + " has phases " +
                              mine.str() + ", parent " + std::to_string(parent_[k]) + " has " + up.str());
      }
      const Line& line = lines_[static_cast<std::size_t>(line_into_[k])];
      for (Phase r : kAllPhases) {
        for (Phase c : kAllPhases) {
          if ((!mine.contains(r) || !mine.contains(c)) && line.z(r, c) != Complex{}) {
            throw ValidationError("line into bus " + std::to_string(k) + " has impedance entry " +
                                  std::string{to_char(r), to_char(c)} + " outside its phases");
          }
        }
        if (mine.contains(r) && line.z(r, r).real() < 0.0)
          throw ValidationError("line into bus " + std::to_string(k) + " has negative resistance");
      }
    }

    offset_.assign(n, 0);
    flat_.clear();
    for (std::size_t k = 1; k < n; ++k) {
      offset_[k] = static_cast<int>(flat_.size());
      for (Phase p : kAllPhases)
        if (buses_[k].phases.contains(p)) flat_.push_back({static_cast<int>(k), p});
    }
  }

  double base_v_squared_;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<int> parent_;
  std::vector<int> line_into_;
  std::vector<std::vector<int>> children_;
  std::vector<int> depth_;
  std::vector<int> subtree_size_;
  std::vector<int> preorder_;
  std::vector<int> offset_;
  std::vector<FlatEntry> flat_;
};

// ---------------------------------------------------------------------------
// JSON document format

namespace detail {

inline PhaseSet parse_phases(const nlohmann::json& arr, int bus_id) {
  if (!arr.is_array()) throw ParseError("bus " + std::to_string(bus_id) + ": phases must be an array");
  PhaseSet s;
  for (const auto& e : arr) {
    if (!e.is_string() || e.get<std::string>().size() != 1)
      throw ParseError("bus " + std::to_string(bus_id) + ": phase must be \"a\", \"b\" or \"c\"");
    auto p = phase_from_char(e.get<std::string>()[0]);
    if (!p) throw ParseError("bus " + std::to_string(bus_id) + ": unknown phase " + e.get<std::string>());
    if (s.contains(*p)) throw ParseError("bus " + std::to_string(bus_id) + ": repeated phase");
    s.insert(*p);
  }
  return s;
}

template <typename T>
T get_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing field \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": field \"" + key + "\" has wrong type");
  }
}

}  // namespace detail

inline Network network_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("network document must be a JSON object");
  const double base = doc.value("base_v_squared", 1.0);
  if (!doc.contains("buses") || !doc["buses"].is_array()) throw ParseError("network: missing \"buses\" array");
  if (!doc.contains("lines") || !doc["lines"].is_array()) throw ParseError("network: missing \"lines\" array");

  std::vector<Bus> buses;
  for (const auto& jb : doc["buses"]) {
    Bus b;
    b.id = detail::get_field<int>(jb, "id", "bus");
    if (b.id < 0) throw ParseError("bus id must be nonnegative");
    b.phases = detail::parse_phases(jb.contains("phases") ? jb["phases"] : nlohmann::json{}, b.id);
    if (jb.contains("parent") && !jb["parent"].is_null()) b.parent = detail::get_field<int>(jb, "parent", "bus");
    buses.push_back(b);
  }
  std::vector<Line> lines;
  for (const auto& jl : doc["lines"]) {
    Line line;
    line.from = detail::get_field<int>(jl, "from", "line");
    line.to = detail::get_field<int>(jl, "to", "line");
    const std::string where = "line " + std::to_string(line.from) + "-" + std::to_string(line.to);
    if (jl.contains("z")) {
      if (!jl["z"].is_object()) throw ParseError(where + ": z must be an object");
      for (const auto& [key, val] : jl["z"].items()) {
        if (key.size() != 2) throw ParseError(where + ": bad phase pair key \"" + key + "\"");
        auto r = phase_from_char(key[0]);
        auto c = phase_from_char(key[1]);
        if (!r || !c) throw ParseError(where + ": bad phase pair key \"" + key + "\"");
        if (!val.is_array() || val.size() != 2 || !val[0].is_number() || !val[1].is_number())
          throw ParseError(where + ": impedance entry must be [re, im]");
        line.z(*r, *c) = Complex{val[0].get<double>(), val[1].get<double>()};
      }
    }
    lines.push_back(line);
  }
  return Network(base, std::move(buses), std::move(lines));
}

inline Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open network file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("network file " + path + ": " + e.what());
  }
  return network_from_json(doc);
}

inline nlohmann::json to_json(const Network& net) {
  nlohmann::json doc;
  doc["base_v_squared"] = net.base_v_squared();
  auto& buses = doc["buses"] = nlohmann::json::array();
  for (const Bus& b : net.buses()) {
    nlohmann::json jb;
    jb["id"] = b.id;
    auto& ph = jb["phases"] = nlohmann::json::array();
    for (Phase p : kAllPhases)
      if (b.phases.contains(p)) ph.push_back(std::string(1, to_char(p)));
    jb["parent"] = b.parent ? nlohmann::json(*b.parent) : nlohmann::json(nullptr);
    buses.push_back(std::move(jb));
  }
  auto& lines = doc["lines"] = nlohmann::json::array();
  for (int id = 1; id < net.bus_count(); ++id) {
    const Line& line = net.line_into(id);
    nlohmann::json jl;
    jl["from"] = line.from;
    jl["to"] = line.to;
    nlohmann::json z = nlohmann::json::object();
    const PhaseSet ph = net.phases(id);
    for (Phase r : kAllPhases) {
      for (Phase c : kAllPhases) {
        if (!ph.contains(r) || !ph.contains(c)) continue;
        const Complex v = line.z(r, c);
        if (v == Complex{}) continue;
        z[std::string{to_char(r), to_char(c)}] = {v.real(), v.imag()};
      }
    }
    jl["z"] = std::move(z);
    lines.push_back(std::move(jl));
  }
  return doc;
}

}  // namespace mlopf
