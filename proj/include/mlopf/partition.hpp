#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlopf/error.hpp"
#include "mlopf/network.hpp"

namespace mlopf {

struct Subarea {
  int index = 0;
  int root = 0;
  std::vector<int> members;  ///< sorted bus ids
};

/// A subtree area with its own subtree subareas; `remainder` holds area
/// members outside every subarea.
struct Area {
  int index = 0;
  int root = 0;
  std::vector<int> members;
  std::vector<Subarea> subareas;
  std::vector<int> remainder;
};

struct PartitionHierarchy {
  std::vector<Area> areas;
  std::vector<int> unclustered;

  int area_count() const { return static_cast<int>(areas.size()); }
  bool has_subareas() const {
    return std::any_of(areas.begin(), areas.end(), [](const Area& a) { return !a.subareas.empty(); });
  }
};

/// Root and descendants, sorted by id.
inline std::vector<int> subtree_members(const Network& net, int root) {
  std::vector<int> out;
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    out.push_back(u);
    for (int c : net.children(u)) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {
inline std::vector<int> sorted_difference(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}
}  // namespace detail

/// Roots of areas and, per area, roots of its subareas.
struct PartitionRoots {
  struct AreaRoots {
    int root = 0;
    std::vector<int> subarea_roots;
  };
  std::vector<AreaRoots> areas;
};

/// Derives member sets from roots by subtree closure. Overlapping roots are
/// not rejected here; validate_partition reports them.
inline PartitionHierarchy partition_from_roots(const Network& net, const PartitionRoots& roots) {
  PartitionHierarchy part;
  std::vector<char> taken(static_cast<std::size_t>(net.bus_count()), 0);
  for (const auto& ar : roots.areas) {
    Area area;
    area.index = static_cast<int>(part.areas.size());
    area.root = ar.root;
    area.members = subtree_members(net, ar.root);
    std::vector<int> in_sub;
    for (int sr : ar.subarea_roots) {
      Subarea sub;
      sub.index = static_cast<int>(area.subareas.size());
      sub.root = sr;
      sub.members = subtree_members(net, sr);
      in_sub.insert(in_sub.end(), sub.members.begin(), sub.members.end());
      area.subareas.push_back(std::move(sub));
    }
    std::sort(in_sub.begin(), in_sub.end());
    in_sub.erase(std::unique(in_sub.begin(), in_sub.end()), in_sub.end());
    area.remainder = detail::sorted_difference(area.members, in_sub);
    for (int m : area.members) taken[static_cast<std::size_t>(m)] = 1;
    part.areas.push_back(std::move(area));
  }
  for (int u = 1; u < net.bus_count(); ++u)
    if (!taken[static_cast<std::size_t>(u)]) part.unclustered.push_back(u);
  return part;
}

inline PartitionRoots roots_of(const PartitionHierarchy& part) {
  PartitionRoots r;
  for (const Area& a : part.areas) {
    PartitionRoots::AreaRoots ar{a.root, {}};
    for (const Subarea& s : a.subareas) ar.subarea_roots.push_back(s.root);
    r.areas.push_back(std::move(ar));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Validation

struct PartitionViolation {
  std::string kind;  ///< "unknown bus", "substation", "subtree closure", "overlap", "coverage", "root phases"
  std::string message;
  std::vector<int> buses;
};

struct ValidationReport {
  std::vector<PartitionViolation> violations;
  bool ok() const { return violations.empty(); }
  bool has(const std::string& kind) const {
    return std::any_of(violations.begin(), violations.end(), [&](const auto& v) { return v.kind == kind; });
  }
};

inline ValidationReport validate_partition(const Network& net, const PartitionHierarchy& part) {
  ValidationReport rep;
  auto add = [&](std::string kind, std::string msg, std::vector<int> buses) {
    rep.violations.push_back({std::move(kind), std::move(msg), std::move(buses)});
  };
  const int n = net.bus_count();
  auto valid_id = [&](int b) { return b >= 0 && b < n; };

  auto check_set = [&](const std::vector<int>& members, int root, const std::string& label) -> bool {
    std::vector<int> bad;
    for (int b : members)
      if (!valid_id(b)) bad.push_back(b);
    if (!valid_id(root)) bad.push_back(root);
    if (!bad.empty()) {
      add("unknown bus", label + " references unknown buses", bad);
      return false;
    }
    if (root == 0 || std::find(members.begin(), members.end(), 0) != members.end()) {
      add("substation", label + " contains the substation", {0});
      return false;
    }
    std::vector<int> sorted = members;
    std::sort(sorted.begin(), sorted.end());
    const std::vector<int> closure = subtree_members(net, root);
    if (sorted != closure) {
      std::vector<int> diff = detail::sorted_difference(closure, sorted);
      auto extra = detail::sorted_difference(sorted, closure);
      diff.insert(diff.end(), extra.begin(), extra.end());
      add("subtree closure", label + " rooted at " + std::to_string(root) + " is not a full subtree", diff);
    }
    const PhaseSet root_phases = net.phases(root);
    std::vector<int> uncovered;
    for (int b : sorted)
      if (!net.phases(b).subset_of(root_phases)) uncovered.push_back(b);
    if (!uncovered.empty()) add("root phases", label + " has phases missing at its root", uncovered);
    return true;
  };

  std::vector<int> owner(static_cast<std::size_t>(n), -2);  // -2 unassigned, -1 unclustered
  auto claim = [&](int b, int who, const std::string& label) {
    if (!valid_id(b)) return;
    auto& o = owner[static_cast<std::size_t>(b)];
    if (o != -2) add("overlap", label + " overlaps another set at bus " + std::to_string(b), {b});
    o = who;
  };

  for (std::size_t k = 0; k < part.areas.size(); ++k) {
    const Area& area = part.areas[k];
    const std::string label = "area " + std::to_string(k);
    const bool ids_ok = check_set(area.members, area.root, label);
    for (int b : area.members) claim(b, static_cast<int>(k), label);
    if (!ids_ok) continue;

    std::vector<int> sub_owner(static_cast<std::size_t>(n), -2);
    for (std::size_t m = 0; m < area.subareas.size(); ++m) {
      const Subarea& sub = area.subareas[m];
      const std::string sl = label + " subarea " + std::to_string(m);
      if (!check_set(sub.members, sub.root, sl)) continue;
      std::vector<int> outside;
      for (int b : sub.members) {
        if (std::find(area.members.begin(), area.members.end(), b) == area.members.end())
          outside.push_back(b);
        auto& o = sub_owner[static_cast<std::size_t>(b)];
        if (o != -2) add("overlap", sl + " overlaps another subarea at bus " + std::to_string(b), {b});
        o = static_cast<int>(m);
      }
      if (!outside.empty()) add("subtree closure", sl + " extends outside its area", outside);
    }
    std::vector<int> expected_rem;
    for (int b : area.members)
      if (valid_id(b) && sub_owner[static_cast<std::size_t>(b)] == -2) expected_rem.push_back(b);
    std::sort(expected_rem.begin(), expected_rem.end());
    std::vector<int> rem = area.remainder;
    std::sort(rem.begin(), rem.end());
    if (rem != expected_rem) add("coverage", label + " remainder does not equal members minus subareas", rem);
  }
  for (int b : part.unclustered) {
    if (!valid_id(b)) {
      add("unknown bus", "unclustered set references unknown bus", {b});
      continue;
    }
    if (b == 0) {
      add("substation", "unclustered set contains the substation", {0});
      continue;
    }
    claim(b, -1, "unclustered set");
  }
  std::vector<int> missing;
  for (int b = 1; b < n; ++b)
    if (owner[static_cast<std::size_t>(b)] == -2) missing.push_back(b);
  if (!missing.empty()) add("coverage", "buses not covered by any area or the unclustered set", missing);
  return rep;
}

// ---------------------------------------------------------------------------
// Automatic partitioning

namespace detail {

/// Chooses disjoint full-subtree roots strictly below `scope_root`. Visits
/// buses children-first; a bus whose subtree holds no chosen root and whose
/// size reaches `target` is cut when its size is at most 2*target. A bus too
/// large to cut, or one sitting above an earlier cut, cuts its still-free
/// children of size at least ceil(target/2). Children are visited in
/// ascending id order, so ties go to the smallest id.
inline std::vector<int> greedy_subtree_roots(const Network& net, int scope_root, int target) {
  std::vector<int> chosen;
  if (target < 1) return chosen;
  const int half = (target + 1) / 2;
  std::vector<int> scope = subtree_members(net, scope_root);
  std::vector<char> in_scope(static_cast<std::size_t>(net.bus_count()), 0);
  for (int b : scope) in_scope[static_cast<std::size_t>(b)] = 1;
  std::vector<char> free(static_cast<std::size_t>(net.bus_count()), 1);

  auto cut_free_children = [&](int v) {
    bool any = false;
    for (int c : net.children(v)) {
      if (free[static_cast<std::size_t>(c)] && net.subtree_size(c) >= half) {
        chosen.push_back(c);
        free[static_cast<std::size_t>(c)] = 0;
        any = true;
      }
    }
    return any;
  };

  const auto& order = net.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int v = *it;
    if (!in_scope[static_cast<std::size_t>(v)]) continue;
    if (v == scope_root) {
      cut_free_children(v);
      continue;
    }
    const auto& ch = net.children(v);
    const bool all_free = std::all_of(ch.begin(), ch.end(), [&](int c) { return free[static_cast<std::size_t>(c)] != 0; });
    const int size = net.subtree_size(v);
    if (all_free) {
      if (size < target) continue;
      if (size <= 2 * target) {
        chosen.push_back(v);
        free[static_cast<std::size_t>(v)] = 0;
      } else {
        cut_free_children(v);
        free[static_cast<std::size_t>(v)] = 0;
      }
    } else {
      cut_free_children(v);
      free[static_cast<std::size_t>(v)] = 0;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace detail

/// Deterministic size-targeted partition. A target_subarea_size of 0 leaves
/// areas undivided.
inline PartitionHierarchy auto_partition(const Network& net, int target_area_size, int target_subarea_size) {
  if (target_area_size < 1) throw std::invalid_argument("target_area_size must be >= 1");
  if (target_subarea_size < 0) throw std::invalid_argument("target_subarea_size must be >= 0");
  PartitionRoots roots;
  for (int r : detail::greedy_subtree_roots(net, 0, target_area_size)) {
    PartitionRoots::AreaRoots ar{r, {}};
    if (target_subarea_size > 0) ar.subarea_roots = detail::greedy_subtree_roots(net, r, target_subarea_size);
    roots.areas.push_back(std::move(ar));
  }
  return partition_from_roots(net, roots);
}

// ---------------------------------------------------------------------------
// Dual aggregates

/// Per-phase sums of (mu_upper - mu_lower) over a scope, indexed by phase code.
using PhaseSums = std::array<double, 3>;

struct AggregateTable {
  std::vector<PhaseSums> area;                  ///< [area]
  std::vector<std::vector<PhaseSums>> subarea;  ///< [area][subarea]
};

inline PhaseSums scope_sums(const Network& net, std::span<const int> buses, std::span<const double> diff) {
  PhaseSums s{0.0, 0.0, 0.0};
  for (int b : buses) {
    const int off = net.flat_offset(b);
    const PhaseSet ph = net.phases(b);
    for (Phase p : kAllPhases)
      if (ph.contains(p)) s[static_cast<std::size_t>(code(p))] += diff[static_cast<std::size_t>(off + ph.rank(p))];
  }
  return s;
}

inline AggregateTable area_dual_aggregates(const Network& net, const PartitionHierarchy& part,
                                           std::span<const double> mu_upper, std::span<const double> mu_lower) {
  const auto n = static_cast<std::size_t>(net.dim());
  require_size(mu_upper.size(), n, "area_dual_aggregates mu_upper");
  require_size(mu_lower.size(), n, "area_dual_aggregates mu_lower");
  std::vector<double> diff(n);
  for (std::size_t k = 0; k < n; ++k) diff[k] = mu_upper[k] - mu_lower[k];
  AggregateTable t;
  for (const Area& a : part.areas) {
    t.area.push_back(scope_sums(net, a.members, diff));
    auto& subs = t.subarea.emplace_back();
    for (const Subarea& s : a.subareas) subs.push_back(scope_sums(net, s.members, diff));
  }
  return t;
}

// ---------------------------------------------------------------------------
// JSON: {"areas": [{"root": id, "subareas": [{"root": id}, ...]}, ...]}

inline PartitionRoots partition_roots_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("areas") || !doc["areas"].is_array())
    throw ParseError("partition: missing \"areas\" array");
  PartitionRoots roots;
  for (const auto& ja : doc["areas"]) {
    PartitionRoots::AreaRoots ar;
    ar.root = detail::get_field<int>(ja, "root", "area");
    if (ja.contains("subareas")) {
      if (!ja["subareas"].is_array()) throw ParseError("area: subareas must be an array");
      for (const auto& js : ja["subareas"]) ar.subarea_roots.push_back(detail::get_field<int>(js, "root", "subarea"));
    }
    roots.areas.push_back(std::move(ar));
  }
  return roots;
}

inline PartitionHierarchy partition_from_json(const Network& net, const nlohmann::json& doc) {
  const PartitionRoots roots = partition_roots_from_json(doc);
  for (const auto& ar : roots.areas) {
    net.bus(ar.root);
    for (int s : ar.subarea_roots) net.bus(s);
  }
  return partition_from_roots(net, roots);
}

inline PartitionHierarchy load_partition(const Network& net, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open partition file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("partition file " + path + ": " + e.what());
  }
  try {
    return partition_from_json(net, doc);
  } catch (const std::out_of_range& e) {
    throw ValidationError(std::string("partition: ") + e.what());
  }
}

inline nlohmann::json to_json(const PartitionHierarchy& part) {
  nlohmann::json doc;
  auto& areas = doc["areas"] = nlohmann::json::array();
  for (const Area& a : part.areas) {
    nlohmann::json ja;
    ja["root"] = a.root;
    auto& subs = ja["subareas"] = nlohmann::json::array();
    for (const Subarea& s : a.subareas) subs.push_back({{"root", s.root}});
    areas.push_back(std::move(ja));
  }
  return doc;
}

}  // namespace mlopf
