#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "mlopf/error.hpp"
#include "mlopf/network.hpp"
#include "mlopf/opf.hpp"
#include "mlopf/partition.hpp"

namespace mlopf {

/// Synthetic feeder recipe: a three-phase trunk leaving the substation with
/// `laterals` equally sized random subtrees hung along it.
struct FeederSpec {
  int buses = 37;               ///< including the substation
  int trunk_buses = 4;          ///< three-phase trunk length
  int laterals = 3;             ///< 0 grows one random tree off the trunk end
  double chain_prob = 0.6;      ///< new lateral bus extends the newest bus instead of a random earlier one
  double phase_drop_prob = 0.1; ///< chance a lateral bus keeps only a random subset of its parent's phases
  double r_min = 0.003, r_max = 0.015;
  double x_min = 0.006, x_max = 0.03;
  double mutual_fraction = 0.3;
  double device_density = 0.3;  ///< per bus/phase
  double device_box = 0.5;      ///< half-width of device boxes around preference
  double base_load_p = 0.0015;   ///< per bus/phase at load_scale 1, p.u.
  double base_load_q = 0.00075;
  double load_scale = 1.0;
  int target_indices = 0;       ///< if > 0, trim the last buses so N equals this exactly
  int subareas_per_area = 0;    ///< suggested partition: subareas sought per area
  std::uint64_t seed = 1;

  void validate() const {
    auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (buses < 2) throw ValidationError("feeder needs at least 2 buses");
    if (trunk_buses < 0 || laterals < 0) throw ValidationError("trunk_buses and laterals must be nonnegative");
    if (trunk_buses + std::max(laterals, 0) > buses - 1)
      throw ValidationError("infeasible feeder: trunk plus one bus per lateral exceeds the bus count");
    if (!prob_ok(chain_prob) || !prob_ok(phase_drop_prob) || !prob_ok(device_density))
      throw ValidationError("probabilities must lie in [0, 1]");
    if (!(r_min > 0 && r_min <= r_max && x_min > 0 && x_min <= x_max))
      throw ValidationError("impedance ranges must be positive and ordered");
    if (mutual_fraction < 0.0 || mutual_fraction >= 1.0) throw ValidationError("mutual_fraction must lie in [0, 1)");
    if (device_box < 0.0 || load_scale < 0.0) throw ValidationError("device_box and load_scale must be nonnegative");
    if (target_indices < 0 || subareas_per_area < 0) throw ValidationError("targets must be nonnegative");
  }
};

struct GeneratedFeeder {
  Network network;
  DeviceDocument devices;
  PartitionHierarchy partition;
};

namespace detail {

/// Subarea roots for one area from the greedy target whose root count is
/// closest to `wanted`; ties go to the smaller count.
inline std::vector<int> pick_subarea_roots(const Network& net, int area_root, int wanted) {
  std::vector<int> best;
  int best_gap = -1;
  const int size = net.subtree_size(area_root);
  for (int t = 1; t < size; ++t) {
    auto roots = greedy_subtree_roots(net, area_root, t);
    const int gap = std::abs(static_cast<int>(roots.size()) - wanted);
    if (best_gap < 0 || gap < best_gap || (gap == best_gap && roots.size() < best.size())) {
      best_gap = gap;
      best = std::move(roots);
    }
    if (best_gap == 0) break;
  }
  return best;
}

}  // namespace detail

inline GeneratedFeeder generate(const FeederSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<Bus> buses;
  std::vector<Line> lines;
  buses.push_back({0, PhaseSet::all(), std::nullopt});

  auto make_line = [&](int from, int to, PhaseSet ph) {
    Line line{from, to, {}};
    const double r = uniform(spec.r_min, spec.r_max);
    const double x = uniform(spec.x_min, spec.x_max);
    for (Phase f : kAllPhases) {
      if (!ph.contains(f)) continue;
      for (Phase g : kAllPhases) {
        if (!ph.contains(g)) continue;
        line.z(f, g) = (f == g ? 1.0 : spec.mutual_fraction) * Complex{r, x};
      }
    }
    return line;
  };
  auto add_bus = [&](int parent, PhaseSet ph) {
    const int id = static_cast<int>(buses.size());
    buses.push_back({id, ph, parent});
    lines.push_back(make_line(parent, id, ph));
    return id;
  };
  auto child_phases = [&](PhaseSet parent) {
    if (parent.size() == 1 || unit(rng) >= spec.phase_drop_prob) return parent;
    std::vector<Phase> avail;
    for (Phase p : kAllPhases)
      if (parent.contains(p)) avail.push_back(p);
    const int keep = 1 + static_cast<int>(unit(rng) * static_cast<double>(avail.size() - 1));
    std::shuffle(avail.begin(), avail.end(), rng);
    PhaseSet out;
    for (int k = 0; k < keep; ++k) out.insert(avail[static_cast<std::size_t>(k)]);
    return out;
  };

  std::vector<int> trunk;
  int prev = 0;
  for (int k = 0; k < spec.trunk_buses; ++k) {
    prev = add_bus(prev, PhaseSet::all());
    trunk.push_back(prev);
  }
  const int remaining = spec.buses - 1 - spec.trunk_buses;
  const int lateral_count = spec.laterals > 0 ? spec.laterals : (remaining > 0 ? 1 : 0);
  for (int l = 0; l < lateral_count; ++l) {
    int size = remaining / lateral_count + (l < remaining % lateral_count ? 1 : 0);
    int anchor = 0;
    if (!trunk.empty()) {
      anchor = spec.laterals > 0 ? trunk[static_cast<std::size_t>((l * static_cast<int>(trunk.size())) / lateral_count)]
                                 : trunk.back();
    }
    std::vector<int> grown;
    for (int k = 0; k < size; ++k) {
      int parent = anchor;
      if (!grown.empty()) {
        parent = unit(rng) < spec.chain_prob ? grown.back()
                                             : grown[static_cast<std::size_t>(unit(rng) * static_cast<double>(grown.size()))];
      }
      grown.push_back(add_bus(parent, child_phases(buses[static_cast<std::size_t>(parent)].phases)));
    }
  }

  if (spec.target_indices > 0) {
    auto count = [&] {
      int n = 0;
      for (std::size_t k = 1; k < buses.size(); ++k) n += buses[k].phases.size();
      return n;
    };
    if (count() < spec.target_indices) throw ValidationError("infeasible feeder: too few buses for target_indices");
    // the highest id is always a leaf
    while (count() > spec.target_indices) {
      Bus& last = buses.back();
      const int excess = count() - spec.target_indices;
      if (last.phases.size() > excess) {
        PhaseSet kept;
        int left = last.phases.size() - excess;
        for (Phase p : kAllPhases)
          if (last.phases.contains(p) && left > 0) {
            kept.insert(p);
            --left;
          }
        last.phases = kept;
        lines.back() = make_line(lines.back().from, last.id, kept);
      } else {
        buses.pop_back();
        lines.pop_back();
      }
    }
  }

  Network net(1.0, buses, lines);

  DeviceDocument devices;
  for (const FlatEntry& e : net.flat_entries()) {
    const double lp = spec.load_scale * spec.base_load_p * uniform(0.5, 1.5);
    const double lq = spec.load_scale * spec.base_load_q * uniform(0.5, 1.5);
    devices.background.push_back({e.bus, e.phase, -lp, -lq});
    if (unit(rng) < spec.device_density) {
      devices.devices.push_back(
          {e.bus, e.phase, 0.0, 0.0, -spec.device_box, spec.device_box, -spec.device_box, spec.device_box, 1.0, 1.0});
    }
  }

  // Suggested partition: one area per lateral when laterals are requested.
  PartitionRoots roots;
  if (spec.laterals > 0) {
    const int lateral_size = remaining / spec.laterals;
    for (int r : detail::greedy_subtree_roots(net, 0, std::max(1, lateral_size))) roots.areas.push_back({r, {}});
  } else {
    const int target = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(net.bus_count())))));
    for (int r : detail::greedy_subtree_roots(net, 0, target)) roots.areas.push_back({r, {}});
  }
  if (spec.subareas_per_area > 0) {
    for (auto& a : roots.areas) a.subarea_roots = detail::pick_subarea_roots(net, a.root, spec.subareas_per_area);
  }
  PartitionHierarchy part = partition_from_roots(net, roots);
  return {std::move(net), std::move(devices), std::move(part)};
}

/// Three-phase feeder with N = n indices, a trunk of round(sqrt(n)) buses and
/// as many laterals, so the suggested partition has about sqrt(n) areas.
/// Loading is scaled by min(1, 512/n) to keep large feeders solvable.
inline FeederSpec balanced_feeder_spec(int n, int subareas, std::uint64_t seed) {
  FeederSpec s;
  const int k = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(n)))));
  s.phase_drop_prob = 0.0;
  s.target_indices = n;
  s.trunk_buses = k;
  s.laterals = k;
  s.buses = (n + 2) / 3 + 1;
  s.subareas_per_area = subareas;
  s.load_scale = std::min(1.0, 512.0 / static_cast<double>(std::max(n, 1)));
  s.seed = seed;
  return s;
}

}  // namespace mlopf
