#pragma once

// Test-only fixtures and brute-force oracles. Nothing here calls into
// PathOracle or the coupling engines.

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "mlopf/mlopf.hpp"

namespace mlopf::testing {

inline PhaseMatrix single_phase_z(Complex z) {
  PhaseMatrix m;
  m(Phase::a, Phase::a) = z;
  return m;
}

/// 0 - 1 - ... - k chain on phase a with the given line impedances.
inline Network make_chain(const std::vector<Complex>& z, double base = 1.0) {
  std::vector<Bus> buses{{0, PhaseSet::all(), std::nullopt}};
  std::vector<Line> lines;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    buses.push_back({id, PhaseSet{Phase::a}, id - 1});
    lines.push_back({id - 1, id, single_phase_z(z[k])});
  }
  return Network(base, buses, lines);
}

struct RandomTreeOptions {
  int buses = 20;
  double phase_drop_prob = 0.3;
  bool symmetric = true;
  double chain_prob = 0.5;
  bool mutual = true;
};

/// Random recursive tree with random per-line impedance matrices.
inline Network random_network(std::mt19937_64& rng, const RandomTreeOptions& opt) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Bus> buses{{0, PhaseSet::all(), std::nullopt}};
  std::vector<Line> lines;
  for (int id = 1; id < opt.buses; ++id) {
    int parent = 0;
    if (id > 1) parent = u(rng) < opt.chain_prob ? id - 1 : static_cast<int>(u(rng) * id);
    PhaseSet ph = buses[static_cast<std::size_t>(parent)].phases;
    if (u(rng) < opt.phase_drop_prob && ph.size() > 1) {
      PhaseSet sub;
      while (sub.empty() || sub == ph)
        sub = PhaseSet::from_mask(static_cast<std::uint8_t>((1 + static_cast<int>(u(rng) * 7)) & ph.mask()));
      ph = sub;
    }
    buses.push_back({id, ph, parent});
    Line line{parent, id, {}};
    for (Phase f : kAllPhases) {
      if (!ph.contains(f)) continue;
      for (Phase g : kAllPhases) {
        if (!ph.contains(g)) continue;
        if (f == g) {
          line.z(f, g) = {0.002 + 0.02 * u(rng), 0.004 + 0.04 * u(rng)};
        } else if (opt.mutual && (!opt.symmetric || code(f) < code(g))) {
          line.z(f, g) = {0.005 * u(rng), 0.01 * u(rng)};
          if (opt.symmetric) line.z(g, f) = line.z(f, g);
        }
      }
    }
    lines.push_back(line);
  }
  return Network(1.0, buses, lines);
}

/// E_i as a set of (parent, child) pairs, from parent pointers alone.
inline std::set<std::pair<int, int>> path_set(const Network& net, int bus) {
  std::set<std::pair<int, int>> s;
  for (int u = bus; u != 0; u = net.bus(u).parent.value()) s.insert({*net.bus(u).parent, u});
  return s;
}

/// Z^{phi psi}_{ij} by explicit path-set intersection.
inline Complex brute_z(const Network& net, int i, int j, Phase phi, Phase psi) {
  const auto a = path_set(net, i);
  const auto b = path_set(net, j);
  Complex z{};
  for (const auto& e : a) {
    if (!b.count(e)) continue;
    const Line* line = nullptr;
    for (const Line& l : net.lines())
      if (l.from == e.first && l.to == e.second) line = &l;
    const PhaseSet ph = net.bus(e.second).phases;
    if (ph.contains(phi) && ph.contains(psi)) z += line->z(phi, psi);
  }
  return z;
}

/// R and X from the entry formula and brute-force Z, term by term.
inline void brute_sensitivity(const Network& net, std::vector<double>& r, std::vector<double>& x) {
  const auto n = static_cast<std::size_t>(net.dim());
  r.assign(n * n, 0.0);
  x.assign(n * n, 0.0);
  const Complex omega = std::polar(1.0, -2.0 * std::numbers::pi / 3.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const FlatEntry ea = net.flat_entry(static_cast<int>(a));
      const FlatEntry eb = net.flat_entry(static_cast<int>(b));
      const Complex zc = std::conj(brute_z(net, ea.bus, eb.bus, ea.phase, eb.phase));
      const Complex w = zc * std::pow(omega, code(ea.phase) - code(eb.phase));
      r[a * n + b] = 2.0 * w.real();
      x[a * n + b] = -2.0 * w.imag();
    }
  }
}

/// Random valid partition: disjoint subtree roots picked in random order,
/// and random subarea roots inside each area.
inline PartitionHierarchy random_partition(std::mt19937_64& rng, const Network& net, int max_areas, int max_subareas) {
  std::vector<int> order;
  for (int b = 1; b < net.bus_count(); ++b) order.push_back(b);
  std::shuffle(order.begin(), order.end(), rng);
  auto disjoint = [&](int cand, const std::vector<int>& chosen) {
    for (int c : chosen)
      if (net.is_ancestor_or_self(c, cand) || net.is_ancestor_or_self(cand, c)) return false;
    return true;
  };
  PartitionRoots roots;
  std::vector<int> area_roots;
  for (int b : order) {
    if (static_cast<int>(area_roots.size()) >= max_areas) break;
    if (disjoint(b, area_roots)) area_roots.push_back(b);
  }
  for (int r : area_roots) {
    PartitionRoots::AreaRoots ar{r, {}};
    std::vector<int> inside = subtree_members(net, r);
    inside.erase(std::remove(inside.begin(), inside.end(), r), inside.end());
    std::shuffle(inside.begin(), inside.end(), rng);
    for (int b : inside) {
      if (static_cast<int>(ar.subarea_roots.size()) >= max_subareas) break;
      if (disjoint(b, ar.subarea_roots)) ar.subarea_roots.push_back(b);
    }
    roots.areas.push_back(std::move(ar));
  }
  return partition_from_roots(net, roots);
}

/// 36-bus three-area reference feeder addressed by
/// label: label 1 is the substation and label L is bus L - 1. Paths of
/// labels 10 and 27 share lines (1,2) and (2,4); subtrees under labels 17, 6
/// and 21 are disjoint, and 21 splits into subtrees under 22 and 25.
struct LabelledFeeder {
  Network net;
  static int id(int label) { return label - 1; }
};

inline LabelledFeeder labelled_feeder() {
  const std::map<int, int> parent{{2, 1},   {3, 2},   {4, 2},   {5, 4},   {6, 4},   {7, 6},   {8, 7},
                                  {9, 8},   {10, 9},  {11, 6},  {12, 11}, {13, 5},  {14, 13}, {15, 14},
                                  {16, 3},  {17, 16}, {18, 17}, {19, 18}, {20, 17}, {21, 15}, {22, 21},
                                  {23, 22}, {24, 23}, {25, 21}, {26, 25}, {27, 26}, {28, 27}, {29, 22},
                                  {30, 3},  {31, 30}, {32, 4},  {33, 32}, {34, 33}, {35, 19}, {36, 20}};
  const std::map<int, PhaseSet> special{{10, PhaseSet{Phase::a}}, {24, PhaseSet{Phase::b}}, {36, PhaseSet{Phase::c}}};
  std::vector<Bus> buses{{0, PhaseSet::all(), std::nullopt}};
  std::vector<Line> lines;
  for (const auto& [label, par] : parent) {
    const int id = LabelledFeeder::id(label);
    const PhaseSet ph = special.count(label) ? special.at(label) : PhaseSet::all();
    buses.push_back({id, ph, LabelledFeeder::id(par)});
    Line line{LabelledFeeder::id(par), id, {}};
    for (Phase f : kAllPhases)
      for (Phase g : kAllPhases)
        if (ph.contains(f) && ph.contains(g))
          line.z(f, g) = f == g ? Complex(0.001 * label, 0.002 * label) : Complex(0.0003 * label, 0.0006 * label);
    lines.push_back(line);
  }
  return {Network(1.0, buses, lines)};
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& e : v) e = u(rng);
  return v;
}

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

inline double inf_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

/// Flat-oracle product R'd computed from brute-force matrices.
inline std::vector<double> transpose_times(const std::vector<double>& m, const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) out[i] += m[j * n + i] * d[j];
  return out;
}

}  // namespace mlopf::testing
