#pragma once

#include <utility>
#include <vector>

#include "mlopf/network.hpp"

namespace mlopf {

/// A line identified by its (parent, child) endpoints.
using LineRef = std::pair<int, int>;

/// Path and common-path queries over a Network.
///
/// The common path of buses i and j back to the substation is the path to
/// their lowest common ancestor, so Z_ij is the cumulative impedance from the
/// root down to lca(i, j). Cumulative sums are precomputed once; each query
/// costs one ancestor walk, O(depth).
class PathOracle {
 public:
  explicit PathOracle(const Network& net) : net_(&net), cumulative_(static_cast<std::size_t>(net.bus_count())) {
    for (int u : net.preorder()) {
      if (u == 0) continue;
      PhaseMatrix acc = cumulative_[static_cast<std::size_t>(net.parent(u))];
      acc += net.line_into(u).z;
      cumulative_[static_cast<std::size_t>(u)] = acc;
    }
  }

  const Network& network() const { return *net_; }

  /// E_i ordered from the substation outward; empty for bus 0.
  std::vector<LineRef> path_to_root(int bus) const {
    std::vector<LineRef> path;
    path.reserve(static_cast<std::size_t>(net_->depth(bus)));
    for (int u = bus; u != 0; u = net_->parent(u)) path.emplace_back(net_->parent(u), u);
    return {path.rbegin(), path.rend()};
  }

  int lca(int i, int j) const {
    int di = net_->depth(i);
    int dj = net_->depth(j);
    while (di > dj) { i = net_->parent(i); --di; }
    while (dj > di) { j = net_->parent(j); --dj; }
    while (i != j) {
      i = net_->parent(i);
      j = net_->parent(j);
    }
    return i;
  }

  /// Sum of line impedance matrices over E_i (zero for the substation).
  const PhaseMatrix& cumulative(int bus) const {
    net_->bus(bus);
    return cumulative_[static_cast<std::size_t>(bus)];
  }

  /// All nine phase-pair entries of Z_ij at once.
  const PhaseMatrix& common_path_matrix(int i, int j) const { return cumulative_[static_cast<std::size_t>(lca(i, j))]; }

  /// Z^{phi psi}_{ij}; lines lacking either phase contribute zero.
  Complex common_path_impedance(int i, int j, Phase phi, Phase psi) const {
    return common_path_matrix(i, j)(phi, psi);
  }

 private:
  const Network* net_;
  std::vector<PhaseMatrix> cumulative_;
};

}  // namespace mlopf
