#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mlopf/audit.hpp"
#include "mlopf/error.hpp"
#include "mlopf/network.hpp"
#include "mlopf/partition.hpp"
#include "mlopf/path_oracle.hpp"
#include "mlopf/sensitivity.hpp"

namespace mlopf {

// Cost model for op_count. One unit each for: a real multiply-add against a
// sensitivity entry, a complex multiply-add against a conjugated common-path
// impedance, a rotation by a power of omega, a 2Re / -2Im extraction, and an
// addition folding a dual into an aggregate.

/// Dual-weighted sensitivity sums g_p = R'(mu_up - mu_lo), g_q = X'(mu_up - mu_lo).
struct CouplingResult {
  std::vector<double> g_p;
  std::vector<double> g_q;
  std::uint64_t op_count = 0;
  /// Work attributed to each area, with the unclustered set last. Empty for
  /// the flat engine.
  std::vector<std::uint64_t> area_ops;
  std::vector<std::int64_t> area_ns;
};

enum class EngineKind { flat, bilevel, trilevel };

inline const char* to_string(EngineKind k) {
  switch (k) {
    case EngineKind::flat: return "flat";
    case EngineKind::bilevel: return "bilevel";
    case EngineKind::trilevel: return "trilevel";
  }
  return "?";
}

inline EngineKind engine_from_string(const std::string& s) {
  if (s == "flat") return EngineKind::flat;
  if (s == "bilevel") return EngineKind::bilevel;
  if (s == "trilevel") return EngineKind::trilevel;
  throw std::invalid_argument("unknown engine \"" + s + "\" (expected flat, bilevel or trilevel)");
}

class CouplingEngine {
 public:
  virtual ~CouplingEngine() = default;
  virtual EngineKind kind() const = 0;
  virtual int dim() const = 0;
  /// `diff` is mu_upper - mu_lower.
  virtual CouplingResult compute(std::span<const double> diff) = 0;

  CouplingResult compute(std::span<const double> mu_upper, std::span<const double> mu_lower) {
    const auto n = static_cast<std::size_t>(dim());
    require_size(mu_upper.size(), n, "coupling mu_upper");
    require_size(mu_lower.size(), n, "coupling mu_lower");
    std::vector<double> diff(n);
    for (std::size_t k = 0; k < n; ++k) diff[k] = mu_upper[k] - mu_lower[k];
    return compute(std::span<const double>(diff));
  }
};

// ---------------------------------------------------------------------------
// Flat engine

/// Direct dense products against the full sensitivity matrices.
class FlatEngine final : public CouplingEngine {
 public:
  /// `net` is only consulted to name buses in audit records.
  explicit FlatEngine(const SensitivityMatrices& s, AuditLog* audit = nullptr, const Network* net = nullptr)
      : s_(&s), audit_(audit), net_(net) {}

  EngineKind kind() const override { return EngineKind::flat; }
  int dim() const override { return s_->dim(); }

  using CouplingEngine::compute;
  CouplingResult compute(std::span<const double> diff) override {
    const int n = dim();
    require_size(diff.size(), static_cast<std::size_t>(n), "coupling_flat duals");
    CouplingResult out{std::vector<double>(static_cast<std::size_t>(n), 0.0), std::vector<double>(static_cast<std::size_t>(n), 0.0), 0, {}, {}};
    double* gp = out.g_p.data();
    double* gq = out.g_q.data();
    for (int j = 0; j < n; ++j) {
      const double d = diff[static_cast<std::size_t>(j)];
      const double* rr = s_->R.row(j).data();
      const double* xr = s_->X.row(j).data();
      for (int i = 0; i < n; ++i) {
        gp[i] += rr[i] * d;
        gq[i] += xr[i] * d;
      }
    }
    out.op_count = 2ull * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
    if (audit_) {
      std::vector<int> all;
      if (net_) {
        for (int b = 1; b < net_->bus_count(); ++b) all.push_back(b);
      } else {
        for (int k = 0; k < n; ++k) all.push_back(k);
      }
      audit_->add({AccessRecord::Kind::dual, "global", std::move(all), {}});
    }
    return out;
  }

 private:
  const SensitivityMatrices* s_;
  AuditLog* audit_;
  const Network* net_;
};

// ---------------------------------------------------------------------------
// Aggregate messages

/// What a scope publishes to its siblings: per-phase dual sums and its root.
struct AggregateMessage {
  std::string scope;
  int root = 0;
  PhaseSums sums{0.0, 0.0, 0.0};
};

/// Sibling contribution to every member of the scope rooted at `target_root`:
/// sum_psi omega^{psi-phi} sum_{h != target} conj(Z^{psi phi}_{root_h, target_root}) S_h^psi,
/// returned per target phase phi (complex; take 2Re for g_p and -2Im for g_q).
/// `z_to_target[h]` is the common-path matrix between message h's root and the target root.
inline std::array<Complex, 3> aggregate_term(std::span<const AggregateMessage> msgs, std::size_t target,
                                             std::span<const PhaseMatrix> z_to_target, PhaseSet target_phases,
                                             std::span<const PhaseSet> msg_phases, std::uint64_t& ops) {
  std::array<Complex, 3> out{};
  for (Phase phi : kAllPhases) {
    if (!target_phases.contains(phi)) continue;
    Complex acc{};
    for (Phase psi : kAllPhases) {
      Complex inner{};
      bool any = false;
      for (std::size_t h = 0; h < msgs.size(); ++h) {
        if (h == target || !msg_phases[h].contains(psi)) continue;
        inner += std::conj(z_to_target[h](psi, phi)) * msgs[h].sums[static_cast<std::size_t>(code(psi))];
        ++ops;
        any = true;
      }
      if (!any) continue;
      acc += rotation(psi, phi) * inner;
      ++ops;
    }
    out[static_cast<std::size_t>(code(phi))] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-level engine (bi-level and tri-level)

/// Evaluates the coupling sums through the subtree hierarchy. Any i in a
/// scope rooted at r and any j in a disjoint sibling scope rooted at s share
/// the common path of r and s, and any j outside both shares the common path
/// of j and r. So contributions from outside a scope are the same for all of
/// its members and are computed once per scope from aggregates, while only
/// pairs inside a leaf scope (or inside a remainder set) are summed exactly.
///
/// bilevel uses areas as leaves; trilevel descends into subareas where an
/// area defines them. Not safe for concurrent compute() calls on one object.
class MultiLevelEngine final : public CouplingEngine {
 public:
  MultiLevelEngine(const Network& net, const PathOracle& paths, const PartitionHierarchy& part, EngineKind kind,
                   AuditLog* audit = nullptr, int threads = 1)
      : net_(&net), kind_(kind), audit_(audit), threads_(std::max(1, threads)) {
    if (kind == EngineKind::flat) throw std::invalid_argument("MultiLevelEngine needs bilevel or trilevel");
    const ValidationReport rep = validate_partition(net, part);
    if (!rep.ok()) throw ValidationError("invalid partition: " + rep.violations.front().kind + ": " + rep.violations.front().message);
    build(paths, part);
  }

  EngineKind kind() const override { return kind_; }
  int dim() const override { return net_->dim(); }
  int area_count() const { return static_cast<int>(top_.children.size()); }

  /// Sibling-aggregate term of each area from the last compute(), per phase.
  const std::vector<std::array<Complex, 3>>& last_area_sibling_terms() const { return last_sibling_terms_; }
  /// Messages the areas published in the last compute().
  const std::vector<AggregateMessage>& last_area_messages() const { return top_.messages; }

  using CouplingEngine::compute;
  CouplingResult compute(std::span<const double> diff) override {
    const auto n = static_cast<std::size_t>(dim());
    require_size(diff.size(), n, "coupling duals");
    CouplingResult out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0, {}, {}};
    const std::size_t areas = top_.children.size();
    out.area_ops.assign(areas + 1, 0);
    out.area_ns.assign(areas + 1, 0);

    // Areas publish aggregates; each area's subtree work is independent.
    auto area_aggregate = [&](std::size_t k) {
      const auto t0 = Clock::now();
      std::uint64_t ops = 0;
      aggregate(top_.children[k], diff, ops);
      out.area_ops[k] += ops;
      out.area_ns[k] += elapsed(t0);
    };
    for_each_area(areas, area_aggregate);

    top_.messages.resize(areas);
    for (std::size_t k = 0; k < areas; ++k) {
      top_.messages[k] = {top_.children[k].label, top_.children[k].root, top_.children[k].agg};
      record_message(top_.remainder_party, top_.children[k].label);
    }

    // Outside contributions per area, computed by the coordinating party.
    last_sibling_terms_.assign(areas, {});
    std::vector<std::array<Complex, 3>> ext(areas);
    for (std::size_t k = 0; k < areas; ++k) {
      const auto t0 = Clock::now();
      std::uint64_t ops = 0;
      last_sibling_terms_[k] = sibling_term(top_, k, ops);
      const auto rem = remainder_to_child_term(top_, k, diff, ops);
      for (std::size_t f = 0; f < 3; ++f) ext[k][f] = last_sibling_terms_[k][f] + rem[f];
      out.area_ops[k] += ops;
      out.area_ns[k] += elapsed(t0);
    }

    auto area_evaluate = [&](std::size_t k) {
      const auto t0 = Clock::now();
      std::uint64_t ops = 0;
      evaluate(top_.children[k], diff, ext[k], out, ops);
      out.area_ops[k] += ops;
      out.area_ns[k] += elapsed(t0);
    };
    for_each_area(areas, area_evaluate);

    {
      const auto t0 = Clock::now();
      std::uint64_t ops = 0;
      evaluate_remainder(top_, diff, std::array<Complex, 3>{}, out, ops);
      out.area_ops[areas] += ops;
      out.area_ns[areas] += elapsed(t0);
    }
    for (auto o : out.area_ops) out.op_count += o;
    return out;
  }

 private:
  using Clock = std::chrono::steady_clock;
  static std::int64_t elapsed(Clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
  }

  /// Exact pairwise block over a set of flat indices, stored so that
  /// g(i) = sum_j block[i][j] d_j with block[i][j] = R(j, i).
  struct ExactBlock {
    std::vector<int> flat;
    std::vector<double> r;
    std::vector<double> x;
  };

  struct Node {
    std::string label;           ///< party owning the leaf block
    std::string remainder_party; ///< party owning the remainder (non-leaf)
    int root = 0;
    PhaseSet root_phases;
    bool leaf = true;
    ExactBlock block;  ///< leaf: whole scope; non-leaf: remainder only
    std::vector<int> remainder_buses;
    std::vector<Node> children;
    std::vector<PhaseSet> child_phases;
    /// child_root_z[c * m + h] = Z(root_h, root_c)
    std::vector<PhaseMatrix> child_root_z;
    /// rem_z[c][r] = Z(remainder bus r, root_c)
    std::vector<std::vector<PhaseMatrix>> rem_z;
    // scratch
    PhaseSums agg{0.0, 0.0, 0.0};
    std::vector<AggregateMessage> messages;
  };

  void for_each_area(std::size_t areas, const std::function<void(std::size_t)>& fn) {
    if (threads_ <= 1 || areas <= 1 || audit_) {
      for (std::size_t k = 0; k < areas; ++k) fn(k);
      return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads_), areas);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < areas; k += workers) fn(k);
      });
    }
    for (auto& t : pool) t.join();
  }

  // --- construction -------------------------------------------------------

  ExactBlock make_block(const PathOracle& paths, std::vector<int> buses, const std::string& party) {
    std::sort(buses.begin(), buses.end());
    ExactBlock b;
    for (int bus : buses) {
      const PhaseSet ph = net_->phases(bus);
      for (Phase p : kAllPhases)
        if (ph.contains(p)) b.flat.push_back(net_->flat_index(bus, p));
    }
    const std::size_t m = b.flat.size();
    b.r.assign(m * m, 0.0);
    b.x.assign(m * m, 0.0);
    // one path query per bus pair, shared by all phase pairs
    for (std::size_t bi = 0; bi < buses.size(); ++bi) {
      const int ib = buses[bi];
      for (std::size_t bj = 0; bj < buses.size(); ++bj) {
        const int jb = buses[bj];
        const PhaseMatrix& z = paths.common_path_matrix(jb, ib);
        for (Phase phi : kAllPhases) {
          if (!net_->phases(ib).contains(phi)) continue;
          const std::size_t li = local_index(b.flat, net_->flat_index(ib, phi));
          for (Phase psi : kAllPhases) {
            if (!net_->phases(jb).contains(psi)) continue;
            const std::size_t lj = local_index(b.flat, net_->flat_index(jb, psi));
            const Complex w = rotated_conj(z(psi, phi), psi, phi);
            b.r[li * m + lj] = 2.0 * w.real();
            b.x[li * m + lj] = -2.0 * w.imag();
          }
        }
      }
    }
    if (audit_ && !buses.empty()) audit_->add({AccessRecord::Kind::topology, party, buses, {}});
    return b;
  }

  static std::size_t local_index(const std::vector<int>& flat, int global) {
    return static_cast<std::size_t>(std::lower_bound(flat.begin(), flat.end(), global) - flat.begin());
  }

  void link_children(const PathOracle& paths, Node& node) {
    const std::size_t m = node.children.size();
    node.child_phases.clear();
    for (const Node& c : node.children) node.child_phases.push_back(c.root_phases);
    node.child_root_z.resize(m * m);
    std::vector<int> roots;
    for (std::size_t c = 0; c < m; ++c) {
      roots.push_back(node.children[c].root);
      for (std::size_t h = 0; h < m; ++h)
        node.child_root_z[c * m + h] = paths.common_path_matrix(node.children[h].root, node.children[c].root);
    }
    node.rem_z.assign(m, {});
    for (std::size_t c = 0; c < m; ++c)
      for (int r : node.remainder_buses) node.rem_z[c].push_back(paths.common_path_matrix(r, node.children[c].root));
    if (audit_) {
      audit_->add({AccessRecord::Kind::topology, node.remainder_party, roots, {}});
      for (std::size_t c = 0; c < m; ++c) {
        for (int r : node.remainder_buses)
          audit_->add({AccessRecord::Kind::topology, node.remainder_party, {r, node.children[c].root}, {}});
      }
    }
  }

  void build(const PathOracle& paths, const PartitionHierarchy& part) {
    top_.label = "unclustered";
    top_.remainder_party = "unclustered";
    top_.root = 0;
    top_.root_phases = PhaseSet::all();
    top_.leaf = false;
    top_.remainder_buses = part.unclustered;
    std::sort(top_.remainder_buses.begin(), top_.remainder_buses.end());
    for (const Area& area : part.areas) {
      Node an;
      an.label = "area:" + std::to_string(area.index);
      an.root = area.root;
      an.root_phases = net_->phases(area.root);
      const bool split = kind_ == EngineKind::trilevel && !area.subareas.empty();
      if (audit_) audit_->mark_public_root(area.root);
      if (!split) {
        an.leaf = true;
        for (int b : area.members)
          if (audit_) audit_->set_owner(b, an.label);
        an.block = make_block(paths, area.members, an.label);
      } else {
        an.leaf = false;
        an.remainder_party = an.label + "/rem";
        an.remainder_buses = area.remainder;
        std::sort(an.remainder_buses.begin(), an.remainder_buses.end());
        for (const Subarea& sub : area.subareas) {
          Node sn;
          sn.label = an.label + "/sub:" + std::to_string(sub.index);
          sn.root = sub.root;
          sn.root_phases = net_->phases(sub.root);
          sn.leaf = true;
          if (audit_) {
            audit_->mark_public_root(sub.root);
            for (int b : sub.members) audit_->set_owner(b, sn.label);
          }
          sn.block = make_block(paths, sub.members, sn.label);
          an.children.push_back(std::move(sn));
        }
        if (audit_)
          for (int b : area.remainder) audit_->set_owner(b, an.remainder_party);
        an.block = make_block(paths, an.remainder_buses, an.remainder_party);
        link_children(paths, an);
      }
      top_.children.push_back(std::move(an));
    }
    if (audit_)
      for (int b : top_.remainder_buses) audit_->set_owner(b, top_.remainder_party);
    top_.block = make_block(paths, top_.remainder_buses, top_.remainder_party);
    link_children(paths, top_);
  }

  // --- evaluation ---------------------------------------------------------

  void record_duals(const std::string& party, const ExactBlock& b) {
    if (!audit_ || b.flat.empty()) return;
    std::vector<int> buses;
    for (int f : b.flat) {
      const int bus = net_->flat_entry(f).bus;
      if (buses.empty() || buses.back() != bus) buses.push_back(bus);
    }
    audit_->add({AccessRecord::Kind::dual, party, std::move(buses), {}});
  }
  void record_message(const std::string& consumer, const std::string& source) {
    if (audit_) audit_->add({AccessRecord::Kind::message, consumer, {}, source});
  }

  PhaseSums block_sums(const ExactBlock& b, std::span<const double> diff, std::uint64_t& ops) const {
    PhaseSums s{0.0, 0.0, 0.0};
    for (int f : b.flat) s[static_cast<std::size_t>(code(net_->flat_entry(f).phase))] += diff[static_cast<std::size_t>(f)];
    ops += b.flat.size();
    return s;
  }

  /// Bottom-up per-phase dual sums; each scope sums only its own data and
  /// its children's published sums.
  void aggregate(Node& node, std::span<const double> diff, std::uint64_t& ops) {
    const std::string& party = node.leaf ? node.label : node.remainder_party;
    record_duals(party, node.block);
    node.agg = block_sums(node.block, diff, ops);
    node.messages.clear();
    for (Node& c : node.children) {
      aggregate(c, diff, ops);
      node.messages.push_back({c.label, c.root, c.agg});
      record_message(party, c.label);
      for (std::size_t f = 0; f < 3; ++f) node.agg[f] += c.agg[f];
      ops += 3;
    }
  }

  std::array<Complex, 3> sibling_term(const Node& parent, std::size_t c, std::uint64_t& ops) const {
    const std::size_t m = parent.children.size();
    std::span<const PhaseMatrix> z(parent.child_root_z.data() + c * m, m);
    return aggregate_term(parent.messages, c, z, parent.children[c].root_phases, parent.child_phases, ops);
  }

  /// sum_psi omega^{psi-phi} sum_{j in remainder} conj(Z^{psi phi}_{j, root_c}) d_j^psi
  std::array<Complex, 3> remainder_to_child_term(const Node& parent, std::size_t c, std::span<const double> diff,
                                                 std::uint64_t& ops) const {
    std::array<Complex, 3> out{};
    const PhaseSet target = parent.children[c].root_phases;
    const auto& zs = parent.rem_z[c];
    for (Phase phi : kAllPhases) {
      if (!target.contains(phi)) continue;
      Complex acc{};
      for (Phase psi : kAllPhases) {
        Complex inner{};
        bool any = false;
        for (std::size_t r = 0; r < parent.remainder_buses.size(); ++r) {
          const int bus = parent.remainder_buses[r];
          const PhaseSet ph = net_->phases(bus);
          if (!ph.contains(psi)) continue;
          inner += std::conj(zs[r](psi, phi)) * diff[static_cast<std::size_t>(net_->flat_offset(bus) + ph.rank(psi))];
          ++ops;
          any = true;
        }
        if (!any) continue;
        acc += rotation(psi, phi) * inner;
        ++ops;
      }
      out[static_cast<std::size_t>(code(phi))] = acc;
    }
    return out;
  }

  /// g over the block's own indices: exact sums plus the constant outside term.
  void apply_block(const ExactBlock& b, std::span<const double> diff, const std::array<Complex, 3>& ext,
                   CouplingResult& out, std::uint64_t& ops) const {
    const std::size_t m = b.flat.size();
    std::vector<double> local(m);
    for (std::size_t j = 0; j < m; ++j) local[j] = diff[static_cast<std::size_t>(b.flat[j])];
    for (std::size_t i = 0; i < m; ++i) {
      const double* rr = b.r.data() + i * m;
      const double* xr = b.x.data() + i * m;
      double sp = 0.0;
      double sq = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        sp += rr[j] * local[j];
        sq += xr[j] * local[j];
      }
      const auto gi = static_cast<std::size_t>(b.flat[i]);
      const Complex e = ext[static_cast<std::size_t>(code(net_->flat_entry(b.flat[i]).phase))];
      out.g_p[gi] = sp + 2.0 * e.real();
      out.g_q[gi] = sq - 2.0 * e.imag();
    }
    ops += 2 * m * m + 2 * m;
  }

  void evaluate(Node& node, std::span<const double> diff, const std::array<Complex, 3>& ext, CouplingResult& out,
                std::uint64_t& ops) {
    if (node.leaf) {
      apply_block(node.block, diff, ext, out, ops);
      return;
    }
    for (std::size_t c = 0; c < node.children.size(); ++c) {
      const auto sib = sibling_term(node, c, ops);
      const auto rem = remainder_to_child_term(node, c, diff, ops);
      std::array<Complex, 3> child_ext{};
      for (std::size_t f = 0; f < 3; ++f) child_ext[f] = ext[f] + sib[f] + rem[f];
      evaluate(node.children[c], diff, child_ext, out, ops);
    }
    evaluate_remainder(node, diff, ext, out, ops);
  }

  /// Remainder indices: exact sums within the remainder, child aggregates
  /// through Z(root_c, i), plus the inherited outside term.
  void evaluate_remainder(const Node& node, std::span<const double> diff, const std::array<Complex, 3>& ext,
                          CouplingResult& out, std::uint64_t& ops) {
    const std::size_t m = node.children.size();
    for (std::size_t c = 0; c < m; ++c) record_message(node.remainder_party, node.children[c].label);
    if (node.block.flat.empty()) return;
    const std::size_t nr = node.remainder_buses.size();
    std::vector<std::array<Complex, 3>> bus_ext(nr, ext);
    for (std::size_t r = 0; r < nr; ++r) {
      const PhaseSet target = net_->phases(node.remainder_buses[r]);
      for (Phase phi : kAllPhases) {
        if (!target.contains(phi)) continue;
        Complex acc{};
        for (Phase psi : kAllPhases) {
          Complex inner{};
          bool any = false;
          for (std::size_t c = 0; c < m; ++c) {
            if (!node.child_phases[c].contains(psi)) continue;
            inner += std::conj(node.rem_z[c][r](psi, phi)) * node.messages[c].sums[static_cast<std::size_t>(code(psi))];
            ++ops;
            any = true;
          }
          if (!any) continue;
          acc += rotation(psi, phi) * inner;
          ++ops;
        }
        bus_ext[r][static_cast<std::size_t>(code(phi))] += acc;
      }
    }
    record_duals(node.remainder_party, node.block);
    // exact remainder block with a per-bus outside term
    const ExactBlock& b = node.block;
    const std::size_t nb = b.flat.size();
    std::vector<double> local(nb);
    for (std::size_t j = 0; j < nb; ++j) local[j] = diff[static_cast<std::size_t>(b.flat[j])];
    std::size_t r = 0;
    for (std::size_t i = 0; i < nb; ++i) {
      const FlatEntry& e = net_->flat_entry(b.flat[i]);
      while (node.remainder_buses[r] != e.bus) ++r;
      const double* rr = b.r.data() + i * nb;
      const double* xr = b.x.data() + i * nb;
      double sp = 0.0;
      double sq = 0.0;
      for (std::size_t j = 0; j < nb; ++j) {
        sp += rr[j] * local[j];
        sq += xr[j] * local[j];
      }
      const Complex ev = bus_ext[r][static_cast<std::size_t>(code(e.phase))];
      out.g_p[static_cast<std::size_t>(b.flat[i])] = sp + 2.0 * ev.real();
      out.g_q[static_cast<std::size_t>(b.flat[i])] = sq - 2.0 * ev.imag();
    }
    ops += 2 * nb * nb + 2 * nb;
  }

  const Network* net_;
  EngineKind kind_;
  AuditLog* audit_;
  int threads_;
  Node top_;
  std::vector<std::array<Complex, 3>> last_sibling_terms_;
};

// ---------------------------------------------------------------------------
// One-shot entry points

inline CouplingResult coupling_flat(const SensitivityMatrices& s, std::span<const double> mu_upper,
                                    std::span<const double> mu_lower) {
  FlatEngine e(s);
  return e.compute(mu_upper, mu_lower);
}

inline CouplingResult coupling_bilevel(const Network& net, const PartitionHierarchy& part, const PathOracle& paths,
                                       std::span<const double> mu_upper, std::span<const double> mu_lower) {
  MultiLevelEngine e(net, paths, part, EngineKind::bilevel);
  return e.compute(mu_upper, mu_lower);
}

inline CouplingResult coupling_trilevel(const Network& net, const PartitionHierarchy& part, const PathOracle& paths,
                                        std::span<const double> mu_upper, std::span<const double> mu_lower) {
  MultiLevelEngine e(net, paths, part, EngineKind::trilevel);
  return e.compute(mu_upper, mu_lower);
}

/// Everything an engine might need, owned in one place.
struct EngineContext {
  const Network* net = nullptr;
  const PathOracle* paths = nullptr;
  const SensitivityMatrices* sens = nullptr;  ///< required for flat only
  const PartitionHierarchy* part = nullptr;   ///< required for bi/tri only
};

inline std::unique_ptr<CouplingEngine> make_engine(EngineKind kind, const EngineContext& ctx, AuditLog* audit = nullptr,
                                                   int threads = 1) {
  if (kind == EngineKind::flat) {
    if (!ctx.sens) throw std::invalid_argument("flat engine needs sensitivity matrices");
    return std::make_unique<FlatEngine>(*ctx.sens, audit, ctx.net);
  }
  if (!ctx.net || !ctx.paths || !ctx.part) throw std::invalid_argument("multi-level engine needs network, paths and partition");
  return std::make_unique<MultiLevelEngine>(*ctx.net, *ctx.paths, *ctx.part, kind, audit, threads);
}

}  // namespace mlopf
