#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace mlopf {

/// Information-flow record for the coupling engines.
///
/// Every bus has an owning party (an area, a subarea, an area remainder, the
/// unclustered set, or "global" for the flat engine). Engines log each read
/// of per-bus duals, each read of line/path data, and each consumed
/// aggregate message together with the party doing the reading.
struct AccessRecord {
  enum class Kind { dual, topology, message };
  Kind kind = Kind::dual;
  std::string consumer;
  std::vector<int> buses;   ///< per-bus duals read, or path endpoints
  std::string source;       ///< message sender (kind == message)
};

inline const char* to_string(AccessRecord::Kind k) {
  switch (k) {
    case AccessRecord::Kind::dual: return "dual";
    case AccessRecord::Kind::topology: return "topology";
    case AccessRecord::Kind::message: return "message";
  }
  return "?";
}

class AuditLog {
 public:
  void set_owner(int bus, std::string party) { owner_[bus] = std::move(party); }
  void mark_public_root(int bus) { public_roots_.insert(bus); }
  void add(AccessRecord r) { records_.push_back(std::move(r)); }

  const std::vector<AccessRecord>& records() const { return records_; }
  const std::map<int, std::string>& owners() const { return owner_; }
  const std::set<int>& public_roots() const { return public_roots_; }
  std::string owner_of(int bus) const {
    auto it = owner_.find(bus);
    return it == owner_.end() ? std::string("?") : it->second;
  }
  void clear_records() { records_.clear(); }

  /// One JSON object per line.
  void write_lines(std::ostream& os) const {
    for (const auto& r : records_) {
      nlohmann::json j{{"kind", to_string(r.kind)}, {"consumer", r.consumer}, {"buses", r.buses}};
      if (!r.source.empty()) j["source"] = r.source;
      os << j.dump() << '\n';
    }
  }

 private:
  std::map<int, std::string> owner_;
  std::set<int> public_roots_;
  std::vector<AccessRecord> records_;
};

struct AuditViolation {
  std::string consumer;
  std::string kind;
  int bus = 0;
  std::string owner;
};

struct AuditReport {
  std::size_t records = 0;
  std::size_t foreign_dual_reads = 0;
  std::size_t foreign_topology_reads = 0;
  bool global_access = false;  ///< a "global" party read per-bus data
  std::vector<AuditViolation> violations;

  bool clean() const { return foreign_dual_reads == 0 && foreign_topology_reads == 0 && !global_access; }
};

/// Checks that no party read another party's per-bus duals, and that path
/// data it read only involves its own buses or published scope roots.
inline AuditReport privacy_audit(const AuditLog& log) {
  AuditReport rep;
  rep.records = log.records().size();
  constexpr std::size_t kMaxListed = 64;
  for (const auto& r : log.records()) {
    if (r.kind == AccessRecord::Kind::message) continue;
    if (r.consumer == "global") {
      if (!r.buses.empty()) rep.global_access = true;
      continue;
    }
    for (int b : r.buses) {
      const std::string owner = log.owner_of(b);
      if (owner == r.consumer) continue;
      if (r.kind == AccessRecord::Kind::topology && log.public_roots().count(b)) continue;
      if (r.kind == AccessRecord::Kind::dual)
        ++rep.foreign_dual_reads;
      else
        ++rep.foreign_topology_reads;
      if (rep.violations.size() < kMaxListed) rep.violations.push_back({r.consumer, to_string(r.kind), b, owner});
    }
  }
  return rep;
}

}  // namespace mlopf
